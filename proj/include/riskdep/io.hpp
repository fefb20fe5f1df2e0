#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "riskdep/bayes_model.hpp"
#include "riskdep/chain.hpp"
#include "riskdep/experiments.hpp"
#include "riskdep/loss_model.hpp"

namespace riskdep::io {

// %.{digits}g formatting; 17 digits round-trips a double exactly.
std::string format_number(double x, int digits);
constexpr int kSampleDigits = 17;
constexpr int kSummaryDigits = 4;

std::string read_file(const std::filesystem::path& path);
// Write to a sibling temporary file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// 64-bit FNV-1a of the file contents, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

// Minimal CSV: comma separated, no quoting, header row required.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable parse_csv(const std::string& text, const std::string& source);

// Counts: header "year,cell_1,...,cell_J", one row per year, integer entries.
std::string counts_csv(const bayes::Dataset& data);
// Fills years, cells and counts; experts are left empty.
bayes::Dataset parse_counts_csv(const std::string& text, const std::string& source);

// Experts: header "expert,cell_1,...,cell_J", one row per expert. An empty
// file (or a header alone) means K = 0.
std::string experts_csv(const bayes::Dataset& data);
void parse_experts_csv(const std::string& text, const std::string& source, bayes::Dataset& data);

// Latent intensities, same layout as counts with real entries.
std::string lambda_csv(const std::vector<double>& lambda, std::size_t years, std::size_t cells);
std::vector<double> parse_lambda_csv(const std::string& text, const std::string& source, std::size_t years,
                                     std::size_t cells);

// Retained states: "draw,theta[1],...,theta[J],rho".
std::string samples_csv(const mcmc::PosteriorSamples& samples);
mcmc::PosteriorSamples parse_samples_csv(const std::string& text, const std::string& source);

// year,cell,lambda,psi,count,loss,total; a "total" row closes each year.
std::string annual_loss_csv(const loss::AnnualLossTable& table);

std::string sweep_csv(copula::Family family, const std::vector<loss::SweepPoint>& points);

// Tables layout: one row per (family, mode, parameter), one column per year
// subset, cells formatted "mean (sd)".
std::string report_csv(const experiments::ExperimentReport& report);
std::string report_json(const experiments::ExperimentReport& report);

std::string summary_json(const std::vector<mcmc::CoordinateSummary>& summary, const mcmc::PosteriorSamples& samples,
                         std::size_t experts_count);

std::string predictive_csv(const experiments::Predictive& p);
// quantile,total_count[,total_loss]
std::string var_csv(const experiments::Predictive& p, const std::vector<double>& quantiles);

}  // namespace riskdep::io
