#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskdep/bayes_model.hpp"
#include "riskdep/chain.hpp"
#include "riskdep/copulas.hpp"
#include "riskdep/loss_model.hpp"

namespace riskdep::experiments {

// Generative truth for frequency data: per-cell theta_true with the priors'
// alpha and volume, intensities coupled by `copula`, and fixed expert opinions.
struct Truth {
  std::vector<double> theta_true;
  std::vector<double> alpha;
  std::vector<double> volume;
  std::vector<double> experts;  // K x J, row per expert
  std::size_t experts_count = 0;
  copula::CopulaSpec copula;

  std::size_t cells() const { return theta_true.size(); }
  void validate() const;
};

struct GeneratedData {
  bayes::Dataset data;
  std::vector<double> true_lambda;  // T x J

  GeneratedData first_years(std::size_t years) const;
};

GeneratedData generate_dataset(const Truth& truth, std::size_t years, RngStream& rng);

enum class Mode { Joint, Marginal, Benchmark };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct ExperimentPlan {
  std::string name;
  Truth truth;
  // Priors (a, b, alpha, xi, volume) used by the sampler; alpha and volume
  // must match the truth.
  std::vector<bayes::CellPrior> priors;
  std::vector<std::size_t> year_subsets{1, 2, 5, 10, 15, 20};
  std::size_t replicates = 10;
  std::vector<Mode> modes{Mode::Joint, Mode::Marginal, Mode::Benchmark};
  mcmc::ChainConfig chain;
  std::uint64_t seed = 20090101;
  // Estimate the copula parameter (joint mode) instead of fixing it at the truth.
  bool estimate_rho = false;
  // Copula family assumed by the joint/benchmark sampler; defaults to the truth's.
  std::optional<copula::Family> model_family;

  copula::Family sampler_family() const { return model_family.value_or(truth.copula.family); }

  std::size_t max_years() const;
  void validate() const;
};

// One reported quantity averaged over replicates.
struct ReportCell {
  Mode mode;
  copula::Family family;
  std::size_t years;
  std::string parameter;  // "theta[1]", "theta[2]", "rho"
  double mean = 0.0;      // replicate average of posterior means
  double sd = 0.0;        // replicate average of posterior sds
  std::size_t replicates = 0;
  std::uint64_t slice_exhausted = 0;
};

struct ExperimentReport {
  std::string name;
  std::vector<std::size_t> year_subsets;
  std::vector<ReportCell> cells;

  const ReportCell* find(Mode mode, copula::Family family, std::size_t years, const std::string& parameter) const;
  std::uint64_t total_exhausted() const;
  void append(const ExperimentReport& other);
};

// Replicated fixed-copula study: for each replicate a fresh dataset of
// max(year_subsets) years, then every mode on every leading-years subset.
ExperimentReport run_experiment(const ExperimentPlan& plan);

// Single-dataset study estimating theta and rho jointly across year subsets.
ExperimentReport run_joint_rho_experiment(const ExperimentPlan& plan);

// Worker count from RISKDEP_THREADS (default: hardware concurrency).
unsigned worker_threads();

struct SeverityParams {
  double mu_psi = 2.0;
  double omega_psi = 0.4;
  double sigma = 1.0;
};

struct Predictive {
  std::size_t draws = 0;
  std::size_t cells = 0;
  std::vector<std::int64_t> counts;  // draws x J
  std::vector<double> total_counts;  // per draw
  std::vector<double> losses;        // draws x J, empty without severities
  std::vector<double> total_losses;  // per draw, empty without severities
};

// Next-year predictive: for draw l take a retained posterior state, sample the
// intensity vector from the copula at that state's rho, then counts (and
// losses when severities are given). Requesting more draws than retained
// states requires `resample`.
Predictive sample_full_predictive(const mcmc::PosteriorSamples& samples, const bayes::BayesConfig& cfg,
                                  const std::optional<std::vector<SeverityParams>>& severities,
                                  std::size_t draws, bool resample, RngStream& rng);

// Fixtures: "example1", "example2", "table5". paper_scale uses 20 replicates
// and 50k/10k iterations (150k/20k for table5); desk scale 10 replicates and 20k/4k
// (50k/10k for table5).
std::vector<ExperimentPlan> fixture_plans(const std::string& fixture, bool paper_scale, std::uint64_t seed);

}  // namespace riskdep::experiments
