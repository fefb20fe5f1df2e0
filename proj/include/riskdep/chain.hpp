#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskdep/bayes_model.hpp"
#include "riskdep/rng.hpp"
#include "riskdep/slice.hpp"

namespace riskdep::mcmc {

enum class ScanOrder {
  // Each iteration: one random theta^(j), one random lambda_t^(j), then rho.
  RandomScanPaperFaithful,
  // Each iteration: every theta^(j), every lambda_t^(j), then rho.
  SystematicFullScan,
};

std::string to_string(ScanOrder s);
ScanOrder scan_from_string(const std::string& s);

// Iteration l targets pi^gamma_l with gamma_l = max(min(sin(2 pi l / period) + 1, 1), floor).
struct TemperingConfig {
  std::size_t period = 1000;
  double floor = 1e-3;
};

double tempering_gamma(std::size_t l, const TemperingConfig& t);

struct ChainConfig {
  std::size_t iterations = 20000;
  std::size_t burnin = 4000;
  ScanOrder scan = ScanOrder::RandomScanPaperFaithful;
  std::optional<TemperingConfig> tempering;
  std::uint64_t seed = 1;

  // Update the copula parameter; otherwise it stays at `fixed_rho`.
  bool update_rho = false;
  double fixed_rho = 0.0;
  // Retained states carry lambda only when set.
  bool keep_lambda = true;
  // After each theta^(j) update, a second slice update of theta^(j) that
  // rescales lambda_{1:T}^(j) with it (lambda / theta held fixed). The copula
  // arguments do not move, so strongly coupled chains mix much faster.
  bool scale_moves = false;

  SliceConfig theta_slice{};
  SliceConfig lambda_slice{};
  // Width as a fraction of the copula prior range; bounds are the range itself.
  double rho_width_fraction = 0.1;
  int rho_max_stepout = 50;
  int rho_max_shrink = 100;

  void validate() const;
};

struct SliceStats {
  std::uint64_t steps = 0;
  std::uint64_t evaluations = 0;
  std::uint64_t exhausted = 0;
};

struct PosteriorSamples {
  std::vector<bayes::ChainState> states;
  SliceStats theta_stats;
  SliceStats lambda_stats;
  SliceStats rho_stats;
  std::size_t iterations_run = 0;
  std::size_t cells = 0;
  std::size_t years = 0;

  std::uint64_t total_exhausted() const {
    return theta_stats.exhausted + lambda_stats.exhausted + rho_stats.exhausted;
  }
  std::uint64_t total_steps() const { return theta_stats.steps + lambda_stats.steps + rho_stats.steps; }
};

// Draws theta from its prior, lambda from Gamma(alpha, alpha / theta) and sets
// rho to the prior-range midpoint (when updated) or the fixed value.
bayes::ChainState auto_init(const bayes::Dataset& data, const bayes::BayesConfig& cfg, const ChainConfig& ccfg,
                            RngStream& rng);

// Slice-within-Gibbs sampler over (theta, lambda_{1:T}, rho). When ccfg.tempering
// is set, iteration l targets the tempered posterior and only gamma_l = 1
// states after burn-in are retained.
PosteriorSamples run_chain(const bayes::Dataset& data, const bayes::BayesConfig& cfg, const ChainConfig& ccfg,
                           const std::optional<bayes::ChainState>& init, RngStream& rng);

// As run_chain with lambda held at `true_lambda` (T x J, row per year).
PosteriorSamples run_benchmark_chain(const bayes::Dataset& data, const bayes::BayesConfig& cfg,
                                     const ChainConfig& ccfg, const std::vector<double>& true_lambda,
                                     RngStream& rng);

// run_chain with tempering required.
PosteriorSamples run_tempered_chain(const bayes::Dataset& data, const bayes::BayesConfig& cfg,
                                    const ChainConfig& ccfg, RngStream& rng);

struct CoordinateSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

// Per-coordinate statistics for theta[j] (and rho when `include_rho`).
std::vector<CoordinateSummary> summarize(const PosteriorSamples& samples, bool include_rho = true);
CoordinateSummary summarize_values(const std::string& name, const std::vector<double>& values);

std::vector<double> theta_trace(const PosteriorSamples& samples, std::size_t j);
std::vector<double> rho_trace(const PosteriorSamples& samples);

}  // namespace riskdep::mcmc
