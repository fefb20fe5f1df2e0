#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "riskdep/copulas.hpp"
#include "riskdep/distributions.hpp"

namespace riskdep::bayes {

// Hyperparameters of one cell:
//   Theta ~ Gamma(a, b), Lambda_t | theta ~ Gamma(alpha, alpha / theta),
//   N_t | lambda ~ Poisson(volume * lambda), Delta_k | theta ~ Gamma(xi, xi / theta).
struct CellPrior {
  double prior_a = 1.0;
  double prior_b = 1.0;
  double alpha = 1.0;
  double xi = 1.0;
  double volume = 1.0;
};

// Support of the flat prior on the copula parameter.
struct RhoRange {
  double lower = 0.0;
  double upper = 0.0;
  bool lower_open = false;

  bool contains(double rho) const {
    return (lower_open ? rho > lower : rho >= lower) && rho <= upper;
  }
  double width() const { return upper - lower; }
  double midpoint() const { return 0.5 * (lower + upper); }
};

// [-1, 1] for Gaussian, (0, 30] for Clayton, [1, 30] for Gumbel.
RhoRange default_rho_range(copula::Family family);

struct BayesConfig {
  std::vector<CellPrior> cells;
  copula::Family family = copula::Family::Independence;
  RhoRange rho_range = default_rho_range(copula::Family::Independence);

  std::size_t dimension() const { return cells.size(); }
  void validate() const;
};

// Observed counts (T x J, row per year) and expert opinions (K x J, row per expert).
struct Dataset {
  std::size_t years = 0;
  std::size_t cells = 0;
  std::size_t experts_count = 0;
  std::vector<std::int64_t> counts;
  std::vector<double> experts;

  std::int64_t count(std::size_t t, std::size_t j) const { return counts[t * cells + j]; }
  double expert(std::size_t k, std::size_t j) const { return experts[k * cells + j]; }

  // First `years` rows of the counts; experts kept.
  Dataset first_years(std::size_t years) const;
  // Column j as a single-cell dataset.
  Dataset cell(std::size_t j) const;
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// theta (J), lambda (T x J, row per year) and the copula parameter.
struct ChainState {
  std::vector<double> theta;
  std::vector<double> lambda;
  double rho = 0.0;

  double lambda_at(std::size_t t, std::size_t j, std::size_t cells) const { return lambda[t * cells + j]; }

  bool operator==(const ChainState&) const = default;
};

// Flat prior on rho: 0 inside the configured range, -inf outside. The
// independence family ignores rho.
double log_rho_prior(double rho, const BayesConfig& cfg);

// log pi(theta, lambda_{1:T}, rho | n, delta) up to a state-independent constant.
// Out-of-support states give -inf.
double log_joint_posterior(const ChainState& state, const Dataset& data, const BayesConfig& cfg);

// Year-t intensity density: copula at G(lambda_t^(j) | theta^(j)) times the
// gamma marginals, in log-space.
double log_intensity_density(std::span<const double> lambda_t, std::span<const double> theta, double rho,
                             const BayesConfig& cfg);

// Full conditional of theta^(j), up to a constant.
class ThetaConditional {
 public:
  ThetaConditional(std::size_t j, const ChainState& state, const Dataset& data, const BayesConfig& cfg);
  double operator()(double theta) const;

 private:
  std::size_t j_;
  const Dataset& data_;
  const BayesConfig& cfg_;
  copula::CopulaSpec copula_;
  bool coupled_;
  bool rho_valid_ = true;
  std::vector<double> lambda_j_;     // lambda_t^(j), t = 1..T
  std::vector<double> other_u_;      // T x J probability transforms; column j overwritten per call
  double sum_log_lambda_ = 0.0;
  double sum_lambda_ = 0.0;
  double sum_experts_ = 0.0;
  double sum_log_experts_ = 0.0;
};

// Full conditional of lambda_t^(j), up to a constant.
class LambdaConditional {
 public:
  LambdaConditional(std::size_t t, std::size_t j, const ChainState& state, const Dataset& data,
                    const BayesConfig& cfg);
  double operator()(double lambda) const;

 private:
  std::size_t j_;
  std::int64_t count_;
  CellPrior prior_;
  dist::GammaParams marginal_;
  copula::CopulaSpec copula_;
  bool coupled_;
  bool rho_valid_ = true;
  std::vector<double> u_;  // year-t transforms; entry j overwritten per call
};

// Full conditional of the copula parameter, up to a constant.
class RhoConditional {
 public:
  RhoConditional(const ChainState& state, const Dataset& data, const BayesConfig& cfg);
  double operator()(double rho) const;

 private:
  const BayesConfig& cfg_;
  std::size_t cells_;
  std::vector<double> u_;       // T x J transforms
  std::vector<double> scores_;  // normal quantiles of u_ (gaussian family only)
};

ThetaConditional log_fc_theta(std::size_t j, const ChainState& state, const Dataset& data, const BayesConfig& cfg);
LambdaConditional log_fc_lambda(std::size_t t, std::size_t j, const ChainState& state, const Dataset& data,
                                const BayesConfig& cfg);
RhoConditional log_fc_rho(const ChainState& state, const Dataset& data, const BayesConfig& cfg);

// Closed-form single-cell marginal posterior of theta (lambda integrated out):
//   (alpha + theta V)^-(T alpha + sum n) theta^(a - K xi + sum n - 1) exp(-theta b - (xi / theta) sum delta)
double single_cell_log_marginal_posterior(double theta, const Dataset& data, const BayesConfig& cfg);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};
struct PriorMoments {
  Moments theta;
  Moments lambda;
  Moments count;
};
PriorMoments prior_moments(const BayesConfig& cfg, std::size_t j);

}  // namespace riskdep::bayes
