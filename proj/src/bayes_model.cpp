#include "riskdep/bayes_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "riskdep/errors.hpp"

namespace riskdep::bayes {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

copula::CopulaSpec copula_at(const BayesConfig& cfg, double rho) {
  return copula::CopulaSpec{cfg.family, rho, std::nullopt};
}

bool coupled(const BayesConfig& cfg) {
  return cfg.family != copula::Family::Independence && cfg.dimension() >= 2;
}

double copula_term(std::span<const double> u, const BayesConfig& cfg, double rho) {
  const auto spec = copula_at(cfg, rho);
  if (!spec.rho_in_family_range()) return -kInf;
  return copula::log_density(u, spec);
}

// G(lambda | alpha, alpha / theta).
double intensity_cdf(double lambda, double alpha, double theta) {
  return dist::gamma_cdf(lambda, dist::GammaParams::from_shape_mean(alpha, theta));
}

double gamma_mean_log_pdf(double x, double shape, double mean) {
  return dist::gamma_log_pdf(x, dist::GammaParams::from_shape_mean(shape, mean));
}

}  // namespace

RhoRange default_rho_range(copula::Family family) {
  switch (family) {
    case copula::Family::Gaussian: return {-1.0, 1.0, false};
    case copula::Family::Clayton: return {0.0, 30.0, true};
    case copula::Family::Gumbel: return {1.0, 30.0, false};
    case copula::Family::Independence: return {0.0, 0.0, false};
  }
  return {};
}

void BayesConfig::validate() const {
  if (cells.empty()) throw ValidationError("bayes config needs at least one cell");
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const auto& c = cells[j];
    if (!(c.prior_a > 0.0 && c.prior_b > 0.0 && c.alpha > 0.0 && c.xi > 0.0 && c.volume > 0.0)) {
      throw ValidationError("cell " + std::to_string(j) + ": a, b, alpha, xi and volume must be positive");
    }
  }
  if (family == copula::Family::Independence) return;
  const RhoRange valid = default_rho_range(family);
  const bool lower_ok = valid.lower_open ? (rho_range.lower > valid.lower ||
                                            (rho_range.lower == valid.lower && rho_range.lower_open))
                                         : rho_range.lower >= valid.lower;
  if (!lower_ok || rho_range.upper > valid.upper || !(rho_range.upper > rho_range.lower)) {
    throw ValidationError("copula prior range must lie within the " + std::string(copula::to_string(family)) +
                          " range");
  }
}

Dataset Dataset::first_years(std::size_t n) const {
  if (n > years) throw ValidationError("subset longer than the dataset");
  Dataset out = *this;
  out.years = n;
  out.counts.resize(n * cells);
  return out;
}

Dataset Dataset::cell(std::size_t j) const {
  if (j >= cells) throw ValidationError("cell index out of range");
  Dataset out;
  out.years = years;
  out.cells = 1;
  out.experts_count = experts_count;
  for (std::size_t t = 0; t < years; ++t) out.counts.push_back(count(t, j));
  for (std::size_t k = 0; k < experts_count; ++k) out.experts.push_back(expert(k, j));
  return out;
}

void Dataset::validate() const {
  if (cells == 0) throw ValidationError("dataset needs at least one cell");
  if (counts.size() != years * cells) throw ValidationError("counts matrix has the wrong size");
  if (experts.size() != experts_count * cells) throw ValidationError("experts matrix has the wrong size");
  for (auto n : counts) {
    if (n < 0) throw ValidationError("counts must be nonnegative");
  }
  for (double d : experts) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ValidationError("expert opinions must be positive");
  }
}

double log_rho_prior(double rho, const BayesConfig& cfg) {
  if (cfg.family == copula::Family::Independence) return 0.0;
  return cfg.rho_range.contains(rho) ? 0.0 : -kInf;
}

double log_intensity_density(std::span<const double> lambda_t, std::span<const double> theta, double rho,
                             const BayesConfig& cfg) {
  const std::size_t cells = cfg.dimension();
  double total = 0.0;
  std::vector<double> u(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    if (!(lambda_t[j] > 0.0) || !(theta[j] > 0.0)) return -kInf;
    total += gamma_mean_log_pdf(lambda_t[j], cfg.cells[j].alpha, theta[j]);
    u[j] = intensity_cdf(lambda_t[j], cfg.cells[j].alpha, theta[j]);
  }
  if (coupled(cfg)) total += copula_term(u, cfg, rho);
  return total;
}

double log_joint_posterior(const ChainState& state, const Dataset& data, const BayesConfig& cfg) {
  const std::size_t cells = cfg.dimension();
  if (state.theta.size() != cells || state.lambda.size() != data.years * cells || data.cells != cells) {
    throw ValidationError("state, dataset and config dimensions disagree");
  }
  double total = log_rho_prior(state.rho, cfg);
  if (!std::isfinite(total)) return -kInf;

  for (std::size_t j = 0; j < cells; ++j) {
    const double theta = state.theta[j];
    if (!(theta > 0.0) || !std::isfinite(theta)) return -kInf;
    const auto& c = cfg.cells[j];
    total += dist::gamma_log_pdf(theta, {c.prior_a, c.prior_b});
    for (std::size_t k = 0; k < data.experts_count; ++k) total += gamma_mean_log_pdf(data.expert(k, j), c.xi, theta);
  }
  for (std::size_t t = 0; t < data.years; ++t) {
    std::span<const double> lambda_t(state.lambda.data() + t * cells, cells);
    total += log_intensity_density(lambda_t, state.theta, state.rho, cfg);
    if (!std::isfinite(total)) return -kInf;
    for (std::size_t j = 0; j < cells; ++j) {
      total += dist::poisson_log_pmf(data.count(t, j), cfg.cells[j].volume * lambda_t[j]);
    }
  }
  return total;
}

ThetaConditional::ThetaConditional(std::size_t j, const ChainState& state, const Dataset& data,
                                   const BayesConfig& cfg)
    : j_(j), data_(data), cfg_(cfg), copula_(copula_at(cfg, state.rho)), coupled_(coupled(cfg)) {
  const std::size_t cells = cfg.dimension();
  lambda_j_.resize(data.years);
  for (std::size_t t = 0; t < data.years; ++t) {
    const double l = state.lambda_at(t, j, cells);
    lambda_j_[t] = l;
    sum_lambda_ += l;
    sum_log_lambda_ += std::log(l);
  }
  for (std::size_t k = 0; k < data.experts_count; ++k) {
    sum_experts_ += data.expert(k, j);
    sum_log_experts_ += std::log(data.expert(k, j));
  }
  if (coupled_) {
    rho_valid_ = copula_.rho_in_family_range();
    other_u_.resize(data.years * cells);
    for (std::size_t t = 0; t < data.years; ++t) {
      for (std::size_t i = 0; i < cells; ++i) {
        if (i == j) continue;
        other_u_[t * cells + i] = intensity_cdf(state.lambda_at(t, i, cells), cfg.cells[i].alpha, state.theta[i]);
      }
    }
  }
}

double ThetaConditional::operator()(double theta) const {
  if (!(theta > 0.0) || !std::isfinite(theta) || !rho_valid_) return -kInf;
  const auto& c = cfg_.cells[j_];
  const double years = static_cast<double>(data_.years);
  const double experts = static_cast<double>(data_.experts_count);

  double total = dist::gamma_log_pdf(theta, {c.prior_a, c.prior_b});
  // Gamma(alpha, alpha / theta) marginals of lambda_t^(j), theta-dependent part only
  // plus the same for Gamma(xi, xi / theta) expert terms.
  total += years * c.alpha * std::log(c.alpha / theta) - (c.alpha / theta) * sum_lambda_ +
           (c.alpha - 1.0) * sum_log_lambda_ - years * dist::log_gamma(c.alpha);
  total += experts * c.xi * std::log(c.xi / theta) - (c.xi / theta) * sum_experts_ +
           (c.xi - 1.0) * sum_log_experts_ - experts * dist::log_gamma(c.xi);
  if (!coupled_ || !std::isfinite(total)) return total;

  const std::size_t cells = cfg_.dimension();
  std::vector<double> u(cells);
  for (std::size_t t = 0; t < data_.years; ++t) {
    for (std::size_t i = 0; i < cells; ++i) u[i] = other_u_[t * cells + i];
    u[j_] = intensity_cdf(lambda_j_[t], c.alpha, theta);
    total += copula::log_density(u, copula_);
  }
  return total;
}

LambdaConditional::LambdaConditional(std::size_t t, std::size_t j, const ChainState& state, const Dataset& data,
                                     const BayesConfig& cfg)
    : j_(j),
      count_(data.count(t, j)),
      prior_(cfg.cells[j]),
      marginal_(dist::GammaParams::from_shape_mean(cfg.cells[j].alpha, state.theta[j])),
      copula_(copula_at(cfg, state.rho)),
      coupled_(coupled(cfg)) {
  if (coupled_) {
    const std::size_t cells = cfg.dimension();
    u_.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      if (i == j) continue;
      u_[i] = intensity_cdf(state.lambda_at(t, i, cells), cfg.cells[i].alpha, state.theta[i]);
    }
    rho_valid_ = copula_.rho_in_family_range();
  }
}

double LambdaConditional::operator()(double lambda) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda) || !rho_valid_) return -kInf;
  double total = dist::poisson_log_pmf(count_, prior_.volume * lambda) + dist::gamma_log_pdf(lambda, marginal_);
  if (!coupled_) return total;
  std::vector<double> u = u_;
  u[j_] = dist::gamma_cdf(lambda, marginal_);
  return total + copula::log_density(u, copula_);
}

RhoConditional::RhoConditional(const ChainState& state, const Dataset& data, const BayesConfig& cfg)
    : cfg_(cfg), cells_(cfg.dimension()) {
  if (!coupled(cfg)) return;
  u_.resize(data.years * cells_);
  for (std::size_t t = 0; t < data.years; ++t) {
    for (std::size_t j = 0; j < cells_; ++j) {
      u_[t * cells_ + j] = intensity_cdf(state.lambda_at(t, j, cells_), cfg.cells[j].alpha, state.theta[j]);
    }
  }
  if (cfg.family == copula::Family::Gaussian) {
    scores_.resize(u_.size());
    for (std::size_t i = 0; i < u_.size(); ++i) {
      scores_[i] = dist::normal_quantile(std::clamp(u_[i], copula::kBoundaryClamp, 1.0 - copula::kBoundaryClamp));
    }
  }
}

double RhoConditional::operator()(double rho) const {
  double total = log_rho_prior(rho, cfg_);
  if (!std::isfinite(total) || u_.empty()) return total;
  const auto spec = copula_at(cfg_, rho);
  if (!spec.rho_in_family_range()) return -kInf;
  const std::size_t years = u_.size() / cells_;
  for (std::size_t t = 0; t < years; ++t) {
    if (!scores_.empty()) {
      total += copula::gaussian_log_density_from_scores({scores_.data() + t * cells_, cells_}, rho);
    } else {
      total += copula::log_density({u_.data() + t * cells_, cells_}, spec);
    }
  }
  return total;
}

ThetaConditional log_fc_theta(std::size_t j, const ChainState& state, const Dataset& data, const BayesConfig& cfg) {
  return ThetaConditional(j, state, data, cfg);
}

LambdaConditional log_fc_lambda(std::size_t t, std::size_t j, const ChainState& state, const Dataset& data,
                                const BayesConfig& cfg) {
  return LambdaConditional(t, j, state, data, cfg);
}

RhoConditional log_fc_rho(const ChainState& state, const Dataset& data, const BayesConfig& cfg) {
  return RhoConditional(state, data, cfg);
}

double single_cell_log_marginal_posterior(double theta, const Dataset& data, const BayesConfig& cfg) {
  if (cfg.dimension() != 1 || data.cells != 1) throw ValidationError("single-cell posterior needs J = 1");
  if (!(theta > 0.0) || !std::isfinite(theta)) return -kInf;
  const auto& c = cfg.cells[0];
  double sum_n = 0.0;
  for (auto n : data.counts) sum_n += static_cast<double>(n);
  double sum_delta = 0.0;
  for (double d : data.experts) sum_delta += d;
  const double years = static_cast<double>(data.years);
  const double experts = static_cast<double>(data.experts_count);
  return -(years * c.alpha + sum_n) * std::log(c.alpha + theta * c.volume) +
         (c.prior_a - experts * c.xi + sum_n - 1.0) * std::log(theta) - theta * c.prior_b -
         (c.xi / theta) * sum_delta;
}

PriorMoments prior_moments(const BayesConfig& cfg, std::size_t j) {
  cfg.validate();
  if (j >= cfg.dimension()) throw ValidationError("cell index out of range");
  const auto& c = cfg.cells[j];
  const double a = c.prior_a;
  const double b = c.prior_b;
  const double inv_alpha = 1.0 / c.alpha;
  const double v = c.volume;
  PriorMoments m;
  m.theta = {a / b, a / (b * b)};
  m.lambda = {a / b, inv_alpha * a * a / (b * b) + (inv_alpha + 1.0) * a / (b * b)};
  m.count = {v * a / b, v * a / b + v * v * inv_alpha * a * a / (b * b) + v * v * (inv_alpha + 1.0) * a / (b * b)};
  return m;
}

}  // namespace riskdep::bayes
