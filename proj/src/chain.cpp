#include "riskdep/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "riskdep/errors.hpp"
#include "riskdep/loss_model.hpp"

namespace riskdep::mcmc {
namespace {

using bayes::BayesConfig;
using bayes::ChainState;
using bayes::Dataset;

void record(SliceStats& stats, const SliceResult& r) {
  ++stats.steps;
  stats.evaluations += static_cast<std::uint64_t>(r.evaluations);
  if (r.exhausted) ++stats.exhausted;
}

class Sweeper {
 public:
  Sweeper(const Dataset& data, const BayesConfig& cfg, const ChainConfig& ccfg, bool update_lambda,
          PosteriorSamples& out)
      : data_(data), cfg_(cfg), ccfg_(ccfg), update_lambda_(update_lambda && data.years > 0), out_(out) {
    rho_slice_.width = ccfg.rho_width_fraction * cfg.rho_range.width();
    rho_slice_.lower = cfg.rho_range.lower;
    rho_slice_.upper = cfg.rho_range.upper;
    rho_slice_.max_stepout = ccfg.rho_max_stepout;
    rho_slice_.max_shrink = ccfg.rho_max_shrink;
    update_rho_ = ccfg.update_rho && cfg.family != copula::Family::Independence && cfg.dimension() >= 2;
    scale_moves_ = ccfg.scale_moves && update_lambda_;
  }

  void iterate(ChainState& s, double gamma, RngStream& rng) {
    const std::size_t cells = cfg_.dimension();
    if (ccfg_.scan == ScanOrder::RandomScanPaperFaithful) {
      const std::size_t j = rng.index(cells);
      update_theta(s, j, gamma, rng);
      if (scale_moves_) update_theta_scaled(s, j, gamma, rng);
      if (update_lambda_) {
        const std::size_t j = rng.index(cells);
        const std::size_t t = rng.index(data_.years);
        update_lambda(s, t, j, gamma, rng);
      }
    } else {
      for (std::size_t j = 0; j < cells; ++j) {
        update_theta(s, j, gamma, rng);
        if (scale_moves_) update_theta_scaled(s, j, gamma, rng);
      }
      if (update_lambda_) {
        for (std::size_t t = 0; t < data_.years; ++t) {
          for (std::size_t j = 0; j < cells; ++j) update_lambda(s, t, j, gamma, rng);
        }
      }
    }
    if (update_rho_) update_rho(s, gamma, rng);
  }

 private:
  void update_theta(ChainState& s, std::size_t j, double gamma, RngStream& rng) {
    const auto fc = bayes::log_fc_theta(j, s, data_, cfg_);
    const auto r = slice_step([&](double x) { return gamma * fc(x); }, s.theta[j], ccfg_.theta_slice, rng);
    record(out_.theta_stats, r);
    s.theta[j] = r.x;
  }

  // In (theta, eps_t = lambda_t / theta) coordinates the gamma terms contribute
  // theta^(-T gamma) and the Jacobian theta^T; at gamma = 1 they cancel,
  // leaving Poisson, expert and prior terms.
  void update_theta_scaled(ChainState& s, std::size_t j, double gamma, RngStream& rng) {
    const std::size_t cells = cfg_.dimension();
    const auto& prior = cfg_.cells[j];
    const double theta0 = s.theta[j];
    double sum_n = 0.0, sum_eps = 0.0, sum_delta = 0.0, sum_log_delta = 0.0;
    for (std::size_t t = 0; t < data_.years; ++t) {
      sum_n += static_cast<double>(data_.count(t, j));
      sum_eps += s.lambda[t * cells + j] / theta0;
    }
    for (std::size_t k = 0; k < data_.experts_count; ++k) {
      sum_delta += data_.expert(k, j);
      sum_log_delta += std::log(data_.expert(k, j));
    }
    const double kxi = static_cast<double>(data_.experts_count) * prior.xi;
    const double years = static_cast<double>(data_.years);
    const auto logf = [&](double th) {
      if (!(th > 0.0)) return -std::numeric_limits<double>::infinity();
      const double lt = std::log(th);
      const double poisson = sum_n * lt - prior.volume * th * sum_eps;
      const double experts = -kxi * lt - prior.xi * sum_delta / th;
      const double pr = (prior.prior_a - 1.0) * lt - prior.prior_b * th;
      return gamma * (poisson + experts + pr) + (1.0 - gamma) * years * lt;
    };
    // Keep every rescaled lambda inside its slice bounds.
    SliceConfig sc = ccfg_.theta_slice;
    for (std::size_t t = 0; t < data_.years; ++t) {
      const double eps = s.lambda[t * cells + j] / theta0;
      sc.lower = std::max(sc.lower, ccfg_.lambda_slice.lower / eps);
      sc.upper = std::min(sc.upper, ccfg_.lambda_slice.upper / eps);
    }
    if (!(sc.lower <= theta0 && theta0 <= sc.upper)) return;
    const auto r = slice_step(logf, theta0, sc, rng);
    record(out_.theta_stats, r);
    const double ratio = r.x / theta0;
    s.theta[j] = r.x;
    for (std::size_t t = 0; t < data_.years; ++t) s.lambda[t * cells + j] *= ratio;
  }

  void update_lambda(ChainState& s, std::size_t t, std::size_t j, double gamma, RngStream& rng) {
    const std::size_t idx = t * cfg_.dimension() + j;
    const auto fc = bayes::log_fc_lambda(t, j, s, data_, cfg_);
    const auto r = slice_step([&](double x) { return gamma * fc(x); }, s.lambda[idx], ccfg_.lambda_slice, rng);
    record(out_.lambda_stats, r);
    s.lambda[idx] = r.x;
  }

  void update_rho(ChainState& s, double gamma, RngStream& rng) {
    const auto fc = bayes::log_fc_rho(s, data_, cfg_);
    const auto r = slice_step([&](double x) { return gamma * fc(x); }, s.rho, rho_slice_, rng);
    record(out_.rho_stats, r);
    s.rho = r.x;
  }

  const Dataset& data_;
  const BayesConfig& cfg_;
  const ChainConfig& ccfg_;
  bool update_lambda_;
  bool update_rho_ = false;
  bool scale_moves_ = false;
  SliceConfig rho_slice_;
  PosteriorSamples& out_;
};

PosteriorSamples run(const Dataset& data, const BayesConfig& cfg, const ChainConfig& ccfg, ChainState state,
                     bool update_lambda, RngStream& rng) {
  data.validate();
  cfg.validate();
  ccfg.validate();
  if (data.cells != cfg.dimension()) throw ValidationError("dataset and config disagree on the number of cells");
  if (!std::isfinite(bayes::log_joint_posterior(state, data, cfg))) {
    throw ValidationError("initial state has zero posterior density");
  }

  PosteriorSamples out;
  out.cells = cfg.dimension();
  out.years = data.years;
  out.states.reserve(ccfg.iterations - ccfg.burnin);
  Sweeper sweeper(data, cfg, ccfg, update_lambda, out);

  for (std::size_t l = 1; l <= ccfg.iterations; ++l) {
    const double gamma = ccfg.tempering ? tempering_gamma(l, *ccfg.tempering) : 1.0;
    sweeper.iterate(state, gamma, rng);
    ++out.iterations_run;
    if (l > ccfg.burnin && gamma == 1.0) {
      out.states.push_back(state);
      if (!ccfg.keep_lambda) out.states.back().lambda.clear();
    }
  }
  return out;
}

}  // namespace

std::string to_string(ScanOrder s) {
  return s == ScanOrder::RandomScanPaperFaithful ? "random" : "systematic";
}

ScanOrder scan_from_string(const std::string& s) {
  if (s == "random" || s == "paper") return ScanOrder::RandomScanPaperFaithful;
  if (s == "systematic") return ScanOrder::SystematicFullScan;
  throw ValidationError("unknown scan order '" + s + "' (expected random or systematic)");
}

double tempering_gamma(std::size_t l, const TemperingConfig& t) {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(t.period);
  return std::max(std::min(std::sin(phase) + 1.0, 1.0), t.floor);
}

void ChainConfig::validate() const {
  if (iterations == 0) throw ValidationError("chain needs at least one iteration");
  if (burnin >= iterations) throw ValidationError("burnin must be smaller than the number of iterations");
  if (tempering && (tempering->period == 0 || !(tempering->floor > 0.0 && tempering->floor <= 1.0))) {
    throw ValidationError("tempering needs a positive period and a floor in (0, 1]");
  }
  theta_slice.validate();
  lambda_slice.validate();
  if (!(rho_width_fraction > 0.0)) throw ValidationError("rho slice width fraction must be positive");
}

ChainState auto_init(const Dataset& data, const BayesConfig& cfg, const ChainConfig& ccfg, RngStream& rng) {
  const std::size_t cells = cfg.dimension();
  ChainState s;
  s.theta.resize(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    s.theta[j] = std::clamp(dist::gamma_sample({cfg.cells[j].prior_a, cfg.cells[j].prior_b}, rng),
                            ccfg.theta_slice.lower, ccfg.theta_slice.upper);
  }
  s.lambda.resize(data.years * cells);
  for (std::size_t t = 0; t < data.years; ++t) {
    for (std::size_t j = 0; j < cells; ++j) {
      const auto marginal = dist::GammaParams::from_shape_mean(cfg.cells[j].alpha, s.theta[j]);
      s.lambda[t * cells + j] =
          std::clamp(dist::gamma_sample(marginal, rng), ccfg.lambda_slice.lower, ccfg.lambda_slice.upper);
    }
  }
  s.rho = ccfg.update_rho ? cfg.rho_range.midpoint() : ccfg.fixed_rho;
  return s;
}

PosteriorSamples run_chain(const Dataset& data, const BayesConfig& cfg, const ChainConfig& ccfg,
                           const std::optional<ChainState>& init, RngStream& rng) {
  ChainState state = init ? *init : auto_init(data, cfg, ccfg, rng);
  return run(data, cfg, ccfg, std::move(state), true, rng);
}

PosteriorSamples run_benchmark_chain(const Dataset& data, const BayesConfig& cfg, const ChainConfig& ccfg,
                                     const std::vector<double>& true_lambda, RngStream& rng) {
  if (true_lambda.size() != data.years * cfg.dimension()) {
    throw ValidationError("benchmark lambda matrix must be T x J");
  }
  for (double l : true_lambda) {
    if (!(l > 0.0)) throw ValidationError("benchmark lambda values must be positive");
  }
  ChainState state = auto_init(data, cfg, ccfg, rng);
  state.lambda = true_lambda;
  return run(data, cfg, ccfg, std::move(state), false, rng);
}

PosteriorSamples run_tempered_chain(const Dataset& data, const BayesConfig& cfg, const ChainConfig& ccfg,
                                    RngStream& rng) {
  if (!ccfg.tempering) throw ValidationError("tempered chain needs a tempering schedule");
  return run_chain(data, cfg, ccfg, std::nullopt, rng);
}

CoordinateSummary summarize_values(const std::string& name, const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("cannot summarize an empty sample set");
  CoordinateSummary s;
  s.name = name;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  s.q05 = loss::sorted_quantile(sorted, 0.05);
  s.q50 = loss::sorted_quantile(sorted, 0.50);
  s.q95 = loss::sorted_quantile(sorted, 0.95);
  return s;
}

std::vector<double> theta_trace(const PosteriorSamples& samples, std::size_t j) {
  std::vector<double> out;
  out.reserve(samples.states.size());
  for (const auto& s : samples.states) out.push_back(s.theta.at(j));
  return out;
}

std::vector<double> rho_trace(const PosteriorSamples& samples) {
  std::vector<double> out;
  out.reserve(samples.states.size());
  for (const auto& s : samples.states) out.push_back(s.rho);
  return out;
}

std::vector<CoordinateSummary> summarize(const PosteriorSamples& samples, bool include_rho) {
  if (samples.states.empty()) throw ValidationError("cannot summarize an empty sample set");
  std::vector<CoordinateSummary> out;
  for (std::size_t j = 0; j < samples.cells; ++j) {
    out.push_back(summarize_values("theta[" + std::to_string(j + 1) + "]", theta_trace(samples, j)));
  }
  if (include_rho) out.push_back(summarize_values("rho", rho_trace(samples)));
  return out;
}

}  // namespace riskdep::mcmc
