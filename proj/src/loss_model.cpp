#include "riskdep/loss_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskdep/distributions.hpp"
#include "riskdep/errors.hpp"

namespace riskdep::loss {

RiskCellParams RiskCellParams::from_gamma_shape_rate(double shape, double rate) {
  RiskCellParams p;
  p.alpha = shape;
  p.theta_lambda = shape / rate;
  return p;
}

void RiskCellParams::validate() const {
  // Zero gives a degenerate cell that never produces events.
  if (!(theta_lambda >= 0.0) || !std::isfinite(theta_lambda)) throw ValidationError("theta_lambda must be non-negative");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
  if (!(volume > 0.0) || !std::isfinite(volume)) throw ValidationError("volume must be positive");
  if (!std::isfinite(severity_mu_psi)) throw ValidationError("severity_mu_psi must be finite");
  if (!(severity_omega_psi > 0.0)) throw ValidationError("severity_omega_psi must be positive");
  if (!(severity_sigma > 0.0)) throw ValidationError("severity_sigma must be positive");
}

void ScenarioSpec::validate() const {
  if (cells.empty()) throw ValidationError("scenario needs at least one cell");
  for (const auto& c : cells) c.validate();
  if (years == 0) throw ValidationError("years must be positive");
  if (joint_copula) {
    joint_copula->validate();
    if (joint_copula->corr_matrix &&
        static_cast<std::size_t>(joint_copula->corr_matrix->rows()) != 2 * cells.size()) {
      throw ValidationError("joint copula dimension must equal twice the number of cells");
    }
    return;
  }
  frequency_copula.validate();
  severity_copula.validate();
  for (const auto* c : {&frequency_copula, &severity_copula}) {
    if (c->corr_matrix && static_cast<std::size_t>(c->corr_matrix->rows()) != cells.size()) {
      throw ValidationError("copula dimension does not match the number of cells");
    }
    if (cells.size() == 1 && c->family != copula::Family::Independence) {
      throw ValidationError("a dependence copula needs at least two cells");
    }
  }
}

std::vector<double> AnnualLossTable::cell_losses(std::size_t j) const {
  std::vector<double> out(years);
  for (std::size_t t = 0; t < years; ++t) out[t] = at(t, j).loss;
  return out;
}

std::vector<double> AnnualLossTable::cell_counts(std::size_t j) const {
  std::vector<double> out(years);
  for (std::size_t t = 0; t < years; ++t) out[t] = static_cast<double>(at(t, j).count);
  return out;
}

CellYear simulate_cell_year(const RiskCellParams& cell, double u_frequency, double v_severity,
                            RngStream& rng) {
  CellYear y;
  if (cell.theta_lambda > 0.0) {
    y.lambda = dist::gamma_quantile(u_frequency, dist::GammaParams::from_shape_mean(cell.alpha, cell.theta_lambda));
  }
  y.psi = cell.severity_mu_psi + cell.severity_omega_psi * dist::normal_quantile(v_severity);
  const double mean = cell.volume * y.lambda;
  y.count = mean > 0.0 ? dist::poisson_sample(mean, rng) : 0;
  for (std::int64_t s = 0; s < y.count; ++s) y.loss += dist::lognormal_sample(y.psi, cell.severity_sigma, rng);
  return y;
}

namespace {

void sample_block(const copula::CopulaSpec& spec, std::span<double> out, RngStream& rng) {
  if (out.size() == 1 || spec.family == copula::Family::Independence) {
    for (double& u : out) u = rng.uniform_open();
    return;
  }
  copula::sample_into(spec, out, rng);
}

}  // namespace

AnnualLossTable simulate_annual_losses(const ScenarioSpec& spec, RngStream& rng) {
  spec.validate();
  const std::size_t j_count = spec.cells.size();
  AnnualLossTable table;
  table.years = spec.years;
  table.cells = j_count;
  table.entries.resize(spec.years * j_count);
  table.totals.assign(spec.years, 0.0);

  std::vector<double> uv(2 * j_count);
  std::span<double> u(uv.data(), j_count);
  std::span<double> v(uv.data() + j_count, j_count);
  for (std::size_t t = 0; t < spec.years; ++t) {
    if (spec.joint_copula) {
      copula::sample_into(*spec.joint_copula, uv, rng);
    } else {
      sample_block(spec.frequency_copula, u, rng);
      sample_block(spec.severity_copula, v, rng);
    }
    for (std::size_t j = 0; j < j_count; ++j) {
      table.at(t, j) = simulate_cell_year(spec.cells[j], u[j], v[j], rng);
      table.totals[t] += table.at(t, j).loss;
    }
  }
  return table;
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t k = i + 1;
    while (k < n && x[order[k]] == x[order[i]]) ++k;
    const double avg = 0.5 * static_cast<double>(i + k - 1) + 1.0;
    for (std::size_t m = i; m < k; ++m) ranks[order[m]] = avg;
    i = k;
  }
  return ranks;
}

double spearman_rank_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("spearman inputs must have equal length");
  if (x.size() < 2) throw ValidationError("spearman needs at least two observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("spearman undefined for constant input (zero rank variance)");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double empirical_quantile(std::span<const double> samples, double q) {
  if (samples.empty()) throw ValidationError("quantile of an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted_quantile(sorted, q);
}

std::string to_string(CouplingScenario s) {
  return s == CouplingScenario::Frequency ? "freq" : "sev";
}

std::vector<double> default_rho_grid(copula::Family family) {
  switch (family) {
    case copula::Family::Gaussian:
      return {-0.99, -0.9, -0.7, -0.5, -0.3, -0.1, 0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99};
    case copula::Family::Clayton:
      return {0.01, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0};
    case copula::Family::Gumbel:
      return {1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0};
    case copula::Family::Independence:
      return {0.0};
  }
  return {};
}

std::vector<SweepPoint> dependence_sweep(const ScenarioSpec& base, copula::Family family,
                                         std::span<const double> rho_grid, std::size_t years_per_point,
                                         RngStream& rng) {
  if (base.cells.size() < 2) throw ValidationError("dependence sweep needs two cells");
  if (years_per_point < 2) throw ValidationError("dependence sweep needs at least two years per point");
  for (std::size_t i = 0; i < rho_grid.size(); ++i) {
    const copula::CopulaSpec probe{family, rho_grid[i], std::nullopt};
    if (!probe.rho_in_family_range()) {
      throw ValidationError("rho grid entry " + std::to_string(i) + " (" + std::to_string(rho_grid[i]) +
                            ") outside the " + std::string(copula::to_string(family)) + " range");
    }
  }

  std::vector<SweepPoint> out;
  ScenarioSpec spec = base;
  spec.cells.resize(2);
  spec.years = years_per_point;
  spec.joint_copula.reset();
  for (std::size_t i = 0; i < rho_grid.size(); ++i) {
    for (auto scenario : {CouplingScenario::Frequency, CouplingScenario::Severity}) {
      const copula::CopulaSpec coupled{family, rho_grid[i], std::nullopt};
      spec.frequency_copula = scenario == CouplingScenario::Frequency ? coupled : copula::CopulaSpec{};
      spec.severity_copula = scenario == CouplingScenario::Severity ? coupled : copula::CopulaSpec{};
      RngStream point_rng = rng.split(2 * i + (scenario == CouplingScenario::Severity ? 1 : 0));
      const auto table = simulate_annual_losses(spec, point_rng);
      const auto z1 = table.cell_losses(0);
      const auto z2 = table.cell_losses(1);
      out.push_back({rho_grid[i], scenario, spearman_rank_correlation(z1, z2)});
    }
  }
  return out;
}

}  // namespace riskdep::loss
