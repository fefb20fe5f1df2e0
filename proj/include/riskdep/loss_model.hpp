#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskdep/copulas.hpp"
#include "riskdep/rng.hpp"

namespace riskdep::loss {

// Generative parameters of one risk cell.
//   Lambda_t ~ Gamma(alpha, alpha / theta_lambda)        (frequency profile)
//   Psi_t    ~ Normal(severity_mu_psi, severity_omega_psi) (severity profile)
//   N_t      ~ Poisson(volume * Lambda_t)
//   X_s      ~ LogNormal(Psi_t, severity_sigma)
struct RiskCellParams {
  double theta_lambda = 1.0;
  double alpha = 1.0;
  double volume = 1.0;
  double severity_mu_psi = 0.0;
  double severity_omega_psi = 1.0;
  double severity_sigma = 1.0;

  // The (shape, rate) form used for annual-loss studies, theta = shape / rate.
  static RiskCellParams from_gamma_shape_rate(double shape, double rate);
  void validate() const;
};

struct ScenarioSpec {
  std::vector<RiskCellParams> cells;
  copula::CopulaSpec frequency_copula;
  copula::CopulaSpec severity_copula;
  // When set, a single 2J-dimensional copula couples (u_1..u_J, v_1..v_J) and
  // the two block copulas above are ignored.
  std::optional<copula::CopulaSpec> joint_copula;
  std::size_t years = 1;

  void validate() const;
};

struct CellYear {
  double lambda = 0.0;
  double psi = 0.0;
  std::int64_t count = 0;
  double loss = 0.0;
};

// Row-major: entry(t, j) for year t and cell j.
struct AnnualLossTable {
  std::size_t years = 0;
  std::size_t cells = 0;
  std::vector<CellYear> entries;
  std::vector<double> totals;

  const CellYear& at(std::size_t t, std::size_t j) const { return entries[t * cells + j]; }
  CellYear& at(std::size_t t, std::size_t j) { return entries[t * cells + j]; }
  std::vector<double> cell_losses(std::size_t j) const;
  std::vector<double> cell_counts(std::size_t j) const;
};

AnnualLossTable simulate_annual_losses(const ScenarioSpec& spec, RngStream& rng);

// Simulate one year given fixed uniforms for the frequency and severity profiles.
CellYear simulate_cell_year(const RiskCellParams& cell, double u_frequency, double v_severity,
                            RngStream& rng);

// Pearson correlation of average ranks.
double spearman_rank_correlation(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> x);

// Linear interpolation between closest ranks: position q * (n - 1) in the sorted sample.
double empirical_quantile(std::span<const double> samples, double q);
// Same convention, for a sample already sorted ascending.
double sorted_quantile(std::span<const double> sorted, double q);

enum class CouplingScenario { Frequency, Severity };
std::string to_string(CouplingScenario s);

struct SweepPoint {
  double rho;
  CouplingScenario scenario;
  double spearman;
};

// For each rho and each scenario, couple the two cells' frequency (or severity)
// profiles with the family at rho, simulate `years_per_point` years and record
// the Spearman correlation of the cell annual losses. Cells beyond the first
// two are ignored.
std::vector<SweepPoint> dependence_sweep(const ScenarioSpec& base, copula::Family family,
                                         std::span<const double> rho_grid, std::size_t years_per_point,
                                         RngStream& rng);

// Default grids covering each family's prior-range endpoints.
std::vector<double> default_rho_grid(copula::Family family);

}  // namespace riskdep::loss
