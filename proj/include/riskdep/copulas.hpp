#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "riskdep/rng.hpp"

namespace riskdep::copula {

enum class Family { Independence, Gaussian, Clayton, Gumbel };

std::string_view to_string(Family f);
Family family_from_string(std::string_view name);

// Family tag plus dependence parameter. A scalar Gaussian rho means an
// exchangeable correlation matrix (every off-diagonal equal to rho).
struct CopulaSpec {
  Family family = Family::Independence;
  double rho = 0.0;
  std::optional<Eigen::MatrixXd> corr_matrix;

  static CopulaSpec independence() { return {}; }
  static CopulaSpec gaussian(double rho) { return {Family::Gaussian, rho, std::nullopt}; }
  static CopulaSpec clayton(double rho) { return {Family::Clayton, rho, std::nullopt}; }
  static CopulaSpec gumbel(double rho) { return {Family::Gumbel, rho, std::nullopt}; }

  // Throws ValidationError when rho (or the matrix) is outside the family range.
  void validate() const;
  bool rho_in_family_range() const;
};

// Interior clamp applied to density arguments by default.
constexpr double kBoundaryClamp = 1e-12;

enum class BoundaryPolicy { Clamp, Error };

// log c(u | spec). Returns -inf when a Gaussian exchangeable matrix is not
// positive definite for this dimension.
double log_density(std::span<const double> u, const CopulaSpec& spec,
                   BoundaryPolicy policy = BoundaryPolicy::Clamp);

// Exchangeable Gaussian copula log-density given normal scores x_i = F_N^-1(u_i).
// Returns -inf when the correlation matrix is not positive definite.
double gaussian_log_density_from_scores(std::span<const double> x, double rho);

// Copula CDF C(u); used by tests and finite-difference checks.
double cdf(std::span<const double> u, const CopulaSpec& spec);

// Draw a d-variate point with uniform marginals and the given copula.
std::vector<double> sample(const CopulaSpec& spec, std::size_t d, RngStream& rng);
void sample_into(const CopulaSpec& spec, std::span<double> out, RngStream& rng);

// Archimedean generator phi(t) and its inverse for Clayton / Gumbel.
double generator(Family family, double t, double rho);
double generator_inverse(Family family, double s, double rho);

// One-common-factor Gaussian construction:
//   Y_i = loading_i * Omega + sqrt(1 - loading_i^2) * W_i
// and value_i = marginal_quantiles[i](normal_cdf(Y_i)).
struct FactorDraw {
  std::vector<double> latent;  // Y_i
  std::vector<double> values;  // mapped through the marginal quantiles
};
using QuantileFn = std::function<double(double)>;
FactorDraw one_factor_gaussian_profiles(std::span<const double> loadings,
                                        std::span<const QuantileFn> marginal_quantiles,
                                        RngStream& rng);

// Exchangeable correlation matrix of size d.
Eigen::MatrixXd exchangeable_correlation(std::size_t d, double rho);

}  // namespace riskdep::copula
