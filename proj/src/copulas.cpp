#include "riskdep/copulas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "riskdep/distributions.hpp"
#include "riskdep/errors.hpp"

namespace riskdep::copula {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_unit(double u) {
  return std::clamp(u, kBoundaryClamp, 1.0 - kBoundaryClamp);
}

// Keeps sampled coordinates strictly inside (0, 1) after floating-point rounding.
double open_unit(double u) {
  if (!(u > 0.0)) return std::numeric_limits<double>::min();
  if (!(u < 1.0)) return std::nextafter(1.0, 0.0);
  return u;
}

double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double gaussian_exchangeable_log_density(std::span<const double> u, double rho) {
  std::vector<double> x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) x[i] = dist::normal_quantile(u[i]);
  return gaussian_log_density_from_scores(x, rho);
}

double gaussian_matrix_log_density(std::span<const double> u, const Eigen::MatrixXd& corr) {
  const auto d = static_cast<Eigen::Index>(u.size());
  if (corr.rows() != d || corr.cols() != d) {
    throw ValidationError("gaussian correlation matrix dimension does not match u");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) return -kInf;
  Eigen::VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = dist::normal_quantile(u[static_cast<std::size_t>(i)]);
  const Eigen::VectorXd z = llt.matrixL().solve(x);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * log_det - 0.5 * (z.squaredNorm() - x.squaredNorm());
}

double clayton_log_density(std::span<const double> u, double rho) {
  const double d = static_cast<double>(u.size());
  // 1 - d + sum u^-rho, accumulated as 1 + sum (u^-rho - 1).
  double base = 1.0;
  double tail = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double lu = std::log(u[i]);
    base += std::expm1(-rho * lu);
    tail += (-rho - 1.0) * lu + std::log(static_cast<double>(i) * rho + 1.0);
  }
  return (-d - 1.0 / rho) * std::log(base) + tail;
}

double gumbel_bivariate_log_density(double u1, double u2, double rho) {
  const double l1 = -std::log(u1);
  const double l2 = -std::log(u2);
  const double s = std::pow(l1, rho) + std::pow(l2, rho);
  const double s_root = std::pow(s, 1.0 / rho);
  return -s_root + l1 + l2 + 2.0 * (1.0 / rho - 1.0) * std::log(s) +
         (rho - 1.0) * (std::log(l1) + std::log(l2)) + std::log1p((rho - 1.0) / s_root);
}

// General-d Gumbel density through derivatives of the generator inverse
// psi(s) = exp(-s^a), a = 1/rho:
//   (-1)^d psi^(d)(s) = exp(-s^a) s^-d sum_k coef[d][k] s^(k a)
// with coef[n+1][k+1] += a coef[n][k] and coef[n+1][k] += (n - k a) coef[n][k].
double gumbel_general_log_density(std::span<const double> u, double rho) {
  const std::size_t d = u.size();
  const double a = 1.0 / rho;
  std::vector<double> coef(d + 1, 0.0), next(d + 1, 0.0);
  coef[0] = 1.0;
  for (std::size_t n = 0; n < d; ++n) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
      if (coef[k] == 0.0) continue;
      next[k + 1] += a * coef[k];
      next[k] += (static_cast<double>(n) - static_cast<double>(k) * a) * coef[k];
    }
    coef.swap(next);
  }
  double s = 0.0;
  double phi_terms = 0.0;
  for (double ui : u) {
    const double l = -std::log(ui);
    s += std::pow(l, rho);
    phi_terms += std::log(rho) + (rho - 1.0) * std::log(l) + l;
  }
  const double log_s = std::log(s);
  std::vector<double> terms;
  terms.reserve(d);
  for (std::size_t k = 1; k <= d; ++k) {
    if (coef[k] > 0.0) terms.push_back(std::log(coef[k]) + static_cast<double>(k) * a * log_s);
  }
  return -std::exp(a * log_s) - static_cast<double>(d) * log_s + log_sum_exp(terms) + phi_terms;
}

}  // namespace

double gaussian_log_density_from_scores(std::span<const double> x, double rho) {
  const double d = static_cast<double>(x.size());
  const double denom = 1.0 + (d - 1.0) * rho;
  if (!(rho < 1.0) || !(denom > 0.0)) return -kInf;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double xi : x) {
    sum += xi;
    sum_sq += xi * xi;
  }
  // x' (Sigma^-1 - I) x with Sigma = (1 - rho) I + rho 11'.
  const double quad = (sum_sq - rho * sum * sum / denom) / (1.0 - rho) - sum_sq;
  const double log_det = (d - 1.0) * std::log1p(-rho) + std::log(denom);
  return -0.5 * log_det - 0.5 * quad;
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Independence: return "independence";
    case Family::Gaussian: return "gaussian";
    case Family::Clayton: return "clayton";
    case Family::Gumbel: return "gumbel";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  if (name == "independence" || name == "independent") return Family::Independence;
  if (name == "gaussian") return Family::Gaussian;
  if (name == "clayton") return Family::Clayton;
  if (name == "gumbel") return Family::Gumbel;
  throw ValidationError("unknown copula family '" + std::string(name) + "'");
}

bool CopulaSpec::rho_in_family_range() const {
  switch (family) {
    case Family::Independence: return true;
    case Family::Gaussian: return corr_matrix.has_value() || (rho > -1.0 && rho < 1.0);
    case Family::Clayton: return rho > 0.0 && std::isfinite(rho);
    case Family::Gumbel: return rho >= 1.0 && std::isfinite(rho);
  }
  return false;
}

void CopulaSpec::validate() const {
  if (!rho_in_family_range()) {
    throw ValidationError("copula parameter " + std::to_string(rho) + " outside the " +
                          std::string(to_string(family)) + " range");
  }
  if (corr_matrix) {
    const auto& m = *corr_matrix;
    if (family != Family::Gaussian) throw ValidationError("correlation matrix given for a non-gaussian copula");
    if (m.rows() != m.cols()) throw ValidationError("correlation matrix must be square");
    if (!m.isApprox(m.transpose(), 1e-12)) throw ValidationError("correlation matrix must be symmetric");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (std::abs(m(i, i) - 1.0) > 1e-12) throw ValidationError("correlation matrix needs a unit diagonal");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw ValidationError("correlation matrix is not positive definite");
  }
}

double log_density(std::span<const double> u, const CopulaSpec& spec, BoundaryPolicy policy) {
  if (u.size() < 2) throw ValidationError("copula density needs dimension >= 2");
  if (!spec.rho_in_family_range()) {
    throw ValidationError("copula parameter outside the " + std::string(to_string(spec.family)) + " range");
  }
  if (spec.family == Family::Independence) return 0.0;

  std::vector<double> v(u.begin(), u.end());
  for (double& ui : v) {
    if (!(ui > 0.0 && ui < 1.0) && policy == BoundaryPolicy::Error) {
      throw ValidationError("copula argument on or outside the unit-interval boundary");
    }
    ui = clamp_unit(ui);
  }

  switch (spec.family) {
    case Family::Gaussian:
      if (spec.corr_matrix) return gaussian_matrix_log_density(v, *spec.corr_matrix);
      if (spec.rho == 0.0) return 0.0;
      return gaussian_exchangeable_log_density(v, spec.rho);
    case Family::Clayton:
      return clayton_log_density(v, spec.rho);
    case Family::Gumbel:
      if (spec.rho == 1.0) return 0.0;
      if (v.size() == 2) return gumbel_bivariate_log_density(v[0], v[1], spec.rho);
      return gumbel_general_log_density(v, spec.rho);
    case Family::Independence:
      break;
  }
  return 0.0;
}

double cdf(std::span<const double> u, const CopulaSpec& spec) {
  spec.validate();
  for (double ui : u) {
    if (ui <= 0.0) return 0.0;
  }
  switch (spec.family) {
    case Family::Independence: {
      double p = 1.0;
      for (double ui : u) p *= std::min(ui, 1.0);
      return p;
    }
    case Family::Clayton: {
      double s = 0.0;
      for (double ui : u) s += generator(Family::Clayton, std::min(ui, 1.0), spec.rho);
      return generator_inverse(Family::Clayton, s, spec.rho);
    }
    case Family::Gumbel: {
      double s = 0.0;
      for (double ui : u) s += generator(Family::Gumbel, std::min(ui, 1.0), spec.rho);
      return generator_inverse(Family::Gumbel, s, spec.rho);
    }
    case Family::Gaussian:
      break;
  }
  throw ValidationError("closed-form CDF is only available for independence, clayton and gumbel");
}

double generator(Family family, double t, double rho) {
  if (!(t > 0.0 && t <= 1.0)) throw ValidationError("generator argument must lie in (0, 1]");
  switch (family) {
    case Family::Clayton:
      if (!(rho > 0.0)) throw ValidationError("clayton rho must be positive");
      return std::expm1(-rho * std::log(t));
    case Family::Gumbel:
      if (!(rho >= 1.0)) throw ValidationError("gumbel rho must be >= 1");
      return std::pow(-std::log(t), rho);
    default:
      throw ValidationError("generator is defined for archimedean families only");
  }
}

double generator_inverse(Family family, double s, double rho) {
  if (!(s >= 0.0)) throw ValidationError("generator inverse argument must be nonnegative");
  switch (family) {
    case Family::Clayton:
      if (!(rho > 0.0)) throw ValidationError("clayton rho must be positive");
      return std::exp(-std::log1p(s) / rho);
    case Family::Gumbel:
      if (!(rho >= 1.0)) throw ValidationError("gumbel rho must be >= 1");
      return std::exp(-std::pow(s, 1.0 / rho));
    default:
      throw ValidationError("generator is defined for archimedean families only");
  }
}

Eigen::MatrixXd exchangeable_correlation(std::size_t d, double rho) {
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, rho);
  m.diagonal().setOnes();
  return m;
}

void sample_into(const CopulaSpec& spec, std::span<double> out, RngStream& rng) {
  const std::size_t d = out.size();
  if (d < 2) throw ValidationError("copula sampling needs dimension >= 2");
  spec.validate();

  switch (spec.family) {
    case Family::Independence:
      for (double& u : out) u = rng.uniform_open();
      return;

    case Family::Gaussian: {
      if (!spec.corr_matrix && d == 2) {
        const double z1 = rng.standard_normal();
        const double z2 = rng.standard_normal();
        out[0] = open_unit(dist::normal_cdf(z1));
        out[1] = open_unit(dist::normal_cdf(spec.rho * z1 + std::sqrt(1.0 - spec.rho * spec.rho) * z2));
        return;
      }
      const Eigen::MatrixXd corr = spec.corr_matrix ? *spec.corr_matrix : exchangeable_correlation(d, spec.rho);
      if (static_cast<std::size_t>(corr.rows()) != d) {
        throw ValidationError("correlation matrix dimension does not match the requested dimension");
      }
      Eigen::LLT<Eigen::MatrixXd> llt(corr);
      if (llt.info() != Eigen::Success) throw ValidationError("correlation matrix is not positive definite");
      Eigen::VectorXd z(static_cast<Eigen::Index>(d));
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.standard_normal();
      const Eigen::VectorXd x = llt.matrixL() * z;
      for (std::size_t i = 0; i < d; ++i) out[i] = open_unit(dist::normal_cdf(x[static_cast<Eigen::Index>(i)]));
      return;
    }

    case Family::Clayton: {
      const double y = dist::gamma_sample({1.0 / spec.rho, 1.0}, rng);
      for (double& u : out) {
        const double s = -std::log(rng.uniform_open()) / y;
        u = open_unit(generator_inverse(Family::Clayton, s, spec.rho));
      }
      return;
    }

    case Family::Gumbel: {
      if (spec.rho == 1.0) {
        for (double& u : out) u = rng.uniform_open();
        return;
      }
      const double alpha = 1.0 / spec.rho;
      const dist::StableParams frailty{alpha, 1.0,
                                       std::pow(std::cos(0.5 * std::numbers::pi / spec.rho), spec.rho), 0.0};
      const double y = dist::stable_sample(frailty, rng);
      for (double& u : out) {
        const double s = -std::log(rng.uniform_open()) / y;
        u = open_unit(generator_inverse(Family::Gumbel, s, spec.rho));
      }
      return;
    }
  }
}

std::vector<double> sample(const CopulaSpec& spec, std::size_t d, RngStream& rng) {
  std::vector<double> out(d);
  sample_into(spec, out, rng);
  return out;
}

FactorDraw one_factor_gaussian_profiles(std::span<const double> loadings,
                                        std::span<const QuantileFn> marginal_quantiles,
                                        RngStream& rng) {
  if (loadings.size() != marginal_quantiles.size()) {
    throw ValidationError("one loading per marginal quantile function is required");
  }
  for (double l : loadings) {
    if (!(l >= -1.0 && l <= 1.0)) throw ValidationError("factor loadings must lie in [-1, 1]");
  }
  FactorDraw draw;
  draw.latent.resize(loadings.size());
  draw.values.resize(loadings.size());
  const double omega = rng.standard_normal();
  for (std::size_t i = 0; i < loadings.size(); ++i) {
    const double l = loadings[i];
    draw.latent[i] = l * omega + std::sqrt(1.0 - l * l) * rng.standard_normal();
    draw.values[i] = marginal_quantiles[i](open_unit(dist::normal_cdf(draw.latent[i])));
  }
  return draw;
}

}  // namespace riskdep::copula
