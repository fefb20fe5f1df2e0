#pragma once

#include <cstdint>

#include "riskdep/rng.hpp"

namespace riskdep::dist {

// Gamma(shape, rate); mean = shape / rate, variance = shape / rate^2.
struct GammaParams {
  double shape;
  double rate;

  // Gamma with the given shape and mean, i.e. rate = shape / mean.
  static GammaParams from_shape_mean(double shape, double mean) { return {shape, shape / mean}; }
  double mean() const { return shape / rate; }
  void validate() const;
};

// S_alpha(beta, gamma, delta) in the Samorodnitsky-Taqqu ("1") parameterization.
// With alpha < 1, beta = 1, delta = 0 the Laplace transform is
// exp(-(gamma^alpha / cos(pi alpha / 2)) s^alpha) and the support is (0, inf).
struct StableParams {
  double alpha;
  double beta;
  double gamma;
  double delta;
  void validate() const;
};

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Lanczos (g = 7, n = 9) log-gamma for x > 0.
double log_gamma(double x);

double gamma_log_pdf(double x, const GammaParams& p);
// Regularized lower incomplete gamma P(shape, rate * x).
double gamma_cdf(double x, const GammaParams& p);
// Upper tail Q(shape, rate * x) = 1 - gamma_cdf, computed without cancellation.
double gamma_sf(double x, const GammaParams& p);
double gamma_quantile(double q, const GammaParams& p);
double gamma_sample(const GammaParams& p, RngStream& rng);

double poisson_log_pmf(std::int64_t n, double mean);
std::int64_t poisson_sample(double mean, RngStream& rng);

double normal_log_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double q);

double lognormal_sample(double mu, double sigma, RngStream& rng);

double stable_sample(const StableParams& p, RngStream& rng);

// Negative binomial marginal of N ~ Poisson(V * Lambda), Lambda ~ Gamma(alpha, alpha / theta).
double neg_binomial_log_pmf(std::int64_t n, double theta, double volume, double alpha);
double neg_binomial_pmf(std::int64_t n, double theta, double volume, double alpha);

}  // namespace riskdep::dist
