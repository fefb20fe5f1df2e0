#include "riskdep/distributions.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "riskdep/errors.hpp"

namespace riskdep::dist {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

// Series expansion of P(a, x); valid and fast for x < a + 1.
double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(a * std::log(x) - x - log_gamma(a));
}

// Modified Lentz continued fraction for Q(a, x); used for x >= a + 1.
double upper_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(a * std::log(x) - x - log_gamma(a)) * h;
}

double reg_lower(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x == kInf) return 1.0;
  if (x < a + 1.0) return lower_series(a, x);
  return 1.0 - upper_fraction(a, x);
}

double reg_upper(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (x == kInf) return 0.0;
  if (x < a + 1.0) return 1.0 - lower_series(a, x);
  return upper_fraction(a, x);
}

// Solves cdf(x) = q on a bracket by Newton steps, falling back to bisection
// whenever a step leaves the bracket. Works on the upper tail when q > 0.5 so
// that quantiles near 1 keep their relative precision.
template <typename Cdf, typename Sf, typename LogPdf>
double invert_cdf(double q, double guess, double lo, double hi, Cdf cdf, Sf sf, LogPdf log_pdf,
                  bool positive_support) {
  const bool upper = q > 0.5;
  const double target = upper ? 1.0 - q : q;
  // residual > 0 means x is to the right of the root.
  auto residual = [&](double x) { return upper ? target - sf(x) : cdf(x) - target; };

  double x = guess;
  if (!(x > lo && x < hi)) x = positive_support && lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
  for (int iter = 0; iter < 300; ++iter) {
    const double r = residual(x);
    if (r == 0.0) return x;
    if (r > 0.0) hi = x; else lo = x;

    const double dens = std::exp(log_pdf(x));
    double next = (dens > 0.0) ? x - r / dens : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) {
      next = (positive_support && lo > 0.0 && hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    }
    if (std::abs(next - x) <= 4.0 * kEps * std::abs(x) || hi - lo <= 4.0 * kEps * std::abs(x)) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace

void GammaParams::validate() const {
  require(std::isfinite(shape) && shape > 0.0, "gamma shape must be positive");
  require(std::isfinite(rate) && rate > 0.0, "gamma rate must be positive");
}

void StableParams::validate() const {
  require(alpha > 0.0 && alpha <= 2.0, "stable alpha must lie in (0, 2]");
  require(beta >= -1.0 && beta <= 1.0, "stable beta must lie in [-1, 1]");
  require(gamma > 0.0 && std::isfinite(gamma), "stable gamma must be positive");
  require(std::isfinite(delta), "stable delta must be finite");
}

double log_gamma(double x) {
  static constexpr std::array<double, 9> kCoef = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    return std::log(std::numbers::pi / std::abs(std::sin(std::numbers::pi * x))) - log_gamma(1.0 - x);
  }
  x -= 1.0;
  double acc = kCoef[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) acc += kCoef[i] / (x + i);
  return kLogSqrt2Pi + (x + 0.5) * std::log(t) - t + std::log(acc);
}

double gamma_log_pdf(double x, const GammaParams& p) {
  if (!(x > 0.0) || !std::isfinite(x)) return -kInf;
  return p.shape * std::log(p.rate) - log_gamma(p.shape) + (p.shape - 1.0) * std::log(x) - p.rate * x;
}

double gamma_cdf(double x, const GammaParams& p) {
  p.validate();
  require(!(x < 0.0), "gamma_cdf requires x >= 0");
  return reg_lower(p.shape, p.rate * x);
}

double gamma_sf(double x, const GammaParams& p) {
  p.validate();
  require(!(x < 0.0), "gamma_sf requires x >= 0");
  return reg_upper(p.shape, p.rate * x);
}

double gamma_quantile(double q, const GammaParams& p) {
  p.validate();
  require(q > 0.0 && q < 1.0, "gamma_quantile requires q in (0, 1)");
  const double a = p.shape;

  // Wilson-Hilferty start, or the small-x power law when that degenerates.
  double guess;
  const double z = normal_quantile(q);
  const double wh = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * std::sqrt(a));
  if (a > 1.0 && wh > 0.0) {
    guess = a * wh * wh * wh;
  } else {
    guess = std::exp((std::log(q) + log_gamma(a + 1.0)) / a);
  }
  if (!(guess > 0.0) || !std::isfinite(guess)) guess = a;

  double hi = std::max(guess, 1e-300);
  while (reg_lower(a, hi) < q && hi < 1e300) hi *= 2.0;
  double lo = std::min(guess, hi);
  while (lo > 1e-300 && reg_lower(a, lo) > q) lo *= 0.5;
  if (lo <= 1e-300) lo = 0.0;

  const double x = invert_cdf(
      q, guess, lo, hi, [a](double v) { return reg_lower(a, v); },
      [a](double v) { return reg_upper(a, v); },
      [a](double v) { return (a - 1.0) * std::log(v) - v - log_gamma(a); }, true);
  return x / p.rate;
}

double gamma_sample(const GammaParams& p, RngStream& rng) {
  p.validate();
  std::gamma_distribution<double> d(p.shape, 1.0 / p.rate);
  return d(rng.engine());
}

double poisson_log_pmf(std::int64_t n, double mean) {
  if (n < 0) return -kInf;
  if (mean <= 0.0) return n == 0 ? 0.0 : -kInf;
  return static_cast<double>(n) * std::log(mean) - mean - log_gamma(static_cast<double>(n) + 1.0);
}

std::int64_t poisson_sample(double mean, RngStream& rng) {
  require(mean > 0.0 && std::isfinite(mean), "poisson mean must be positive");
  std::poisson_distribution<std::int64_t> d(mean);
  return d(rng.engine());
}

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_quantile(double q) {
  require(q > 0.0 && q < 1.0, "normal_quantile requires q in (0, 1)");
  // Acklam's rational approximation as the starting point.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549671629286212e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  double guess;
  if (q < 0.02425) {
    const double s = std::sqrt(-2.0 * std::log(q));
    guess = (((((c[0] * s + c[1]) * s + c[2]) * s + c[3]) * s + c[4]) * s + c[5]) /
            ((((d[0] * s + d[1]) * s + d[2]) * s + d[3]) * s + 1.0);
  } else if (q > 1.0 - 0.02425) {
    const double s = std::sqrt(-2.0 * std::log1p(-q));
    guess = -(((((c[0] * s + c[1]) * s + c[2]) * s + c[3]) * s + c[4]) * s + c[5]) /
            ((((d[0] * s + d[1]) * s + d[2]) * s + d[3]) * s + 1.0);
  } else {
    const double r0 = q - 0.5;
    const double r = r0 * r0;
    guess = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * r0 /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  return invert_cdf(
      q, guess, -40.0, 40.0, normal_cdf, [](double v) { return normal_cdf(-v); }, normal_log_pdf, false);
}

double lognormal_sample(double mu, double sigma, RngStream& rng) {
  require(sigma > 0.0 && std::isfinite(sigma), "lognormal sigma must be positive");
  require(std::isfinite(mu), "lognormal mu must be finite");
  return std::exp(mu + sigma * rng.standard_normal());
}

double stable_sample(const StableParams& p, RngStream& rng) {
  p.validate();
  constexpr double half_pi = std::numbers::pi / 2.0;
  const double v = std::numbers::pi * (rng.uniform_open() - 0.5);
  const double w = rng.exponential();
  if (p.alpha == 1.0) {
    const double shifted = half_pi + p.beta * v;
    const double x =
        (shifted * std::tan(v) - p.beta * std::log(half_pi * w * std::cos(v) / shifted)) / half_pi;
    return p.gamma * x + p.beta * p.gamma * std::log(p.gamma) / half_pi + p.delta;
  }
  const double zeta = -p.beta * std::tan(half_pi * p.alpha);
  const double xi = std::atan(-zeta) / p.alpha;
  const double shift = p.alpha * (v + xi);
  const double x = std::pow(1.0 + zeta * zeta, 0.5 / p.alpha) * std::sin(shift) /
                   std::pow(std::cos(v), 1.0 / p.alpha) *
                   std::pow(std::cos(v - shift) / w, (1.0 - p.alpha) / p.alpha);
  return p.gamma * x + p.delta;
}

double neg_binomial_log_pmf(std::int64_t n, double theta, double volume, double alpha) {
  require(theta > 0.0 && volume > 0.0 && alpha > 0.0, "negative binomial parameters must be positive");
  require(n >= 0, "negative binomial support is n >= 0");
  const double nd = static_cast<double>(n);
  const double mean = theta * volume;
  const double log_total = std::log(alpha + mean);
  return log_gamma(alpha + nd) - log_gamma(nd + 1.0) - log_gamma(alpha) +
         alpha * (std::log(alpha) - log_total) + (n == 0 ? 0.0 : nd * (std::log(mean) - log_total));
}

double neg_binomial_pmf(std::int64_t n, double theta, double volume, double alpha) {
  return std::exp(neg_binomial_log_pmf(n, theta, volume, alpha));
}

}  // namespace riskdep::dist
