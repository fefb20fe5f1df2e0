#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "copula_checks.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "riskdep/copulas.hpp"
#include "riskdep/distributions.hpp"
#include "riskdep/errors.hpp"
#include "riskdep/loss_model.hpp"

using namespace riskdep;
using namespace riskdep::copula;

namespace {

double density2(const CopulaSpec& s, double a, double b) {
  const std::array<double, 2> u{a, b};
  return std::exp(log_density(u, s));
}

double cdf2(const CopulaSpec& s, double a, double b) {
  const std::array<double, 2> u{a, b};
  return cdf(u, s);
}

// Mixed second central difference of the CDF.
double fd_density2(const CopulaSpec& s, double a, double b, double h = 1e-4) {
  return (cdf2(s, a + h, b + h) - cdf2(s, a + h, b - h) - cdf2(s, a - h, b + h) + cdf2(s, a - h, b - h)) /
         (4.0 * h * h);
}

double fd_density3(const CopulaSpec& s, std::array<double, 3> u, double h = 1e-3) {
  double acc = 0.0;
  for (int m = 0; m < 8; ++m) {
    std::array<double, 3> v = u;
    int sign = 1;
    for (int k = 0; k < 3; ++k) {
      const bool up = (m >> k) & 1;
      v[k] += up ? h : -h;
      if (!up) sign = -sign;
    }
    acc += sign * cdf(v, s);
  }
  return acc / (8.0 * h * h * h);
}

// Spearman from the copula CDF: 12 * int C - 3.
double spearman_from_cdf(const CopulaSpec& s) {
  return 12.0 * oracle::integrate2([&](double a, double b) { return cdf2(s, a, b); }, 0.0, 1.0, 0.0, 1.0, 1e-9) - 3.0;
}

double calibrate(Family f, double target, double lo, double hi) {
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (spearman_from_cdf({f, mid, std::nullopt}) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

const std::vector<CopulaSpec> kGrid = {CopulaSpec::gaussian(0.1), CopulaSpec::gaussian(0.9), CopulaSpec::clayton(1.0),
                                       CopulaSpec::clayton(10.0), CopulaSpec::gumbel(1.1),   CopulaSpec::gumbel(3.0)};

}  // namespace

TEST_CASE("independence points have zero log density") {
  const std::array<double, 2> u{0.3, 0.7};
  CHECK(log_density(u, CopulaSpec::gaussian(0.0)) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(log_density(u, CopulaSpec::gumbel(1.0)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(log_density(u, CopulaSpec::independence()) == 0.0);
  const std::array<double, 3> w{0.1, 0.5, 0.95};
  CHECK(std::abs(log_density(w, CopulaSpec::gaussian(0.0))) < 1e-14);
}

TEST_CASE("clayton density matches finite differences of its cdf") {
  const auto s = CopulaSpec::clayton(2.0);
  const double exact = density2(s, 0.5, 0.5);
  CHECK(std::abs(fd_density2(s, 0.5, 0.5) / exact - 1.0) < 1e-4);
  const std::array<double, 3> u{0.3, 0.6, 0.8};
  CHECK(std::abs(fd_density3(s, u) / std::exp(log_density(u, s)) - 1.0) < 1e-4);
}

TEST_CASE("gumbel bivariate density matches finite differences on an interior grid") {
  for (double rho : {1.5, 3.0}) {
    const auto s = CopulaSpec::gumbel(rho);
    for (int i = 0; i < 10; ++i) {
      const double a = 0.08 + 0.09 * i;
      const double b = 0.9 - 0.085 * i;
      CAPTURE(rho);
      CAPTURE(a);
      CHECK(std::abs(fd_density2(s, a, b) / density2(s, a, b) - 1.0) < 1e-4);
    }
  }
}

TEST_CASE("gumbel trivariate density matches finite differences") {
  const auto s = CopulaSpec::gumbel(2.0);
  for (const auto& u : {std::array<double, 3>{0.3, 0.6, 0.8}, std::array<double, 3>{0.2, 0.25, 0.5},
                        std::array<double, 3>{0.7, 0.75, 0.9}}) {
    CHECK(std::abs(fd_density3(s, u) / std::exp(log_density(u, s)) - 1.0) < 1e-4);
  }
}

TEST_CASE("gaussian density agrees with a bivariate normal ratio") {
  const double r = 0.6, a = 0.2, b = 0.85;
  const double x = dist::normal_quantile(a), y = dist::normal_quantile(b);
  const double expect = -0.5 * std::log(1 - r * r) - (r * r * (x * x + y * y) - 2 * r * x * y) / (2 * (1 - r * r));
  const std::array<double, 2> u{a, b};
  CHECK(log_density(u, CopulaSpec::gaussian(r)) == doctest::Approx(expect).epsilon(1e-12));
  // Full-matrix path agrees with the scalar exchangeable form.
  CopulaSpec m{Family::Gaussian, 0.0, exchangeable_correlation(3, 0.4)};
  const std::array<double, 3> w{0.2, 0.5, 0.7};
  CHECK(log_density(w, m) == doctest::Approx(log_density(w, CopulaSpec::gaussian(0.4))).epsilon(1e-12));
  // Exchangeable matrix at rho <= -1/(d-1) is not positive definite.
  CHECK(std::isinf(log_density(w, CopulaSpec::gaussian(-0.6))));
}

TEST_CASE("densities integrate to one") {
  for (const auto& s : kGrid) {
    CAPTURE(to_string(s.family));
    CAPTURE(s.rho);
    CHECK(checks::gl_integral(s) == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("samples have uniform marginals and match the density") {
  const std::size_t n = 100000;
  int idx = 0;
  for (const auto& s : kGrid) {
    CAPTURE(to_string(s.family));
    CAPTURE(s.rho);
    RngStream rng(2024, static_cast<std::uint64_t>(idx++));
    const auto r = checks::sample_check(s, n, 20, rng);
    CHECK(r.ks_u1 < oracle::ks_critical_01(n));
    CHECK(r.ks_u2 < oracle::ks_critical_01(n));
    CHECK(r.chi2_p > 0.001);
    CHECK(r.integral == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("independence samples are uniform in every coordinate") {
  RngStream rng(5, 5);
  const std::size_t n = 100000;
  std::vector<std::vector<double>> cols(3, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = sample(CopulaSpec::independence(), 3, rng);
    for (int k = 0; k < 3; ++k) cols[k][i] = u[k];
  }
  for (const auto& c : cols) CHECK(oracle::ks_statistic(c, [](double x) { return x; }) < oracle::ks_critical_01(n));
}

TEST_CASE("gaussian sample spearman matches the arcsine formula") {
  RngStream rng(11, 0);
  const std::size_t n = 100000;
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = sample(CopulaSpec::gaussian(0.9), 2, rng);
    a[i] = u[0];
    b[i] = u[1];
  }
  const double expect = 6.0 / std::numbers::pi * std::asin(0.45);
  CHECK(std::abs(loss::spearman_rank_correlation(a, b) - expect) < 0.01);
}

TEST_CASE("lower tail concentration orders clayton, gaussian, gumbel at equal spearman") {
  const double target = 0.5;
  const double g = 2.0 * std::sin(std::numbers::pi * target / 6.0);
  const double c = calibrate(Family::Clayton, target, 0.05, 5.0);
  const double u = calibrate(Family::Gumbel, target, 1.001, 4.0);
  const std::vector<CopulaSpec> specs = {CopulaSpec::clayton(c), CopulaSpec::gaussian(g), CopulaSpec::gumbel(u)};
  const std::size_t n = 1000000;
  const double q = 0.01;
  std::vector<double> conc;
  int idx = 0;
  for (const auto& s : specs) {
    RngStream rng(77, static_cast<std::uint64_t>(idx++));
    std::vector<double> a(n), b(n);
    std::size_t joint = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = sample(s, 2, rng);
      a[i] = v[0];
      b[i] = v[1];
      if (v[0] < q && v[1] < q) ++joint;
    }
    CAPTURE(to_string(s.family));
    CHECK(std::abs(loss::spearman_rank_correlation(a, b) - target) < 0.02);
    conc.push_back(static_cast<double>(joint) / static_cast<double>(n) / q);
  }
  CHECK(conc[0] > conc[1]);
  CHECK(conc[1] > conc[2]);
}

TEST_CASE("archimedean generators and inverses") {
  CHECK(generator(Family::Clayton, 1.0, 2.0) == 0.0);
  CHECK(generator(Family::Clayton, 0.5, 2.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::abs(generator_inverse(Family::Gumbel, generator(Family::Gumbel, 0.37, 2.5), 2.5) - 0.37) < 1e-12);
  for (double t : {1e-6, 0.01, 0.5, 0.999}) {
    CHECK(std::abs(generator_inverse(Family::Clayton, generator(Family::Clayton, t, 3.0), 3.0) - t) < 1e-12);
    CHECK(std::abs(generator_inverse(Family::Gumbel, generator(Family::Gumbel, t, 1.7), 1.7) - t) < 1e-12);
  }
  CHECK_THROWS_AS(generator(Family::Clayton, 0.0, 2.0), ValidationError);
  CHECK_THROWS_AS(generator(Family::Clayton, 1.5, 2.0), ValidationError);
  CHECK_THROWS_AS(generator_inverse(Family::Gumbel, -1.0, 2.0), ValidationError);
}

TEST_CASE("one factor gaussian profiles") {
  const std::size_t n = 100000;
  const auto run = [&](std::vector<double> loadings, std::uint64_t id) {
    RngStream rng(3, id);
    const std::vector<QuantileFn> q(loadings.size(), [](double p) { return p; });
    std::vector<std::vector<double>> y(loadings.size(), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = one_factor_gaussian_profiles(loadings, q, rng);
      for (std::size_t k = 0; k < loadings.size(); ++k) y[k][i] = d.latent[k];
    }
    return y;
  };
  const auto corr = [&](const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = oracle::mean(a), mb = oracle::mean(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1) / std::sqrt(oracle::variance(a) * oracle::variance(b));
  };
  auto y0 = run({0.0, 0.0, 0.0}, 1);
  CHECK(std::abs(corr(y0[0], y0[1])) < 0.01);
  CHECK(std::abs(corr(y0[1], y0[2])) < 0.01);
  auto y1 = run({1.0, 1.0}, 2);
  for (std::size_t i = 0; i < 100; ++i) CHECK(y1[0][i] == y1[1][i]);
  auto y2 = run({0.8, 0.5}, 3);
  CHECK(std::abs(corr(y2[0], y2[1]) - 0.4) < 0.01);

  RngStream rng(1, 1);
  const std::vector<double> bad{0.5, 1.2};
  const std::vector<QuantileFn> q(2, [](double p) { return p; });
  CHECK_THROWS_AS(one_factor_gaussian_profiles(bad, q, rng), ValidationError);
  const std::vector<QuantileFn> q1(1, [](double p) { return p; });
  const std::vector<double> ok{0.5, 0.5};
  CHECK_THROWS_AS(one_factor_gaussian_profiles(ok, q1, rng), ValidationError);
}

TEST_CASE("parameter ranges and boundary policy") {
  const std::array<double, 2> u{0.4, 0.6};
  CHECK_THROWS_AS(log_density(u, CopulaSpec::gaussian(1.0)), ValidationError);
  CHECK_THROWS_AS(log_density(u, CopulaSpec::clayton(0.0)), ValidationError);
  CHECK_THROWS_AS(log_density(u, CopulaSpec::gumbel(0.9)), ValidationError);
  const std::array<double, 2> edge{0.0, 0.5};
  CHECK(std::isfinite(log_density(edge, CopulaSpec::clayton(2.0))));
  CHECK_THROWS_AS(log_density(edge, CopulaSpec::clayton(2.0), BoundaryPolicy::Error), ValidationError);
  const std::array<double, 1> one{0.5};
  CHECK_THROWS_AS(log_density(one, CopulaSpec::clayton(2.0)), ValidationError);
  RngStream rng(1, 2);
  CHECK_THROWS_AS(sample(CopulaSpec::clayton(-1.0), 2, rng), ValidationError);
  CHECK(family_from_string("gumbel") == Family::Gumbel);
  CHECK_THROWS_AS(family_from_string("frank"), ValidationError);
}
