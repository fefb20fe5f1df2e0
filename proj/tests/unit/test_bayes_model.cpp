#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "riskdep/bayes_model.hpp"
#include "riskdep/errors.hpp"

using namespace riskdep;
using namespace riskdep::bayes;
using copula::Family;

namespace {

BayesConfig make_cfg(std::size_t cells, Family f) {
  BayesConfig cfg;
  for (std::size_t j = 0; j < cells; ++j) cfg.cells.push_back({2.0 + 0.5 * j, 2.5, 2.0, 2.0, 1.0 + j});
  cfg.family = f;
  cfg.rho_range = default_rho_range(f);
  return cfg;
}

Dataset make_data(std::size_t years, std::size_t cells, std::size_t experts, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Dataset d{years, cells, experts, {}, {}};
  for (std::size_t i = 0; i < years * cells; ++i) d.counts.push_back(static_cast<std::int64_t>(rng.index(12)));
  for (std::size_t i = 0; i < experts * cells; ++i) d.experts.push_back(0.5 + 5.0 * rng.uniform());
  return d;
}

ChainState random_state(const Dataset& d, const BayesConfig& cfg, RngStream& rng) {
  ChainState s;
  for (std::size_t j = 0; j < d.cells; ++j) s.theta.push_back(0.5 + 8.0 * rng.uniform());
  for (std::size_t i = 0; i < d.years * d.cells; ++i) s.lambda.push_back(0.2 + 10.0 * rng.uniform());
  const auto r = cfg.rho_range;
  s.rho = cfg.family == Family::Independence ? 0.0 : r.lower + (0.05 + 0.9 * rng.uniform()) * r.width();
  if (cfg.family == Family::Clayton || cfg.family == Family::Gumbel) s.rho = std::min(s.rho, 8.0);
  return s;
}

double boost_gamma_log_pdf(double x, double shape, double rate) {
  return std::log(boost::math::pdf(boost::math::gamma_distribution<double>(shape, 1.0 / rate), x));
}

}  // namespace

TEST_CASE("full conditionals are proportional to the joint posterior") {
  for (Family f : {Family::Independence, Family::Gaussian, Family::Clayton, Family::Gumbel}) {
    CAPTURE(copula::to_string(f));
    const auto cfg = make_cfg(2, f);
    const auto data = make_data(5, 2, 1, 3);
    RngStream rng(7, static_cast<std::uint64_t>(f));
    for (int rep = 0; rep < 100; ++rep) {
      const auto s = random_state(data, cfg, rng);
      const double base = log_joint_posterior(s, data, cfg);
      REQUIRE(std::isfinite(base));

      const std::size_t j = rng.index(2);
      auto s2 = s;
      s2.theta[j] = 0.5 + 8.0 * rng.uniform();
      const auto fc = log_fc_theta(j, s, data, cfg);
      CHECK(std::abs((fc(s2.theta[j]) - fc(s.theta[j])) - (log_joint_posterior(s2, data, cfg) - base)) < 1e-10);

      const std::size_t t = rng.index(5);
      auto s3 = s;
      s3.lambda[t * 2 + j] = 0.2 + 10.0 * rng.uniform();
      const auto fl = log_fc_lambda(t, j, s, data, cfg);
      CHECK(std::abs((fl(s3.lambda[t * 2 + j]) - fl(s.lambda[t * 2 + j])) -
                     (log_joint_posterior(s3, data, cfg) - base)) < 1e-10);

      if (f != Family::Independence) {
        auto s4 = s;
        s4.rho = cfg.rho_range.lower + (0.05 + 0.9 * rng.uniform()) * cfg.rho_range.width();
        if (f != Family::Gaussian) s4.rho = std::min(s4.rho, 8.0);
        const auto fr = log_fc_rho(s, data, cfg);
        CHECK(std::abs((fr(s4.rho) - fr(s.rho)) - (log_joint_posterior(s4, data, cfg) - base)) < 1e-10);
      }
    }
  }
}

TEST_CASE("out of support states give minus infinity") {
  const auto cfg = make_cfg(2, Family::Clayton);
  const auto data = make_data(3, 2, 1, 4);
  RngStream rng(1, 1);
  auto s = random_state(data, cfg, rng);
  auto bad = s;
  bad.rho = 31.0;
  CHECK(std::isinf(log_joint_posterior(bad, data, cfg)));
  CHECK(std::isinf(log_fc_rho(s, data, cfg)(-0.5)));
  CHECK(std::isinf(log_fc_theta(0, s, data, cfg)(0.0)));
  CHECK(std::isinf(log_fc_theta(0, s, data, cfg)(-1.0)));
  CHECK(std::isinf(log_fc_lambda(0, 1, s, data, cfg)(0.0)));
  bad = s;
  bad.lambda[0] = -1.0;
  CHECK(std::isinf(log_joint_posterior(bad, data, cfg)));
}

TEST_CASE("single cell joint reduces to the hierarchical integrand") {
  const auto cfg = make_cfg(1, Family::Independence);
  const auto data = make_data(4, 1, 1, 5);
  const auto& c = cfg.cells[0];
  // Independent term-by-term re-derivation.
  const auto oracle_joint = [&](const ChainState& s) {
    double v = boost_gamma_log_pdf(s.theta[0], c.prior_a, c.prior_b);
    for (std::size_t t = 0; t < data.years; ++t) {
      const double l = s.lambda[t];
      v += std::log(boost::math::pdf(boost::math::poisson_distribution<double>(c.volume * l),
                                     static_cast<double>(data.count(t, 0))));
      v += boost_gamma_log_pdf(l, c.alpha, c.alpha / s.theta[0]);
    }
    for (std::size_t k = 0; k < data.experts_count; ++k)
      v += boost_gamma_log_pdf(data.expert(k, 0), c.xi, c.xi / s.theta[0]);
    return v;
  };
  RngStream rng(2, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = random_state(data, cfg, rng), b = random_state(data, cfg, rng);
    CHECK(std::abs((log_joint_posterior(a, data, cfg) - log_joint_posterior(b, data, cfg)) -
                   (oracle_joint(a) - oracle_joint(b))) < 1e-10);
  }
}

TEST_CASE("bivariate clayton joint matches a separately coded sum") {
  const auto cfg = make_cfg(2, Family::Clayton);
  const auto data = make_data(1, 2, 1, 6);
  const auto oracle_joint = [&](const ChainState& s) {
    double v = 0.0;
    double u[2];
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& c = cfg.cells[j];
      const double l = s.lambda[j];
      const boost::math::gamma_distribution<double> g(c.alpha, s.theta[j] / c.alpha);
      u[j] = boost::math::cdf(g, l);
      v += std::log(boost::math::pdf(g, l));
      v += std::log(
          boost::math::pdf(boost::math::poisson_distribution<double>(c.volume * l), double(data.count(0, j))));
      v += boost_gamma_log_pdf(data.expert(0, j), c.xi, c.xi / s.theta[j]);
      v += boost_gamma_log_pdf(s.theta[j], c.prior_a, c.prior_b);
    }
    const double r = s.rho;
    v += std::log1p(r) - (1.0 + r) * std::log(u[0] * u[1]) +
         (-2.0 - 1.0 / r) * std::log(std::pow(u[0], -r) + std::pow(u[1], -r) - 1.0);
    return v;
  };
  const ChainState a{{2.0, 3.0}, {1.5, 2.5}, 2.0}, b{{4.0, 1.2}, {3.0, 0.7}, 2.0};
  CHECK(std::abs((log_joint_posterior(a, data, cfg) - log_joint_posterior(b, data, cfg)) -
                 (oracle_joint(a) - oracle_joint(b))) < 1e-10);
}

TEST_CASE("independence full conditionals factorize") {
  const auto cfg = make_cfg(3, Family::Independence);
  const auto data = make_data(4, 3, 2, 8);
  RngStream rng(3, 3);
  const auto s = random_state(data, cfg, rng);
  auto other = s;
  for (std::size_t t = 0; t < 4; ++t) {
    other.lambda[t * 3 + 0] *= 1.7;
    other.lambda[t * 3 + 2] *= 0.4;
  }
  const auto f1 = log_fc_theta(1, s, data, cfg), f2 = log_fc_theta(1, other, data, cfg);
  for (double th : {0.3, 1.0, 4.0, 9.0}) CHECK(std::abs((f1(th) - f1(1.0)) - (f2(th) - f2(1.0))) < 1e-12);
}

TEST_CASE("theta full conditional mode matches the analytic root") {
  auto cfg = make_cfg(1, Family::Independence);
  const auto data = make_data(6, 1, 0, 9);
  RngStream rng(4, 4);
  const auto s = random_state(data, cfg, rng);
  const auto& c = cfg.cells[0];
  double sum_l = 0.0;
  for (double l : s.lambda) sum_l += l;
  const double p = c.prior_a - 1.0 - 6.0 * c.alpha;
  const double root = (p + std::sqrt(p * p + 4.0 * c.prior_b * c.alpha * sum_l)) / (2.0 * c.prior_b);
  const auto fc = log_fc_theta(0, s, data, cfg);
  const double h = 1e-4;
  double best = h, best_v = -1e300;
  for (double th = h; th < 30.0; th += h) {
    const double v = fc(th);
    if (v > best_v) {
      best_v = v;
      best = th;
    }
  }
  CHECK(std::abs(best - root) <= h);
}

TEST_CASE("independence lambda full conditional is the conjugate gamma") {
  const auto cfg = make_cfg(2, Family::Independence);
  const auto data = make_data(3, 2, 1, 10);
  RngStream rng(5, 5);
  const auto s = random_state(data, cfg, rng);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& c = cfg.cells[j];
      const double shape = c.alpha + static_cast<double>(data.count(t, j));
      const double rate = c.alpha / s.theta[j] + c.volume;
      const auto fl = log_fc_lambda(t, j, s, data, cfg);
      std::vector<double> diff;
      for (double l = 0.05; l < 20.0; l += 0.05) diff.push_back(fl(l) - boost_gamma_log_pdf(l, shape, rate));
      const double m = oracle::mean(diff);
      double worst = 0.0;
      for (double d : diff) worst = std::max(worst, std::abs(d - m));
      CHECK(worst < 1e-8);
    }
  }
  // Shape one, no events: exponential with rate 1/theta + V.
  BayesConfig one = make_cfg(1, Family::Independence);
  one.cells[0].alpha = 1.0;
  const Dataset zero{1, 1, 0, {0}, {}};
  const ChainState st{{2.0}, {1.0}, 0.0};
  const auto fl = log_fc_lambda(0, 0, st, zero, one);
  const double rate = 1.0 / 2.0 + one.cells[0].volume;
  CHECK((fl(3.0) - fl(1.0)) == doctest::Approx(-rate * 2.0).epsilon(1e-12));
}

TEST_CASE("rho full conditional concentrates near the generating value") {
  const auto cfg = make_cfg(2, Family::Gaussian);
  RngStream rng(6, 6);
  const std::size_t years = 50;
  ChainState s{{3.0, 5.0}, {}, 0.0};
  for (std::size_t t = 0; t < years; ++t) {
    const auto u = copula::sample(copula::CopulaSpec::gaussian(0.9), 2, rng);
    for (std::size_t j = 0; j < 2; ++j)
      s.lambda.push_back(dist::gamma_quantile(u[j], dist::GammaParams::from_shape_mean(cfg.cells[j].alpha, s.theta[j])));
  }
  const Dataset data{years, 2, 0, std::vector<std::int64_t>(years * 2, 3), {}};
  const auto fr = log_fc_rho(s, data, cfg);
  double best = 0.0, best_v = -1e300;
  for (double r = -0.99; r < 0.995; r += 0.005) {
    if (fr(r) > best_v) {
      best_v = fr(r);
      best = r;
    }
  }
  CHECK(std::abs(best - 0.9) < 0.1);

  // No years: flat on the prior support.
  const Dataset empty{0, 2, 0, {}, {}};
  const ChainState e{{3.0, 5.0}, {}, 0.0};
  const auto flat = log_fc_rho(e, empty, cfg);
  CHECK(flat(-0.8) == flat(0.3));
  CHECK(std::isinf(flat(1.5)));
}

TEST_CASE("single cell marginal posterior") {
  BayesConfig cfg;
  cfg.cells = {{2.0, 2.5, 2.0, 2.0, 1.0}};
  const Dataset data{3, 1, 1, {4, 6, 5}, {2.0}};
  // Posterior mean by quadrature of the normalized density.
  const auto dens = [&](double th) { return std::exp(single_cell_log_marginal_posterior(th, data, cfg) + 40.0); };
  const double z = oracle::integrate_ts(dens, 0.0, 60.0);
  const double m = oracle::integrate_ts([&](double th) { return th * dens(th); }, 0.0, 60.0) / z;
  // Reference value from 30-digit quadrature of the closed form.
  CHECK(std::abs(m / 2.32006963835295709 - 1.0) < 1e-6);

  // No data and no experts: the Gamma(a, b) prior.
  const Dataset none{0, 1, 0, {}, {}};
  for (double th : {0.2, 1.0, 3.5})
    CHECK((single_cell_log_marginal_posterior(th, none, cfg) - single_cell_log_marginal_posterior(1.0, none, cfg)) ==
          doctest::Approx(boost_gamma_log_pdf(th, 2.0, 2.5) - boost_gamma_log_pdf(1.0, 2.0, 2.5)).epsilon(1e-12));
  CHECK(std::isinf(single_cell_log_marginal_posterior(0.0, data, cfg)));

  // Monte Carlo integration of the lambda path reproduces the closed form.
  const auto& c = cfg.cells[0];
  const auto mc = [&](double th, RngStream& rng, double& se) {
    const std::size_t n = 200000;
    std::vector<double> w(n);
    for (auto& v : w) {
      double lik = 1.0;
      for (std::size_t t = 0; t < 3; ++t) {
        const double l = dist::gamma_sample(dist::GammaParams::from_shape_mean(c.alpha, th), rng);
        lik *= boost::math::pdf(boost::math::poisson_distribution<double>(c.volume * l), double(data.count(t, 0)));
      }
      v = lik;
    }
    se = std::sqrt(oracle::variance(w) / static_cast<double>(n)) / oracle::mean(w);
    return std::log(oracle::mean(w)) + boost_gamma_log_pdf(th, c.prior_a, c.prior_b) +
           boost_gamma_log_pdf(2.0, c.xi, c.xi / th);
  };
  RngStream rng(11, 11);
  double se1 = 0, se2 = 0;
  const double l1 = mc(1.5, rng, se1), l2 = mc(4.0, rng, se2);
  const double closed = single_cell_log_marginal_posterior(1.5, data, cfg) - single_cell_log_marginal_posterior(4.0, data, cfg);
  CHECK(std::abs((l1 - l2) - closed) < 3.0 * std::hypot(se1, se2));

  BayesConfig two = make_cfg(2, Family::Independence);
  CHECK_THROWS_AS(single_cell_log_marginal_posterior(1.0, make_data(2, 2, 0, 1), two), ValidationError);
}

TEST_CASE("prior moments") {
  BayesConfig cfg;
  cfg.cells = {{2.0, 2.5, 2.0, 2.0, 1.0}};
  const auto m = prior_moments(cfg, 0);
  CHECK(m.theta.mean == doctest::Approx(0.8));
  CHECK(m.theta.variance == doctest::Approx(0.32));
  CHECK(m.lambda.mean == doctest::Approx(0.8));

  BayesConfig big = cfg;
  big.cells[0].alpha = 1e12;
  CHECK(prior_moments(big, 0).lambda.variance == doctest::Approx(2.0 / 6.25).epsilon(1e-9));

  RngStream rng(12, 12);
  std::vector<double> n(1000000);
  for (auto& v : n) {
    const double th = dist::gamma_sample({2.0, 2.5}, rng);
    const double l = dist::gamma_sample(dist::GammaParams::from_shape_mean(2.0, th), rng);
    v = static_cast<double>(dist::poisson_sample(l, rng));
  }
  CHECK(oracle::variance(n) == doctest::Approx(m.count.variance).epsilon(0.02));
  CHECK(oracle::mean(n) == doctest::Approx(m.count.mean).epsilon(0.01));
}

TEST_CASE("expert opinions are unbiased for theta") {
  RngStream rng(13, 13);
  const double theta = 3.0, xi = 2.0;
  std::vector<double> d(1000000);
  for (auto& v : d) v = dist::gamma_sample(dist::GammaParams::from_shape_mean(xi, theta), rng);
  CHECK(oracle::mean(d) == doctest::Approx(theta).epsilon(0.01));
  CHECK(std::sqrt(oracle::variance(d)) / oracle::mean(d) == doctest::Approx(1.0 / std::sqrt(xi)).epsilon(0.02));
}

TEST_CASE("poisson gamma mixture is negative binomial") {
  const double theta = 4.0, v = 2.0, alpha = 1.5;
  for (std::int64_t n = 0; n <= 50; ++n) {
    const auto f = [&](double l) {
      return boost::math::pdf(boost::math::poisson_distribution<double>(v * l), double(n)) *
             boost::math::pdf(boost::math::gamma_distribution<double>(alpha, theta / alpha), l);
    };
    const double q = oracle::integrate(f, 0.0, 200.0, 1e-13);
    CHECK(std::abs(q - dist::neg_binomial_pmf(n, theta, v, alpha)) < 1e-8);
  }
}

TEST_CASE("config and dataset validation") {
  auto cfg = make_cfg(2, Family::Clayton);
  cfg.cells[0].prior_b = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = make_cfg(2, Family::Gumbel);
  cfg.rho_range = {0.5, 30.0, false};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  Dataset d = make_data(2, 2, 1, 1);
  d.counts[0] = -1;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = make_data(2, 2, 1, 1);
  d.experts[0] = 0.0;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = make_data(5, 2, 1, 1);
  const auto first = d.first_years(2);
  CHECK(first.years == 2);
  CHECK(first.count(1, 1) == d.count(1, 1));
  const auto col = d.cell(1);
  CHECK(col.cells == 1);
  CHECK(col.count(3, 0) == d.count(3, 1));
  CHECK(col.expert(0, 0) == d.expert(0, 1));
}
