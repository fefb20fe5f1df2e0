#pragma once

#include <cmath>
#include <cstdint>

#include "riskdep/errors.hpp"
#include "riskdep/rng.hpp"

namespace riskdep::mcmc {

// Univariate slice sampler settings. The coordinate is restricted to the
// finite range [lower, upper].
struct SliceConfig {
  double width = 1.0;
  int max_stepout = 50;
  double lower = 1e-8;
  double upper = 1e8;
  int max_shrink = 100;

  void validate() const;
};

struct SliceResult {
  double x = 0.0;
  double log_height = 0.0;   // logf(x0) - E, E ~ Exp(1)
  double log_density = 0.0;  // logf(x) at the returned point
  int evaluations = 0;
  bool exhausted = false;    // shrinkage cap hit; x is the starting point
};

// One slice update of x0 under the unnormalized log-density `logf`
// (stepping-out then shrinkage). Leaves the target invariant.
template <typename LogDensity>
SliceResult slice_step(LogDensity&& logf, double x0, const SliceConfig& cfg, RngStream& rng) {
  SliceResult r;
  const double f0 = logf(x0);
  r.evaluations = 1;
  if (!std::isfinite(f0) || x0 < cfg.lower || x0 > cfg.upper) {
    throw ValidationError("slice_step needs a starting point inside the bounds with finite log-density");
  }
  // Height in log-space: log(U * f(x0)) = logf(x0) - Exp(1).
  const double y = f0 - rng.exponential();
  r.log_height = y;

  double left = x0 - cfg.width * rng.uniform();
  double right = left + cfg.width;
  int steps_left = static_cast<int>(std::floor(cfg.max_stepout * rng.uniform()));
  int steps_right = cfg.max_stepout - 1 - steps_left;
  while (steps_left > 0 && left > cfg.lower) {
    ++r.evaluations;
    if (!(logf(left) > y)) break;
    left -= cfg.width;
    --steps_left;
  }
  while (steps_right > 0 && right < cfg.upper) {
    ++r.evaluations;
    if (!(logf(right) > y)) break;
    right += cfg.width;
    --steps_right;
  }
  if (left < cfg.lower) left = cfg.lower;
  if (right > cfg.upper) right = cfg.upper;

  for (int i = 0; i < cfg.max_shrink; ++i) {
    const double x1 = left + rng.uniform() * (right - left);
    const double f1 = logf(x1);
    ++r.evaluations;
    if (f1 >= y) {
      r.x = x1;
      r.log_density = f1;
      return r;
    }
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  r.x = x0;
  r.log_density = f0;
  r.exhausted = true;
  return r;
}

}  // namespace riskdep::mcmc
