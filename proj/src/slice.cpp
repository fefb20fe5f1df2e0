#include "riskdep/slice.hpp"

namespace riskdep::mcmc {

void SliceConfig::validate() const {
  if (!(width > 0.0)) throw ValidationError("slice width must be positive");
  if (max_stepout < 1) throw ValidationError("slice max_stepout must be positive");
  if (max_shrink < 1) throw ValidationError("slice max_shrink must be positive");
  if (!(lower < upper)) throw ValidationError("slice bounds need lower < upper");
}

}  // namespace riskdep::mcmc
