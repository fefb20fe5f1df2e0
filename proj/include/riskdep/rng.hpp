#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace riskdep {

// A reproducible random stream keyed by (seed, stream id).
//
// Two streams with the same key produce bit-identical sequences. Streams
// with different ids are seeded through std::seed_seq, which decorrelates
// the underlying Mersenne Twister states. A stream is owned by one thread.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on the open interval (0, 1).
  double uniform_open();
  double exponential();  // Exp(1)
  double standard_normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

  // Derive an independent child stream; the child key depends only on this
  // stream's key and `child_id`, not on how many draws were consumed.
  RngStream split(std::uint64_t child_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Stable 64-bit id for a named stream ("dataset-3", "chain-0-marginal", ...).
std::uint64_t stream_id_for(std::string_view name);

}  // namespace riskdep
