#pragma once

#include <cstdint>
#include <random>

namespace sgldlab {

/// Counter-style derivation of independent substream seeds from a master
/// seed. Used so that replicate r of an experiment sees the same random
/// numbers no matter how many workers execute the replicate set.
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t stream_id);

/// Explicit random stream: every sampler in the library takes one of these
/// instead of touching ambient RNG state. All draws are deterministic
/// functions of (master_seed, stream_id) and the call sequence.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t master_seed, std::uint64_t stream_id = 0);

  /// Uniform double in [0, 1).
  double uniform();

  /// Uniform integer in [lo, hi], inclusive. Requires lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller. One value per call, no cached spare,
  /// so the draw sequence is a pure function of the call count.
  double normal();

  /// Bernoulli(p).
  bool bernoulli(double p);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace sgldlab
