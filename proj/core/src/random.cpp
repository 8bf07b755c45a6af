#include "sgldlab/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sgldlab {

namespace {

// splitmix64; the usual seed-scrambling finalizer.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t stream_id) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(stream_id * 0xD6E8FEB86659FD93ULL + 1));
}

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      engine_(derive_stream_seed(master_seed, stream_id)) {}

double RandomStream::uniform() {
  // 53-bit mantissa; strictly below 1.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) {  // full 64-bit span
    return static_cast<std::int64_t>(engine_());
  }
  // rejection sampling for an unbiased draw
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return lo + static_cast<std::int64_t>(v % range);
}

double RandomStream::normal() {
  // Box-Muller, cosine branch only.
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool RandomStream::bernoulli(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("bernoulli: p outside [0,1]");
  return uniform() < p;
}

}  // namespace sgldlab
