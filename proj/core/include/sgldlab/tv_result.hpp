#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace sgldlab {

/// How a total-variation value was obtained.
enum class TvMethod {
  kExactGaussian,
  kMomentLowerBound,
  kBinnedEmpirical,
  kBinomialReduction,
};

std::string to_string(TvMethod method);

/// A total-variation distance under the sup-over-sets convention
/// (equivalently half the L1 distance between densities), together with
/// provenance. Empirical estimates carry a Monte Carlo standard error and
/// the bin count used.
struct TvResult {
  double value = 0.0;  // in [0, 1]
  TvMethod method = TvMethod::kExactGaussian;
  std::optional<double> mc_error;
  std::optional<std::size_t> bin_count;
};

}  // namespace sgldlab
