#pragma once

#include <cstddef>
#include <span>

#include "sgldlab/models.hpp"
#include "sgldlab/tv_result.hpp"

namespace sgldlab {

/// Standard normal CDF.
double normal_cdf(double x);

/// Histogram binning policy for the empirical TV estimators.
struct BinRule {
  enum class Kind { kFixed, kScott };
  Kind kind = Kind::kFixed;
  std::size_t bins = 50;

  static BinRule fixed(std::size_t bins) { return {Kind::kFixed, bins}; }
  static BinRule scott() { return {Kind::kScott, 0}; }
};

/// Exact TV between two Gaussians. Equal variances use the closed form
/// Phi(|dm|/(2 sd)) - Phi(-|dm|/(2 sd)); unequal variances integrate
/// |f - g|/2 numerically to 1e-9 absolute.
TvResult tv_gaussian_exact(const GaussianPosterior& a, const GaussianPosterior& b);

/// Quadrature path of tv_gaussian_exact, exposed so the closed form can be
/// cross-checked against it. Adaptive Simpson between density crossings on
/// a mean +- 10 sd envelope.
double tv_gaussian_numeric(const GaussianPosterior& a, const GaussianPosterior& b);

/// First-two-moments lower bound on the TV between any two distributions:
/// dm^2 / ((sd_p + sd_q)^2 + dm^2).
TvResult tv_moment_lower_bound(double mean_p, double sd_p, double mean_q, double sd_q);

/// Half L1 distance between the sample histogram and the exact Gaussian
/// mass per bin, on a grid spanning the target mean +- 6 sd. Mass falling
/// outside the grid enters the distance on both sides. Downward biased as
/// a TV estimate (within-bin differences cancel), so treat the value as a
/// lower-bound witness. Requires at least 100 samples.
TvResult tv_empirical_vs_gaussian(std::span<const double> samples, const GaussianPosterior& target,
                                  const BinRule& rule = BinRule::fixed(50));

/// Half L1 distance between two sample histograms on a common grid spanning
/// the pooled range. Same downward bias caveat. Requires 100 samples each.
TvResult tv_empirical_two_sample(std::span<const double> samples_a,
                                 std::span<const double> samples_b,
                                 const BinRule& rule = BinRule::fixed(50));

}  // namespace sgldlab
