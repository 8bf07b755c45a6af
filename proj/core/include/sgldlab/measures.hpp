#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sgldlab/random.hpp"
#include "sgldlab/tv_result.hpp"

namespace sgldlab {

/// A minibatch of data indices. Entries are 1-based: each lies in [1, n].
struct IndexVector {
  std::vector<std::int64_t> entries;
  std::int64_t n = 0;  // size of the dataset the indices refer to

  std::size_t batch_size() const { return entries.size(); }
  bool operator==(const IndexVector&) const = default;
};

/// Throws std::invalid_argument if any entry falls outside [1, n].
void validate(const IndexVector& iv);

enum class MeasureKind { kUniform, kPerturbed };

/// Per-coordinate selection probabilities w_i = P(D[1] = i) of a driving
/// measure. Constant on the lower block {1,...,s-1} and on the upper block
/// {s,...,n}; sums to 1.
struct WeightVector {
  std::vector<double> weights;
};

/// Split index s = ceil(n/2). The upper block {s,...,n} has n-s+1 elements.
std::int64_t split_index(std::int64_t n);

/// Distribution over minibatch index vectors: either the uniform measure on
/// [n]^M or its perturbation that re-routes each coordinate, independently
/// with probability delta, to a uniform draw from the upper block.
class DrivingMeasure {
 public:
  static DrivingMeasure uniform(std::int64_t n, std::size_t batch_size);
  static DrivingMeasure perturbed(std::int64_t n, std::size_t batch_size, double delta);

  MeasureKind kind() const { return kind_; }
  std::int64_t n() const { return n_; }
  std::size_t batch_size() const { return batch_; }
  double delta() const { return delta_; }
  std::int64_t split() const { return split_; }

  WeightVector coordinate_weights() const;

  /// Draws one index vector; in-place variant reuses the entry buffer.
  IndexVector sample(RandomStream& rng) const;
  void sample(IndexVector& out, RandomStream& rng) const;

 private:
  DrivingMeasure(MeasureKind kind, std::int64_t n, std::size_t batch, double delta);

  MeasureKind kind_;
  std::int64_t n_;
  std::size_t batch_;
  double delta_;
  std::int64_t split_;
};

/// One draw from the explicit per-coordinate coupling: E is uniform, B are
/// the Bernoulli(delta) re-route flags, E_plus the upper-block proposals,
/// and D[i] = B[i] ? E_plus[i] : E[i].
struct CoupledDraw {
  IndexVector e;
  IndexVector d;
  std::vector<bool> flips;
  std::vector<std::int64_t> upper_proposals;
};

IndexVector sample_uniform(std::int64_t n, std::size_t batch_size, RandomStream& rng);
IndexVector sample_perturbed(std::int64_t n, std::size_t batch_size, double delta,
                             RandomStream& rng);
CoupledDraw sample_coupled(std::int64_t n, std::size_t batch_size, double delta,
                           RandomStream& rng);

/// w_i = (1-delta)/n below the split, (1-delta)/n + delta/(n-s+1) from the
/// split up.
WeightVector coordinate_weights(std::int64_t n, double delta);

/// Exact total variation between the uniform and perturbed measures on
/// [n]^M. Both are exchangeable within each block, so the distance reduces
/// to the TV between Binomial(M, p0) and Binomial(M, p1) upper-block counts
/// with p0 = (n-s+1)/n and p1 = (1-delta)*p0 + delta. Log-gamma pmf
/// evaluation keeps this stable for M up to ~1e6.
TvResult tv_exact_measures(std::int64_t n, std::size_t batch_size, double delta);

/// 1 - (1-delta)^M: the no-flip probability complement of the coupling, an
/// upper bound on tv_exact_measures for matching parameters.
double tv_coupling_bound(std::size_t batch_size, double delta);

struct TvScalingRow {
  double alpha;       // requested TV level
  double delta_star;  // largest delta with tv_exact <= alpha (clamped to 1)
  double achieved_tv;
  double ratio;       // delta_star * sqrt(M) / alpha^2
};

/// For each alpha in (0, 1/2), binary-searches the delta at which the exact
/// TV reaches alpha and reports the empirical relation between delta, alpha
/// and the batch size. Search tolerance is 1e-6 on the TV value.
std::vector<TvScalingRow> tv_delta_probe(std::int64_t n, std::size_t batch_size,
                                         const std::vector<double>& alpha_grid);

/// Maximal coupling of the upper-block counts of two driving sequences of
/// total length `coordinate_count`: one uniform-driven, one perturbed. With
/// probability 1 - TV both counts agree and the two sequences can be made
/// identical; otherwise the counts (and so the sequences) differ. Count
/// pmfs are precomputed so one instance can serve many replicates.
class CoupledCountDistribution {
 public:
  CoupledCountDistribution(std::int64_t n, std::uint64_t coordinate_count, double delta);

  struct Draw {
    std::int64_t uniform_count;    // upper-block coordinates in the uniform sequence
    std::int64_t perturbed_count;  // ditto for the perturbed sequence
    bool identical;                // true iff the counts were drawn equal
  };

  Draw sample(RandomStream& rng) const;

  /// P[identical] = 1 - TV between the two count laws.
  double agreement_probability() const { return overlap_mass_; }
  std::uint64_t coordinate_count() const { return coordinate_count_; }

 private:
  std::uint64_t coordinate_count_;
  std::int64_t window_lo_;
  double overlap_mass_;
  std::vector<double> overlap_cdf_;    // scaled to end at overlap_mass_
  std::vector<double> residual0_cdf_;  // scaled to end at 1 - overlap_mass_
  std::vector<double> residual1_cdf_;
};

/// Streams the coordinates of a maximally-coupled pair of driving
/// sequences, one minibatch at a time. Marginals: the first sequence is
/// i.i.d. uniform on [n], the second i.i.d. from the perturbed measure.
class CoupledStreamSampler {
 public:
  CoupledStreamSampler(std::int64_t n, std::size_t batch_size, std::uint64_t steps,
                       const CoupledCountDistribution& counts, RandomStream& rng);

  /// Fills the next minibatch pair. Call exactly `steps` times.
  void next_pair(IndexVector& uniform_batch, IndexVector& perturbed_batch, RandomStream& rng);

  bool sequences_identical() const { return identical_; }

 private:
  std::int64_t sample_coordinate(std::uint64_t& remaining_upper, std::uint64_t& remaining_total,
                                 RandomStream& rng);

  std::int64_t n_;
  std::int64_t split_;
  std::size_t batch_;
  bool identical_;
  std::uint64_t remaining_upper_e_, remaining_total_e_;
  std::uint64_t remaining_upper_d_, remaining_total_d_;
};

}  // namespace sgldlab
