#include "sgldlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sgldlab {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_measure_args(std::int64_t n, std::size_t batch_size, double delta) {
  require(n >= 1, "driving measure: n must be >= 1");
  require(batch_size >= 1, "driving measure: batch size must be >= 1");
  require(delta >= 0.0 && delta <= 1.0, "driving measure: delta outside [0,1]");
}

double log_binomial_pmf(std::uint64_t k, std::uint64_t m, double p) {
  const double dk = static_cast<double>(k);
  const double dm = static_cast<double>(m);
  const double log_choose =
      std::lgamma(dm + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dm - dk + 1.0);
  double log_p_term = 0.0;
  if (k > 0) log_p_term += dk * std::log(p);
  if (k < m) log_p_term += (dm - dk) * std::log1p(-p);
  return log_choose + log_p_term;
}

double binomial_pmf(std::uint64_t k, std::uint64_t m, double p) {
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == m ? 1.0 : 0.0;
  return std::exp(log_binomial_pmf(k, m, p));
}

// k-window containing all but ~1e-30 of both pmfs; full range for small m.
std::pair<std::uint64_t, std::uint64_t> pmf_window(std::uint64_t m, double pa, double pb) {
  if (m <= 4096) return {0, m};
  auto bounds = [m](double p) {
    const double mean = static_cast<double>(m) * p;
    const double sd = std::sqrt(static_cast<double>(m) * p * (1.0 - p));
    const double lo = std::floor(mean - 12.0 * sd - 8.0);
    const double hi = std::ceil(mean + 12.0 * sd + 8.0);
    return std::pair<double, double>(lo, hi);
  };
  const auto [lo_a, hi_a] = bounds(pa);
  const auto [lo_b, hi_b] = bounds(pb);
  const double lo = std::max(0.0, std::min(lo_a, lo_b));
  const double hi = std::min(static_cast<double>(m), std::max(hi_a, hi_b));
  return {static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(hi)};
}

// Upper-block hit probabilities of the two measures.
std::pair<double, double> block_probabilities(std::int64_t n, double delta) {
  const std::int64_t s = split_index(n);
  const double p0 = static_cast<double>(n - s + 1) / static_cast<double>(n);
  const double p1 = (1.0 - delta) * p0 + delta;
  return {p0, p1};
}

}  // namespace

std::int64_t split_index(std::int64_t n) {
  return (n + 1) / 2;  // ceil(n/2)
}

void validate(const IndexVector& iv) {
  for (std::int64_t e : iv.entries) {
    if (e < 1 || e > iv.n) {
      throw std::invalid_argument("IndexVector: entry " + std::to_string(e) +
                                  " outside [1, " + std::to_string(iv.n) + "]");
    }
  }
}

DrivingMeasure::DrivingMeasure(MeasureKind kind, std::int64_t n, std::size_t batch, double delta)
    : kind_(kind), n_(n), batch_(batch), delta_(delta), split_(split_index(n)) {}

DrivingMeasure DrivingMeasure::uniform(std::int64_t n, std::size_t batch_size) {
  check_measure_args(n, batch_size, 0.0);
  return DrivingMeasure(MeasureKind::kUniform, n, batch_size, 0.0);
}

DrivingMeasure DrivingMeasure::perturbed(std::int64_t n, std::size_t batch_size, double delta) {
  check_measure_args(n, batch_size, delta);
  return DrivingMeasure(MeasureKind::kPerturbed, n, batch_size, delta);
}

WeightVector DrivingMeasure::coordinate_weights() const {
  return sgldlab::coordinate_weights(n_, delta_);
}

IndexVector DrivingMeasure::sample(RandomStream& rng) const {
  IndexVector iv;
  sample(iv, rng);
  return iv;
}

void DrivingMeasure::sample(IndexVector& out, RandomStream& rng) const {
  out.n = n_;
  out.entries.resize(batch_);
  for (std::size_t i = 0; i < batch_; ++i) {
    if (kind_ == MeasureKind::kPerturbed && rng.bernoulli(delta_)) {
      out.entries[i] = rng.uniform_int(split_, n_);
    } else {
      out.entries[i] = rng.uniform_int(1, n_);
    }
  }
}

IndexVector sample_uniform(std::int64_t n, std::size_t batch_size, RandomStream& rng) {
  return DrivingMeasure::uniform(n, batch_size).sample(rng);
}

IndexVector sample_perturbed(std::int64_t n, std::size_t batch_size, double delta,
                             RandomStream& rng) {
  return DrivingMeasure::perturbed(n, batch_size, delta).sample(rng);
}

CoupledDraw sample_coupled(std::int64_t n, std::size_t batch_size, double delta,
                           RandomStream& rng) {
  check_measure_args(n, batch_size, delta);
  const std::int64_t s = split_index(n);
  CoupledDraw draw;
  draw.e.n = n;
  draw.d.n = n;
  draw.e.entries.resize(batch_size);
  draw.d.entries.resize(batch_size);
  draw.flips.resize(batch_size);
  draw.upper_proposals.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    draw.e.entries[i] = rng.uniform_int(1, n);
    draw.flips[i] = rng.bernoulli(delta);
    draw.upper_proposals[i] = rng.uniform_int(s, n);
    draw.d.entries[i] = draw.flips[i] ? draw.upper_proposals[i] : draw.e.entries[i];
  }
  return draw;
}

WeightVector coordinate_weights(std::int64_t n, double delta) {
  require(n >= 1, "coordinate_weights: n must be >= 1");
  require(delta >= 0.0 && delta <= 1.0, "coordinate_weights: delta outside [0,1]");
  const std::int64_t s = split_index(n);
  WeightVector wv;
  wv.weights.assign(static_cast<std::size_t>(n), (1.0 - delta) / static_cast<double>(n));
  const double upper_extra = delta / static_cast<double>(n - s + 1);
  for (std::int64_t i = s; i <= n; ++i) {
    wv.weights[static_cast<std::size_t>(i - 1)] += upper_extra;
  }
  return wv;
}

TvResult tv_exact_measures(std::int64_t n, std::size_t batch_size, double delta) {
  check_measure_args(n, batch_size, delta);
  const auto [p0, p1] = block_probabilities(n, delta);
  const std::uint64_t m = batch_size;
  const auto [k_lo, k_hi] = pmf_window(m, p0, p1);
  double l1 = 0.0;
  for (std::uint64_t k = k_lo; k <= k_hi; ++k) {
    l1 += std::abs(binomial_pmf(k, m, p0) - binomial_pmf(k, m, p1));
  }
  TvResult result;
  result.value = 0.5 * l1;
  result.method = TvMethod::kBinomialReduction;
  return result;
}

double tv_coupling_bound(std::size_t batch_size, double delta) {
  require(delta >= 0.0 && delta <= 1.0, "tv_coupling_bound: delta outside [0,1]");
  return 1.0 - std::pow(1.0 - delta, static_cast<double>(batch_size));
}

std::vector<TvScalingRow> tv_delta_probe(std::int64_t n, std::size_t batch_size,
                                         const std::vector<double>& alpha_grid) {
  std::vector<TvScalingRow> rows;
  rows.reserve(alpha_grid.size());
  for (double alpha : alpha_grid) {
    require(alpha > 0.0 && alpha < 0.5, "tv_delta_probe: alpha must lie in (0, 1/2)");
    TvScalingRow row;
    row.alpha = alpha;
    const double tv_at_one = tv_exact_measures(n, batch_size, 1.0).value;
    if (tv_at_one <= alpha) {
      row.delta_star = 1.0;
      row.achieved_tv = tv_at_one;
    } else {
      // tv is monotone in delta; keep lo on the feasible side
      double lo = 0.0, hi = 1.0;
      double tv_lo = 0.0;
      for (int iter = 0; iter < 80; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double tv_mid = tv_exact_measures(n, batch_size, mid).value;
        if (tv_mid <= alpha) {
          lo = mid;
          tv_lo = tv_mid;
        } else {
          hi = mid;
        }
        if (std::abs(tv_mid - alpha) <= 1e-6 && tv_mid <= alpha) break;
      }
      row.delta_star = lo;
      row.achieved_tv = tv_lo;
    }
    row.ratio = row.delta_star * std::sqrt(static_cast<double>(batch_size)) / (alpha * alpha);
    rows.push_back(row);
  }
  return rows;
}

CoupledCountDistribution::CoupledCountDistribution(std::int64_t n, std::uint64_t coordinate_count,
                                                   double delta)
    : coordinate_count_(coordinate_count) {
  check_measure_args(n, std::max<std::uint64_t>(coordinate_count, 1), delta);
  const auto [p0, p1] = block_probabilities(n, delta);
  if (coordinate_count == 0) {
    window_lo_ = 0;
    overlap_mass_ = 1.0;
    overlap_cdf_ = {1.0};
    residual0_cdf_ = {0.0};
    residual1_cdf_ = {0.0};
    return;
  }
  const auto [k_lo, k_hi] = pmf_window(coordinate_count, p0, p1);
  window_lo_ = static_cast<std::int64_t>(k_lo);
  const std::size_t width = static_cast<std::size_t>(k_hi - k_lo) + 1;
  overlap_cdf_.resize(width);
  residual0_cdf_.resize(width);
  residual1_cdf_.resize(width);
  double acc_min = 0.0, acc_r0 = 0.0, acc_r1 = 0.0;
  for (std::size_t i = 0; i < width; ++i) {
    const std::uint64_t k = k_lo + i;
    const double f0 = binomial_pmf(k, coordinate_count, p0);
    const double f1 = binomial_pmf(k, coordinate_count, p1);
    const double mn = std::min(f0, f1);
    acc_min += mn;
    acc_r0 += f0 - mn;
    acc_r1 += f1 - mn;
    overlap_cdf_[i] = acc_min;
    residual0_cdf_[i] = acc_r0;
    residual1_cdf_[i] = acc_r1;
  }
  overlap_mass_ = acc_min;
}

CoupledCountDistribution::Draw CoupledCountDistribution::sample(RandomStream& rng) const {
  Draw draw;
  if (coordinate_count_ == 0) {
    draw.uniform_count = 0;
    draw.perturbed_count = 0;
    draw.identical = true;
    return draw;
  }
  auto pick = [this](const std::vector<double>& cdf, double target) {
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const std::size_t i = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    return window_lo_ + static_cast<std::int64_t>(i);
  };
  const double u = rng.uniform();
  const double res0_total = residual0_cdf_.back();
  const double res1_total = residual1_cdf_.back();
  if (u < overlap_mass_ || res0_total <= 0.0 || res1_total <= 0.0) {
    const std::int64_t k = pick(overlap_cdf_, std::min(u, overlap_mass_));
    draw.uniform_count = k;
    draw.perturbed_count = k;
    draw.identical = true;
  } else {
    draw.uniform_count = pick(residual0_cdf_, rng.uniform() * res0_total);
    draw.perturbed_count = pick(residual1_cdf_, rng.uniform() * res1_total);
    draw.identical = false;
  }
  return draw;
}

CoupledStreamSampler::CoupledStreamSampler(std::int64_t n, std::size_t batch_size,
                                           std::uint64_t steps,
                                           const CoupledCountDistribution& counts,
                                           RandomStream& rng)
    : n_(n), split_(split_index(n)), batch_(batch_size) {
  const std::uint64_t total = static_cast<std::uint64_t>(batch_size) * steps;
  if (counts.coordinate_count() != total) {
    throw std::invalid_argument("CoupledStreamSampler: count distribution sized for a different run");
  }
  const auto draw = counts.sample(rng);
  identical_ = draw.identical;
  remaining_upper_e_ = static_cast<std::uint64_t>(draw.uniform_count);
  remaining_total_e_ = total;
  remaining_upper_d_ = static_cast<std::uint64_t>(draw.perturbed_count);
  remaining_total_d_ = total;
}

std::int64_t CoupledStreamSampler::sample_coordinate(std::uint64_t& remaining_upper,
                                                     std::uint64_t& remaining_total,
                                                     RandomStream& rng) {
  if (remaining_total == 0) {
    throw std::logic_error("CoupledStreamSampler: stream exhausted");
  }
  // sequentially uniform placement of the remaining upper-block slots
  const bool upper =
      rng.uniform() * static_cast<double>(remaining_total) < static_cast<double>(remaining_upper);
  --remaining_total;
  if (upper) {
    --remaining_upper;
    return rng.uniform_int(split_, n_);
  }
  return rng.uniform_int(1, split_ - 1);
}

void CoupledStreamSampler::next_pair(IndexVector& uniform_batch, IndexVector& perturbed_batch,
                                     RandomStream& rng) {
  uniform_batch.n = n_;
  perturbed_batch.n = n_;
  uniform_batch.entries.resize(batch_);
  perturbed_batch.entries.resize(batch_);
  for (std::size_t i = 0; i < batch_; ++i) {
    uniform_batch.entries[i] = sample_coordinate(remaining_upper_e_, remaining_total_e_, rng);
  }
  if (identical_) {
    perturbed_batch.entries = uniform_batch.entries;
    remaining_upper_d_ = remaining_upper_e_;
    remaining_total_d_ = remaining_total_e_;
  } else {
    for (std::size_t i = 0; i < batch_; ++i) {
      perturbed_batch.entries[i] = sample_coordinate(remaining_upper_d_, remaining_total_d_, rng);
    }
  }
}

std::string to_string(TvMethod method) {
  switch (method) {
    case TvMethod::kExactGaussian: return "exact-gaussian";
    case TvMethod::kMomentLowerBound: return "moment-lower-bound";
    case TvMethod::kBinnedEmpirical: return "binned-empirical";
    case TvMethod::kBinomialReduction: return "binomial-reduction";
  }
  return "unknown";
}

}  // namespace sgldlab
