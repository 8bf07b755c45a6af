#include "sgldlab/tv_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sgldlab {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

void check_posterior(const GaussianPosterior& p) {
  if (!(p.variance > 0.0)) {
    throw std::invalid_argument("tv_gaussian_exact: variance must be positive");
  }
}

template <typename F>
double simpson_rec(const F& f, double a, double fa, double b, double fb, double m, double fm,
                   double whole, double eps, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, fa, m, fm, lm, flm, left, eps * 0.5, depth - 1) +
         simpson_rec(f, m, fm, b, fb, rm, frm, right, eps * 0.5, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double eps) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, fa, b, fb, m, fm, whole, eps, 48);
}

// Points where the two normal densities cross, for kink-free quadrature.
std::vector<double> density_crossings(const GaussianPosterior& p, const GaussianPosterior& q) {
  const double v1 = p.variance, v2 = q.variance;
  const double m1 = p.mean, m2 = q.mean;
  std::vector<double> roots;
  const double a = 0.5 / v2 - 0.5 / v1;
  const double b = m1 / v1 - m2 / v2;
  const double c = 0.5 * m2 * m2 / v2 - 0.5 * m1 * m1 / v1 + 0.5 * std::log(v2 / v1);
  if (std::abs(a) < 1e-300) {
    if (std::abs(b) > 0.0) roots.push_back(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      roots.push_back((-b - sq) / (2.0 * a));
      roots.push_back((-b + sq) / (2.0 * a));
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

struct Grid {
  double lo = 0.0;
  double width = 0.0;
  std::size_t bins = 0;

  double hi() const { return lo + width * static_cast<double>(bins); }
};

std::size_t resolve_bins(const BinRule& rule, double span, double sample_sd, std::size_t count) {
  if (rule.kind == BinRule::Kind::kFixed) {
    if (rule.bins == 0) throw std::invalid_argument("BinRule: fixed bin count must be positive");
    return rule.bins;
  }
  // Scott's rule width, clamped to something usable
  const double width = 3.49 * sample_sd / std::cbrt(static_cast<double>(count));
  if (!(width > 0.0)) return 50;
  const double k = std::ceil(span / width);
  return static_cast<std::size_t>(std::clamp(k, 1.0, 100000.0));
}

double sample_sd(std::span<const double> xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<double> histogram_masses(std::span<const double> xs, const Grid& grid,
                                     double* out_of_range) {
  std::vector<double> mass(grid.bins, 0.0);
  std::size_t outside = 0;
  for (double x : xs) {
    const double pos = (x - grid.lo) / grid.width;
    if (pos < 0.0 || pos >= static_cast<double>(grid.bins)) {
      ++outside;
      continue;
    }
    mass[static_cast<std::size_t>(pos)] += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (auto& m : mass) m *= inv;
  *out_of_range = static_cast<double>(outside) * inv;
  return mass;
}

}  // namespace

TvResult tv_gaussian_exact(const GaussianPosterior& a, const GaussianPosterior& b) {
  check_posterior(a);
  check_posterior(b);
  TvResult result;
  result.method = TvMethod::kExactGaussian;
  const double rel_var_gap = std::abs(a.variance - b.variance) /
                             std::max(a.variance, b.variance);
  if (rel_var_gap <= 1e-12) {
    const double d = std::abs(a.mean - b.mean) / (2.0 * a.sd());
    result.value = normal_cdf(d) - normal_cdf(-d);
  } else {
    result.value = tv_gaussian_numeric(a, b);
  }
  result.value = std::clamp(result.value, 0.0, 1.0);
  return result;
}

double tv_gaussian_numeric(const GaussianPosterior& a, const GaussianPosterior& b) {
  check_posterior(a);
  check_posterior(b);
  const double sd_max = std::max(a.sd(), b.sd());
  const double lo = std::min(a.mean, b.mean) - 10.0 * sd_max;
  const double hi = std::max(a.mean, b.mean) + 10.0 * sd_max;
  std::vector<double> knots = {lo};
  for (double r : density_crossings(a, b)) {
    if (r > lo && r < hi) knots.push_back(r);
  }
  knots.push_back(hi);
  const auto integrand = [&](double x) {
    return std::abs(normal_pdf(x, a.mean, a.sd()) - normal_pdf(x, b.mean, b.sd()));
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    total += adaptive_simpson(integrand, knots[i], knots[i + 1], 1e-9 / static_cast<double>(knots.size()));
  }
  return 0.5 * total;
}

TvResult tv_moment_lower_bound(double mean_p, double sd_p, double mean_q, double sd_q) {
  if (sd_p < 0.0 || sd_q < 0.0) {
    throw std::invalid_argument("tv_moment_lower_bound: standard deviations must be >= 0");
  }
  const double gap = mean_p - mean_q;
  TvResult result;
  result.method = TvMethod::kMomentLowerBound;
  if (gap == 0.0) {
    result.value = 0.0;
    return result;
  }
  const double gap_sq = gap * gap;
  const double spread = (sd_p + sd_q) * (sd_p + sd_q);
  result.value = gap_sq / (spread + gap_sq);
  return result;
}

TvResult tv_empirical_vs_gaussian(std::span<const double> samples, const GaussianPosterior& target,
                                  const BinRule& rule) {
  check_posterior(target);
  if (samples.size() < 100) {
    throw std::invalid_argument("tv_empirical_vs_gaussian: need at least 100 samples");
  }
  Grid grid;
  grid.lo = target.mean - 6.0 * target.sd();
  const double hi = target.mean + 6.0 * target.sd();
  grid.bins = resolve_bins(rule, hi - grid.lo, sample_sd(samples), samples.size());
  grid.width = (hi - grid.lo) / static_cast<double>(grid.bins);

  double emp_outside = 0.0;
  const auto emp = histogram_masses(samples, grid, &emp_outside);

  double l1 = 0.0, var_sum = 0.0, gauss_inside = 0.0;
  const double count = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < grid.bins; ++k) {
    const double a = grid.lo + grid.width * static_cast<double>(k);
    const double g = normal_cdf((a + grid.width - target.mean) / target.sd()) -
                     normal_cdf((a - target.mean) / target.sd());
    gauss_inside += g;
    l1 += std::abs(emp[k] - g);
    var_sum += emp[k] * (1.0 - emp[k]) / count;
  }
  const double gauss_outside = std::max(0.0, 1.0 - gauss_inside);
  l1 += emp_outside + gauss_outside;
  var_sum += emp_outside * (1.0 - emp_outside) / count;

  TvResult result;
  result.method = TvMethod::kBinnedEmpirical;
  result.value = std::clamp(0.5 * l1, 0.0, 1.0);
  result.mc_error = 0.5 * std::sqrt(var_sum);
  result.bin_count = grid.bins;
  return result;
}

TvResult tv_empirical_two_sample(std::span<const double> samples_a,
                                 std::span<const double> samples_b, const BinRule& rule) {
  if (samples_a.size() < 100 || samples_b.size() < 100) {
    throw std::invalid_argument("tv_empirical_two_sample: need at least 100 samples per side");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : samples_a) { lo = std::min(lo, x); hi = std::max(hi, x); }
  for (double x : samples_b) { lo = std::min(lo, x); hi = std::max(hi, x); }
  if (!(hi > lo)) {  // all mass at one point: identical histograms
    TvResult degenerate;
    degenerate.method = TvMethod::kBinnedEmpirical;
    degenerate.value = 0.0;
    degenerate.mc_error = 0.0;
    degenerate.bin_count = 1;
    return degenerate;
  }

  std::vector<double> pooled;
  pooled.reserve(samples_a.size() + samples_b.size());
  pooled.insert(pooled.end(), samples_a.begin(), samples_a.end());
  pooled.insert(pooled.end(), samples_b.begin(), samples_b.end());

  Grid grid;
  grid.lo = lo;
  grid.bins = resolve_bins(rule, hi - lo, sample_sd(pooled), pooled.size());
  // nudge the top edge so the maximum lands inside the last bin
  grid.width = (hi - lo) * (1.0 + 1e-12) / static_cast<double>(grid.bins);

  double out_a = 0.0, out_b = 0.0;
  const auto mass_a = histogram_masses(samples_a, grid, &out_a);
  const auto mass_b = histogram_masses(samples_b, grid, &out_b);

  double l1 = 0.0, var_sum = 0.0;
  const double na = static_cast<double>(samples_a.size());
  const double nb = static_cast<double>(samples_b.size());
  for (std::size_t k = 0; k < grid.bins; ++k) {
    l1 += std::abs(mass_a[k] - mass_b[k]);
    var_sum += mass_a[k] * (1.0 - mass_a[k]) / na + mass_b[k] * (1.0 - mass_b[k]) / nb;
  }

  TvResult result;
  result.method = TvMethod::kBinnedEmpirical;
  result.value = std::clamp(0.5 * l1, 0.0, 1.0);
  result.mc_error = 0.5 * std::sqrt(var_sum);
  result.bin_count = grid.bins;
  return result;
}

}  // namespace sgldlab
