#include "sgldlab/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sgldlab/tv_metrics.hpp"

namespace sgldlab {

std::string to_string(AssumptionId id) {
  switch (id) {
    case AssumptionId::kA1: return "A1";
    case AssumptionId::kA2: return "A2";
    case AssumptionId::kA3: return "A3";
  }
  return "?";
}

Schedule log_schedule() {
  return [](std::int64_t n) { return std::log(static_cast<double>(n)); };
}

Schedule inverse_log_schedule() {
  return [](std::int64_t n) { return 1.0 / std::log(static_cast<double>(n)); };
}

namespace {

TrendSummary summarize_trend(const std::vector<double>& values) {
  TrendSummary trend;
  if (values.empty()) return trend;
  trend.first = values.front();
  trend.last = values.back();
  trend.nonincreasing = true;
  trend.nondecreasing = true;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[i - 1] + 1e-12) trend.nonincreasing = false;
    if (values[i] < values[i - 1] - 1e-12) trend.nondecreasing = false;
  }
  return trend;
}

// Runs `body(trial)` for every trial, optionally across threads; results
// land in per-trial slots so the aggregation order is fixed.
void for_each_trial(std::size_t trials, unsigned threads,
                    const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || trials < 2) {
    for (std::size_t t = 0; t < trials; ++t) body(t);
    return;
  }
  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(trials));
  const std::size_t chunk = (trials + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * chunk;
    const std::size_t end = std::min(trials, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      for (std::size_t t = begin; t < end; ++t) body(t);
    });
  }
  for (auto& th : pool) th.join();
}

constexpr std::uint64_t kStreamBlock = 1ull << 32;

struct SensitivityStats {
  double tv_mean_scale;  // perturbed posterior mean shifted by delta_n
  double tv_suff_scale;  // sufficient statistic shifted by delta_n
};

SensitivityStats sensitivity_for_dataset(const Dataset& data, double delta_n) {
  const GaussianPosterior post = posterior_exact(data, FlatPrior{}, 0.0);
  GaussianPosterior mean_shifted = post;
  mean_shifted.mean += delta_n;
  SensitivityStats stats;
  stats.tv_mean_scale = tv_gaussian_exact(post, mean_shifted).value;
  stats.tv_suff_scale =
      tv_gaussian_exact(post, posterior_exact(data, FlatPrior{}, delta_n)).value;
  return stats;
}

}  // namespace

AssumptionReport check_assumption1(const std::vector<std::int64_t>& n_grid,
                                   const Schedule& c_schedule, std::size_t trials,
                                   std::uint64_t master_seed, double gamma, unsigned threads) {
  if (trials < 1) throw std::invalid_argument("check_assumption1: trials must be >= 1");
  AssumptionReport report;
  report.id = AssumptionId::kA1;
  report.n_grid = n_grid;
  report.threshold = gamma;
  const ExponentialFamilyModel model = gaussian_mean_model();

  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const std::int64_t n = n_grid[gi];
    const double delta_n = c_schedule(n) / std::sqrt(static_cast<double>(n));
    std::vector<double> tv_mean(trials), tv_suff(trials);
    for_each_trial(trials, threads, [&](std::size_t t) {
      RandomStream rng(master_seed, gi * kStreamBlock + t);
      const Dataset data = make_dataset(model, 0.0, n, rng);
      const auto stats = sensitivity_for_dataset(data, delta_n);
      tv_mean[t] = stats.tv_mean_scale;
      tv_suff[t] = stats.tv_suff_scale;
    });
    const double min_mean = *std::min_element(tv_mean.begin(), tv_mean.end());
    const double min_suff = *std::min_element(tv_suff.begin(), tv_suff.end());
    const double sd = 1.0 / std::sqrt(static_cast<double>(n));
    report.statistic_per_n.push_back(min_mean);
    report.alt_statistic_per_n.push_back(min_suff);
    report.moment_bound_per_n.push_back(tv_moment_lower_bound(0.0, sd, delta_n, sd).value);
    report.verdict_per_n.push_back(min_mean >= gamma);
  }
  report.trend = summarize_trend(report.statistic_per_n);
  return report;
}

AssumptionReport check_assumption2(const std::vector<std::int64_t>& n_grid,
                                   const Schedule& c_schedule, std::size_t trials,
                                   std::uint64_t master_seed, double gamma, unsigned threads) {
  if (trials < 1) throw std::invalid_argument("check_assumption2: trials must be >= 1");
  AssumptionReport report;
  report.id = AssumptionId::kA2;
  report.n_grid = n_grid;
  report.threshold = gamma;
  const ExponentialFamilyModel model = gaussian_mean_model();

  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const std::int64_t n = n_grid[gi];
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double delta_n = c_schedule(n) / sqrt_n;
    if (delta_n == 0.0) {  // degenerate perturbation: excluded from verdicts
      report.statistic_per_n.push_back(0.0);
      report.alt_statistic_per_n.push_back(0.0);
      report.verdict_per_n.push_back(false);
      continue;
    }
    std::vector<double> ratio_mean(trials), ratio_suff(trials);
    for_each_trial(trials, threads, [&](std::size_t t) {
      RandomStream rng(master_seed, gi * kStreamBlock + t);
      const Dataset data = make_dataset(model, 0.0, n, rng);
      const auto stats = sensitivity_for_dataset(data, delta_n);
      ratio_mean[t] = stats.tv_mean_scale / (delta_n * sqrt_n);
      ratio_suff[t] = stats.tv_suff_scale / delta_n;
    });
    const double min_mean = *std::min_element(ratio_mean.begin(), ratio_mean.end());
    const double min_suff = *std::min_element(ratio_suff.begin(), ratio_suff.end());
    report.statistic_per_n.push_back(min_mean);
    report.alt_statistic_per_n.push_back(min_suff);
    report.verdict_per_n.push_back(min_mean >= gamma);
  }
  report.trend = summarize_trend(report.statistic_per_n);
  return report;
}

AssumptionReport check_assumption3(double theta0, const std::vector<std::int64_t>& n_grid,
                                   double eta, std::size_t trials, std::uint64_t master_seed,
                                   unsigned threads) {
  if (trials < 1) throw std::invalid_argument("check_assumption3: trials must be >= 1");
  if (eta < 0.0) throw std::invalid_argument("check_assumption3: eta must be >= 0");
  AssumptionReport report;
  report.id = AssumptionId::kA3;
  report.n_grid = n_grid;
  report.threshold = eta;
  const ExponentialFamilyModel model = gaussian_mean_model();

  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const std::int64_t n = n_grid[gi];
    std::vector<unsigned char> below_const(trials), below_literal(trials);
    for_each_trial(trials, threads, [&](std::size_t t) {
      RandomStream rng(master_seed, gi * kStreamBlock + t);
      const Dataset data = make_dataset(model, theta0, n, rng);
      const double gap = order_gap(data);
      below_const[t] = gap < eta ? 1 : 0;
      below_literal[t] = gap < eta * static_cast<double>(n) ? 1 : 0;
    });
    const double inv = 1.0 / static_cast<double>(trials);
    double p_const = 0.0, p_literal = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      p_const += below_const[t];
      p_literal += below_literal[t];
    }
    report.statistic_per_n.push_back(p_const * inv);
    report.alt_statistic_per_n.push_back(p_literal * inv);
    report.verdict_per_n.push_back(p_const * inv <= 0.01);
  }
  report.trend = summarize_trend(report.statistic_per_n);
  return report;
}

std::string format_summary(const AssumptionReport& report) {
  std::ostringstream out;
  const bool is_a3 = report.id == AssumptionId::kA3;
  out << "assumption " << to_string(report.id) << " (threshold "
      << (is_a3 ? "eta=" : "gamma=") << report.threshold << ")\n";
  for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
    char line[256];
    if (is_a3) {
      std::snprintf(line, sizeof line,
                    "  n=%-8lld P[gap<eta]=%-10.6g P[gap<eta*n]=%-10.6g %s\n",
                    static_cast<long long>(report.n_grid[i]), report.statistic_per_n[i],
                    report.alt_statistic_per_n[i],
                    report.verdict_per_n[i] ? "consistent" : "NOT consistent");
    } else {
      std::snprintf(line, sizeof line,
                    "  n=%-8lld mean-scale=%-10.6g suff-scale=%-10.6g %s\n",
                    static_cast<long long>(report.n_grid[i]), report.statistic_per_n[i],
                    report.alt_statistic_per_n[i],
                    report.verdict_per_n[i] ? "consistent" : "NOT consistent");
    }
    out << line;
    if (!report.moment_bound_per_n.empty()) {
      char extra[128];
      std::snprintf(extra, sizeof extra, "    moment-bound=%.6g\n", report.moment_bound_per_n[i]);
      out << extra;
    }
  }
  out << "  trend: first=" << report.trend.first << " last=" << report.trend.last
      << (report.trend.nonincreasing ? " (nonincreasing)" : "")
      << (report.trend.nondecreasing ? " (nondecreasing)" : "") << "\n";
  return out.str();
}

void write_report_csv(const AssumptionReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report_csv: cannot open " + path);
  out << "n,statistic,threshold,verdict,alt_statistic";
  if (!report.moment_bound_per_n.empty()) out << ",moment_bound";
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
    out << report.n_grid[i] << ",";
    std::snprintf(buf, sizeof buf, "%.17g", report.statistic_per_n[i]);
    out << buf << ",";
    std::snprintf(buf, sizeof buf, "%.17g", report.threshold);
    out << buf << "," << (report.verdict_per_n[i] ? 1 : 0) << ",";
    std::snprintf(buf, sizeof buf, "%.17g", report.alt_statistic_per_n[i]);
    out << buf;
    if (!report.moment_bound_per_n.empty()) {
      std::snprintf(buf, sizeof buf, "%.17g", report.moment_bound_per_n[i]);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace sgldlab
