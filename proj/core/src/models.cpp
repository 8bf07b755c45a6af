#include "sgldlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sgldlab {

ExponentialFamilyModel gaussian_mean_model() {
  ExponentialFamilyModel model;
  model.suff_stat = [](double x) { return x; };
  model.log_partition = [](double theta) { return 0.5 * theta * theta; };
  model.log_partition_deriv = [](double theta) { return theta; };
  model.base_log_density = [](double x) {
    return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
  };
  model.sampler = [](double theta, RandomStream& rng) { return theta + rng.normal(); };
  model.name = "gaussian_mean";
  return model;
}

Dataset::Dataset(const ExponentialFamilyModel& model, std::vector<double> observations,
                 std::optional<double> generating_theta, std::optional<std::uint64_t> source_seed)
    : observations_(std::move(observations)),
      generating_theta_(generating_theta),
      source_seed_(source_seed),
      model_name_(model.name) {
  if (observations_.empty()) throw std::invalid_argument("Dataset: no observations");
  std::sort(observations_.begin(), observations_.end());
  suff_values_.resize(observations_.size());
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    suff_values_[i] = model.suff_stat(observations_[i]);
  }
  total_suff_ = std::accumulate(suff_values_.begin(), suff_values_.end(), 0.0);
}

Dataset make_dataset(const ExponentialFamilyModel& model, double theta0, std::int64_t n,
                     RandomStream& rng) {
  if (n < 1) throw std::invalid_argument("make_dataset: n must be >= 1");
  if (!model.sampler) {
    throw std::runtime_error("make_dataset: not implemented for model '" + model.name +
                             "' (no sampler)");
  }
  std::vector<double> obs(static_cast<std::size_t>(n));
  for (auto& x : obs) x = model.sampler(theta0, rng);
  return Dataset(model, std::move(obs), theta0, rng.master_seed());
}

void save_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset_csv: cannot open " + path);
  out << "# model=" << dataset.model_name() << " n=" << dataset.size();
  char buf[64];
  if (dataset.generating_theta()) {
    std::snprintf(buf, sizeof buf, "%.17g", *dataset.generating_theta());
    out << " theta0=" << buf;
  }
  if (dataset.source_seed()) out << " seed=" << *dataset.source_seed();
  out << "\nobservation\n";
  for (double x : dataset.observations()) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out << buf << "\n";
  }
}

Dataset load_dataset_csv(const ExponentialFamilyModel& model, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset_csv: cannot open " + path);
  std::string line;
  std::optional<double> theta0;
  std::optional<std::uint64_t> seed;
  std::vector<double> obs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream header(line.substr(1));
      std::string token;
      while (header >> token) {
        if (token.rfind("theta0=", 0) == 0) theta0 = std::stod(token.substr(7));
        if (token.rfind("seed=", 0) == 0) seed = std::stoull(token.substr(5));
      }
      continue;
    }
    if (line == "observation") continue;
    obs.push_back(std::stod(line));
  }
  return Dataset(model, std::move(obs), theta0, seed);
}

double prior_grad(const Prior& prior, double theta) {
  if (const auto* normal = std::get_if<NormalPrior>(&prior)) {
    return -(theta - normal->mean) / normal->variance;
  }
  return 0.0;
}

double GaussianPosterior::sd() const { return std::sqrt(variance); }

double sample(const GaussianPosterior& posterior, RandomStream& rng) {
  return posterior.mean + posterior.sd() * rng.normal();
}

GaussianPosterior posterior_exact(const Dataset& dataset, const Prior& prior, double shift) {
  const double n = static_cast<double>(dataset.size());
  const double shifted_suff = dataset.total_suff() + shift;
  GaussianPosterior post;
  if (std::holds_alternative<FlatPrior>(prior)) {
    if (dataset.size() < 1) throw std::invalid_argument("posterior_exact: flat prior needs n >= 1");
    post.mean = shifted_suff / n;
    post.variance = 1.0 / n;
  } else {
    const auto& normal = std::get<NormalPrior>(prior);
    if (normal.variance <= 0.0) {
      throw std::invalid_argument("posterior_exact: prior variance must be positive");
    }
    const double precision = n + 1.0 / normal.variance;
    post.mean = (normal.mean / normal.variance + shifted_suff) / precision;
    post.variance = 1.0 / precision;
  }
  return post;
}

double weighted_posterior_shift(const Dataset& dataset, const WeightVector& weights) {
  if (static_cast<std::int64_t>(weights.weights.size()) != dataset.size()) {
    throw std::invalid_argument("weighted_posterior: weight count != dataset size");
  }
  const double n = static_cast<double>(dataset.size());
  double weighted_suff = 0.0;
  for (std::size_t i = 0; i < weights.weights.size(); ++i) {
    weighted_suff += weights.weights[i] * dataset.suff_values()[i];
  }
  return n * weighted_suff - dataset.total_suff();
}

GaussianPosterior weighted_posterior(const Dataset& dataset, const WeightVector& weights,
                                     const Prior& prior) {
  return posterior_exact(dataset, prior, weighted_posterior_shift(dataset, weights));
}

namespace {

// upper-block mean minus full mean of the sufficient-statistic values
double block_mean_gap(const Dataset& dataset) {
  const std::int64_t n = dataset.size();
  const std::int64_t s = split_index(n);
  const auto& suff = dataset.suff_values();
  double upper_sum = 0.0;
  for (std::int64_t i = s; i <= n; ++i) upper_sum += suff[static_cast<std::size_t>(i - 1)];
  const double upper_mean = upper_sum / static_cast<double>(n - s + 1);
  const double full_mean = dataset.total_suff() / static_cast<double>(n);
  return upper_mean - full_mean;
}

}  // namespace

double effective_shift(const Dataset& dataset, double delta) {
  if (delta < 0.0 || delta > 1.0) throw std::invalid_argument("effective_shift: delta outside [0,1]");
  return delta * block_mean_gap(dataset);
}

double order_gap(const Dataset& dataset) { return std::abs(block_mean_gap(dataset)); }

}  // namespace sgldlab
