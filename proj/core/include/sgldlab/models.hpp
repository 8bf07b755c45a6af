#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sgldlab/measures.hpp"
#include "sgldlab/random.hpp"

namespace sgldlab {

/// One-parameter exponential family with density
/// h(x) * exp(theta * R(x) - A(theta)). The score in theta is
/// R(x) - A'(theta). Models that can generate data carry a sampler.
struct ExponentialFamilyModel {
  std::function<double(double)> suff_stat;           // R
  std::function<double(double)> log_partition;       // A
  std::function<double(double)> log_partition_deriv; // A'
  std::function<double(double)> base_log_density;    // log h
  std::function<double(double, RandomStream&)> sampler;  // x | theta; may be empty
  std::string name;

  double grad_log_density(double x, double theta) const {
    return suff_stat(x) - log_partition_deriv(theta);
  }
};

/// Gaussian location model: R(x) = x, A(theta) = theta^2/2, unit variance.
ExponentialFamilyModel gaussian_mean_model();

/// Observations sorted ascending with their sufficient-statistic values and
/// total S. Immutable after construction.
class Dataset {
 public:
  /// Sorts the observations and evaluates the model's sufficient statistic.
  Dataset(const ExponentialFamilyModel& model, std::vector<double> observations,
          std::optional<double> generating_theta = std::nullopt,
          std::optional<std::uint64_t> source_seed = std::nullopt);

  std::int64_t size() const { return static_cast<std::int64_t>(observations_.size()); }
  const std::vector<double>& observations() const { return observations_; }
  const std::vector<double>& suff_values() const { return suff_values_; }
  double total_suff() const { return total_suff_; }
  std::optional<double> generating_theta() const { return generating_theta_; }
  std::optional<std::uint64_t> source_seed() const { return source_seed_; }
  const std::string& model_name() const { return model_name_; }

  /// Sufficient-statistic value for a 1-based data index.
  double suff_at(std::int64_t index) const { return suff_values_[static_cast<std::size_t>(index - 1)]; }

 private:
  std::vector<double> observations_;
  std::vector<double> suff_values_;
  double total_suff_;
  std::optional<double> generating_theta_;
  std::optional<std::uint64_t> source_seed_;
  std::string model_name_;
};

/// n i.i.d. draws from p(. | theta0), sorted ascending. Throws
/// std::runtime_error for models without a sampler.
Dataset make_dataset(const ExponentialFamilyModel& model, double theta0, std::int64_t n,
                     RandomStream& rng);

/// CSV round trip. The header comment records n, theta0, the model name and
/// the source seed; the body is one observation per row.
void save_dataset_csv(const Dataset& dataset, const std::string& path);
Dataset load_dataset_csv(const ExponentialFamilyModel& model, const std::string& path);

struct FlatPrior {};
struct NormalPrior {
  double mean = 0.0;
  double variance = 1.0;
};
using Prior = std::variant<FlatPrior, NormalPrior>;

/// d/dtheta log prior(theta); zero for the flat prior.
double prior_grad(const Prior& prior, double theta);

/// Posterior of the Gaussian location model. Exact for flat and normal
/// conjugate priors.
struct GaussianPosterior {
  double mean = 0.0;
  double variance = 1.0;

  double sd() const;
};

double sample(const GaussianPosterior& posterior, RandomStream& rng);

/// Posterior with the sufficient statistic shifted: S -> S + shift.
/// shift = 0 gives the unperturbed posterior. Flat prior requires n >= 1.
GaussianPosterior posterior_exact(const Dataset& dataset, const Prior& prior, double shift = 0.0);

/// Posterior of the reweighted likelihood prod_i p(X_i|theta)^{n w_i}.
/// For the Gaussian model this equals posterior_exact with
/// shift = n * sum_i w_i R(X_i) - S.
GaussianPosterior weighted_posterior(const Dataset& dataset, const WeightVector& weights,
                                     const Prior& prior);

/// The sufficient-statistic shift the weighted likelihood applies to S,
/// i.e. n * sum_i w_i R(X_i) - S.
double weighted_posterior_shift(const Dataset& dataset, const WeightVector& weights);

/// Per-coordinate expected sufficient-statistic perturbation induced by the
/// perturbed driving measure:
/// delta * (upper-block mean of R - full mean of R).
/// The weighted-posterior shift equals n times this value.
double effective_shift(const Dataset& dataset, double delta);

/// |upper-block mean of R - full mean of R|, the order-statistics gap the
/// dataset quality condition bounds.
double order_gap(const Dataset& dataset);

}  // namespace sgldlab
