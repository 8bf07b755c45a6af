#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "sgldlab/measures.hpp"
#include "sgldlab/models.hpp"
#include "sgldlab/random.hpp"

namespace sgldlab {

/// Auxiliary chain component of the generic forward-mapping sampler.
/// SGLD carries none, so this is an empty placeholder kept so the chain
/// state mirrors the (theta, r) pair of the generic algorithm.
struct AuxState {};

struct PointInit {
  double theta = 0.0;
};
struct PosteriorInit {};  // exact posterior draw (flat-prior shift 0)
using InitialDistribution = std::variant<PointInit, PosteriorInit>;

/// Step-noise convention. The forward map adds a standard normal as
/// written; the sqrt(step) option rescales it to the usual discretized
/// Langevin noise for sanity checks against the full-gradient sampler.
enum class NoiseScale { kUnit, kSqrtStep };

struct SgldConfig {
  double step_size = 0.01;         // epsilon > 0
  std::size_t minibatch_size = 1;  // M >= 1
  std::size_t horizon = 0;         // T >= 0
  const Dataset* dataset = nullptr;
  const ExponentialFamilyModel* model = nullptr;
  Prior prior = FlatPrior{};
  /// d/dtheta log prior; when empty the gradient of `prior` is used.
  std::function<double(double)> prior_gradient;
  /// Driving measure; defaults to uniform over [n]^M when unset.
  std::optional<DrivingMeasure> measure;
  InitialDistribution init = PosteriorInit{};
  NoiseScale noise = NoiseScale::kUnit;
};

/// Throws std::invalid_argument when the config is unusable; returns the
/// driving measure to run with.
DrivingMeasure resolved_measure(const SgldConfig& config);

double noise_sd(const SgldConfig& config);

struct SeedRecord {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
};

struct Trajectory {
  std::vector<double> states;  // theta_0 .. theta_T
  SeedRecord seed;

  double terminal() const { return states.back(); }
};

struct CoupledRun {
  Trajectory chain_mu;
  Trajectory chain_nu;
  /// First step index t >= 1 at which the two minibatches differed; absent
  /// when the runs agreed throughout.
  std::optional<std::size_t> first_divergence;
};

/// One forward-map application:
/// theta + (eps/2) * (prior_grad(theta) + (n/m) * sum_j grad log p(X_j | theta)) + noise.
/// The caller supplies the noise already scaled.
double sgld_step(double theta, const IndexVector& minibatch, double noise,
                 const SgldConfig& config);

/// Runs the chain for `horizon` steps from a draw of the initial
/// distribution, sampling one minibatch and one noise per step.
Trajectory run_chain(const SgldConfig& config, RandomStream& rng);

/// Runs two chains from one initial draw with shared step noises, the
/// first driven by the uniform measure and the second by the perturbed
/// measure via the per-coordinate coupling. Requires a uniform (or unset)
/// measure in the config.
CoupledRun run_coupled(const SgldConfig& config, double delta, RandomStream& rng);

/// Terminal states of `replicate_count` independent chains. Replicate r
/// uses the stream (master_seed, r), so the result does not depend on the
/// worker count or execution order.
std::vector<double> run_replicates(const SgldConfig& config, std::size_t replicate_count,
                                   std::uint64_t master_seed, unsigned threads = 1);

void write_trajectory_csv(const Trajectory& trajectory, const std::string& path);
void write_replicates_csv(const std::vector<double>& terminal_states, const std::string& path);

}  // namespace sgldlab
