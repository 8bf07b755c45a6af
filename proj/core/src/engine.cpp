#include "sgldlab/engine.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace sgldlab {

namespace {

void check_config(const SgldConfig& config) {
  if (config.dataset == nullptr) throw std::invalid_argument("SgldConfig: dataset is null");
  if (config.model == nullptr) throw std::invalid_argument("SgldConfig: model is null");
  if (!(config.step_size > 0.0)) throw std::invalid_argument("SgldConfig: step_size must be > 0");
  if (config.minibatch_size < 1) throw std::invalid_argument("SgldConfig: minibatch_size must be >= 1");
}

double draw_initial(const SgldConfig& config, RandomStream& rng) {
  if (const auto* point = std::get_if<PointInit>(&config.init)) {
    return point->theta;
  }
  return sample(posterior_exact(*config.dataset, config.prior, 0.0), rng);
}

double prior_gradient_at(const SgldConfig& config, double theta) {
  if (config.prior_gradient) return config.prior_gradient(theta);
  return prior_grad(config.prior, theta);
}

}  // namespace

DrivingMeasure resolved_measure(const SgldConfig& config) {
  check_config(config);
  if (config.measure) {
    if (config.measure->n() != config.dataset->size() ||
        config.measure->batch_size() != config.minibatch_size) {
      throw std::invalid_argument("SgldConfig: measure does not match dataset size or minibatch size");
    }
    return *config.measure;
  }
  return DrivingMeasure::uniform(config.dataset->size(), config.minibatch_size);
}

double noise_sd(const SgldConfig& config) {
  return config.noise == NoiseScale::kUnit ? 1.0 : std::sqrt(config.step_size);
}

double sgld_step(double theta, const IndexVector& minibatch, double noise,
                 const SgldConfig& config) {
  const Dataset& data = *config.dataset;
  const std::size_t m = minibatch.batch_size();
  double suff_sum = 0.0;
  for (std::int64_t idx : minibatch.entries) suff_sum += data.suff_at(idx);
  const double grad_sum =
      suff_sum - static_cast<double>(m) * config.model->log_partition_deriv(theta);
  const double scale = static_cast<double>(data.size()) / static_cast<double>(m);
  const double drift = prior_gradient_at(config, theta) + scale * grad_sum;
  return theta + 0.5 * config.step_size * drift + noise;
}

Trajectory run_chain(const SgldConfig& config, RandomStream& rng) {
  const DrivingMeasure measure = resolved_measure(config);
  Trajectory trajectory;
  trajectory.seed = {rng.master_seed(), rng.stream_id()};
  trajectory.states.reserve(config.horizon + 1);
  trajectory.states.push_back(draw_initial(config, rng));

  const double sd = noise_sd(config);
  IndexVector batch;  // reused across steps
  for (std::size_t t = 1; t <= config.horizon; ++t) {
    measure.sample(batch, rng);
    const double noise = sd * rng.normal();
    trajectory.states.push_back(sgld_step(trajectory.states.back(), batch, noise, config));
  }
  return trajectory;
}

CoupledRun run_coupled(const SgldConfig& config, double delta, RandomStream& rng) {
  const DrivingMeasure measure = resolved_measure(config);
  if (measure.kind() != MeasureKind::kUniform) {
    throw std::invalid_argument("run_coupled: config measure must be uniform");
  }
  if (delta < 0.0 || delta > 1.0) throw std::invalid_argument("run_coupled: delta outside [0,1]");

  CoupledRun run;
  run.chain_mu.seed = {rng.master_seed(), rng.stream_id()};
  run.chain_nu.seed = run.chain_mu.seed;
  const double theta0 = draw_initial(config, rng);
  run.chain_mu.states.reserve(config.horizon + 1);
  run.chain_nu.states.reserve(config.horizon + 1);
  run.chain_mu.states.push_back(theta0);
  run.chain_nu.states.push_back(theta0);

  const double sd = noise_sd(config);
  const std::int64_t n = config.dataset->size();
  for (std::size_t t = 1; t <= config.horizon; ++t) {
    const CoupledDraw draw = sample_coupled(n, config.minibatch_size, delta, rng);
    const double noise = sd * rng.normal();
    run.chain_mu.states.push_back(sgld_step(run.chain_mu.states.back(), draw.e, noise, config));
    run.chain_nu.states.push_back(sgld_step(run.chain_nu.states.back(), draw.d, noise, config));
    if (!run.first_divergence && draw.d.entries != draw.e.entries) {
      run.first_divergence = t;
    }
  }
  return run;
}

std::vector<double> run_replicates(const SgldConfig& config, std::size_t replicate_count,
                                   std::uint64_t master_seed, unsigned threads) {
  if (replicate_count < 1) throw std::invalid_argument("run_replicates: need at least one replicate");
  resolved_measure(config);  // validate before spawning workers
  std::vector<double> terminal(replicate_count);

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      RandomStream rng(master_seed, r);
      terminal[r] = run_chain(config, rng).terminal();
    }
  };

  if (threads <= 1 || replicate_count < 2) {
    worker(0, replicate_count);
    return terminal;
  }
  const unsigned worker_count = std::min<unsigned>(threads, static_cast<unsigned>(replicate_count));
  std::vector<std::thread> pool;
  pool.reserve(worker_count);
  const std::size_t chunk = (replicate_count + worker_count - 1) / worker_count;
  for (unsigned w = 0; w < worker_count; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * chunk;
    const std::size_t end = std::min(replicate_count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(worker, begin, end);
  }
  for (auto& t : pool) t.join();
  return terminal;
}

namespace {

void write_rows(const std::string& path, const char* header,
                const std::function<void(std::ofstream&)>& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << header << "\n";
  body(out);
}

}  // namespace

void write_trajectory_csv(const Trajectory& trajectory, const std::string& path) {
  write_rows(path, "t,theta", [&](std::ofstream& out) {
    char buf[64];
    for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g", trajectory.states[t]);
      out << t << "," << buf << "\n";
    }
  });
}

void write_replicates_csv(const std::vector<double>& terminal_states, const std::string& path) {
  write_rows(path, "replicate,theta_T", [&](std::ofstream& out) {
    char buf[64];
    for (std::size_t r = 0; r < terminal_states.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", terminal_states[r]);
      out << r << "," << buf << "\n";
    }
  });
}

}  // namespace sgldlab
