// sgldlab command-line driver: simulation, coupling, TV computations,
// sensitivity-condition checks and the two scaling studies. Every run that
// writes CSVs also writes a manifest.json echoing the full configuration
// and seed. Randomness enters only through --seed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgldlab/assumptions.hpp"
#include "sgldlab/engine.hpp"
#include "sgldlab/experiments.hpp"
#include "sgldlab/measures.hpp"
#include "sgldlab/models.hpp"
#include "sgldlab/tv_metrics.hpp"
#include "sgldlab/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> replicates;
  unsigned threads = 1;
  std::string config;
};

std::uint64_t require_seed(const GlobalOptions& opts) {
  if (!opts.seed) {
    throw CLI::ValidationError("--seed", "a seed is required for this subcommand");
  }
  return *opts.seed;
}

void write_manifest(const std::string& out_dir, const std::string& command, const json& config) {
  json manifest;
  manifest["tool"] = "sgldlab";
  manifest["version"] = sgldlab::kVersion;
  manifest["command"] = command;
  manifest["config"] = config;
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << manifest.dump(2) << "\n";
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  return values;
}

void print_value(double value) { std::printf("%.5f\n", value); }

// ---- theorem study configuration -----------------------------------------

json regime_to_json(const sgldlab::ScalingRegime& regime, std::size_t replicates, double slack) {
  json j;
  j["name"] = regime.name;
  j["n_grid"] = regime.n_grid;
  j["t_coef"] = regime.horizon.coef;
  j["t_pow"] = regime.horizon.exponent;
  j["m_coef"] = regime.batch.coef;
  j["m_pow"] = regime.batch.exponent;
  j["omega_coef"] = regime.omega.coef;
  j["omega_pow"] = regime.omega.exponent;
  j["eps_coef"] = regime.step_size.coef;
  j["eps_pow"] = regime.step_size.exponent;
  j["min_trend_ratio"] = regime.min_trend_ratio;
  j["replicates"] = replicates;
  j["slack"] = slack;
  return j;
}

void regime_from_json(const json& j, sgldlab::ScalingRegime& regime, std::size_t& replicates,
                      double& slack) {
  if (j.contains("name")) regime.name = j["name"].get<std::string>();
  if (j.contains("n_grid")) regime.n_grid = j["n_grid"].get<std::vector<std::int64_t>>();
  if (j.contains("t_coef")) regime.horizon.coef = j["t_coef"].get<double>();
  if (j.contains("t_pow")) regime.horizon.exponent = j["t_pow"].get<double>();
  if (j.contains("m_coef")) regime.batch.coef = j["m_coef"].get<double>();
  if (j.contains("m_pow")) regime.batch.exponent = j["m_pow"].get<double>();
  if (j.contains("omega_coef")) regime.omega.coef = j["omega_coef"].get<double>();
  if (j.contains("omega_pow")) regime.omega.exponent = j["omega_pow"].get<double>();
  if (j.contains("eps_coef")) regime.step_size.coef = j["eps_coef"].get<double>();
  if (j.contains("eps_pow")) regime.step_size.exponent = j["eps_pow"].get<double>();
  if (j.contains("min_trend_ratio")) regime.min_trend_ratio = j["min_trend_ratio"].get<double>();
  if (j.contains("replicates")) replicates = j["replicates"].get<std::size_t>();
  if (j.contains("slack")) slack = j["slack"].get<double>();
}

int run_theorem_study(const GlobalOptions& opts, bool short_run) {
  sgldlab::ScalingRegime regime =
      short_run ? sgldlab::short_run_default() : sgldlab::long_run_default();
  std::size_t replicates = short_run ? 10000 : 1000;
  double slack = 0.2;
  if (!opts.config.empty()) {
    std::ifstream in(opts.config);
    if (!in) throw std::runtime_error("cannot open config " + opts.config);
    json j;
    in >> j;
    regime_from_json(j, regime, replicates, slack);
  }
  if (opts.replicates) replicates = *opts.replicates;
  const std::uint64_t seed = require_seed(opts);

  const auto result = short_run
                          ? run_short_run_study(regime, replicates, seed, opts.threads, slack)
                          : run_long_run_study(regime, replicates, seed, opts.threads, slack);

  bool all_verdicts = true;
  for (const auto& r : result.records) {
    std::printf(
        "n=%-8lld T=%-7zu M=%-4zu omega=%-10.4g delta_sum=%-8.4f target_gap=%-8.4f "
        "agreement=%-8.4f verdict=%s%s\n",
        static_cast<long long>(r.n), r.horizon, r.batch, r.omega, r.delta_sum, r.target_gap,
        r.coupling_agreement, r.verdict ? "pass" : "FAIL", r.degenerate ? " (degenerate)" : "");
    all_verdicts = all_verdicts && r.verdict;
  }
  if (!opts.out.empty()) {
    fs::create_directories(opts.out);
    write_records_csv(result, (fs::path(opts.out) / "records.csv").string());
    write_plot_data(result, opts.out);
    json config = regime_to_json(regime, replicates, slack);
    config["seed"] = seed;
    config["threads"] = opts.threads;
    write_manifest(opts.out, short_run ? "theorem1" : "theorem2", config);
  }
  return all_verdicts ? 0 : 3;
}

// ---- assumption checks -----------------------------------------------------

int run_verify(const GlobalOptions& opts, const std::string& which,
               const std::vector<std::int64_t>& n_grid, std::size_t trials, double gamma1,
               double gamma2, double eta, double theta0) {
  const std::uint64_t seed = require_seed(opts);
  std::vector<sgldlab::AssumptionReport> reports;
  if (which == "a1" || which == "all") {
    reports.push_back(sgldlab::check_assumption1(n_grid, sgldlab::log_schedule(), trials, seed,
                                                 gamma1, opts.threads));
  }
  if (which == "a2" || which == "all") {
    reports.push_back(sgldlab::check_assumption2(n_grid, sgldlab::inverse_log_schedule(), trials,
                                                 seed + 1, gamma2, opts.threads));
  }
  if (which == "a3" || which == "all") {
    reports.push_back(
        sgldlab::check_assumption3(theta0, n_grid, eta, trials, seed + 2, opts.threads));
  }
  if (reports.empty()) {
    throw CLI::ValidationError("--which", "expected one of a1, a2, a3, all");
  }
  std::string summary;
  for (const auto& report : reports) summary += format_summary(report);
  std::fputs(summary.c_str(), stdout);
  if (!opts.out.empty()) {
    fs::create_directories(opts.out);
    for (const auto& report : reports) {
      std::string name = to_string(report.id);
      for (auto& c : name) c = static_cast<char>(std::tolower(c));
      write_report_csv(report, (fs::path(opts.out) / (name + "_report.csv")).string());
    }
    std::ofstream text(fs::path(opts.out) / "summary.txt");
    text << summary;
    json config;
    config["which"] = which;
    config["n_grid"] = n_grid;
    config["trials"] = trials;
    config["gamma_a1"] = gamma1;
    config["gamma_a2"] = gamma2;
    config["eta"] = eta;
    config["theta0"] = theta0;
    config["seed"] = seed;
    config["threads"] = opts.threads;
    write_manifest(opts.out, "verify-assumptions", config);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subsampling Langevin sampler lab"};
  app.set_version_flag("--version", sgldlab::kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "master RNG seed");
  app.add_option("--out", opts.out, "output directory for CSVs and the manifest");
  std::size_t replicates_value = 0;
  auto* reps_opt = app.add_option("--replicates", replicates_value, "replicate count override");
  app.add_option("--threads", opts.threads, "worker threads (1 reproduces single-threaded runs)");
  app.add_option("--config", opts.config, "JSON config file for the theorem studies");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run one chain and export the trajectory");
  std::int64_t sim_n = 100;
  double sim_theta0 = 0.0, sim_eps = 0.01, sim_delta = 0.0, sim_theta_init = 0.0;
  std::size_t sim_batch = 10, sim_horizon = 1000;
  std::string sim_measure = "uniform", sim_noise = "unit", sim_init = "posterior", sim_data;
  simulate->add_option("--n", sim_n, "dataset size (fresh Gaussian data)");
  simulate->add_option("--data", sim_data, "load a dataset CSV instead of sampling one");
  simulate->add_option("--theta0", sim_theta0, "generating parameter");
  simulate->add_option("--M", sim_batch, "minibatch size");
  simulate->add_option("--T", sim_horizon, "number of steps");
  simulate->add_option("--eps", sim_eps, "step size");
  simulate->add_option("--measure", sim_measure)->check(CLI::IsMember({"uniform", "perturbed"}));
  simulate->add_option("--delta", sim_delta, "perturbation probability");
  simulate->add_option("--noise", sim_noise)->check(CLI::IsMember({"unit", "sqrt-eps"}));
  simulate->add_option("--init", sim_init)->check(CLI::IsMember({"posterior", "point"}));
  simulate->add_option("--theta-init", sim_theta_init, "initial state for --init point");

  // couple
  auto* couple = app.add_subcommand("couple", "run a coupled pair of chains");
  std::int64_t cpl_n = 100;
  double cpl_delta = 0.01, cpl_eps = 0.01;
  std::size_t cpl_batch = 10, cpl_horizon = 50;
  std::string cpl_noise = "unit";
  couple->add_option("--n", cpl_n, "dataset size");
  couple->add_option("--M", cpl_batch, "minibatch size");
  couple->add_option("--T", cpl_horizon, "number of steps");
  couple->add_option("--delta", cpl_delta, "perturbation probability");
  couple->add_option("--eps", cpl_eps, "step size");
  couple->add_option("--noise", cpl_noise)->check(CLI::IsMember({"unit", "sqrt-eps"}));

  // tv
  auto* tv = app.add_subcommand("tv", "total-variation computations");
  std::string tv_gaussian, tv_moment, tv_measures, tv_bound;
  tv->add_option("--gaussian", tv_gaussian, "m1,sd1,m2,sd2: exact Gaussian TV");
  tv->add_option("--moment", tv_moment, "m1,sd1,m2,sd2: two-moment lower bound");
  tv->add_option("--measures", tv_measures, "n,M,delta: exact driving-measure TV");
  tv->add_option("--bound", tv_bound, "M,delta: coupling bound 1-(1-delta)^M");

  // weights
  auto* weights = app.add_subcommand("weights", "per-coordinate selection weights");
  std::int64_t w_n = 10;
  double w_delta = 0.1;
  weights->add_option("--n", w_n, "dataset size")->required();
  weights->add_option("--delta", w_delta, "perturbation probability")->required();

  // verify-assumptions
  auto* verify = app.add_subcommand("verify-assumptions", "sensitivity-condition reports");
  std::string va_which = "all";
  std::vector<std::int64_t> va_grid = {100, 1000, 10000};
  std::size_t va_trials = 10;
  double va_gamma1 = 0.9, va_gamma2 = 0.35, va_eta = 0.3, va_theta0 = 0.0;
  verify->add_option("--which", va_which)->check(CLI::IsMember({"a1", "a2", "a3", "all"}));
  verify->add_option("--n-grid", va_grid, "dataset sizes");
  verify->add_option("--trials", va_trials, "datasets per grid point");
  verify->add_option("--gamma1", va_gamma1, "threshold for the large-perturbation check");
  verify->add_option("--gamma2", va_gamma2, "threshold for the small-perturbation check");
  verify->add_option("--eta", va_eta, "order-gap threshold");
  verify->add_option("--theta0", va_theta0, "generating parameter");

  // theorem studies
  auto* theorem1 = app.add_subcommand("theorem1", "short-run scaling study");
  auto* theorem2 = app.add_subcommand("theorem2", "long-run scaling study");

  // probe-lemma32
  auto* probe = app.add_subcommand("probe-lemma32", "delta-vs-alpha scaling probe");
  std::int64_t pr_n = 1000;
  std::size_t pr_batch = 100;
  std::vector<double> pr_alphas = {0.05, 0.1, 0.2};
  probe->add_option("--n", pr_n, "dataset size");
  probe->add_option("--M", pr_batch, "minibatch size");
  probe->add_option("--alphas", pr_alphas, "TV levels in (0, 1/2)");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) opts.seed = seed_value;
  if (*reps_opt) opts.replicates = replicates_value;

  try {
    const auto model = sgldlab::gaussian_mean_model();

    if (*simulate) {
      const std::uint64_t seed = require_seed(opts);
      sgldlab::RandomStream data_rng(seed, 0);
      const sgldlab::Dataset data =
          sim_data.empty() ? sgldlab::make_dataset(model, sim_theta0, sim_n, data_rng)
                           : sgldlab::load_dataset_csv(model, sim_data);
      sgldlab::SgldConfig config;
      config.step_size = sim_eps;
      config.minibatch_size = sim_batch;
      config.horizon = sim_horizon;
      config.dataset = &data;
      config.model = &model;
      config.noise = sim_noise == "unit" ? sgldlab::NoiseScale::kUnit
                                         : sgldlab::NoiseScale::kSqrtStep;
      if (sim_init == "point") config.init = sgldlab::PointInit{sim_theta_init};
      if (sim_measure == "perturbed") {
        config.measure = sgldlab::DrivingMeasure::perturbed(data.size(), sim_batch, sim_delta);
      }
      sgldlab::RandomStream rng(seed, 1);
      const auto trajectory = sgldlab::run_chain(config, rng);
      std::printf("theta_T=%.17g\n", trajectory.terminal());
      if (!opts.out.empty()) {
        fs::create_directories(opts.out);
        sgldlab::write_trajectory_csv(trajectory, (fs::path(opts.out) / "traj.csv").string());
        sgldlab::save_dataset_csv(data, (fs::path(opts.out) / "dataset.csv").string());
        json config_echo = {{"n", data.size()},      {"theta0", sim_theta0},
                            {"M", sim_batch},        {"T", sim_horizon},
                            {"eps", sim_eps},        {"measure", sim_measure},
                            {"delta", sim_delta},    {"noise", sim_noise},
                            {"init", sim_init},      {"seed", seed}};
        write_manifest(opts.out, "simulate", config_echo);
      }
      return 0;
    }

    if (*couple) {
      const std::uint64_t seed = require_seed(opts);
      sgldlab::RandomStream data_rng(seed, 0);
      const sgldlab::Dataset data = sgldlab::make_dataset(model, 0.0, cpl_n, data_rng);
      sgldlab::SgldConfig config;
      config.step_size = cpl_eps;
      config.minibatch_size = cpl_batch;
      config.horizon = cpl_horizon;
      config.dataset = &data;
      config.model = &model;
      config.noise = cpl_noise == "unit" ? sgldlab::NoiseScale::kUnit
                                         : sgldlab::NoiseScale::kSqrtStep;
      sgldlab::RandomStream rng(seed, 1);
      const auto run = sgldlab::run_coupled(config, cpl_delta, rng);
      if (run.first_divergence) {
        std::printf("first_divergence=%zu\n", *run.first_divergence);
      } else {
        std::printf("first_divergence=none\n");
      }
      if (!opts.out.empty()) {
        fs::create_directories(opts.out);
        sgldlab::write_trajectory_csv(run.chain_mu, (fs::path(opts.out) / "chain_mu.csv").string());
        sgldlab::write_trajectory_csv(run.chain_nu, (fs::path(opts.out) / "chain_nu.csv").string());
        json config_echo = {{"n", cpl_n},   {"M", cpl_batch},     {"T", cpl_horizon},
                            {"delta", cpl_delta}, {"eps", cpl_eps}, {"noise", cpl_noise},
                            {"seed", seed}};
        write_manifest(opts.out, "couple", config_echo);
      }
      return 0;
    }

    if (*tv) {
      if (!tv_gaussian.empty()) {
        const auto v = parse_csv_doubles(tv_gaussian);
        if (v.size() != 4) throw CLI::ValidationError("--gaussian", "expected m1,sd1,m2,sd2");
        print_value(sgldlab::tv_gaussian_exact({v[0], v[1] * v[1]}, {v[2], v[3] * v[3]}).value);
      } else if (!tv_moment.empty()) {
        const auto v = parse_csv_doubles(tv_moment);
        if (v.size() != 4) throw CLI::ValidationError("--moment", "expected m1,sd1,m2,sd2");
        print_value(sgldlab::tv_moment_lower_bound(v[0], v[1], v[2], v[3]).value);
      } else if (!tv_measures.empty()) {
        const auto v = parse_csv_doubles(tv_measures);
        if (v.size() != 3) throw CLI::ValidationError("--measures", "expected n,M,delta");
        print_value(sgldlab::tv_exact_measures(static_cast<std::int64_t>(v[0]),
                                               static_cast<std::size_t>(v[1]), v[2])
                        .value);
      } else if (!tv_bound.empty()) {
        const auto v = parse_csv_doubles(tv_bound);
        if (v.size() != 2) throw CLI::ValidationError("--bound", "expected M,delta");
        print_value(sgldlab::tv_coupling_bound(static_cast<std::size_t>(v[0]), v[1]));
      } else {
        throw CLI::ValidationError("tv", "pass one of --gaussian, --moment, --measures, --bound");
      }
      return 0;
    }

    if (*weights) {
      const auto wv = sgldlab::coordinate_weights(w_n, w_delta);
      std::printf("index,weight\n");
      for (std::size_t i = 0; i < wv.weights.size(); ++i) {
        std::printf("%zu,%.17g\n", i + 1, wv.weights[i]);
      }
      return 0;
    }

    if (*verify) {
      return run_verify(opts, va_which, va_grid, va_trials, va_gamma1, va_gamma2, va_eta,
                        va_theta0);
    }
    if (*theorem1) return run_theorem_study(opts, true);
    if (*theorem2) return run_theorem_study(opts, false);

    if (*probe) {
      const auto rows = sgldlab::tv_delta_probe(pr_n, pr_batch, pr_alphas);
      std::printf("alpha,delta_star,achieved_tv,delta_sqrtM_over_alpha_sq\n");
      for (const auto& row : rows) {
        std::printf("%.17g,%.17g,%.17g,%.17g\n", row.alpha, row.delta_star, row.achieved_tv,
                    row.ratio);
      }
      if (!opts.out.empty()) {
        fs::create_directories(opts.out);
        std::ofstream out(fs::path(opts.out) / "probe.csv");
        out << "alpha,delta_star,achieved_tv,delta_sqrtM_over_alpha_sq\n";
        char buf[256];
        for (const auto& row : rows) {
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", row.alpha, row.delta_star,
                        row.achieved_tv, row.ratio);
          out << buf;
        }
        json config_echo = {{"n", pr_n}, {"M", pr_batch}, {"alphas", pr_alphas}};
        write_manifest(opts.out, "probe-lemma32", config_echo);
      }
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
