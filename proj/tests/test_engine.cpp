#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "sgldlab/engine.hpp"
#include "support/stats.hpp"

using namespace sgldlab;

namespace {

struct Fixture {
  ExponentialFamilyModel model = gaussian_mean_model();
  Dataset toy{model, {1.0, 2.0, 3.0, 4.0}};

  SgldConfig config(const Dataset& data, double eps, std::size_t batch, std::size_t horizon) {
    SgldConfig cfg;
    cfg.step_size = eps;
    cfg.minibatch_size = batch;
    cfg.horizon = horizon;
    cfg.dataset = &data;
    cfg.model = &model;
    return cfg;
  }
};

}  // namespace

TEST_CASE("sgld_step") {
  Fixture fx;
  SUBCASE("degenerate step leaves theta unchanged") {
    auto cfg = fx.config(fx.toy, 1.0, 2, 1);
    cfg.step_size = 0.0;  // direct forward-map call, no chain validation
    IndexVector batch{{1, 3}, 4};
    CHECK(sgld_step(0.7, batch, 0.0, cfg) == 0.7);
  }
  SUBCASE("hand arithmetic") {
    // theta=0, eps=0.1, n=4, M=2, batch values 1 and 3, flat prior, no noise:
    // step = 0.05 * (4/2) * (1 + 3) = 0.4
    const auto cfg = fx.config(fx.toy, 0.1, 2, 1);
    IndexVector batch{{1, 3}, 4};
    CHECK(sgld_step(0.0, batch, 0.0, cfg) == doctest::Approx(0.4).epsilon(1e-14));
  }
  SUBCASE("noise is additive") {
    const auto cfg = fx.config(fx.toy, 0.1, 2, 1);
    IndexVector batch{{1, 3}, 4};
    CHECK(sgld_step(0.0, batch, 2.5, cfg) == doctest::Approx(2.9).epsilon(1e-14));
  }
  SUBCASE("normal prior gradient enters the drift") {
    auto cfg = fx.config(fx.toy, 0.1, 2, 1);
    cfg.prior = NormalPrior{0.0, 1.0};
    IndexVector batch{{1, 3}, 4};
    // prior gradient at theta=1 is -1; likelihood part is 2*(4 - 2*1) = 4
    CHECK(sgld_step(1.0, batch, 0.0, cfg) == doctest::Approx(1.0 + 0.05 * 3.0).epsilon(1e-13));
  }
}

TEST_CASE("full deterministic batch reduces to the full-data gradient") {
  Fixture fx;
  const auto cfg = fx.config(fx.toy, 0.2, 4, 1);
  IndexVector full{{1, 2, 3, 4}, 4};
  const double theta = 0.8;
  const double expected = theta + 0.1 * (fx.toy.total_suff() - 4.0 * theta);
  CHECK(sgld_step(theta, full, 0.0, cfg) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("uniform minibatch drift is unbiased for the full gradient") {
  Fixture fx;
  RandomStream rng(3);
  const auto data = make_dataset(fx.model, 0.5, 50, rng);
  const auto cfg = fx.config(data, 0.1, 5, 1);
  const double theta = -0.3;
  const double full_grad = data.total_suff() - 50.0 * theta;

  const auto measure = DrivingMeasure::uniform(50, 5);
  const std::size_t draws = 100000;
  std::vector<double> drifts(draws);
  IndexVector batch;
  for (auto& d : drifts) {
    measure.sample(batch, rng);
    // recover the drift from the forward map at noise 0
    d = (sgld_step(theta, batch, 0.0, cfg) - theta) / (0.5 * cfg.step_size);
  }
  const double mc = test_stats::mean(drifts);
  const double se = test_stats::mean_standard_error(drifts);
  CHECK(std::abs(mc - full_grad) <= 4.0 * se);
}

TEST_CASE("run_chain basics") {
  Fixture fx;
  SUBCASE("zero horizon returns just the initial state") {
    auto cfg = fx.config(fx.toy, 0.1, 2, 0);
    cfg.init = PointInit{1.25};
    RandomStream rng(5);
    const auto traj = run_chain(cfg, rng);
    REQUIRE(traj.states.size() == 1);
    CHECK(traj.states[0] == 1.25);
  }
  SUBCASE("fixed seed reruns bit-identically") {
    const auto cfg = fx.config(fx.toy, 0.05, 2, 100);
    RandomStream a(7, 2), b(7, 2);
    const auto ta = run_chain(cfg, a);
    const auto tb = run_chain(cfg, b);
    CHECK(ta.states == tb.states);
    CHECK(ta.seed.master_seed == 7);
    CHECK(ta.seed.stream_id == 2);
  }
  SUBCASE("config validation") {
    auto cfg = fx.config(fx.toy, 0.1, 2, 1);
    cfg.dataset = nullptr;
    RandomStream rng(1);
    CHECK_THROWS_AS(run_chain(cfg, rng), std::invalid_argument);
    cfg = fx.config(fx.toy, -0.1, 2, 1);
    CHECK_THROWS_AS(run_chain(cfg, rng), std::invalid_argument);
    cfg = fx.config(fx.toy, 0.1, 0, 1);
    CHECK_THROWS_AS(run_chain(cfg, rng), std::invalid_argument);
    cfg = fx.config(fx.toy, 0.1, 2, 1);
    cfg.measure = DrivingMeasure::uniform(5, 2);  // wrong n
    CHECK_THROWS_AS(run_chain(cfg, rng), std::invalid_argument);
  }
}

TEST_CASE("discretized full-gradient sanity check at small step size") {
  // eps = 1/n with sqrt(eps) noise keeps the chain near the exact posterior;
  // the trajectory mean over the second half must sit on the posterior mean
  // up to Monte Carlo error plus a discretization allowance of 3*eps.
  Fixture fx;
  RandomStream rng(11);
  const std::int64_t n = 100;
  const auto data = make_dataset(fx.model, 0.0, n, rng);
  const auto posterior = posterior_exact(data, FlatPrior{}, 0.0);

  auto cfg = fx.config(data, 1.0 / static_cast<double>(n), static_cast<std::size_t>(n), 10000);
  cfg.noise = NoiseScale::kSqrtStep;
  cfg.init = PointInit{posterior.mean};
  const auto traj = run_chain(cfg, rng);

  const std::size_t half = traj.states.size() / 2;
  std::vector<double> tail(traj.states.begin() + half, traj.states.end());
  const double mc_mean = test_stats::mean(tail);
  // autocorrelation-adjusted standard error: AR coefficient is 1 - eps*n/2 = 1/2
  const double iact = (1.0 + 0.5) / (1.0 - 0.5);
  const double se = std::sqrt(test_stats::variance(tail) * iact / static_cast<double>(tail.size()));
  CHECK(std::abs(mc_mean - posterior.mean) <= 4.0 * se + 3.0 * cfg.step_size);
}

TEST_CASE("one step from a point mass is exactly Gaussian") {
  Fixture fx;
  RandomStream rng(13);
  const std::int64_t n = 10;
  const auto data = make_dataset(fx.model, 1.0, n, rng);
  const double eps = 0.5;
  const double theta0 = 0.2;

  auto cfg = fx.config(data, eps, 3, 1);
  cfg.init = PointInit{theta0};

  // exact step moments under minibatch randomness (unit noise)
  const double mean_suff = data.total_suff() / static_cast<double>(n);
  double var_suff = 0.0;
  for (double r : data.suff_values()) var_suff += (r - mean_suff) * (r - mean_suff);
  var_suff /= static_cast<double>(n);
  const double drift_mean = data.total_suff() - static_cast<double>(n) * theta0;
  const double drift_var =
      static_cast<double>(n) * static_cast<double>(n) * var_suff / 3.0;  // M = 3
  const double want_mean = theta0 + 0.5 * eps * drift_mean;
  const double want_var = 1.0 + 0.25 * eps * eps * drift_var;

  const auto terminals = run_replicates(cfg, 200000, 99);
  const double got_mean = test_stats::mean(terminals);
  const double got_var = test_stats::variance(terminals);
  const double se_mean = test_stats::mean_standard_error(terminals);
  CHECK(std::abs(got_mean - want_mean) <= 4.0 * se_mean);
  const double se_var = got_var * std::sqrt(2.0 / static_cast<double>(terminals.size()));
  CHECK(std::abs(got_var - want_var) <= 4.0 * se_var);
}

TEST_CASE("run_coupled") {
  Fixture fx;
  RandomStream rng(17);
  const auto data = make_dataset(fx.model, 0.0, 100, rng);

  SUBCASE("delta=0 never diverges") {
    const auto cfg = fx.config(data, 0.01, 5, 20);
    RandomStream r(19);
    const auto run = run_coupled(cfg, 0.0, r);
    CHECK(!run.first_divergence.has_value());
    CHECK(run.chain_mu.states == run.chain_nu.states);
  }
  SUBCASE("prefixes before the first divergence are bit-identical") {
    const auto cfg = fx.config(data, 0.01, 5, 10);
    RandomStream r(23);
    for (int rep = 0; rep < 200; ++rep) {
      const auto run = run_coupled(cfg, 0.3, r);
      const std::size_t cut = run.first_divergence.value_or(run.chain_mu.states.size());
      for (std::size_t t = 0; t < cut; ++t) {
        CHECK(run.chain_mu.states[t] == run.chain_nu.states[t]);
      }
    }
  }
  SUBCASE("agreement probability respects the analytic bound") {
    const auto cfg = fx.config(data, 0.01, 5, 10);
    RandomStream r(29);
    const std::size_t replicates = 10000;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < replicates; ++i) {
      if (!run_coupled(cfg, 0.01, r).first_divergence) ++agree;
    }
    const double bound = std::pow(0.99, 50);  // (1-delta)^(M*T)
    const double se = std::sqrt(bound * (1.0 - bound) / static_cast<double>(replicates));
    CHECK(static_cast<double>(agree) / static_cast<double>(replicates) >= bound - 4.0 * se);
  }
  SUBCASE("requires a uniform measure") {
    auto cfg = fx.config(data, 0.01, 5, 10);
    cfg.measure = DrivingMeasure::perturbed(100, 5, 0.2);
    RandomStream r(31);
    CHECK_THROWS_AS(run_coupled(cfg, 0.1, r), std::invalid_argument);
  }
}

TEST_CASE("run_coupled marginals match run_chain distributions") {
  Fixture fx;
  RandomStream rng(37);
  const auto data = make_dataset(fx.model, 0.0, 20, rng);
  const double delta = 0.3;
  const std::size_t replicates = 10000;

  auto cfg = fx.config(data, 0.05, 2, 5);
  cfg.init = PosteriorInit{};

  std::vector<double> coupled_mu(replicates), coupled_nu(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    RandomStream stream(41, r);
    const auto run = run_coupled(cfg, delta, stream);
    coupled_mu[r] = run.chain_mu.terminal();
    coupled_nu[r] = run.chain_nu.terminal();
  }

  const auto plain_mu = run_replicates(cfg, replicates, 43);
  auto cfg_nu = cfg;
  cfg_nu.measure = DrivingMeasure::perturbed(20, 2, delta);
  const auto plain_nu = run_replicates(cfg_nu, replicates, 47);

  CHECK(test_stats::ks_two_sample_pvalue(coupled_mu, plain_mu) >= 1e-4);
  CHECK(test_stats::ks_two_sample_pvalue(coupled_nu, plain_nu) >= 1e-4);
}

TEST_CASE("run_replicates") {
  Fixture fx;
  RandomStream rng(53);
  const auto data = make_dataset(fx.model, 0.0, 30, rng);
  const auto cfg = fx.config(data, 0.05, 3, 10);

  SUBCASE("one replicate equals run_chain on the derived stream") {
    const auto terminals = run_replicates(cfg, 1, 59);
    RandomStream stream(59, 0);
    CHECK(terminals[0] == run_chain(cfg, stream).terminal());
  }
  SUBCASE("same master seed reproduces the list; workers do not matter") {
    const auto a = run_replicates(cfg, 2000, 61, 1);
    const auto b = run_replicates(cfg, 2000, 61, 1);
    const auto c = run_replicates(cfg, 2000, 61, 8);
    CHECK(a == b);
    CHECK(a == c);
  }
  SUBCASE("different master seeds give the same distribution") {
    const auto a = run_replicates(cfg, 10000, 67);
    const auto b = run_replicates(cfg, 10000, 71);
    CHECK(test_stats::ks_two_sample_pvalue(a, b) >= 1e-4);
  }
}

TEST_CASE("trajectory and replicate csv export") {
  Fixture fx;
  RandomStream rng(73);
  auto cfg = fx.config(fx.toy, 0.1, 2, 5);
  cfg.init = PointInit{0.0};
  const auto traj = run_chain(cfg, rng);
  const auto dir = std::filesystem::temp_directory_path();
  const auto tpath = (dir / "sgldlab_traj_test.csv").string();
  const auto rpath = (dir / "sgldlab_reps_test.csv").string();
  write_trajectory_csv(traj, tpath);
  write_replicates_csv({1.0, 2.0}, rpath);
  std::ifstream tin(tpath);
  std::string line;
  std::getline(tin, line);
  CHECK(line == "t,theta");
  std::size_t rows = 0;
  while (std::getline(tin, line)) ++rows;
  CHECK(rows == traj.states.size());
  std::filesystem::remove(tpath);
  std::filesystem::remove(rpath);
}
