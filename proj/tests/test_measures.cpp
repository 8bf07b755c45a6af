#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "sgldlab/measures.hpp"
#include "support/stats.hpp"

using namespace sgldlab;

namespace {

// Independent oracle: half L1 over all n^M outcomes of the two product
// measures, built from the per-coordinate weights.
double tv_brute_force(std::int64_t n, std::size_t batch, double delta) {
  const auto w_perturbed = coordinate_weights(n, delta).weights;
  const std::vector<double> w_uniform(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
  std::vector<std::size_t> odometer(batch, 0);
  double l1 = 0.0;
  while (true) {
    double p0 = 1.0, p1 = 1.0;
    for (std::size_t i = 0; i < batch; ++i) {
      p0 *= w_uniform[odometer[i]];
      p1 *= w_perturbed[odometer[i]];
    }
    l1 += std::abs(p0 - p1);
    std::size_t pos = 0;
    while (pos < batch) {
      if (++odometer[pos] < static_cast<std::size_t>(n)) break;
      odometer[pos] = 0;
      ++pos;
    }
    if (pos == batch) break;
  }
  return 0.5 * l1;
}

}  // namespace

TEST_CASE("split index is ceil(n/2)") {
  CHECK(split_index(1) == 1);
  CHECK(split_index(2) == 1);
  CHECK(split_index(4) == 2);
  CHECK(split_index(5) == 3);
  CHECK(split_index(100) == 50);
}

TEST_CASE("sample_uniform basics") {
  RandomStream rng(42);
  SUBCASE("single-point support") {
    for (int rep = 0; rep < 20; ++rep) {
      const auto iv = sample_uniform(1, 3, rng);
      for (auto e : iv.entries) CHECK(e == 1);
    }
  }
  SUBCASE("length contract") {
    CHECK(sample_uniform(5, 2, rng).batch_size() == 2);
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(sample_uniform(0, 2, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_uniform(4, 0, rng), std::invalid_argument);
  }
}

TEST_CASE("sample_uniform goodness of fit, n=4 M=2") {
  RandomStream rng(7);
  const std::size_t draws = 100000;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> counts;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto iv = sample_uniform(4, 2, rng);
    ++counts[{iv.entries[0], iv.entries[1]}];
  }
  CHECK(counts.size() == 16);
  for (const auto& [outcome, count] : counts) {
    const double p_hat = static_cast<double>(count) / static_cast<double>(draws);
    CHECK(test_stats::frequency_within(p_hat, 1.0 / 16.0, draws, 4.0));
  }
}

TEST_CASE("sample_perturbed") {
  RandomStream rng(11);
  SUBCASE("delta=1 forces the upper block") {
    for (int rep = 0; rep < 200; ++rep) {
      const auto iv = sample_perturbed(4, 3, 1.0, rng);
      for (auto e : iv.entries) {
        CHECK(e >= 2);
        CHECK(e <= 4);
      }
    }
  }
  SUBCASE("delta outside [0,1] rejected") {
    CHECK_THROWS_AS(sample_perturbed(4, 1, -0.1, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_perturbed(4, 1, 1.1, rng), std::invalid_argument);
  }
  SUBCASE("delta=0 matches the uniform frequencies") {
    const std::size_t draws = 200000;
    std::vector<std::size_t> counts(4, 0);
    for (std::size_t i = 0; i < draws; ++i) {
      ++counts[static_cast<std::size_t>(sample_perturbed(4, 1, 0.0, rng).entries[0] - 1)];
    }
    for (auto c : counts) {
      CHECK(test_stats::frequency_within(static_cast<double>(c) / draws, 0.25, draws, 4.0));
    }
  }
}

TEST_CASE("sample_perturbed frequencies match coordinate weights (n=4, delta=0.5)") {
  RandomStream rng(13);
  const std::size_t draws = 1000000;
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t i = 0; i < draws; ++i) {
    ++counts[static_cast<std::size_t>(sample_perturbed(4, 1, 0.5, rng).entries[0] - 1)];
  }
  const std::vector<double> expected = {0.125, 0.2916666666666667, 0.2916666666666667,
                                        0.2916666666666667};
  for (std::size_t i = 0; i < 4; ++i) {
    const double p_hat = static_cast<double>(counts[i]) / static_cast<double>(draws);
    CHECK(test_stats::frequency_within(p_hat, expected[i], draws, 4.0));
  }
}

TEST_CASE("sample_perturbed frequencies converge to coordinate_weights (n=7, delta=0.3)") {
  RandomStream rng(17);
  const std::size_t draws = 400000;
  const auto weights = coordinate_weights(7, 0.3).weights;
  std::vector<std::size_t> counts(7, 0);
  for (std::size_t i = 0; i < draws; ++i) {
    ++counts[static_cast<std::size_t>(sample_perturbed(7, 1, 0.3, rng).entries[0] - 1)];
  }
  for (std::size_t i = 0; i < 7; ++i) {
    const double p_hat = static_cast<double>(counts[i]) / static_cast<double>(draws);
    CHECK(test_stats::frequency_within(p_hat, weights[i], draws, 4.0));
  }
}

TEST_CASE("coordinate_weights") {
  SUBCASE("uniform at delta=0") {
    const auto w = coordinate_weights(5, 0.0).weights;
    for (double x : w) CHECK(x == doctest::Approx(0.2).epsilon(1e-14));
  }
  SUBCASE("n=4 delta=0.5 exact values") {
    const auto w = coordinate_weights(4, 0.5).weights;
    CHECK(w[0] == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(w[1] == doctest::Approx(7.0 / 24.0).epsilon(1e-14));
    CHECK(w[2] == doctest::Approx(7.0 / 24.0).epsilon(1e-14));
    CHECK(w[3] == doctest::Approx(7.0 / 24.0).epsilon(1e-14));
  }
  SUBCASE("sums to one and constant on blocks") {
    RandomStream rng(3);
    for (int rep = 0; rep < 50; ++rep) {
      const std::int64_t n = rng.uniform_int(1, 200);
      const double delta = rng.uniform();
      const auto w = coordinate_weights(n, delta).weights;
      double sum = 0.0;
      for (double x : w) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      const auto s = static_cast<std::size_t>(split_index(n));
      for (std::size_t i = 1; i + 1 < s; ++i) CHECK(w[i] == w[0]);
      for (std::size_t i = s; i < w.size(); ++i) CHECK(w[i] == w[s - 1]);
    }
  }
}

TEST_CASE("tv_exact_measures") {
  SUBCASE("identical measures at delta=0") {
    CHECK(tv_exact_measures(10, 4, 0.0).value == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("frozen value for n=4 M=2 delta=0.5") {
    const auto tv = tv_exact_measures(4, 2, 0.5);
    CHECK(std::abs(tv.value - 0.203125) <= 1e-12);
    CHECK(tv.method == TvMethod::kBinomialReduction);
  }
  SUBCASE("brute-force oracle over small grid") {
    for (std::int64_t n = 1; n <= 6; ++n) {
      for (std::size_t M = 1; M <= 3; ++M) {
        for (double delta : {0.0, 0.25, 0.5, 1.0}) {
          const double exact = tv_exact_measures(n, M, delta).value;
          const double brute = tv_brute_force(n, M, delta);
          CHECK(std::abs(exact - brute) <= 1e-12);
        }
      }
    }
  }
  SUBCASE("dominated by the coupling bound") {
    CHECK(tv_exact_measures(100, 10, 0.01).value <= tv_coupling_bound(10, 0.01) + 1e-15);
  }
  SUBCASE("monotone in delta") {
    for (std::int64_t n : {3, 10, 101}) {
      for (std::size_t M : {1u, 5u, 20u}) {
        double prev = -1.0;
        for (double delta = 0.0; delta <= 1.0; delta += 0.05) {
          const double tv = tv_exact_measures(n, M, delta).value;
          CHECK(tv >= prev - 1e-12);
          prev = tv;
        }
      }
    }
  }
  SUBCASE("large batch stays stable") {
    const double tv = tv_exact_measures(1000, 1000000, 1e-4).value;
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
    CHECK(tv <= tv_coupling_bound(1000000, 1e-4) + 1e-12);
  }
}

TEST_CASE("tv bounds chain: 0 <= tv <= 1-(1-d)^M <= M d") {
  RandomStream rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    const std::int64_t n = rng.uniform_int(1, 300);
    const std::size_t M = static_cast<std::size_t>(rng.uniform_int(1, 40));
    const double delta = rng.uniform();
    const double tv = tv_exact_measures(n, M, delta).value;
    const double bound = tv_coupling_bound(M, delta);
    CHECK(tv >= -1e-15);
    CHECK(tv <= bound + 1e-12);
    CHECK(bound <= static_cast<double>(M) * delta + 1e-12);
  }
}

TEST_CASE("tv_coupling_bound values") {
  CHECK(tv_coupling_bound(5, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(tv_coupling_bound(1, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(std::abs(tv_coupling_bound(10, 0.01) - 0.09562) <= 1e-5);
}

TEST_CASE("sample_coupled") {
  RandomStream rng(29);
  SUBCASE("no flips at delta=0") {
    for (int rep = 0; rep < 100; ++rep) {
      const auto draw = sample_coupled(6, 4, 0.0, rng);
      CHECK(draw.d.entries == draw.e.entries);
    }
  }
  SUBCASE("flips land in the upper block") {
    for (int rep = 0; rep < 500; ++rep) {
      const auto draw = sample_coupled(9, 3, 0.5, rng);
      for (std::size_t i = 0; i < 3; ++i) {
        if (draw.flips[i]) {
          CHECK(draw.d.entries[i] >= split_index(9));
          CHECK(draw.d.entries[i] == draw.upper_proposals[i]);
        } else {
          CHECK(draw.d.entries[i] == draw.e.entries[i]);
        }
      }
    }
  }
  SUBCASE("componentwise agreement rate at n=100 M=10 delta=0.01") {
    const std::size_t draws = 100000;
    std::size_t equal = 0;
    for (std::size_t i = 0; i < draws; ++i) {
      const auto draw = sample_coupled(100, 10, 0.01, rng);
      if (draw.d.entries == draw.e.entries) ++equal;
    }
    const double p_hat = static_cast<double>(equal) / static_cast<double>(draws);
    const double lower = std::pow(0.99, 10);  // 0.904...
    const double se = std::sqrt(lower * (1.0 - lower) / static_cast<double>(draws));
    CHECK(p_hat >= lower - 4.0 * se);
  }
}

TEST_CASE("coupled marginals match the plain samplers") {
  RandomStream rng(31);
  const std::size_t draws = 300000;
  const std::int64_t n = 6;
  const double delta = 0.4;
  std::vector<std::size_t> coupled_e(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> coupled_d(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto draw = sample_coupled(n, 1, delta, rng);
    ++coupled_e[static_cast<std::size_t>(draw.e.entries[0] - 1)];
    ++coupled_d[static_cast<std::size_t>(draw.d.entries[0] - 1)];
  }
  const auto weights = coordinate_weights(n, delta).weights;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    const double pe = static_cast<double>(coupled_e[i]) / draws;
    const double pd = static_cast<double>(coupled_d[i]) / draws;
    CHECK(test_stats::frequency_within(pe, 1.0 / static_cast<double>(n), draws, 4.0));
    CHECK(test_stats::frequency_within(pd, weights[i], draws, 4.0));
  }
}

TEST_CASE("tv_delta_probe") {
  SUBCASE("delta shrinks with alpha") {
    const auto rows = tv_delta_probe(100, 20, {0.01, 0.05, 0.1, 0.2});
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      CHECK(rows[i].delta_star <= rows[i + 1].delta_star + 1e-12);
    }
    CHECK(rows.front().delta_star < 0.01);  // alpha -> 0 pulls delta -> 0
    for (const auto& row : rows) {
      CHECK(row.achieved_tv <= row.alpha);
      CHECK(std::abs(row.achieved_tv - row.alpha) <= 1e-6);
    }
  }
  SUBCASE("delta shrinks as the batch grows at fixed alpha") {
    double prev = 1.0;
    for (std::size_t M : {10u, 40u, 160u}) {
      const auto rows = tv_delta_probe(1000, M, {0.1});
      CHECK(rows[0].delta_star <= prev + 1e-12);
      prev = rows[0].delta_star;
    }
  }
  SUBCASE("n=1000 M=100 alpha=0.1 report") {
    const auto rows = tv_delta_probe(1000, 100, {0.1});
    CHECK(rows[0].delta_star > 0.0);
    CHECK(rows[0].ratio == doctest::Approx(rows[0].delta_star * 10.0 / 0.01).epsilon(1e-12));
  }
  SUBCASE("alpha preconditions") {
    CHECK_THROWS_AS(tv_delta_probe(10, 2, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(tv_delta_probe(10, 2, {0.5}), std::invalid_argument);
  }
}

TEST_CASE("index vector validation") {
  IndexVector iv;
  iv.n = 5;
  iv.entries = {1, 5, 3};
  CHECK_NOTHROW(validate(iv));
  iv.entries = {0};
  CHECK_THROWS_AS(validate(iv), std::invalid_argument);
  iv.entries = {6};
  CHECK_THROWS_AS(validate(iv), std::invalid_argument);
}

TEST_CASE("coupled count distribution marginals and agreement") {
  const std::int64_t n = 5;
  const std::uint64_t N = 6;
  const double delta = 0.3;
  const CoupledCountDistribution dist(n, N, delta);

  // exact binomial pmfs for the oracle
  const std::int64_t s = split_index(n);
  const double p0 = static_cast<double>(n - s + 1) / n;
  const double p1 = (1.0 - delta) * p0 + delta;
  auto pmf = [N](double p, std::uint64_t k) {
    double choose = 1.0;
    for (std::uint64_t i = 0; i < k; ++i) {
      choose *= static_cast<double>(N - i) / static_cast<double>(i + 1);
    }
    return choose * std::pow(p, static_cast<double>(k)) *
           std::pow(1.0 - p, static_cast<double>(N - k));
  };
  double tv = 0.0;
  for (std::uint64_t k = 0; k <= N; ++k) tv += std::abs(pmf(p0, k) - pmf(p1, k));
  tv *= 0.5;
  CHECK(dist.agreement_probability() == doctest::Approx(1.0 - tv).epsilon(1e-12));

  RandomStream rng(37);
  const std::size_t draws = 300000;
  std::vector<std::size_t> c0(N + 1, 0), c1(N + 1, 0);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto d = dist.sample(rng);
    ++c0[static_cast<std::size_t>(d.uniform_count)];
    ++c1[static_cast<std::size_t>(d.perturbed_count)];
    if (d.identical) ++agree;
  }
  for (std::uint64_t k = 0; k <= N; ++k) {
    CHECK(test_stats::frequency_within(static_cast<double>(c0[k]) / draws, pmf(p0, k), draws, 4.0));
    CHECK(test_stats::frequency_within(static_cast<double>(c1[k]) / draws, pmf(p1, k), draws, 4.0));
  }
  CHECK(test_stats::frequency_within(static_cast<double>(agree) / draws,
                                     dist.agreement_probability(), draws, 4.0));
}

TEST_CASE("coupled stream sampler marginals") {
  const std::int64_t n = 5;
  const std::size_t M = 2;
  const std::uint64_t T = 3;
  const double delta = 0.3;
  const CoupledCountDistribution counts(n, M * T, delta);
  RandomStream rng(41);

  const std::size_t replicates = 60000;
  std::vector<std::size_t> freq_e(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> freq_d(static_cast<std::size_t>(n), 0);
  std::size_t identical_runs = 0;
  IndexVector e, d;
  for (std::size_t r = 0; r < replicates; ++r) {
    CoupledStreamSampler stream(n, M, T, counts, rng);
    bool all_equal = true;
    for (std::uint64_t t = 0; t < T; ++t) {
      stream.next_pair(e, d, rng);
      all_equal = all_equal && e.entries == d.entries;
      for (std::size_t i = 0; i < M; ++i) {
        ++freq_e[static_cast<std::size_t>(e.entries[i] - 1)];
        ++freq_d[static_cast<std::size_t>(d.entries[i] - 1)];
      }
    }
    if (stream.sequences_identical()) {
      CHECK(all_equal);
      ++identical_runs;
    }
  }
  const std::size_t coords = replicates * M * T;
  const auto weights = coordinate_weights(n, delta).weights;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    const double pe = static_cast<double>(freq_e[i]) / coords;
    const double pd = static_cast<double>(freq_d[i]) / coords;
    // coordinates within a replicate are exchangeable, not independent, so
    // allow a wider band than the i.i.d. standard error
    CHECK(test_stats::frequency_within(pe, 1.0 / static_cast<double>(n), replicates, 4.0));
    CHECK(test_stats::frequency_within(pd, weights[i], replicates, 4.0));
  }
  CHECK(test_stats::frequency_within(static_cast<double>(identical_runs) / replicates,
                                     counts.agreement_probability(), replicates, 4.0));
}
