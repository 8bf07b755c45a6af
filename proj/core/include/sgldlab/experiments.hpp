#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgldlab/engine.hpp"
#include "sgldlab/tv_result.hpp"

namespace sgldlab {

/// Power-law schedule coef * n^exponent; the form every tuning sequence in
/// the studies takes.
struct PowerSchedule {
  double coef = 1.0;
  double exponent = 0.0;

  double at(std::int64_t n) const;
};

/// Tuning schedules for one study. short-run schedules must shrink the
/// per-datapoint work T*M/n and the sequence-level perturbation
/// omega*sqrt(M*T) while growing omega*sqrt(n); long-run schedules grow
/// T*M/n and shrink omega*sqrt(M*T).
struct ScalingRegime {
  std::string name;  // "short-run" or "long-run"
  std::vector<std::int64_t> n_grid;
  PowerSchedule horizon;     // T_n (floored, at least 1)
  PowerSchedule batch;       // M_n (floored, at least 1)
  PowerSchedule omega;       // perturbation delta of the second chain
  PowerSchedule step_size;   // epsilon_n
  /// Each regime condition must move in its required direction by at least
  /// this factor between the first and last grid point. 1 = directional
  /// check only.
  double min_trend_ratio = 1.0;

  std::size_t horizon_at(std::int64_t n) const;
  std::size_t batch_at(std::int64_t n) const;
  double omega_at(std::int64_t n) const;
  double step_at(std::int64_t n) const;
};

/// Defaults used by the CLI when no config file is given. Chosen so the
/// coupled pairs agree with high probability at desk-scale n while the two
/// targets are far apart (short-run) or so every data point is visited many
/// times (long-run).
ScalingRegime short_run_default();
ScalingRegime long_run_default();

struct RegimeCondition {
  std::string label;
  std::vector<double> values;  // one per grid point
  bool wants_increase = false;
};

std::vector<RegimeCondition> regime_conditions(const ScalingRegime& regime);

/// Throws std::invalid_argument with a per-condition diagnostic when a
/// condition fails to move in its required direction (by min_trend_ratio)
/// between the first and last grid point.
void validate_regime(const ScalingRegime& regime);

struct ExperimentRecord {
  std::int64_t n = 0;
  std::size_t replicates = 0;
  std::size_t horizon = 0;
  std::size_t batch = 0;
  double omega = 0.0;
  double step_size = 0.0;
  TvResult tv_chain_vs_posterior;
  TvResult tv_perturbed_vs_target;  // perturbed chain vs its weighted posterior
  TvResult tv_two_chains;
  double delta_sum = 0.0;    // sum of the two chain-vs-target TVs
  double target_gap = 0.0;   // exact TV between the two targets
  double coupling_agreement = 0.0;        // fraction of replicate pairs identical through T
  double coupling_agreement_exact = 0.0;  // 1 - exact TV between the driving sequences
  double coupling_bound_naive = 0.0;      // (1-omega)^(M*T)
  double eta_observed = 0.0;    // order gap of the dataset
  double gamma_observed = 0.0;  // observed sensitivity constant (see study docs)
  double coupling_budget = 0.0; // omega^(1/2) * (M*T)^(1/4)
  bool degenerate = false;      // omega == 0
  bool verdict = false;
  SeedRecord seeds;
};

struct StudyResult {
  std::string regime_name;
  std::vector<ExperimentRecord> records;
  std::uint64_t master_seed = 0;
  std::size_t replicates = 0;
  double slack = 0.2;
};

/// Short-horizon study: for each n, `replicates` coupled chain pairs are
/// run, the first uniform-driven and the second perturbed-driven, coupled
/// through the maximal coupling of the upper-block coordinate counts of the
/// whole driving sequences (the coupling whose agreement probability equals
/// one minus the exact sequence TV). Records both empirical chain-vs-target
/// TVs, their sum, the exact target gap, and the agreement diagnostics.
/// gamma_observed is the exact target gap; the verdict asks
/// delta_sum >= (1 - slack) * gamma_observed.
StudyResult run_short_run_study(const ScalingRegime& regime, std::size_t replicates,
                                std::uint64_t master_seed, unsigned threads = 1,
                                double slack = 0.2);

/// Long-horizon study: same machinery on long-run schedules.
/// gamma_observed is target_gap / (eta_observed * omega) and the verdict
/// uses the run-length-adjusted bound
/// delta_sum >= (1 - slack) * eta_observed * omega.
StudyResult run_long_run_study(const ScalingRegime& regime, std::size_t replicates,
                               std::uint64_t master_seed, unsigned threads = 1,
                               double slack = 0.2);

void write_records_csv(const StudyResult& result, const std::string& path);
std::vector<ExperimentRecord> read_records_csv(const std::string& path);

/// Writes plotdata_delta_sum.csv, plotdata_target_gap.csv and
/// plotdata_coupling_agreement.csv ((x, y) = (n, value)) into `directory`.
void write_plot_data(const StudyResult& result, const std::string& directory);

}  // namespace sgldlab
