#pragma once

// Nested cross-fitting of importance estimates and the resulting tests.
//
// For each seed the rows are split into outer_folds parts. Each part serves
// once as the evaluation split while a DR-learner (inner cross-fitting) is fit
// on the rest; PermuCATE and LOCO are then scored on the evaluation split.
// Importance values are pooled over folds and seeds into a Wald statistic.

#include "permucate/importance.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace permucate {

struct CrossfitPlan {
  /// Must equal 1 / outer_folds: every fold is held out exactly once.
  double outer_frac_heldout = 0.2;
  int outer_folds = 5;
  int inner_folds = 5;
  int n_seeds = 10;
  double alpha = 0.05;
  int n_permutations = 50;

  void validate() const;
};

struct ImportanceOptions {
  std::vector<ImportanceMethod> methods{ImportanceMethod::permucate, ImportanceMethod::loco};
  std::vector<RiskKind> risks{RiskKind::po_risk};
  NuisanceSpecs specs;
  LearnerSpec conditional = LearnerSpec::ridge();
  /// Attach the linear error-term diagnostics to every row (linear final stage only).
  bool diagnostics = false;
  bool record_timing = false;
  int workers = 1;
};

struct ImportanceRow {
  ImportanceMethod method = ImportanceMethod::permucate;
  RiskKind risk = RiskKind::po_risk;
  Index variable = 0;
  int seed = 0;
  int fold = 0;
  Index n = 0;
  double psi = 0.0;
  double risk_full = 0.0;
  bool constant_column = false;
  std::optional<double> delta_beta;
  std::optional<double> nu_variance;
  std::optional<double> wall_time_ms;
};

struct WaldResult {
  double z = 0.0;
  double p_value = 0.5;
};

/// z = mean / sample std (ddof 1), p = upper-tail normal probability of z.
/// A std below 1e-12 caps z at +-1e6 (0 when the mean is 0 too).
/// Throws DataError for fewer than two values.
WaldResult wald_statistic(std::span<const double> psis);

struct ImportanceAggregate {
  ImportanceMethod method = ImportanceMethod::permucate;
  RiskKind risk = RiskKind::po_risk;
  Index variable = 0;
  std::size_t count = 0;
  double mean_psi = 0.0;
  double std_psi = 0.0;
  double wald = 0.0;
  double p_value = 0.5;
  bool decision = false;
};

/// Wald test over the folds of a single seed.
struct SeedDecision {
  ImportanceMethod method = ImportanceMethod::permucate;
  RiskKind risk = RiskKind::po_risk;
  Index variable = 0;
  int seed = 0;
  double wald = 0.0;
  double p_value = 0.5;
  bool decision = false;
};

struct ImportanceTable {
  Index n = 0;
  Index d = 0;
  double alpha = 0.05;
  std::vector<ImportanceRow> rows;
  /// Pooled over folds and seeds.
  std::vector<ImportanceAggregate> aggregates;
  std::vector<SeedDecision> seed_decisions;

  const ImportanceAggregate& aggregate(ImportanceMethod method, RiskKind risk, Index variable) const;
  std::vector<double> mean_psi(ImportanceMethod method, RiskKind risk) const;
};

/// Sorts rows canonically and computes aggregates and per-seed decisions.
ImportanceTable make_table(std::vector<ImportanceRow> rows, Index n, Index d, double alpha);

/// Rows for one (seed, outer fold) cell. `outer` is the outer fold assignment.
std::vector<ImportanceRow> importance_fold(const Dataset& data, std::span<const int> outer, int fold,
                                           const CrossfitPlan& plan, const ImportanceOptions& options,
                                           std::uint64_t master_seed, int seed);

/// Outer fold assignment used for `seed`.
std::vector<int> outer_assignment(const Dataset& data, const CrossfitPlan& plan,
                                  std::uint64_t master_seed, int seed);

/// Throws DataError when some outer training split has fewer than
/// 2 * inner_folds rows in either treatment arm.
void check_fold_sizes(const Dataset& data, std::span<const int> outer, const CrossfitPlan& plan);

/// All rows for one seed.
std::vector<ImportanceRow> importance_seed(const Dataset& data, const CrossfitPlan& plan,
                                           const ImportanceOptions& options,
                                           std::uint64_t master_seed, int seed);

/// Data drawn for `seed` when running from a DGP.
Dataset dataset_for_seed(const DgpSpec& spec, Index n, std::uint64_t master_seed, int seed);

/// Fixed data; the outer split is redrawn per seed.
ImportanceTable run_crossfit_importance(const Dataset& data, const CrossfitPlan& plan,
                                        const ImportanceOptions& options, std::uint64_t master_seed);

/// Fresh data per seed.
ImportanceTable run_crossfit_importance(const DgpSpec& spec, Index n, const CrossfitPlan& plan,
                                        const ImportanceOptions& options, std::uint64_t master_seed);

struct PowerSummary {
  ImportanceMethod method = ImportanceMethod::permucate;
  RiskKind risk = RiskKind::po_risk;
  /// Fractions of (variable, seed) pairs, from the per-seed decisions.
  double tp_rate = 0.0;
  double fn_rate = 0.0;
  double type1_rate = 0.0;
  std::size_t important_trials = 0;
  std::size_t null_trials = 0;
  std::size_t false_positives = 0;
};

/// One summary per (method, risk) in the table. `important[j]` marks the
/// truly important variables; throws MissingOracleError when empty.
std::vector<PowerSummary> power_accounting(const ImportanceTable& table,
                                           const std::vector<bool>& important);

/// Fraction of seeds whose per-seed decision is positive for each variable.
std::vector<double> detection_rate(const ImportanceTable& table, ImportanceMethod method,
                                   RiskKind risk);

/// Smallest n in the sweep at which more than half of the seeds detect each
/// variable; nullopt when never reached. Tables must be sorted by n.
std::vector<std::optional<Index>> min_detect_n(std::span<const ImportanceTable> sweep,
                                               ImportanceMethod method, RiskKind risk);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace permucate
