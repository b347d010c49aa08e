#pragma once

// Variable importance for CATE models.
//
// PermuCATE (conditional permutation importance): each covariate j is split
// on the evaluation set into its predictable part nu_j(X^-j), fitted on the
// training set, and a residual r_j. The residual is shuffled, the covariate
// rebuilt as nu_j + shuffled r_j, and the unchanged CATE model is rescored.
// Importance is half the mean risk increase over the permutations.
//
// LOCO: the final-stage regression of the training pseudo-outcomes is refit
// without covariate j (nuisances are reused, not refit). Importance is the
// risk of the reduced model minus the risk of the full model.
//
// Both are oriented so that larger means more important.

#include "permucate/cate.hpp"
#include "permucate/risks.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace permucate {

enum class ImportanceMethod { permucate, loco };

std::string_view to_string(ImportanceMethod method) noexcept;
ImportanceMethod parse_importance_method(std::string_view name);

struct ConditionalModel {
  Index j = 0;
  FittedRegressor regressor;  // predicts column j from the other columns
  /// Variance of the training-set predictions of nu_j.
  double residual_variance = 0.0;
  /// Column j was constant on the training split.
  bool constant_column = false;
};

/// One ridge-CV regressor per covariate, trained to predict column j from the
/// remaining columns. Requires at least two columns.
std::vector<ConditionalModel> fit_conditional_models(const Matrix& x_train, const LearnerSpec& spec,
                                                     std::uint64_t seed);

struct ImportanceEstimate {
  ImportanceMethod method = ImportanceMethod::permucate;
  Index j = 0;
  /// PermuCATE: mean (risk_perturbed - risk_full) / 2. LOCO: reduced - full.
  double psi = 0.0;
  double risk_full = 0.0;
  /// PermuCATE: mean over permutations. LOCO: reduced-model risk.
  double risk_perturbed = 0.0;
  int n_permutations = 0;
  /// PermuCATE only: per-permutation (risk_perturbed_k - risk_full) / 2.
  std::vector<double> permutation_psi;
  /// Covariate constant on the training split; importance defined as 0.
  bool constant_column = false;

  /// PermuCATE before halving.
  double psi_unscaled() const noexcept { return 2.0 * psi; }
};

/// Runs PermuCATE on an evaluation split. `nuisances_test` are the nuisance
/// predictions on `test` (typically CateModel::transport_nuisances).
/// Permutation k of covariate j uses its own seeded stream, so results do not
/// depend on evaluation order.
std::vector<ImportanceEstimate> permucate(const CateModel& model,
                                          const NuisanceEstimates& nuisances_test,
                                          const Dataset& test,
                                          std::span<const ConditionalModel> conditional,
                                          int n_permutations, RiskKind risk, std::uint64_t seed);

struct LocoResult {
  std::vector<ImportanceEstimate> estimates;
  /// Reduced final-stage regressors, reduced[j] trained without column j.
  std::vector<FittedRegressor> reduced;
};

/// LOCO with the pseudo-outcome projection: reduced final stages regress the
/// training pseudo-outcomes (built from full-covariate nuisances) on X^-j.
/// Reduced fits reuse the full final stage's seed and therefore its CV folds.
LocoResult loco(const CateModel& model, const NuisanceEstimates& nuisances_train,
                const NuisanceEstimates& nuisances_test, const Dataset& train, const Dataset& test,
                const LearnerSpec& final_spec, RiskKind risk);

struct LinearDiagnostics {
  Index j = 0;
  /// ||full coefficients without j - reduced coefficients||^2
  double delta_beta_norm_sq = 0.0;
  /// Variance of nu_j over the evaluation rows.
  double nu_variance = 0.0;
};

/// Finite-sample error terms of the two estimators. Throws DataError when any
/// model lacks linear coefficients.
std::vector<LinearDiagnostics> linear_diagnostics(const FittedRegressor& full,
                                                  std::span<const FittedRegressor> reduced,
                                                  std::span<const ConditionalModel> conditional,
                                                  const Matrix& x_test);

}  // namespace permucate
