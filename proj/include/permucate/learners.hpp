#pragma once

// Supervised learners behind one fit/predict surface.
//
// Regressors: ridge with a cross-validated penalty, gradient-boosted trees on
// squared loss, and a stacked combination of other regressors. Classifiers:
// L2 logistic regression with a cross-validated penalty, gradient-boosted
// trees on logistic loss, and a stacked combination of classifiers. Fitted
// models are immutable and cheap to copy (shared state).

#include "permucate/linalg.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace permucate {

enum class LearnerKind { ridge_cv, logistic_cv, gbt_regress, gbt_classify, stacked };

std::string_view to_string(LearnerKind kind) noexcept;

/// `count` values spaced evenly in log10 between lo and hi, inclusive.
std::vector<double> log_spaced_grid(double lo, double hi, int count);

/// Ten log-spaced penalties from 1e-3 to 1e3.
std::vector<double> default_penalty_grid();

/// Propensity predictions are clipped to [kPropensityClip, 1 - kPropensityClip].
inline constexpr double kPropensityClip = 0.01;

struct LearnerSpec {
  LearnerKind kind = LearnerKind::ridge_cv;
  std::vector<double> penalty_grid = default_penalty_grid();
  int cv_folds = 5;
  double gbt_learning_rate = 0.1;
  int gbt_max_leaves = 10;
  int gbt_n_rounds = 100;
  int gbt_min_samples_leaf = 20;
  /// Level-0 learners of a stacked spec.
  std::vector<LearnerSpec> base;

  /// Throws ConfigError when a field violates its constraint.
  void validate() const;

  static LearnerSpec ridge(std::vector<double> grid = default_penalty_grid());
  static LearnerSpec logistic(std::vector<double> grid = default_penalty_grid());
  static LearnerSpec gbt_regressor();
  static LearnerSpec gbt_classifier();
  static LearnerSpec stacked(std::vector<LearnerSpec> base);
};

namespace detail {
struct RegressorState;
struct ClassifierState;
}  // namespace detail

class FittedRegressor {
 public:
  explicit FittedRegressor(std::shared_ptr<const detail::RegressorState> state);

  /// Throws DimensionError when x has the wrong number of columns.
  Vector predict(const Matrix& x) const;

  const LearnerSpec& spec() const noexcept;
  Index input_dim() const noexcept;

  /// Slope coefficients; present only for ridge models.
  const std::optional<Vector>& coefficients() const noexcept;
  /// Unpenalized intercept (ridge only; 0 otherwise).
  double intercept() const noexcept;
  std::optional<double> selected_penalty() const noexcept;

  /// Training loss before the first round and after each round (boosting only).
  const std::vector<double>& training_loss() const noexcept;
  /// Boosting rounds that added at least one split.
  int effective_rounds() const noexcept;
  /// Combiner weights (stacking only).
  const std::vector<double>& stack_weights() const noexcept;

 private:
  std::shared_ptr<const detail::RegressorState> state_;
};

class FittedClassifier {
 public:
  explicit FittedClassifier(std::shared_ptr<const detail::ClassifierState> state);

  /// P(label = 1 | x), clipped to [0.01, 0.99].
  Vector predict_proba(const Matrix& x) const;

  const LearnerSpec& spec() const noexcept;
  Index input_dim() const noexcept;

  /// Logistic slope coefficients and intercept (logistic_cv only).
  const std::optional<Vector>& coefficients() const noexcept;
  double intercept() const noexcept;
  std::optional<double> selected_penalty() const noexcept;
  int iterations() const noexcept;

  const std::vector<double>& training_loss() const noexcept;
  const std::vector<double>& stack_weights() const noexcept;

 private:
  std::shared_ptr<const detail::ClassifierState> state_;
};

FittedRegressor fit_ridge_cv(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                             std::uint64_t seed);

/// Builds a ridge regressor directly from coefficients (used for oracle
/// final stages and tests).
FittedRegressor make_linear_regressor(Vector coefficients, double intercept);

FittedClassifier fit_logistic_cv(const Matrix& x, const Vector& a, const LearnerSpec& spec,
                                 std::uint64_t seed);

/// Builds a logistic classifier directly from coefficients.
FittedClassifier make_logistic_classifier(Vector coefficients, double intercept);

FittedRegressor fit_gbt_regressor(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                                  std::uint64_t seed);
FittedClassifier fit_gbt_classifier(const Matrix& x, const Vector& a, const LearnerSpec& spec,
                                    std::uint64_t seed);

FittedRegressor fit_stacked(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                            std::uint64_t seed);
FittedClassifier fit_stacked_classifier(const Matrix& x, const Vector& a,
                                        const LearnerSpec& spec, std::uint64_t seed);

/// Dispatch on spec.kind. Classifier kinds are rejected by fit_regressor and
/// vice versa; `stacked` is accepted by both.
FittedRegressor fit_regressor(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                              std::uint64_t seed);
FittedClassifier fit_classifier(const Matrix& x, const Vector& a, const LearnerSpec& spec,
                                std::uint64_t seed);

/// Non-negative least squares min ||y - P w||^2, w >= 0, by cyclic projected
/// coordinate descent; stops when no weight moves by more than `tol`.
Vector nnls(const Matrix& p, const Vector& y, double tol = 1e-8, int max_sweeps = 100000);

struct PolynomialMap {
  int degree = 3;
  bool include_interactions = true;
  int input_dim = 1;
  int output_dim = 1;
};

PolynomialMap make_polynomial_map(int input_dim, int degree, bool include_interactions = true);

/// Index tuples of every monomial, grouped by degree, lexicographic within a
/// degree (i <= j <= k ...).
std::vector<std::vector<int>> polynomial_terms(const PolynomialMap& map);

Matrix expand_polynomial(const Matrix& x, const PolynomialMap& map);

}  // namespace permucate
