#include "state.hpp"

#include "permucate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace permucate {

std::string_view to_string(LearnerKind kind) noexcept {
  switch (kind) {
    case LearnerKind::ridge_cv: return "ridge_cv";
    case LearnerKind::logistic_cv: return "logistic_cv";
    case LearnerKind::gbt_regress: return "gbt_regress";
    case LearnerKind::gbt_classify: return "gbt_classify";
    case LearnerKind::stacked: return "stacked";
  }
  return "unknown";
}

std::vector<double> log_spaced_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw ConfigError("log_spaced_grid: need 0 < lo <= hi and count >= 1");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + t * (b - a));
  }
  return grid;
}

std::vector<double> default_penalty_grid() { return log_spaced_grid(1e-3, 1e3, 10); }

void LearnerSpec::validate() const {
  const bool linear = kind == LearnerKind::ridge_cv || kind == LearnerKind::logistic_cv;
  if (linear) {
    if (penalty_grid.empty()) throw ConfigError("penalty_grid must not be empty");
    for (std::size_t i = 0; i < penalty_grid.size(); ++i) {
      if (!(penalty_grid[i] > 0.0) || !std::isfinite(penalty_grid[i]))
        throw ConfigError("penalty_grid entries must be positive and finite");
      if (i > 0 && !(penalty_grid[i] > penalty_grid[i - 1]))
        throw ConfigError("penalty_grid must be sorted strictly ascending");
    }
  }
  if (cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  if (kind == LearnerKind::gbt_regress || kind == LearnerKind::gbt_classify) {
    if (!(gbt_learning_rate > 0.0)) throw ConfigError("gbt_learning_rate must be positive");
    if (gbt_max_leaves < 2) throw ConfigError("gbt_max_leaves must be at least 2");
    if (gbt_n_rounds < 1) throw ConfigError("gbt_n_rounds must be at least 1");
    if (gbt_min_samples_leaf < 1) throw ConfigError("gbt_min_samples_leaf must be at least 1");
  }
  if (kind == LearnerKind::stacked) {
    if (base.size() < 2) throw ConfigError("stacked learner needs at least two base learners");
    for (const auto& b : base) b.validate();
  }
}

LearnerSpec LearnerSpec::ridge(std::vector<double> grid) {
  LearnerSpec s;
  s.kind = LearnerKind::ridge_cv;
  s.penalty_grid = std::move(grid);
  return s;
}

LearnerSpec LearnerSpec::logistic(std::vector<double> grid) {
  LearnerSpec s;
  s.kind = LearnerKind::logistic_cv;
  s.penalty_grid = std::move(grid);
  return s;
}

LearnerSpec LearnerSpec::gbt_regressor() {
  LearnerSpec s;
  s.kind = LearnerKind::gbt_regress;
  return s;
}

LearnerSpec LearnerSpec::gbt_classifier() {
  LearnerSpec s;
  s.kind = LearnerKind::gbt_classify;
  return s;
}

LearnerSpec LearnerSpec::stacked(std::vector<LearnerSpec> base) {
  LearnerSpec s;
  s.kind = LearnerKind::stacked;
  s.base = std::move(base);
  return s;
}

// ---------------------------------------------------------------------------

namespace detail {

Vector BoostState::raw(const Matrix& x) const {
  Vector out = Vector::Constant(x.rows(), initial);
  for (const auto& tree : trees)
    for (Index i = 0; i < x.rows(); ++i) out(i) += learning_rate * tree.predict_row(x, i);
  return out;
}

}  // namespace detail

namespace {

const std::vector<double>& empty_doubles() {
  static const std::vector<double> empty;
  return empty;
}

}  // namespace

FittedRegressor::FittedRegressor(std::shared_ptr<const detail::RegressorState> state)
    : state_(std::move(state)) {}

Vector FittedRegressor::predict(const Matrix& x) const {
  if (x.cols() != state_->input_dim) {
    throw DimensionError("predict: model expects " + std::to_string(state_->input_dim) +
                         " columns, got " + std::to_string(x.cols()));
  }
  return std::visit(
      [&](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, detail::LinearState>) {
          Vector out = x * m.coefficients;
          out.array() += m.intercept;
          return out;
        } else if constexpr (std::is_same_v<T, detail::BoostState>) {
          return m.raw(x);
        } else {
          Vector out = Vector::Zero(x.rows());
          for (std::size_t b = 0; b < m.bases.size(); ++b)
            if (m.weights[b] != 0.0) out += m.weights[b] * m.bases[b].predict(x);
          return out;
        }
      },
      state_->model);
}

const LearnerSpec& FittedRegressor::spec() const noexcept { return state_->spec; }
Index FittedRegressor::input_dim() const noexcept { return state_->input_dim; }
const std::optional<Vector>& FittedRegressor::coefficients() const noexcept {
  return state_->coefficients;
}

double FittedRegressor::intercept() const noexcept {
  if (const auto* m = std::get_if<detail::LinearState>(&state_->model)) return m->intercept;
  return 0.0;
}

std::optional<double> FittedRegressor::selected_penalty() const noexcept {
  if (const auto* m = std::get_if<detail::LinearState>(&state_->model)) return m->penalty;
  return std::nullopt;
}

const std::vector<double>& FittedRegressor::training_loss() const noexcept {
  if (const auto* m = std::get_if<detail::BoostState>(&state_->model)) return m->training_loss;
  return empty_doubles();
}

int FittedRegressor::effective_rounds() const noexcept {
  if (const auto* m = std::get_if<detail::BoostState>(&state_->model)) return m->effective_rounds;
  return 0;
}

const std::vector<double>& FittedRegressor::stack_weights() const noexcept {
  if (const auto* m = std::get_if<detail::StackState>(&state_->model)) return m->weights;
  return empty_doubles();
}

FittedClassifier::FittedClassifier(std::shared_ptr<const detail::ClassifierState> state)
    : state_(std::move(state)) {}

Vector FittedClassifier::predict_proba(const Matrix& x) const {
  if (x.cols() != state_->input_dim) {
    throw DimensionError("predict_proba: model expects " + std::to_string(state_->input_dim) +
                         " columns, got " + std::to_string(x.cols()));
  }
  Vector p = std::visit(
      [&](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, detail::LinearState>) {
          Vector z = x * m.coefficients;
          z.array() += m.intercept;
          return z.unaryExpr([](double v) { return expit(v); });
        } else if constexpr (std::is_same_v<T, detail::BoostState>) {
          return m.raw(x).unaryExpr([](double v) { return expit(v); });
        } else {
          Vector out = Vector::Zero(x.rows());
          for (std::size_t b = 0; b < m.bases.size(); ++b)
            if (m.weights[b] != 0.0) out += m.weights[b] * m.bases[b].predict_proba(x);
          return out;
        }
      },
      state_->model);
  return p.cwiseMax(kPropensityClip).cwiseMin(1.0 - kPropensityClip);
}

const LearnerSpec& FittedClassifier::spec() const noexcept { return state_->spec; }
Index FittedClassifier::input_dim() const noexcept { return state_->input_dim; }
const std::optional<Vector>& FittedClassifier::coefficients() const noexcept {
  return state_->coefficients;
}

double FittedClassifier::intercept() const noexcept {
  if (const auto* m = std::get_if<detail::LinearState>(&state_->model)) return m->intercept;
  return 0.0;
}

std::optional<double> FittedClassifier::selected_penalty() const noexcept {
  if (const auto* m = std::get_if<detail::LinearState>(&state_->model)) return m->penalty;
  return std::nullopt;
}

int FittedClassifier::iterations() const noexcept {
  if (const auto* m = std::get_if<detail::LinearState>(&state_->model)) return m->iterations;
  return 0;
}

const std::vector<double>& FittedClassifier::training_loss() const noexcept {
  if (const auto* m = std::get_if<detail::BoostState>(&state_->model)) return m->training_loss;
  return empty_doubles();
}

const std::vector<double>& FittedClassifier::stack_weights() const noexcept {
  if (const auto* m = std::get_if<detail::StackClassifierState>(&state_->model))
    return m->weights;
  return empty_doubles();
}

FittedRegressor fit_regressor(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                              std::uint64_t seed) {
  switch (spec.kind) {
    case LearnerKind::ridge_cv: return fit_ridge_cv(x, y, spec, seed);
    case LearnerKind::gbt_regress: return fit_gbt_regressor(x, y, spec, seed);
    case LearnerKind::stacked: return fit_stacked(x, y, spec, seed);
    default:
      throw ConfigError("fit_regressor: '" + std::string(to_string(spec.kind)) +
                        "' is a classifier kind");
  }
}

FittedClassifier fit_classifier(const Matrix& x, const Vector& a, const LearnerSpec& spec,
                                std::uint64_t seed) {
  switch (spec.kind) {
    case LearnerKind::logistic_cv: return fit_logistic_cv(x, a, spec, seed);
    case LearnerKind::gbt_classify: return fit_gbt_classifier(x, a, spec, seed);
    case LearnerKind::stacked: return fit_stacked_classifier(x, a, spec, seed);
    default:
      throw ConfigError("fit_classifier: '" + std::string(to_string(spec.kind)) +
                        "' is a regressor kind");
  }
}

Vector nnls(const Matrix& p, const Vector& y, double tol, int max_sweeps) {
  check_length(p.rows(), y.size(), "nnls target");
  const Index m = p.cols();
  Vector w = Vector::Zero(m);
  Vector residual = y;
  Vector col_norm(m);
  for (Index k = 0; k < m; ++k) col_norm(k) = p.col(k).squaredNorm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index k = 0; k < m; ++k) {
      if (col_norm(k) <= 0.0) continue;
      const double updated = std::max(0.0, w(k) + p.col(k).dot(residual) / col_norm(k));
      const double delta = updated - w(k);
      if (delta != 0.0) {
        residual.noalias() -= delta * p.col(k);
        w(k) = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < tol) break;
  }
  return w;
}

// ---------------------------------------------------------------------------

PolynomialMap make_polynomial_map(int input_dim, int degree, bool include_interactions) {
  if (input_dim < 1) throw ConfigError("polynomial map: input_dim must be positive");
  if (degree < 1) throw ConfigError("polynomial map: degree must be positive");
  PolynomialMap map{degree, include_interactions, input_dim, 0};
  map.output_dim = static_cast<int>(polynomial_terms(map).size());
  return map;
}

std::vector<std::vector<int>> polynomial_terms(const PolynomialMap& map) {
  std::vector<std::vector<int>> terms;
  for (int deg = 1; deg <= map.degree; ++deg) {
    if (!map.include_interactions) {
      for (int i = 0; i < map.input_dim; ++i) terms.emplace_back(static_cast<std::size_t>(deg), i);
      continue;
    }
    // Non-decreasing index tuples of length deg, in lexicographic order.
    std::vector<int> idx(static_cast<std::size_t>(deg), 0);
    while (true) {
      terms.push_back(idx);
      int pos = deg - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == map.input_dim - 1) --pos;
      if (pos < 0) break;
      const int next = idx[static_cast<std::size_t>(pos)] + 1;
      for (int q = pos; q < deg; ++q) idx[static_cast<std::size_t>(q)] = next;
    }
  }
  return terms;
}

Matrix expand_polynomial(const Matrix& x, const PolynomialMap& map) {
  if (x.cols() != map.input_dim) {
    throw DimensionError("expand_polynomial: map expects " + std::to_string(map.input_dim) +
                         " columns, got " + std::to_string(x.cols()));
  }
  const auto terms = polynomial_terms(map);
  Matrix out(x.rows(), static_cast<Index>(terms.size()));
  for (std::size_t t = 0; t < terms.size(); ++t) {
    Vector col = Vector::Ones(x.rows());
    for (int i : terms[t]) col.array() *= x.col(i).array();
    out.col(static_cast<Index>(t)) = col;
  }
  return out;
}

}  // namespace permucate
