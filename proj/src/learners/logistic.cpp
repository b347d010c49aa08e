#include "state.hpp"

#include "permucate/errors.hpp"
#include "permucate/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace permucate {

namespace {

constexpr double kStepTolerance = 1e-8;
constexpr int kMaxIterations = 100;

double softplus(double z) noexcept {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Penalized negative log-likelihood; w = (intercept, slopes).
double objective(const Matrix& z, const Vector& a, const Vector& w, double penalty) {
  const Vector eta = z * w;
  double loss = 0.0;
  for (Index i = 0; i < eta.size(); ++i) loss += softplus(eta(i)) - a(i) * eta(i);
  return loss + 0.5 * penalty * w.tail(w.size() - 1).squaredNorm();
}

struct NewtonResult {
  Vector w;
  int iterations = 0;
};

// Damped Newton (IRLS) on the L2-penalized logistic likelihood. The intercept
// is not penalized.
NewtonResult fit_fixed(const Matrix& x, const Vector& a, double penalty, Vector w) {
  const Index n = x.rows();
  const Index d = x.cols();
  Matrix z(n, d + 1);
  z.col(0).setOnes();
  z.rightCols(d) = x;

  double f = objective(z, a, w, penalty);
  int it = 0;
  for (; it < kMaxIterations; ++it) {
    const Vector eta = z * w;
    const Vector p = eta.unaryExpr([](double v) { return expit(v); });
    Vector grad = z.transpose() * (p - a);
    grad.tail(d) += penalty * w.tail(d);
    const Vector weight = (p.array() * (1.0 - p.array())).max(1e-12);
    Matrix hess = Matrix::Zero(d + 1, d + 1);
    hess.selfadjointView<Eigen::Lower>().rankUpdate((z.array().colwise() * weight.array().sqrt()).matrix().transpose());
    hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
    hess.diagonal().tail(d).array() += penalty;
    Eigen::LDLT<Matrix> ldlt(hess);
    const Vector step = ldlt.solve(grad);
    if (!step.allFinite()) throw NumericError("logistic: Newton step is not finite");

    // Backtracking keeps every iteration a descent step.
    double t = 1.0;
    const double slope = grad.dot(step);
    Vector candidate = w - step;
    double f_new = objective(z, a, candidate, penalty);
    for (int halvings = 0; halvings < 50 && f_new > f - 1e-4 * t * slope; ++halvings) {
      t *= 0.5;
      candidate = w - t * step;
      f_new = objective(z, a, candidate, penalty);
    }
    const double moved = (t * step).cwiseAbs().maxCoeff();
    w = std::move(candidate);
    f = f_new;
    if (moved < kStepTolerance) {
      ++it;
      break;
    }
  }
  return {std::move(w), it};
}

double log_loss(const Matrix& x, const Vector& a, const Vector& w) {
  constexpr double eps = 1e-15;
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double p = std::clamp(expit(w(0) + x.row(i).dot(w.tail(x.cols()))), eps, 1.0 - eps);
    loss -= a(i) * std::log(p) + (1.0 - a(i)) * std::log(1.0 - p);
  }
  return loss;
}

Vector initial_weights(const Vector& a, Index d) {
  Vector w = Vector::Zero(d + 1);
  const double prevalence = std::clamp(a.mean(), 1e-6, 1.0 - 1e-6);
  w(0) = std::log(prevalence / (1.0 - prevalence));
  return w;
}

FittedClassifier make_logistic(const LearnerSpec& spec, const Vector& w, double penalty,
                               int iterations) {
  auto state = std::make_shared<detail::ClassifierState>();
  state->spec = spec;
  state->input_dim = w.size() - 1;
  Vector coef = w.tail(w.size() - 1);
  state->coefficients = coef;
  state->model = detail::LinearState{std::move(coef), w(0), penalty, iterations};
  return FittedClassifier(std::move(state));
}

void check_labels(const Vector& a, std::string_view what) {
  Index ones = 0;
  for (Index i = 0; i < a.size(); ++i) {
    if (a(i) != 0.0 && a(i) != 1.0) throw DataError(std::string(what) + ": labels must be 0 or 1");
    ones += a(i) == 1.0 ? 1 : 0;
  }
  if (ones == 0 || ones == a.size())
    throw DegenerateInputError(std::string(what) + ": both classes must be present");
}

}  // namespace

FittedClassifier fit_logistic_cv(const Matrix& x, const Vector& a, const LearnerSpec& spec,
                                 std::uint64_t seed) {
  if (spec.kind != LearnerKind::logistic_cv)
    throw ConfigError("fit_logistic_cv: spec kind must be logistic_cv");
  spec.validate();
  check_design(x);
  check_length(x.rows(), a.size(), "logistic labels");
  check_labels(a, "logistic regression");

  const auto& grid = spec.penalty_grid;
  // Without enough rows of the rarer class to fill two folds, fall back to
  // the strongest penalty on the grid.
  double penalty = grid.back();
  const Index ones = static_cast<Index>(a.sum());
  const int folds = detail::usable_folds(std::min(ones, a.size() - ones), spec.cv_folds);
  if (grid.size() == 1) {
    penalty = grid.front();
  } else if (folds >= 2) {
    const auto assignment =
        stratified_kfold_assignment(as_span(a), folds, derive_seed(seed, Stream::folds, {0x6c67}));
    std::vector<double> loss(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
      const auto train = rows_outside_fold(assignment, f);
      const auto valid = rows_in_fold(assignment, f);
      const Matrix xt = take_rows(x, train);
      const Vector at = take_rows(a, train);
      const Matrix xv = take_rows(x, valid);
      const Vector av = take_rows(a, valid);
      // Strongest penalty first; each fit warm-starts the next.
      Vector w = initial_weights(at, x.cols());
      for (std::size_t g = grid.size(); g-- > 0;) {
        w = fit_fixed(xt, at, grid[g], std::move(w)).w;
        loss[g] += log_loss(xv, av, w);
      }
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (loss[g] < best) {
        best = loss[g];
        penalty = grid[g];
      }
    }
  }
  auto fit = fit_fixed(x, a, penalty, initial_weights(a, x.cols()));
  return make_logistic(spec, fit.w, penalty, fit.iterations);
}

FittedClassifier make_logistic_classifier(Vector coefficients, double intercept) {
  Vector w(coefficients.size() + 1);
  w(0) = intercept;
  w.tail(coefficients.size()) = coefficients;
  return make_logistic(LearnerSpec::logistic(), w, 0.0, 0);
}

namespace detail {
void check_binary_labels(const Vector& a, std::string_view what) { check_labels(a, what); }
}  // namespace detail

}  // namespace permucate
