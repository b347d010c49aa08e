#include "state.hpp"

#include "permucate/errors.hpp"
#include "permucate/random.hpp"

#include <limits>

namespace permucate {

namespace {

struct CenteredProblem {
  Vector x_mean;
  double y_mean = 0.0;
  Matrix gram;  // centered X'X
  Vector xty;   // centered X'y
};

CenteredProblem center(const Matrix& x, const Vector& y) {
  CenteredProblem p;
  p.x_mean = x.colwise().mean().transpose();
  p.y_mean = y.mean();
  const Matrix xc = x.rowwise() - p.x_mean.transpose();
  p.gram = Matrix::Zero(x.cols(), x.cols());
  p.gram.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
  p.gram.triangularView<Eigen::StrictlyUpper>() = p.gram.transpose();
  p.xty = xc.transpose() * (y.array() - p.y_mean).matrix();
  return p;
}

Vector solve_penalized(const CenteredProblem& p, double penalty) {
  Matrix system = p.gram;
  system.diagonal().array() += penalty;
  Eigen::LDLT<Matrix> ldlt(system);
  if (ldlt.info() != Eigen::Success) throw NumericError("ridge: factorization failed");
  Vector beta = ldlt.solve(p.xty);
  if (!beta.allFinite()) throw NumericError("ridge: non-finite coefficients");
  return beta;
}

FittedRegressor make_ridge(const LearnerSpec& spec, Vector beta, double intercept,
                           double penalty) {
  auto state = std::make_shared<detail::RegressorState>();
  state->spec = spec;
  state->input_dim = beta.size();
  state->coefficients = beta;
  state->model = detail::LinearState{std::move(beta), intercept, penalty, 0};
  return FittedRegressor(std::move(state));
}

// Mean squared validation error for every grid penalty, accumulated over
// folds. Each fold's centered Gram matrix is diagonalized once so the whole
// grid costs one eigendecomposition.
std::vector<double> cv_errors(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                              std::uint64_t seed) {
  const int folds = detail::usable_folds(x.rows(), spec.cv_folds);
  const auto assignment = kfold_assignment(x.rows(), folds, seed);
  std::vector<double> sse(spec.penalty_grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const auto train = rows_outside_fold(assignment, f);
    const auto valid = rows_in_fold(assignment, f);
    const CenteredProblem p = center(take_rows(x, train), take_rows(y, train));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p.gram);
    const Vector rotated = eig.eigenvectors().transpose() * p.xty;
    const Matrix xv = take_rows(x, valid).rowwise() - p.x_mean.transpose();
    const Matrix xv_rot = xv * eig.eigenvectors();
    const Vector yv = take_rows(y, valid).array() - p.y_mean;
    for (std::size_t g = 0; g < spec.penalty_grid.size(); ++g) {
      const Vector shrunk =
          rotated.array() / (eig.eigenvalues().array().max(0.0) + spec.penalty_grid[g]);
      sse[g] += (yv - xv_rot * shrunk).squaredNorm();
    }
  }
  for (double& v : sse) v /= static_cast<double>(x.rows());
  return sse;
}

}  // namespace

FittedRegressor fit_ridge_cv(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                             std::uint64_t seed) {
  if (spec.kind != LearnerKind::ridge_cv) throw ConfigError("fit_ridge_cv: spec kind must be ridge_cv");
  spec.validate();
  check_design(x);
  check_length(x.rows(), y.size(), "ridge target");
  if (!y.allFinite()) throw DataError("ridge target contains non-finite values");

  double penalty = spec.penalty_grid.front();
  if (spec.penalty_grid.size() > 1 && x.rows() >= 2) {
    const auto errors = cv_errors(x, y, spec, derive_seed(seed, Stream::folds, {0x7269}));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < errors.size(); ++g) {
      if (errors[g] < best) {
        best = errors[g];
        penalty = spec.penalty_grid[g];
      }
    }
  }
  const CenteredProblem p = center(x, y);
  Vector beta = solve_penalized(p, penalty);
  const double intercept = p.y_mean - p.x_mean.dot(beta);
  return make_ridge(spec, std::move(beta), intercept, penalty);
}

FittedRegressor make_linear_regressor(Vector coefficients, double intercept) {
  LearnerSpec spec = LearnerSpec::ridge();
  return make_ridge(spec, std::move(coefficients), intercept, 0.0);
}

}  // namespace permucate
