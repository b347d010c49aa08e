#include "state.hpp"

#include "permucate/errors.hpp"
#include "permucate/random.hpp"

namespace permucate {

namespace {

constexpr int kStackFolds = 5;

void check_stacked(const LearnerSpec& spec, const Matrix& x, const Vector& target) {
  if (spec.kind != LearnerKind::stacked) throw ConfigError("stacked fit: spec kind must be stacked");
  spec.validate();
  check_design(x);
  check_length(x.rows(), target.size(), "stacked target");
}

// Every base learner shares one seed, so repeated specs are identical fits.
std::uint64_t base_seed(std::uint64_t seed, std::size_t) {
  return derive_seed(seed, Stream::learner, {0x737463});
}

// NNLS weights rescaled to sum to one; uniform when NNLS returns all zeros.
std::vector<double> combiner_weights(const Matrix& oof, const Vector& target) {
  const Vector w = nnls(oof, target);
  const double total = w.sum();
  std::vector<double> out(static_cast<std::size_t>(w.size()), 1.0 / static_cast<double>(w.size()));
  if (total > 0.0)
    for (Index b = 0; b < w.size(); ++b) out[static_cast<std::size_t>(b)] = w(b) / total;
  return out;
}

}  // namespace

FittedRegressor fit_stacked(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                            std::uint64_t seed) {
  check_stacked(spec, x, y);
  const int folds = detail::usable_folds(x.rows(), kStackFolds);
  if (folds < 2) throw DegenerateInputError("stacking needs at least two samples");
  const auto assignment = kfold_assignment(x.rows(), folds, derive_seed(seed, Stream::folds, {0x737463}));

  Matrix oof(x.rows(), static_cast<Index>(spec.base.size()));
  for (int f = 0; f < folds; ++f) {
    const auto train = rows_outside_fold(assignment, f);
    const auto valid = rows_in_fold(assignment, f);
    const Matrix xt = take_rows(x, train);
    const Vector yt = take_rows(y, train);
    const Matrix xv = take_rows(x, valid);
    for (std::size_t b = 0; b < spec.base.size(); ++b) {
      const Vector pred = fit_regressor(xt, yt, spec.base[b], base_seed(seed, b)).predict(xv);
      for (std::size_t r = 0; r < valid.size(); ++r) oof(valid[r], static_cast<Index>(b)) = pred(static_cast<Index>(r));
    }
  }
  detail::StackState stack;
  stack.weights = combiner_weights(oof, y);
  for (std::size_t b = 0; b < spec.base.size(); ++b)
    stack.bases.push_back(fit_regressor(x, y, spec.base[b], base_seed(seed, b)));

  auto state = std::make_shared<detail::RegressorState>();
  state->spec = spec;
  state->input_dim = x.cols();
  state->model = std::move(stack);
  return FittedRegressor(std::move(state));
}

FittedClassifier fit_stacked_classifier(const Matrix& x, const Vector& a, const LearnerSpec& spec,
                                        std::uint64_t seed) {
  check_stacked(spec, x, a);
  detail::check_binary_labels(a, "stacked classifier");
  const Index ones = static_cast<Index>(a.sum());
  const int folds = detail::usable_folds(std::min(ones, a.size() - ones), kStackFolds);
  if (folds < 2) throw DegenerateInputError("stacked classifier needs two samples of each class");
  const auto assignment =
      stratified_kfold_assignment(as_span(a), folds, derive_seed(seed, Stream::folds, {0x737463}));

  Matrix oof(x.rows(), static_cast<Index>(spec.base.size()));
  for (int f = 0; f < folds; ++f) {
    const auto train = rows_outside_fold(assignment, f);
    const auto valid = rows_in_fold(assignment, f);
    const Matrix xt = take_rows(x, train);
    const Vector at = take_rows(a, train);
    const Matrix xv = take_rows(x, valid);
    for (std::size_t b = 0; b < spec.base.size(); ++b) {
      const Vector pred = fit_classifier(xt, at, spec.base[b], base_seed(seed, b)).predict_proba(xv);
      for (std::size_t r = 0; r < valid.size(); ++r) oof(valid[r], static_cast<Index>(b)) = pred(static_cast<Index>(r));
    }
  }
  detail::StackClassifierState stack;
  stack.weights = combiner_weights(oof, a);
  for (std::size_t b = 0; b < spec.base.size(); ++b)
    stack.bases.push_back(fit_classifier(x, a, spec.base[b], base_seed(seed, b)));

  auto state = std::make_shared<detail::ClassifierState>();
  state->spec = spec;
  state->input_dim = x.cols();
  state->model = std::move(stack);
  return FittedClassifier(std::move(state));
}

}  // namespace permucate
