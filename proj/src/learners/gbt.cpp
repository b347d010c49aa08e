#include "state.hpp"

#include "permucate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace permucate {

namespace {

using detail::BoostLoss;
using detail::BoostState;
using detail::RegressionTree;
using detail::TreeNode;

constexpr double kMinGain = 1e-12;
constexpr double kMinHessian = 1e-12;

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct Leaf {
  int node = 0;
  double grad_sum = 0.0;
  double hess_sum = 0.0;
  Index count = 0;
  Split best;
};

// Grows one leaf-limited tree best-first: the leaf whose best split has the
// largest gain is split next, until max_leaves is reached or no split gains.
class TreeGrower {
 public:
  TreeGrower(const Matrix& x, const std::vector<std::vector<Index>>& sorted, const Vector& grad,
             const Vector& hess, int max_leaves, Index min_leaf)
      : x_(x), sorted_(sorted), grad_(grad), hess_(hess), max_leaves_(max_leaves),
        min_leaf_(min_leaf), node_of_(static_cast<std::size_t>(x.rows()), 0) {}

  RegressionTree grow() {
    tree_.nodes.assign(1, TreeNode{});
    std::vector<Leaf> leaves;
    leaves.push_back(make_leaf(0, grad_.sum(), hess_.sum(), x_.rows()));
    while (static_cast<int>(leaves.size()) < max_leaves_) {
      std::size_t pick = leaves.size();
      double best_gain = kMinGain;
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        if (leaves[l].best.feature >= 0 && leaves[l].best.gain > best_gain) {
          best_gain = leaves[l].best.gain;
          pick = l;
        }
      }
      if (pick == leaves.size()) break;
      const Leaf parent = leaves[pick];
      const int left = static_cast<int>(tree_.nodes.size());
      const int right = left + 1;
      tree_.nodes.push_back(TreeNode{});
      tree_.nodes.push_back(TreeNode{});
      TreeNode& node = tree_.nodes[static_cast<std::size_t>(parent.node)];
      node.feature = parent.best.feature;
      node.threshold = parent.best.threshold;
      node.left = left;
      node.right = right;

      double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
      Index nl = 0, nr = 0;
      for (Index i = 0; i < x_.rows(); ++i) {
        if (node_of_[static_cast<std::size_t>(i)] != parent.node) continue;
        if (x_(i, node.feature) <= node.threshold) {
          node_of_[static_cast<std::size_t>(i)] = left;
          gl += grad_(i);
          hl += hess_(i);
          ++nl;
        } else {
          node_of_[static_cast<std::size_t>(i)] = right;
          gr += grad_(i);
          hr += hess_(i);
          ++nr;
        }
      }
      leaves[pick] = make_leaf(left, gl, hl, nl);
      leaves.push_back(make_leaf(right, gr, hr, nr));
    }
    for (const Leaf& leaf : leaves) {
      tree_.nodes[static_cast<std::size_t>(leaf.node)].value =
          -leaf.grad_sum / std::max(leaf.hess_sum, kMinHessian);
    }
    return std::move(tree_);
  }

  const std::vector<int>& node_of() const { return node_of_; }

 private:
  Leaf make_leaf(int node, double g, double h, Index count) {
    Leaf leaf{node, g, h, count, Split{}};
    if (count >= 2 * min_leaf_) leaf.best = best_split(node, g, h, count);
    return leaf;
  }

  // Exact search: every midpoint between consecutive distinct values of every
  // feature, scanning the presorted order restricted to this node.
  Split best_split(int node, double g_total, double h_total, Index count) const {
    Split best;
    const double parent_score = g_total * g_total / std::max(h_total, kMinHessian);
    for (Index f = 0; f < x_.cols(); ++f) {
      double gl = 0.0, hl = 0.0;
      Index nl = 0;
      double prev = 0.0;
      for (Index i : sorted_[static_cast<std::size_t>(f)]) {
        if (node_of_[static_cast<std::size_t>(i)] != node) continue;
        const double v = x_(i, f);
        if (nl >= min_leaf_ && count - nl >= min_leaf_ && v > prev) {
          const double gr = g_total - gl;
          const double hr = h_total - hl;
          const double gain = gl * gl / std::max(hl, kMinHessian) +
                              gr * gr / std::max(hr, kMinHessian) - parent_score;
          if (gain > best.gain) {
            best.gain = gain;
            best.feature = static_cast<int>(f);
            best.threshold = prev + 0.5 * (v - prev);
          }
        }
        gl += grad_(i);
        hl += hess_(i);
        ++nl;
        prev = v;
        if (count - nl < min_leaf_) break;
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<std::vector<Index>>& sorted_;
  const Vector& grad_;
  const Vector& hess_;
  int max_leaves_;
  Index min_leaf_;
  std::vector<int> node_of_;
  RegressionTree tree_;
};

double training_loss(BoostLoss loss, const Vector& target, const Vector& raw) {
  double total = 0.0;
  for (Index i = 0; i < raw.size(); ++i) {
    if (loss == BoostLoss::squared) {
      const double r = target(i) - raw(i);
      total += r * r;
    } else {
      const double z = raw(i);
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      total += softplus - target(i) * z;
    }
  }
  return total / static_cast<double>(raw.size());
}

void check_distinct_rows(const Matrix& x) {
  for (Index i = 1; i < x.rows(); ++i)
    if (x.row(i) != x.row(0)) return;
  throw DegenerateInputError("gradient boosting needs at least two distinct samples");
}

BoostState boost(const Matrix& x, const Vector& target, const LearnerSpec& spec, BoostLoss loss) {
  check_design(x);
  check_length(x.rows(), target.size(), "boosting target");
  if (!target.allFinite()) throw DataError("boosting target contains non-finite values");
  if (x.rows() < 2) throw DegenerateInputError("gradient boosting needs at least two samples");
  check_distinct_rows(x);

  std::vector<std::vector<Index>> sorted(static_cast<std::size_t>(x.cols()));
  for (Index f = 0; f < x.cols(); ++f) {
    auto& order = sorted[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return x(a, f) < x(b, f); });
  }

  BoostState state;
  state.loss = loss;
  state.learning_rate = spec.gbt_learning_rate;
  if (loss == BoostLoss::squared) {
    state.initial = target.mean();
  } else {
    const double p = std::clamp(target.mean(), 1e-12, 1.0 - 1e-12);
    state.initial = std::log(p / (1.0 - p));
  }
  Vector raw = Vector::Constant(x.rows(), state.initial);
  state.training_loss.push_back(training_loss(loss, target, raw));

  Vector grad(x.rows());
  Vector hess(x.rows());
  for (int round = 0; round < spec.gbt_n_rounds; ++round) {
    if (loss == BoostLoss::squared) {
      grad = raw - target;
      hess.setOnes();
    } else {
      for (Index i = 0; i < raw.size(); ++i) {
        const double p = expit(raw(i));
        grad(i) = p - target(i);
        hess(i) = p * (1.0 - p);
      }
    }
    if (grad.cwiseAbs().maxCoeff() == 0.0) break;

    TreeGrower grower(x, sorted, grad, hess, spec.gbt_max_leaves, spec.gbt_min_samples_leaf);
    RegressionTree tree = grower.grow();
    const auto& node_of = grower.node_of();
    for (Index i = 0; i < raw.size(); ++i)
      raw(i) += state.learning_rate * tree.nodes[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])].value;
    if (tree.nodes.size() > 1) ++state.effective_rounds;
    if (tree.nodes.size() > 1 || tree.nodes.front().value != 0.0)
      state.trees.push_back(std::move(tree));
    state.training_loss.push_back(training_loss(loss, target, raw));
  }
  return state;
}

}  // namespace

FittedRegressor fit_gbt_regressor(const Matrix& x, const Vector& y, const LearnerSpec& spec,
                                  std::uint64_t /*seed*/) {
  if (spec.kind != LearnerKind::gbt_regress)
    throw ConfigError("fit_gbt_regressor: spec kind must be gbt_regress");
  spec.validate();
  auto state = std::make_shared<detail::RegressorState>();
  state->spec = spec;
  state->input_dim = x.cols();
  state->model = boost(x, y, spec, BoostLoss::squared);
  return FittedRegressor(std::move(state));
}

FittedClassifier fit_gbt_classifier(const Matrix& x, const Vector& a, const LearnerSpec& spec,
                                    std::uint64_t /*seed*/) {
  if (spec.kind != LearnerKind::gbt_classify)
    throw ConfigError("fit_gbt_classifier: spec kind must be gbt_classify");
  spec.validate();
  detail::check_binary_labels(a, "gradient boosting classifier");
  auto state = std::make_shared<detail::ClassifierState>();
  state->spec = spec;
  state->input_dim = x.cols();
  state->model = boost(x, a, spec, BoostLoss::logistic);
  return FittedClassifier(std::move(state));
}

}  // namespace permucate
