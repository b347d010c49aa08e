#pragma once

// Private model state shared by the learner translation units.

#include "permucate/learners.hpp"

#include <algorithm>
#include <string_view>
#include <variant>
#include <vector>

namespace permucate::detail {

struct LinearState {
  Vector coefficients;
  double intercept = 0.0;
  double penalty = 0.0;
  int iterations = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(const Matrix& x, Index row) const {
    int node = 0;
    while (nodes[node].feature >= 0) {
      const TreeNode& n = nodes[node];
      node = x(row, n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[node].value;
  }
};

enum class BoostLoss { squared, logistic };

struct BoostState {
  BoostLoss loss = BoostLoss::squared;
  double initial = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::vector<double> training_loss;
  int effective_rounds = 0;

  /// Raw score: prediction for squared loss, log-odds for logistic loss.
  Vector raw(const Matrix& x) const;
};

struct StackState {
  std::vector<double> weights;
  std::vector<FittedRegressor> bases;
};

struct StackClassifierState {
  std::vector<double> weights;
  std::vector<FittedClassifier> bases;
};

struct RegressorState {
  LearnerSpec spec;
  Index input_dim = 0;
  std::variant<LinearState, BoostState, StackState> model;
  std::optional<Vector> coefficients;  // mirrors LinearState for the accessor
};

struct ClassifierState {
  LearnerSpec spec;
  Index input_dim = 0;
  std::variant<LinearState, BoostState, StackClassifierState> model;
  std::optional<Vector> coefficients;
};

/// Throws unless labels are 0/1 with both classes present.
void check_binary_labels(const Vector& a, std::string_view what);

/// Effective fold count when n rows (or the rarest class) cannot fill k folds.
inline int usable_folds(Index available, int requested) {
  return static_cast<int>(std::min<Index>(available, requested));
}

}  // namespace permucate::detail
