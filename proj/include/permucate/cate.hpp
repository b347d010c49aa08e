#pragma once

// Cross-fitted DR-learner.
//
// Nuisances (control and treated response, propensity) are estimated with
// k-fold cross-fitting so every row's prediction comes from models that never
// saw it. The doubly-robust pseudo-outcome
//
//   phi = (y - mu_a(x)) (a - pi(x)) / (pi(x) (1 - pi(x))) + mu_1(x) - mu_0(x)
//
// is then regressed on x to obtain the CATE estimate.

#include "permucate/dgp.hpp"
#include "permucate/learners.hpp"

#include <cstdint>
#include <vector>

namespace permucate {

struct NuisanceSpecs {
  LearnerSpec outcome = LearnerSpec::ridge();
  LearnerSpec propensity = LearnerSpec::logistic();
  LearnerSpec final_stage = LearnerSpec::ridge();
};

struct NuisanceEstimates {
  Vector mu0_hat;
  Vector mu1_hat;
  Vector pi_hat;
  /// pi * mu1 + (1 - pi) * mu0
  Vector m_hat;
  /// Cross-fitting fold of each row; empty for transported estimates.
  std::vector<int> fold_assignment;

  Index size() const noexcept { return mu0_hat.size(); }
};

/// Models fitted on the training portion of one cross-fitting fold.
struct NuisanceFold {
  FittedRegressor mu0;
  FittedRegressor mu1;
  FittedClassifier pi;
};

class CateModel {
 public:
  CateModel(FittedRegressor final_stage, std::vector<NuisanceFold> nuisance_models,
            NuisanceSpecs specs, int folds, std::uint64_t seed);

  Vector predict(const Matrix& x) const { return final_.predict(x); }

  const FittedRegressor& final_regressor() const noexcept { return final_; }
  const std::vector<NuisanceFold>& nuisance_models() const noexcept { return nuisance_; }
  const NuisanceSpecs& specs() const noexcept { return specs_; }
  int folds() const noexcept { return folds_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Nuisance predictions for new rows: the average of the per-fold models.
  NuisanceEstimates transport_nuisances(const Matrix& x) const;

 private:
  FittedRegressor final_;
  std::vector<NuisanceFold> nuisance_;
  NuisanceSpecs specs_;
  int folds_;
  std::uint64_t seed_;
};

/// Fold assignment stratified on treatment. Rows are ordered by a seeded hash
/// of their covariates and treatment, so reordering the input rows does not
/// change which fold a row lands in, and neither does shifting the outcome.
/// Fold sizes differ by at most one.
std::vector<int> crossfit_folds(const Dataset& data, int k, std::uint64_t seed);

/// Out-of-fold nuisance predictions. When `models` is non-null it receives
/// the per-fold fitted models.
NuisanceEstimates fit_nuisances_crossfit(const Dataset& data, int k, const NuisanceSpecs& specs,
                                         std::uint64_t seed,
                                         std::vector<NuisanceFold>* models = nullptr);

/// Doubly-robust pseudo-outcome for every row.
Vector pseudo_outcome(const Vector& y, const Vector& a, const NuisanceEstimates& nuisances);

struct DrLearnerFit {
  CateModel model;
  NuisanceEstimates nuisances;
  Vector phi;
};

DrLearnerFit fit_dr_learner(const Dataset& data, int k, const NuisanceSpecs& specs,
                            std::uint64_t seed);

/// DR-learner whose final stage regresses pseudo-outcomes built from the
/// supplied nuisances instead of cross-fitted ones.
DrLearnerFit fit_dr_learner_with_nuisances(const Dataset& data, const NuisanceEstimates& nuisances,
                                           const LearnerSpec& final_spec, std::uint64_t seed);

Vector predict_cate(const CateModel& model, const Matrix& x);

/// Nuisances computed from the data's oracle functions (pi clipped).
NuisanceEstimates oracle_nuisances(const Dataset& data);

NuisanceEstimates make_nuisances(Vector mu0_hat, Vector mu1_hat, Vector pi_hat);

/// Mean squared difference between tau_hat and the true CATE. Uses the
/// oracle functions when present, else the tau_true column.
double pehe(const Vector& tau_hat, const Dataset& data);

}  // namespace permucate
