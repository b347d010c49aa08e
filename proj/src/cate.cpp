#include "permucate/cate.hpp"

#include "permucate/errors.hpp"
#include "permucate/random.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <string>

namespace permucate {

CateModel::CateModel(FittedRegressor final_stage, std::vector<NuisanceFold> nuisance_models,
                     NuisanceSpecs specs, int folds, std::uint64_t seed)
    : final_(std::move(final_stage)),
      nuisance_(std::move(nuisance_models)),
      specs_(std::move(specs)),
      folds_(folds),
      seed_(seed) {}

NuisanceEstimates make_nuisances(Vector mu0_hat, Vector mu1_hat, Vector pi_hat) {
  check_length(mu0_hat.size(), mu1_hat.size(), "mu1_hat");
  check_length(mu0_hat.size(), pi_hat.size(), "pi_hat");
  NuisanceEstimates n;
  n.pi_hat = pi_hat.cwiseMax(kPropensityClip).cwiseMin(1.0 - kPropensityClip);
  n.m_hat = n.pi_hat.cwiseProduct(mu1_hat) +
            (1.0 - n.pi_hat.array()).matrix().cwiseProduct(mu0_hat);
  n.mu0_hat = std::move(mu0_hat);
  n.mu1_hat = std::move(mu1_hat);
  return n;
}

NuisanceEstimates CateModel::transport_nuisances(const Matrix& x) const {
  if (nuisance_.empty()) throw DataError("CATE model carries no nuisance models to transport");
  Vector mu0 = Vector::Zero(x.rows());
  Vector mu1 = Vector::Zero(x.rows());
  Vector pi = Vector::Zero(x.rows());
  for (const auto& fold : nuisance_) {
    mu0 += fold.mu0.predict(x);
    mu1 += fold.mu1.predict(x);
    pi += fold.pi.predict_proba(x);
  }
  const double k = static_cast<double>(nuisance_.size());
  return make_nuisances(mu0 / k, mu1 / k, pi / k);
}

namespace {

std::uint64_t bits(double v) {
  if (v == 0.0) v = 0.0;  // fold -0.0 into +0.0
  return std::bit_cast<std::uint64_t>(v);
}

std::uint64_t row_key(const Dataset& data, Index i, std::uint64_t seed) {
  std::uint64_t h = derive_seed(seed, Stream::folds, {0x726f77});
  for (Index j = 0; j < data.x.cols(); ++j) h = mix64(h ^ bits(data.x(i, j)));
  h = mix64(h ^ bits(data.a(i)));
  return h;
}

// Rows in canonical (content-hash) order.
std::vector<Index> canonical_order(const Dataset& data, std::uint64_t seed) {
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(data.rows()));
  for (Index i = 0; i < data.rows(); ++i) keys[static_cast<std::size_t>(i)] = row_key(data, i, seed);
  std::vector<Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index l, Index r) {
    return keys[static_cast<std::size_t>(l)] < keys[static_cast<std::size_t>(r)];
  });
  return order;
}

}  // namespace

std::vector<int> crossfit_folds(const Dataset& data, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-fitting needs at least 2 folds");
  const auto order = canonical_order(data, seed);
  std::vector<int> fold(static_cast<std::size_t>(data.rows()));
  std::size_t p = 0;
  for (double arm : {1.0, 0.0})
    for (Index i : order)
      if (data.a(i) == arm) fold[static_cast<std::size_t>(i)] = static_cast<int>(p++ % k);
  return fold;
}

NuisanceEstimates fit_nuisances_crossfit(const Dataset& data, int k, const NuisanceSpecs& specs,
                                         std::uint64_t seed, std::vector<NuisanceFold>* models) {
  data.validate();
  if (k < 2) throw ConfigError("cross-fitting needs at least 2 folds");
  const auto fold = crossfit_folds(data, k, seed);
  const auto order = canonical_order(data, seed);

  const Index n = data.rows();
  Vector mu0 = Vector::Zero(n);
  Vector mu1 = Vector::Zero(n);
  Vector pi = Vector::Zero(n);
  if (models) models->clear();
  for (int f = 0; f < k; ++f) {
    std::vector<Index> train, treated, control, held_out;
    for (Index i : order) {
      if (fold[static_cast<std::size_t>(i)] == f) {
        held_out.push_back(i);
        continue;
      }
      train.push_back(i);
      (data.a(i) == 1.0 ? treated : control).push_back(i);
    }
    if (treated.size() < 2 || control.size() < 2) {
      throw DegenerateInputError("cross-fitting fold " + std::to_string(f) +
                                 ": training portion lacks one treatment arm");
    }
    const auto learner_seed = [&](std::uint64_t which) {
      return derive_seed(seed, Stream::learner, {static_cast<std::uint64_t>(f), which});
    };
    NuisanceFold fitted{
        fit_regressor(take_rows(data.x, control), take_rows(data.y, control), specs.outcome,
                      learner_seed(0)),
        fit_regressor(take_rows(data.x, treated), take_rows(data.y, treated), specs.outcome,
                      learner_seed(1)),
        fit_classifier(take_rows(data.x, train), take_rows(data.a, train), specs.propensity,
                       learner_seed(2))};
    const Matrix xh = take_rows(data.x, held_out);
    const Vector p0 = fitted.mu0.predict(xh);
    const Vector p1 = fitted.mu1.predict(xh);
    const Vector pp = fitted.pi.predict_proba(xh);
    for (std::size_t r = 0; r < held_out.size(); ++r) {
      const Index i = held_out[r];
      mu0(i) = p0(static_cast<Index>(r));
      mu1(i) = p1(static_cast<Index>(r));
      pi(i) = pp(static_cast<Index>(r));
    }
    if (models) models->push_back(std::move(fitted));
  }
  NuisanceEstimates out = make_nuisances(std::move(mu0), std::move(mu1), std::move(pi));
  out.fold_assignment = fold;
  return out;
}

Vector pseudo_outcome(const Vector& y, const Vector& a, const NuisanceEstimates& nuisances) {
  check_length(y.size(), a.size(), "treatment");
  check_length(y.size(), nuisances.size(), "nuisance estimates");
  Vector phi(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double pi = nuisances.pi_hat(i);
    const double mu_a = a(i) == 1.0 ? nuisances.mu1_hat(i) : nuisances.mu0_hat(i);
    phi(i) = (y(i) - mu_a) * (a(i) - pi) / (pi * (1.0 - pi)) + nuisances.mu1_hat(i) -
             nuisances.mu0_hat(i);
  }
  return phi;
}

DrLearnerFit fit_dr_learner(const Dataset& data, int k, const NuisanceSpecs& specs,
                            std::uint64_t seed) {
  std::vector<NuisanceFold> models;
  NuisanceEstimates nuisances = fit_nuisances_crossfit(data, k, specs, seed, &models);
  Vector phi = pseudo_outcome(data.y, data.a, nuisances);
  FittedRegressor final_stage =
      fit_regressor(data.x, phi, specs.final_stage, derive_seed(seed, Stream::learner, {0xf1a1}));
  return DrLearnerFit{CateModel(std::move(final_stage), std::move(models), specs, k, seed),
                      std::move(nuisances), std::move(phi)};
}

DrLearnerFit fit_dr_learner_with_nuisances(const Dataset& data, const NuisanceEstimates& nuisances,
                                           const LearnerSpec& final_spec, std::uint64_t seed) {
  data.validate();
  Vector phi = pseudo_outcome(data.y, data.a, nuisances);
  FittedRegressor final_stage =
      fit_regressor(data.x, phi, final_spec, derive_seed(seed, Stream::learner, {0xf1a1}));
  NuisanceSpecs specs;
  specs.final_stage = final_spec;
  return DrLearnerFit{CateModel(std::move(final_stage), {}, specs, 0, seed), nuisances,
                      std::move(phi)};
}

Vector predict_cate(const CateModel& model, const Matrix& x) { return model.predict(x); }

NuisanceEstimates oracle_nuisances(const Dataset& data) {
  if (!data.oracle) throw MissingOracleError("oracle nuisances need oracle functions");
  const Vector mu0 = data.oracle->mu0(data.x);
  Vector mu1 = mu0 + data.oracle->tau(data.x);
  return make_nuisances(mu0, std::move(mu1), data.oracle->pi(data.x));
}

double pehe(const Vector& tau_hat, const Dataset& data) {
  Vector truth;
  if (data.oracle) {
    truth = data.oracle->tau(data.x);
  } else if (data.tau_true) {
    truth = *data.tau_true;
  } else {
    throw MissingOracleError("PEHE needs the true CATE");
  }
  check_length(truth.size(), tau_hat.size(), "tau_hat");
  return (tau_hat - truth).squaredNorm() / static_cast<double>(truth.size());
}

}  // namespace permucate
