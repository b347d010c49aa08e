#include "helpers.hpp"

#include "permucate/errors.hpp"
#include "permucate/importance.hpp"

#include <doctest.h>

#include <cmath>

using namespace permucate;
using testing::gaussian;

namespace {

CateModel fixed_model(const Vector& coef) {
  return CateModel(make_linear_regressor(coef, 0.0), {}, NuisanceSpecs{}, 5, 0);
}

Dataset linear_data(const Vector& tau_coef, Index n, std::uint64_t seed, double noise_sd = 1.0) {
  LinearDesign design;
  design.tau_coef = tau_coef;
  design.mu0_coef = Vector::Zero(tau_coef.size());
  design.logit_coef = Vector::Zero(tau_coef.size());
  design.noise_sd = noise_sd;
  return sample_linear(design, n, seed);
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double e : v) out(i++) = e;
  return out;
}

}  // namespace

TEST_SUITE("importance") {

TEST_CASE("conditional models on independent covariates are flat") {
  const Matrix x = gaussian(5000, 4, 1);
  const auto models = fit_conditional_models(x, LearnerSpec::ridge(), 2);
  REQUIRE(models.size() == 4);
  for (const auto& m : models) {
    CHECK(m.regressor.coefficients()->norm() < 0.05);
    CHECK_FALSE(m.constant_column);
  }
}

TEST_CASE("conditional models recover the LD pair regression") {
  const Dataset data = sample_ld(5000, 3);
  const auto models = fit_conditional_models(data.x, LearnerSpec::ridge(), 3);
  // nu_1 is fitted on columns (2..6); the first coefficient belongs to X2.
  const Vector& c = *models[0].regressor.coefficients();
  CHECK(c(0) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(c.tail(4).cwiseAbs().maxCoeff() < 0.05);
  CHECK(models[0].residual_variance == doctest::Approx(0.25).epsilon(0.15));
}

TEST_CASE("a duplicated column is perfectly predictable") {
  Matrix x = gaussian(1000, 4, 4);
  x.col(3) = x.col(0);
  const auto models = fit_conditional_models(x, LearnerSpec::ridge(), 5);
  const Vector fitted = models[3].regressor.predict(drop_column(x, 3));
  CHECK((fitted - x.col(3)).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("a constant column is flagged") {
  Matrix x = gaussian(200, 3, 6);
  x.col(1).setConstant(2.0);
  const auto models = fit_conditional_models(x, LearnerSpec::ridge(), 7);
  CHECK(models[1].constant_column);
  CHECK_FALSE(models[0].constant_column);
}

TEST_CASE("an ignored column has exactly zero importance") {
  const Dataset train = linear_data(vec({1, 2, 0, 0}), 500, 8);
  const Dataset test = linear_data(vec({1, 2, 0, 0}), 300, 9);
  const auto cond = fit_conditional_models(train.x, LearnerSpec::ridge(), 10);
  const CateModel model = fixed_model(vec({1.0, 2.0, 0.0, 0.5}));
  const auto est = permucate::permucate(model, oracle_nuisances(test), test, cond, 20, RiskKind::po_risk, 11);
  REQUIRE(est.size() == 4);
  CHECK(est[2].psi == 0.0);
  CHECK(est[2].risk_perturbed == est[2].risk_full);
  for (double v : est[2].permutation_psi) CHECK(v == 0.0);
  CHECK(est[1].psi > est[0].psi);
  CHECK(est[1].psi_unscaled() == 2.0 * est[1].psi);
}

TEST_CASE("importance equals the squared coefficient for independent covariates") {
  const Vector beta = vec({1.0, 2.0, 0.5, 0.0});
  const Dataset train = linear_data(beta, 5000, 12);
  const Dataset test = linear_data(beta, 20000, 13);
  const auto cond = fit_conditional_models(train.x, LearnerSpec::ridge(), 14);
  const auto est = permucate::permucate(fixed_model(beta), oracle_nuisances(test), test, cond, 20, RiskKind::po_risk, 15);
  for (Index j = 0; j < 3; ++j) CHECK(est[j].psi == doctest::Approx(beta(j) * beta(j)).epsilon(0.1));
  CHECK(std::abs(est[3].psi) < 0.01);
}

TEST_CASE("importance does not depend on how the other columns are labelled") {
  const Vector beta = vec({1.0, -0.5, 2.0, 0.3, 0.0});
  const Dataset train = linear_data(beta, 800, 16);
  const Dataset test = linear_data(beta, 400, 17);
  const int j = 2;
  const std::vector<Index> relabel{4, 3, 2, 0, 1};  // keeps column 2 in place
  Dataset train_p = train, test_p = test;
  Vector beta_p(5);
  for (Index c = 0; c < 5; ++c) {
    train_p.x.col(c) = train.x.col(relabel[c]);
    test_p.x.col(c) = test.x.col(relabel[c]);
    beta_p(c) = beta(relabel[c]);
  }
  const auto cond = fit_conditional_models(train.x, LearnerSpec::ridge(), 18);
  const auto cond_p = fit_conditional_models(train_p.x, LearnerSpec::ridge(), 18);
  const auto a = permucate::permucate(fixed_model(beta), oracle_nuisances(test), test, cond, 30,
                           RiskKind::po_risk, 19);
  const auto b = permucate::permucate(fixed_model(beta_p), oracle_nuisances(test), test_p, cond_p, 30, RiskKind::po_risk, 19);
  CHECK(b[j].psi == doctest::Approx(a[j].psi).epsilon(1e-9));
  for (Index c = 0; c < 5; ++c) CHECK(b[c].j == c);
}

TEST_CASE("Monte Carlo error shrinks like one over root P") {
  const Vector beta = vec({1.0, 2.0, 0.0});
  const Dataset train = linear_data(beta, 500, 20);
  const Dataset test = linear_data(beta, 300, 21);
  const auto cond = fit_conditional_models(train.x, LearnerSpec::ridge(), 22);
  const CateModel model = fixed_model(beta);
  const NuisanceEstimates nuis = oracle_nuisances(test);
  const auto spread = [&](int p) {
    Vector psi(80);
    for (Index r = 0; r < 80; ++r)
      psi(r) = permucate::permucate(model, nuis, test, cond, p, RiskKind::po_risk,
                                    1000 + static_cast<std::uint64_t>(r))[1].psi;
    return std::sqrt(testing::variance(psi));
  };
  const double ratio = spread(25) / spread(100);
  CHECK(ratio > 1.4);
  CHECK(ratio < 2.6);
}

TEST_CASE("LOCO on a duplicated column") {
  // x3 duplicates x1, so the reduced model moves x1's weight onto x3.
  const Vector beta = vec({1.0, 0.5, 0.0});
  const auto make = [&](Index n, std::uint64_t seed) {
    Dataset d = linear_data(beta, n, seed);
    d.x.col(2) = d.x.col(0);
    d.y = d.oracle->mu0(d.x) + d.a.cwiseProduct(d.oracle->tau(d.x)) + *d.noise;
    d.tau_true = d.oracle->tau(d.x);
    return d;
  };
  const Dataset train = make(4000, 23), test = make(2000, 24);
  const LearnerSpec final_spec = LearnerSpec::ridge({1e-6});
  const NuisanceEstimates nuis_train = oracle_nuisances(train), nuis_test = oracle_nuisances(test);
  const DrLearnerFit fit = fit_dr_learner_with_nuisances(train, nuis_train, final_spec, 25);
  const LocoResult res = loco(fit.model, nuis_train, nuis_test, train, test, final_spec, RiskKind::po_risk);
  const auto cond = fit_conditional_models(train.x, LearnerSpec::ridge(), 26);
  const auto diag = linear_diagnostics(fit.model.final_regressor(), res.reduced, cond, test.x);
  const double b1 = (*fit.model.final_regressor().coefficients())(0);
  CHECK(b1 == doctest::Approx(0.5).epsilon(0.1));
  CHECK(diag[0].delta_beta_norm_sq == doctest::Approx(b1 * b1).epsilon(0.01));
  // The twin carries the same information, so dropping x1 costs nothing.
  CHECK(std::abs(res.estimates[0].psi) < 0.01);
  CHECK(res.estimates[1].psi > 0.1);
  const auto cpi = permucate::permucate(fit.model, nuis_test, test, cond, 20, RiskKind::po_risk, 27);
  CHECK(std::abs(cpi[0].psi) < 0.01);
}

TEST_CASE("LOCO leaves a null covariate near zero") {
  const Vector beta = vec({1.0, 2.0, 0.0});
  const Dataset train = linear_data(beta, 5000, 28), test = linear_data(beta, 2000, 29);
  const NuisanceEstimates nuis_train = oracle_nuisances(train), nuis_test = oracle_nuisances(test);
  const DrLearnerFit fit = fit_dr_learner_with_nuisances(train, nuis_train, LearnerSpec::ridge(), 30);
  const LocoResult res =
      loco(fit.model, nuis_train, nuis_test, train, test, LearnerSpec::ridge(), RiskKind::po_risk);
  CHECK(std::abs(res.estimates[2].psi) < 0.02);
  CHECK(res.estimates[1].psi == doctest::Approx(4.0).epsilon(0.15));
  CHECK(res.reduced.size() == 3);
}

TEST_CASE("diagnostics need linear models") {
  const Dataset train = linear_data(vec({1, 1, 0}), 300, 31);
  const auto cond = fit_conditional_models(train.x, LearnerSpec::ridge(), 32);
  const auto gbt = fit_gbt_regressor(train.x, train.y, LearnerSpec::gbt_regressor(), 33);
  std::vector<FittedRegressor> reduced;
  for (Index j = 0; j < 3; ++j) reduced.push_back(make_linear_regressor(Vector::Zero(2), 0.0));
  CHECK_THROWS_AS(linear_diagnostics(gbt, reduced, cond, train.x), DataError);
  CHECK_NOTHROW(linear_diagnostics(make_linear_regressor(Vector::Ones(3), 0.0), reduced, cond, train.x));
}

TEST_CASE("argument checks") {
  const Dataset test = linear_data(vec({1, 1, 0}), 100, 34);
  const auto cond = fit_conditional_models(test.x, LearnerSpec::ridge(), 35);
  const CateModel model = fixed_model(vec({1, 1, 0}));
  CHECK_THROWS_AS(permucate::permucate(model, oracle_nuisances(test), test, cond, 0, RiskKind::po_risk, 0), ConfigError);
  CHECK_THROWS_AS(fit_conditional_models(gaussian(10, 1, 1), LearnerSpec::ridge(), 0), DimensionError);
  CHECK_THROWS_AS(parse_importance_method("shap"), ConfigError);
  CHECK(parse_importance_method("cpi") == ImportanceMethod::permucate);
}

}  // TEST_SUITE
