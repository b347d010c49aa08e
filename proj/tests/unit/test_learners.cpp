#include "helpers.hpp"

#include "permucate/dgp.hpp"
#include "permucate/errors.hpp"
#include "permucate/learners.hpp"
#include "permucate/parallel.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace permucate;
using testing::gaussian;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix x(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double e : v) x(i++, 0) = e;
  return x;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double e : v) out(i++) = e;
  return out;
}

// Unpenalized-intercept ridge solved densely from the augmented normal equations.
Vector dense_ridge(const Matrix& x, const Vector& y, double lambda) {
  const Index d = x.cols();
  Matrix z(x.rows(), d + 1);
  z.col(0).setOnes();
  z.rightCols(d) = x;
  Matrix a = z.transpose() * z;
  for (Index j = 1; j <= d; ++j) a(j, j) += lambda;
  return a.fullPivLu().solve(z.transpose() * y);
}

double sse(const Vector& y, const Vector& pred) { return (y - pred).squaredNorm(); }

}  // namespace

TEST_SUITE("learners") {

TEST_CASE("ridge recovers an exact slope") {
  const Matrix x = column({1, 2, 3});
  const Vector y = vec({2, 4, 6});
  const auto fit = fit_ridge_cv(x, y, LearnerSpec::ridge(), 1);
  CHECK((*fit.coefficients())(0) == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("ridge with unit penalty shrinks the slope to 4/3") {
  const Matrix x = column({1, 2, 3});
  const Vector y = vec({2, 4, 6});
  const auto fit = fit_ridge_cv(x, y, LearnerSpec::ridge({1.0}), 1);
  CHECK((*fit.coefficients())(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(fit.predict(column({2}))(0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(*fit.selected_penalty() == 1.0);
}

TEST_CASE("ridge on a constant target gives zero slopes") {
  const Matrix x = gaussian(40, 3, 7);
  const Vector y = Vector::Constant(40, 2.5);
  const auto fit = fit_ridge_cv(x, y, LearnerSpec::ridge(), 3);
  CHECK(fit.coefficients()->cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fit.intercept() == doctest::Approx(2.5));
}

TEST_CASE("ridge predicts a noiseless line") {
  Matrix x(50, 1);
  for (Index i = 0; i < 50; ++i) x(i, 0) = -1.0 + 0.04 * static_cast<double>(i);
  const Vector y = 2.0 * x.col(0);
  const auto fit = fit_ridge_cv(x, y, LearnerSpec::ridge(), 9);
  CHECK(fit.predict(column({5}))(0) == doctest::Approx(10.0).epsilon(1e-2));
}

TEST_CASE("ridge matches a dense solve for random problems") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 5 + static_cast<Index>(gen() % 46);
    const Index d = 1 + static_cast<Index>(gen() % 10);
    const double lambda = std::pow(10.0, -2.0 + 4.0 * static_cast<double>(gen() % 1000) / 999.0);
    const Matrix x = gaussian(n, d, gen());
    const Vector y = gaussian(n, 1, gen()).col(0);
    const auto fit = fit_ridge_cv(x, y, LearnerSpec::ridge({lambda}), 0);
    const Vector ref = dense_ridge(x, y, lambda);
    CHECK(std::abs(fit.intercept() - ref(0)) <= 1e-8 * std::max(1.0, std::abs(ref(0))));
    CHECK((*fit.coefficients() - ref.tail(d)).norm() <= 1e-8 * std::max(1.0, ref.tail(d).norm()));
  }
}

TEST_CASE("ridge rejects bad inputs") {
  const Matrix x = gaussian(10, 2, 1);
  Vector y = Vector::Zero(10);
  CHECK_THROWS_AS(fit_ridge_cv(x, Vector::Zero(9), LearnerSpec::ridge(), 0), DimensionError);
  y(3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_ridge_cv(x, y, LearnerSpec::ridge(), 0), DataError);
  CHECK_THROWS_AS(fit_ridge_cv(x, Vector::Zero(10), LearnerSpec::ridge({1.0, 0.5}), 0), ConfigError);
  const auto fit = fit_ridge_cv(x, Vector::Zero(10), LearnerSpec::ridge(), 0);
  CHECK_THROWS_AS(fit.predict(gaussian(3, 3, 1)), DimensionError);
}

TEST_CASE("logistic on symmetric data has zero intercept") {
  Matrix x(8, 1);
  Vector a(8);
  const double xs[] = {-2, -1, -0.5, -0.25, 0.25, 0.5, 1, 2};
  for (Index i = 0; i < 8; ++i) x(i, 0) = xs[i];
  a << 0, 0, 1, 0, 1, 0, 1, 1;
  const auto fit = fit_logistic_cv(x, a, LearnerSpec::logistic(), 4);
  CHECK(std::abs(fit.intercept()) < 1e-6);
}

TEST_CASE("logistic without signal predicts the prevalence") {
  const Matrix x = gaussian(400, 2, 21);
  Vector a(400);
  for (Index i = 0; i < 400; ++i) a(i) = (i % 4 == 0) ? 1.0 : 0.0;
  const auto fit = fit_logistic_cv(x, a, LearnerSpec::logistic({1e6}), 0);
  const Vector p = fit.predict_proba(x);
  CHECK((p.array() - 0.25).abs().maxCoeff() < 0.01);
}

TEST_CASE("logistic coefficients shrink as the penalty grows") {
  const Matrix x = gaussian(300, 3, 5);
  Vector a(300);
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < 300; ++i) a(i) = u(gen) < expit(1.5 * x(i, 0) - x(i, 1)) ? 1.0 : 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-3, 1e-1, 1.0, 10.0, 100.0, 1000.0}) {
    const auto fit = fit_logistic_cv(x, a, LearnerSpec::logistic({lambda}), 0);
    const double norm = fit.coefficients()->norm();
    CHECK(norm <= previous + 1e-12);
    previous = norm;
  }
}

TEST_CASE("logistic reaches a stationary point") {
  const Matrix x = gaussian(200, 4, 8);
  Vector a(200);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < 200; ++i) a(i) = u(gen) < expit(x(i, 0) + 0.5 * x(i, 2)) ? 1.0 : 0.0;
  const double lambda = 0.7;
  const auto fit = fit_logistic_cv(x, a, LearnerSpec::logistic({lambda}), 0);
  const Vector& w = *fit.coefficients();
  Vector grad_w = lambda * w;
  double grad_b = 0.0;
  for (Index i = 0; i < 200; ++i) {
    const double r = expit(fit.intercept() + x.row(i).dot(w)) - a(i);
    grad_w += r * x.row(i).transpose();
    grad_b += r;
  }
  CHECK(grad_w.norm() < 1e-6);
  CHECK(std::abs(grad_b) < 1e-6);
}

TEST_CASE("logistic probabilities are clipped") {
  const auto zero = make_logistic_classifier(Vector::Zero(2), 0.0);
  CHECK((zero.predict_proba(gaussian(5, 2, 1)).array() == 0.5).all());
  const auto unit = make_logistic_classifier(Vector::Ones(1), 0.0);
  CHECK(unit.predict_proba(column({0}))(0) == doctest::Approx(0.5));
  CHECK(unit.predict_proba(column({1e6}))(0) == kPropensityClip + (1.0 - 2 * kPropensityClip));
  CHECK(unit.predict_proba(column({-1e6}))(0) == kPropensityClip);
}

TEST_CASE("logistic needs both classes") {
  CHECK_THROWS_AS(fit_logistic_cv(gaussian(10, 2, 1), Vector::Ones(10), LearnerSpec::logistic(), 0),
                  DegenerateInputError);
  Vector a = Vector::Zero(10);
  a(0) = 2.0;
  CHECK_THROWS_AS(fit_logistic_cv(gaussian(10, 2, 1), a, LearnerSpec::logistic(), 0), DataError);
}

TEST_CASE("boosted stump finds the best single split") {
  const Matrix x = gaussian(200, 3, 31);
  Vector y(200);
  for (Index i = 0; i < 200; ++i) y(i) = (x(i, 1) > 0.3 ? 2.0 : -1.0) + 0.1 * x(i, 2);
  LearnerSpec spec = LearnerSpec::gbt_regressor();
  spec.gbt_n_rounds = 1;
  spec.gbt_max_leaves = 2;
  spec.gbt_learning_rate = 1.0;
  spec.gbt_min_samples_leaf = 1;
  const auto fit = fit_gbt_regressor(x, y, spec, 0);

  // Brute force over every feature and every gap between sorted values.
  double best = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < 3; ++j) {
    std::vector<Index> order(200);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Index l, Index r) { return x(l, j) < x(r, j); });
    for (Index cut = 1; cut < 200; ++cut) {
      double sl = 0, sr = 0, ql = 0, qr = 0;
      for (Index k = 0; k < 200; ++k) {
        const double v = y(order[k]);
        if (k < cut) {
          sl += v;
          ql += v * v;
        } else {
          sr += v;
          qr += v * v;
        }
      }
      const double l = static_cast<double>(cut), r = static_cast<double>(200 - cut);
      best = std::min(best, ql - sl * sl / l + qr - sr * sr / r);
    }
  }
  CHECK(sse(y, fit.predict(x)) == doctest::Approx(best).epsilon(1e-9));
  CHECK(fit.effective_rounds() == 1);
}

TEST_CASE("boosting a constant target adds no splits") {
  const Matrix x = gaussian(100, 2, 3);
  const auto fit = fit_gbt_regressor(x, Vector::Constant(100, 1.5), LearnerSpec::gbt_regressor(), 0);
  CHECK(fit.effective_rounds() == 0);
  CHECK((fit.predict(x).array() - 1.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("boosting training loss never increases") {
  const Matrix x = gaussian(300, 4, 41);
  Vector y(300);
  Vector a(300);
  for (Index i = 0; i < 300; ++i) {
    y(i) = std::sin(2 * x(i, 0)) + x(i, 1) * x(i, 2);
    a(i) = x(i, 0) + 0.5 * x(i, 3) > 0 ? 1.0 : 0.0;
  }
  const auto reg = fit_gbt_regressor(x, y, LearnerSpec::gbt_regressor(), 1);
  const auto cls = fit_gbt_classifier(x, a, LearnerSpec::gbt_classifier(), 1);
  for (const auto* loss : {&reg.training_loss(), &cls.training_loss()}) {
    REQUIRE(loss->size() > 1);
    for (std::size_t r = 1; r < loss->size(); ++r) CHECK((*loss)[r] <= (*loss)[r - 1] + 1e-12);
  }
  const Vector p = cls.predict_proba(x);
  CHECK(p.minCoeff() >= kPropensityClip);
  CHECK(p.maxCoeff() <= 1.0 - kPropensityClip);
}

TEST_CASE("boosting needs distinct rows") {
  const Matrix x = Matrix::Ones(10, 2);
  CHECK_THROWS_AS(fit_gbt_regressor(x, gaussian(10, 1, 1).col(0), LearnerSpec::gbt_regressor(), 0),
                  DegenerateInputError);
}

TEST_CASE("nnls matches the two-column closed form") {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 30; ++rep) {
    const Matrix p = gaussian(60, 2, gen());
    const Vector y = gaussian(60, 1, gen()).col(0) + 0.8 * p.col(0) - 0.3 * p.col(1) * (rep % 2);
    const Vector w = nnls(p, y);
    // Candidates: unconstrained, each single column, zero.
    std::vector<Vector> cand;
    const Vector ls = (p.transpose() * p).ldlt().solve(p.transpose() * y);
    if ((ls.array() >= 0).all()) cand.push_back(ls);
    for (int j = 0; j < 2; ++j) {
      Vector c = Vector::Zero(2);
      c(j) = std::max(0.0, p.col(j).dot(y) / p.col(j).squaredNorm());
      cand.push_back(c);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Vector& c : cand) best = std::min(best, sse(y, p * c));
    CHECK((w.array() >= 0).all());
    CHECK(sse(y, p * w) == doctest::Approx(best).epsilon(1e-8));
  }
}

TEST_CASE("stacking weights the accurate base learner") {
  const Matrix x = gaussian(400, 3, 51);
  const Vector y = x.col(0) * 2.0 - x.col(1) + 0.1 * gaussian(400, 1, 52).col(0);
  LearnerSpec weak = LearnerSpec::gbt_regressor();
  weak.gbt_n_rounds = 2;
  weak.gbt_max_leaves = 2;
  const auto fit = fit_stacked(x, y, LearnerSpec::stacked({LearnerSpec::ridge(), weak}), 2);
  REQUIRE(fit.stack_weights().size() == 2);
  CHECK(fit.stack_weights()[0] >= 0.95);
  CHECK(fit.stack_weights()[1] >= 0.0);
}

TEST_CASE("stacking identical bases reproduces the base") {
  const Matrix x = gaussian(200, 3, 61);
  const Vector y = x.col(0) - 0.5 * x.col(2) + gaussian(200, 1, 62).col(0);
  const LearnerSpec base = LearnerSpec::ridge({1.0});
  const auto single = fit_ridge_cv(x, y, base, 5);
  const auto stacked = fit_stacked(x, y, LearnerSpec::stacked({base, base}), 5);
  const Matrix xt = gaussian(50, 3, 63);
  CHECK((stacked.predict(xt) - single.predict(xt)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("stacked classifier probabilities stay clipped") {
  const Matrix x = gaussian(300, 2, 71);
  Vector a(300);
  for (Index i = 0; i < 300; ++i) a(i) = x(i, 0) > 0 ? 1.0 : 0.0;
  const auto fit = fit_stacked_classifier(
      x, a, LearnerSpec::stacked({LearnerSpec::logistic(), LearnerSpec::gbt_classifier()}), 3);
  const Vector p = fit.predict_proba(x);
  CHECK(p.minCoeff() >= kPropensityClip);
  CHECK(p.maxCoeff() <= 1.0 - kPropensityClip);
  double total = 0;
  for (double w : fit.stack_weights()) {
    CHECK(w >= 0.0);
    total += w;
  }
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("stacking is competitive on held-out polynomial data") {
  const Dataset data = sample_hp(DgpSpec::hp(10, 3), 1000, 7);
  std::vector<Index> train, test;
  for (Index i = 0; i < 1000; ++i) (i < 700 ? train : test).push_back(i);
  const Matrix xt = take_rows(data.x, train), xv = take_rows(data.x, test);
  const Vector yt = take_rows(data.y, train), yv = take_rows(data.y, test);
  const LearnerSpec ridge = LearnerSpec::ridge(), gbt = LearnerSpec::gbt_regressor();
  const double mse_stack = sse(yv, fit_stacked(xt, yt, LearnerSpec::stacked({gbt, ridge}), 4).predict(xv));
  const double mse_ridge = sse(yv, fit_ridge_cv(xt, yt, ridge, 4).predict(xv));
  const double mse_gbt = sse(yv, fit_gbt_regressor(xt, yt, gbt, 4).predict(xv));
  CHECK(mse_stack <= 1.1 * std::min(mse_ridge, mse_gbt));
}

TEST_CASE("dispatch rejects the wrong learner family") {
  const Matrix x = gaussian(30, 2, 1);
  Vector a = Vector::Zero(30);
  a.head(15).setOnes();
  CHECK_THROWS_AS(fit_regressor(x, a, LearnerSpec::logistic(), 0), ConfigError);
  CHECK_THROWS_AS(fit_classifier(x, a, LearnerSpec::ridge(), 0), ConfigError);
  CHECK_THROWS_AS(LearnerSpec::stacked({LearnerSpec::ridge()}).validate(), ConfigError);
}

TEST_CASE("polynomial term counts") {
  CHECK(make_polynomial_map(2, 2).output_dim == 5);
  CHECK(make_polynomial_map(1, 3).output_dim == 3);
  CHECK(make_polynomial_map(10, 3).output_dim == 285);
  const auto terms = polynomial_terms(make_polynomial_map(2, 2));
  const std::vector<std::vector<int>> expected{{0}, {1}, {0, 0}, {0, 1}, {1, 1}};
  CHECK(terms == expected);
  Matrix x(1, 2);
  x << 2.0, 3.0;
  const Matrix z = expand_polynomial(x, make_polynomial_map(2, 2));
  CHECK(z(0, 0) == 2.0);
  CHECK(z(0, 3) == 6.0);
  CHECK(z(0, 4) == 9.0);
  CHECK(make_polynomial_map(3, 2, false).output_dim == 6);
}

TEST_CASE("fits are reproducible across threads") {
  const Matrix x = gaussian(300, 4, 81);
  const Vector y = x.col(0) + x.col(1).array().square().matrix() + gaussian(300, 1, 82).col(0);
  const LearnerSpec spec = LearnerSpec::stacked({LearnerSpec::ridge(), LearnerSpec::gbt_regressor()});
  const Vector ref = fit_regressor(x, y, spec, 17).predict(x);
  std::vector<Vector> out(6);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = fit_regressor(x, y, spec, 17).predict(x); });
  for (const Vector& v : out) CHECK((v.array() == ref.array()).all());
  CHECK((fit_regressor(x, y, spec, 18).predict(x).array() != ref.array()).any());
}

}  // TEST_SUITE
