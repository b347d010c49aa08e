#include "helpers.hpp"

#include "permucate/dgp.hpp"
#include "permucate/errors.hpp"
#include "permucate/learners.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace permucate;
using testing::correlation;
using testing::gaussian;

namespace {

bool in(const std::vector<int>& set, int v) { return std::find(set.begin(), set.end(), v) != set.end(); }

bool same(const Dataset& l, const Dataset& r) {
  return l.x == r.x && l.a == r.a && l.y == r.y && *l.noise == *r.noise;
}

}  // namespace

TEST_SUITE("dgp") {

TEST_CASE("LD covariates follow the pair structure") {
  const Dataset data = sample_ld(50000, 1);
  CHECK(correlation(data.x.col(0), data.x.col(1)) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(std::abs(correlation(data.x.col(0), data.x.col(2))) < 0.02);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) {
      const double target = i == j ? 1.0 : (i / 2 == j / 2 ? 0.5 : 0.0);
      CHECK(std::abs(correlation(data.x.col(i), data.x.col(j)) - target) < 0.02);
    }
}

TEST_CASE("LD mean propensity matches a Monte Carlo integral") {
  const Dataset data = sample_ld(50000, 2);
  const double sampled = oracle_eval(data, OracleQuantity::pi).mean();
  // Independent integral: pairs (X1, X2) with correlation 0.5, X5 independent.
  const Matrix z = gaussian(200000, 3, 99);
  double integral = 0.0;
  for (Index i = 0; i < z.rows(); ++i) {
    const double x1 = z(i, 0), x2 = 0.5 * z(i, 0) + std::sqrt(0.75) * z(i, 1), x5 = z(i, 2);
    integral += 1.0 / (1.0 + std::exp(0.4 * x1 - 0.1 * x1 * x2 - 0.25 * x5));
  }
  integral /= static_cast<double>(z.rows());
  CHECK(std::abs(sampled - integral) < 0.01);
}

TEST_CASE("LD oracle values by hand") {
  const Dataset data = sample_ld(10, 3);
  Matrix x = Matrix::Zero(2, 6);
  x(0, 0) = x(0, 1) = x(0, 2) = 1.0;
  CHECK(data.oracle->tau(x)(0) == doctest::Approx(4.0));
  CHECK(data.oracle->tau(x)(1) == 0.0);
  CHECK(data.oracle->pi(x)(1) == 0.5);
  CHECK(data.oracle->analytic_importance.has_value());
}

TEST_CASE("samples are reproducible and seed dependent") {
  const DgpSpec hl = DgpSpec::hl(30, 5);
  const DgpSpec hp = DgpSpec::hp(12, 4);
  CHECK(same(sample_ld(300, 5), sample_ld(300, 5)));
  CHECK(same(sample(hl, 300, 5), sample(hl, 300, 5)));
  CHECK(same(sample(hp, 300, 5), sample(hp, 300, 5)));
  CHECK_FALSE(same(sample(hl, 300, 5), sample(hl, 300, 6)));
  // The first rows do not depend on n.
  const Dataset small = sample(hl, 50, 9), large = sample(hl, 500, 9);
  CHECK(small.x == large.x.topRows(50));
}

TEST_CASE("HL coefficients are sparse Rademacher loadings") {
  for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
    const DgpSpec spec = DgpSpec::hl(50, 10, 0.5, 0.5, seed);
    const OracleFunctions o = make_oracle(spec);
    CHECK(o.important_tau.size() == 10);
    const Vector beta = o.tau_terms.linear_coefficients(50);
    const Vector gamma = o.mu0_terms.linear_coefficients(50);
    const Vector delta = o.logit_terms.linear_coefficients(50);
    for (int j = 0; j < 50; ++j) {
      if (!in(o.important_tau, j)) CHECK(beta(j) == 0.0);
      else CHECK(std::abs(beta(j)) == 1.0);
      if (!in(o.important_mu0, j)) CHECK(gamma(j) == 0.0);
      else CHECK(std::abs(gamma(j)) == 1.0);
      if (!in(o.important_pi, j)) CHECK(delta(j) == 0.0);
      else CHECK(std::abs(delta(j)) == 1.0);
    }
  }
  CHECK(make_oracle(DgpSpec::hl(50, 10, 0.5, 0.5, 1)).important_tau !=
        make_oracle(DgpSpec::hl(50, 10, 0.5, 0.5, 2)).important_tau);
}

TEST_CASE("HL covariance is equicorrelated") {
  const Dataset data = sample(DgpSpec::hl(6, 2, 0.5), 50000, 4);
  for (Index i = 0; i < 6; ++i)
    for (Index j = i + 1; j < 6; ++j)
      CHECK(std::abs(correlation(data.x.col(i), data.x.col(j)) - 0.5) < 0.02);
}

TEST_CASE("HP polynomial terms stay inside the important set") {
  const DgpSpec spec = DgpSpec::hp(20, 4, 0.5, 0.5, 0.1, 3);
  const OracleFunctions o = make_oracle(spec);
  for (const auto* poly : {&o.logit_terms, &o.mu0_terms, &o.tau_terms}) {
    CHECK(poly->terms.size() == 34);  // 4 + 10 + 20 monomials
    for (const auto& [idx, c] : poly->terms) CHECK(std::abs(c) == 1.0);
  }
  for (const auto& [idx, c] : o.logit_terms.terms)
    for (int j : idx) CHECK(in(o.important_pi, j));
  for (int i = 0; i < 20; ++i)
    if (!in(o.important_pi, i)) CHECK(o.logit_terms.coefficient({i, i, i}) == 0.0);
}

TEST_CASE("HP propensity shift is the empirical quantile") {
  const DgpSpec p0 = DgpSpec::hp(10, 3, 0.5, 0.5, 0.0, 1);
  const DgpSpec p1 = DgpSpec::hp(10, 3, 0.5, 0.5, 0.1, 1);
  const Dataset d0 = sample(p0, 5000, 2), d1 = sample(p1, 5000, 2);
  REQUIRE(d0.x == d1.x);
  const Vector raw = d0.oracle->pi_unshifted(d0.x);
  CHECK(*d0.oracle->propensity_shift == raw.minCoeff());
  CHECK(d0.a.mean() >= d1.a.mean());
  const Vector pi0 = oracle_eval(d0, OracleQuantity::pi), pi1 = oracle_eval(d1, OracleQuantity::pi);
  CHECK((pi0.array() >= pi1.array()).all());
  CHECK(pi0.minCoeff() == kPropensityClip);
}

TEST_CASE("full effect size with zero noise leaves only tau on the treated") {
  DgpSpec spec = DgpSpec::hl(10, 3, 0.5, 1.0);
  spec.noise_sd = 0.0;
  const Dataset data = sample(spec, 500, 3);
  const Vector tau = oracle_eval(data, OracleQuantity::tau);
  for (Index i = 0; i < 500; ++i) {
    if (data.a(i) == 1.0) CHECK(data.y(i) == tau(i));
    else CHECK(data.y(i) == 0.0);
  }
}

TEST_CASE("outcome residuals are pure noise") {
  for (DgpSpec spec : {DgpSpec::hl(20, 5), DgpSpec::hp(10, 3)}) {
    const Dataset data = sample(spec, 50000, 8);
    const Vector mean = data.oracle->mu0(data.x) + data.a.cwiseProduct(data.oracle->tau(data.x));
    const Vector resid = data.y - mean;
    CHECK(testing::variance(resid) == doctest::Approx(spec.noise_sd * spec.noise_sd).epsilon(0.05));
    const Vector coef = (data.x.transpose() * data.x).ldlt().solve(data.x.transpose() * resid);
    CHECK(coef.cwiseAbs().maxCoeff() < 0.03);
  }
}

TEST_CASE("oracle queries need an oracle") {
  Dataset data = sample_ld(20, 1);
  data.oracle.reset();
  CHECK_THROWS_AS(oracle_eval(data, OracleQuantity::tau), MissingOracleError);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(DgpSpec::hl(5, 10).validate(), ConfigError);
  CHECK_THROWS_AS(parse_dgp_kind("XX"), ConfigError);
  DgpSpec s = DgpSpec::hp(10, 3);
  s.treat_quantile = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(sample_ld(0, 1), ConfigError);
}

TEST_CASE("empirical quantile interpolates") {
  const std::vector<double> v{4, 1, 3, 2};
  CHECK(empirical_quantile(v, 0.0) == 1.0);
  CHECK(empirical_quantile(v, 1.0) == 4.0);
  CHECK(empirical_quantile(v, 0.5) == doctest::Approx(2.5));
}

}  // TEST_SUITE
