#include "permucate/dgp.hpp"

#include "permucate/errors.hpp"
#include "permucate/learners.hpp"
#include "permucate/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace permucate {

std::string_view to_string(DgpKind kind) noexcept {
  switch (kind) {
    case DgpKind::LD: return "LD";
    case DgpKind::HL: return "HL";
    case DgpKind::HP: return "HP";
  }
  return "unknown";
}

DgpKind parse_dgp_kind(std::string_view name) {
  if (name == "LD" || name == "ld") return DgpKind::LD;
  if (name == "HL" || name == "hl") return DgpKind::HL;
  if (name == "HP" || name == "hp") return DgpKind::HP;
  throw ConfigError("unknown dgp '" + std::string(name) + "' (expected LD, HL or HP)");
}

void DgpSpec::validate() const {
  if (kind == DgpKind::LD && d != 6) throw ConfigError("dgp: LD has exactly 6 covariates");
  if (d < 1) throw ConfigError("dgp: d must be positive");
  if (kind != DgpKind::LD) {
    if (d_imp < 1) throw ConfigError("dgp: d_imp must be positive");
    if (d_imp > d) throw ConfigError("dgp: d_imp must not exceed d");
  }
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("dgp: rho must lie in [0, 1)");
  if (!(effect_size >= 0.0 && effect_size <= 1.0))
    throw ConfigError("dgp: effect_size must lie in [0, 1]");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
    throw ConfigError("dgp: noise_sd must be non-negative");
  if (!(treat_quantile >= 0.0 && treat_quantile < 1.0))
    throw ConfigError("dgp: treat_quantile must lie in [0, 1)");
  if (kind == DgpKind::HP && degree != 3) throw ConfigError("dgp: HP uses degree 3");
}

DgpSpec DgpSpec::ld(double rho, double noise_sd) {
  DgpSpec s;
  s.kind = DgpKind::LD;
  s.d = 6;
  s.rho = rho;
  s.noise_sd = noise_sd;
  return s;
}

DgpSpec DgpSpec::hl(int d, int d_imp, double rho, double effect_size, std::uint64_t seed_coeffs) {
  DgpSpec s;
  s.kind = DgpKind::HL;
  s.d = d;
  s.d_imp = d_imp;
  s.rho = rho;
  s.effect_size = effect_size;
  s.noise_sd = 1.0;
  s.seed_coeffs = seed_coeffs;
  return s;
}

DgpSpec DgpSpec::hp(int d, int d_imp, double rho, double effect_size, double treat_quantile,
                    std::uint64_t seed_coeffs) {
  DgpSpec s = hl(d, d_imp, rho, effect_size, seed_coeffs);
  s.kind = DgpKind::HP;
  s.treat_quantile = treat_quantile;
  return s;
}

// ---------------------------------------------------------------------------

Vector SparsePolynomial::evaluate(const Matrix& x) const {
  Vector out = Vector::Zero(x.rows());
  for (const auto& [indices, coef] : terms) {
    Vector monomial = Vector::Constant(x.rows(), coef);
    for (int i : indices) monomial.array() *= x.col(i).array();
    out += monomial;
  }
  return out;
}

double SparsePolynomial::coefficient(std::vector<int> indices) const {
  std::sort(indices.begin(), indices.end());
  for (const auto& [idx, coef] : terms)
    if (idx == indices) return coef;
  return 0.0;
}

Vector SparsePolynomial::linear_coefficients(int d) const {
  Vector out = Vector::Zero(d);
  for (const auto& [idx, coef] : terms)
    if (idx.size() == 1) out(idx.front()) += coef;
  return out;
}

Vector OracleFunctions::tau(const Matrix& x) const { return tau_scale * tau_terms.evaluate(x); }

Vector OracleFunctions::mu0(const Matrix& x) const { return mu0_scale * mu0_terms.evaluate(x); }

Vector OracleFunctions::pi_unshifted(const Matrix& x) const {
  return logit_terms.evaluate(x).unaryExpr([](double z) { return expit(z); });
}

Vector OracleFunctions::pi(const Matrix& x) const {
  Vector p = pi_unshifted(x);
  if (propensity_shift) {
    p.array() -= *propensity_shift;
    p = p.cwiseMax(kPropensityClip).cwiseMin(1.0 - kPropensityClip);
  }
  return p;
}

void Dataset::validate() const {
  check_design(x, "covariates");
  check_length(x.rows(), a.size(), "treatment");
  check_length(x.rows(), y.size(), "outcome");
  for (Index i = 0; i < a.size(); ++i)
    if (a(i) != 0.0 && a(i) != 1.0) throw DataError("treatment must be 0 or 1");
  if (!y.allFinite()) throw DataError("outcome contains non-finite values");
  if (tau_true) check_length(x.rows(), tau_true->size(), "tau_oracle");
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out;
  out.x = take_rows(x, rows);
  out.a = take_rows(a, rows);
  out.y = take_rows(y, rows);
  out.oracle = oracle;
  if (noise) out.noise = take_rows(*noise, rows);
  if (tau_true) out.tau_true = take_rows(*tau_true, rows);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

enum SubStream : std::uint64_t { kCovariates = 1, kTreatment = 2, kNoise = 3 };

Rng data_rng(std::uint64_t seed, DgpKind kind, SubStream sub) {
  return Rng(derive_seed(seed, Stream::data, {static_cast<std::uint64_t>(kind), sub}));
}

Matrix equicorrelated_normals(Index n, int d, double rho, Rng& rng) {
  Matrix x(n, d);
  const double shared = std::sqrt(rho);
  const double own = std::sqrt(1.0 - rho);
  for (Index i = 0; i < n; ++i) {
    const double common = rng.normal();
    for (int j = 0; j < d; ++j) x(i, j) = shared * common + own * rng.normal();
  }
  return x;
}

// Draws treatment and outcome for covariates x given the oracle.
Dataset finish(Matrix x, const OracleFunctions& oracle, double noise_sd, std::uint64_t seed,
               DgpKind kind) {
  Dataset data;
  const Vector pi = oracle.pi(x);
  const Vector tau = oracle.tau(x);
  const Vector mu0 = oracle.mu0(x);
  Rng treat = data_rng(seed, kind, kTreatment);
  Rng noise_rng = data_rng(seed, kind, kNoise);
  data.a.resize(x.rows());
  data.y.resize(x.rows());
  Vector noise(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    data.a(i) = treat.bernoulli(pi(i)) ? 1.0 : 0.0;
    noise(i) = noise_sd * noise_rng.normal();
    data.y(i) = mu0(i) + data.a(i) * tau(i) + noise(i);
  }
  data.x = std::move(x);
  data.noise = std::move(noise);
  data.tau_true = tau;
  data.oracle = oracle;
  return data;
}

std::vector<int> draw_subset(int d, int k, Rng& rng) {
  std::vector<int> pool(static_cast<std::size_t>(d));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  std::vector<int> chosen(pool.begin(), pool.begin() + k);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

SparsePolynomial rademacher_terms(const std::vector<int>& support, int degree, Rng& rng) {
  SparsePolynomial poly;
  const PolynomialMap map = make_polynomial_map(static_cast<int>(support.size()), degree, true);
  for (auto& local : polynomial_terms(map)) {
    std::vector<int> global;
    global.reserve(local.size());
    for (int i : local) global.push_back(support[static_cast<std::size_t>(i)]);
    poly.terms.emplace_back(std::move(global), rng.rademacher());
  }
  return poly;
}

}  // namespace

OracleFunctions make_oracle(const DgpSpec& spec) {
  spec.validate();
  OracleFunctions oracle;
  oracle.d = spec.d;
  if (spec.kind == DgpKind::LD) {
    oracle.tau_terms.terms = {{{0}, 1.0}, {{1}, 2.0}, {{2}, 1.0}};
    oracle.mu0_terms.terms = {{{2}, 1.0}, {{5}, -1.0}};
    oracle.logit_terms.terms = {{{0}, -0.4}, {{0, 1}, 0.1}, {{4}, 0.25}};
    oracle.important_tau = {0, 1, 2};
    oracle.important_mu0 = {2, 5};
    oracle.important_pi = {0, 1, 4};
    // Var(X_j | X_-j) = 1 - rho^2 within a pair, times the squared loading.
    Vector analytic(6);
    const double cond_var = 1.0 - spec.rho * spec.rho;
    analytic << cond_var, 4.0 * cond_var, cond_var, 0.0, 0.0, 0.0;
    oracle.analytic_importance = analytic;
    return oracle;
  }
  Rng rng(derive_seed(spec.seed_coeffs, Stream::coefficients,
                      {static_cast<std::uint64_t>(spec.kind), static_cast<std::uint64_t>(spec.d),
                       static_cast<std::uint64_t>(spec.d_imp)}));
  oracle.important_pi = draw_subset(spec.d, spec.d_imp, rng);
  oracle.important_mu0 = draw_subset(spec.d, spec.d_imp, rng);
  oracle.important_tau = draw_subset(spec.d, spec.d_imp, rng);
  const int degree = spec.kind == DgpKind::HL ? 1 : spec.degree;
  oracle.logit_terms = rademacher_terms(oracle.important_pi, degree, rng);
  oracle.mu0_terms = rademacher_terms(oracle.important_mu0, degree, rng);
  oracle.tau_terms = rademacher_terms(oracle.important_tau, degree, rng);
  oracle.mu0_scale = 1.0 - spec.effect_size;
  oracle.tau_scale = spec.effect_size;
  return oracle;
}

Dataset sample_ld(Index n, std::uint64_t seed) { return sample_ld(DgpSpec::ld(), n, seed); }

Dataset sample_ld(const DgpSpec& spec, Index n, std::uint64_t seed) {
  if (spec.kind != DgpKind::LD) throw ConfigError("sample_ld: spec kind must be LD");
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const OracleFunctions oracle = make_oracle(spec);
  Rng rng = data_rng(seed, DgpKind::LD, kCovariates);
  Matrix x(n, 6);
  const double own = std::sqrt(1.0 - spec.rho * spec.rho);
  for (Index i = 0; i < n; ++i) {
    for (int pair = 0; pair < 3; ++pair) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      x(i, 2 * pair) = z1;
      x(i, 2 * pair + 1) = spec.rho * z1 + own * z2;
    }
  }
  return finish(std::move(x), oracle, spec.noise_sd, seed, DgpKind::LD);
}

Dataset sample_hl(const DgpSpec& spec, Index n, std::uint64_t seed) {
  if (spec.kind != DgpKind::HL) throw ConfigError("sample_hl: spec kind must be HL");
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const OracleFunctions oracle = make_oracle(spec);
  Rng rng = data_rng(seed, DgpKind::HL, kCovariates);
  Matrix x = equicorrelated_normals(n, spec.d, spec.rho, rng);
  return finish(std::move(x), oracle, spec.noise_sd, seed, DgpKind::HL);
}

Dataset sample_hp(const DgpSpec& spec, Index n, std::uint64_t seed) {
  if (spec.kind != DgpKind::HP) throw ConfigError("sample_hp: spec kind must be HP");
  if (n < 1) throw ConfigError("sample size must be at least 1");
  OracleFunctions oracle = make_oracle(spec);
  Rng rng = data_rng(seed, DgpKind::HP, kCovariates);
  Matrix x = equicorrelated_normals(n, spec.d, spec.rho, rng);
  const Vector raw = oracle.pi_unshifted(x);
  oracle.propensity_shift = empirical_quantile(as_span(raw), spec.treat_quantile);
  return finish(std::move(x), oracle, spec.noise_sd, seed, DgpKind::HP);
}

Dataset sample(const DgpSpec& spec, Index n, std::uint64_t seed) {
  switch (spec.kind) {
    case DgpKind::LD: return sample_ld(spec, n, seed);
    case DgpKind::HL: return sample_hl(spec, n, seed);
    case DgpKind::HP: return sample_hp(spec, n, seed);
  }
  throw ConfigError("unknown dgp kind");
}

Dataset sample_linear(const LinearDesign& design, Index n, std::uint64_t seed) {
  const Index d = design.tau_coef.size();
  if (d < 1 || design.mu0_coef.size() != d || design.logit_coef.size() != d)
    throw DimensionError("sample_linear: coefficient vectors must share a positive length");
  if (!(design.rho >= 0.0 && design.rho < 1.0)) throw ConfigError("sample_linear: rho must lie in [0, 1)");
  if (n < 1) throw ConfigError("sample size must be at least 1");
  OracleFunctions oracle;
  oracle.d = static_cast<int>(d);
  for (int j = 0; j < d; ++j) {
    if (design.tau_coef(j) != 0.0) {
      oracle.tau_terms.terms.push_back({{j}, design.tau_coef(j)});
      oracle.important_tau.push_back(j);
    }
    if (design.mu0_coef(j) != 0.0) {
      oracle.mu0_terms.terms.push_back({{j}, design.mu0_coef(j)});
      oracle.important_mu0.push_back(j);
    }
    if (design.logit_coef(j) != 0.0) {
      oracle.logit_terms.terms.push_back({{j}, design.logit_coef(j)});
      oracle.important_pi.push_back(j);
    }
  }
  // Kind tag only separates the random streams from HL draws.
  Rng rng(derive_seed(seed, Stream::data, {0x6c696e, kCovariates}));
  Matrix x = equicorrelated_normals(n, static_cast<int>(d), design.rho, rng);
  return finish(std::move(x), oracle, design.noise_sd, derive_seed(seed, {0x6c696e}), DgpKind::HL);
}

Vector oracle_eval(const Dataset& data, OracleQuantity which) {
  if (!data.oracle) throw MissingOracleError("dataset has no oracle functions");
  switch (which) {
    case OracleQuantity::tau: return data.oracle->tau(data.x);
    case OracleQuantity::mu0: return data.oracle->mu0(data.x);
    case OracleQuantity::pi: return data.oracle->pi(data.x);
  }
  throw ConfigError("unknown oracle quantity");
}

double empirical_quantile(std::span<const double> values, double p) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace permucate
