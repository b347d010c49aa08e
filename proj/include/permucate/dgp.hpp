#pragma once

// Seeded simulation scenarios with full oracle access.
//
//   LD  six covariates in three correlated Gaussian pairs, linear CATE
//       X1 + 2 X2 + X3, logistic propensity with one interaction.
//   HL  d equicorrelated Gaussian covariates; propensity, control response
//       and CATE are sparse linear functions with Rademacher loadings on
//       d_imp randomly drawn variables each.
//   HP  as HL, but every link is a degree-3 polynomial (with interactions)
//       over its important variables; treatment probabilities are shifted
//       down by an empirical propensity quantile.
//
// Coefficients depend only on DgpSpec::seed_coeffs; covariates, treatment and
// noise depend only on the per-call seed.

#include "permucate/linalg.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace permucate {

enum class DgpKind { LD, HL, HP };

std::string_view to_string(DgpKind kind) noexcept;
/// Throws ConfigError for unknown names.
DgpKind parse_dgp_kind(std::string_view name);

struct DgpSpec {
  DgpKind kind = DgpKind::LD;
  int d = 6;
  int d_imp = 10;
  /// LD: within-pair correlation. HL/HP: equicorrelation of all covariates.
  double rho = 0.5;
  double effect_size = 0.5;
  double noise_sd = 3.0;
  double treat_quantile = 0.1;
  int degree = 3;
  std::uint64_t seed_coeffs = 0;

  void validate() const;

  static DgpSpec ld(double rho = 0.5, double noise_sd = 3.0);
  static DgpSpec hl(int d, int d_imp = 10, double rho = 0.5, double effect_size = 0.5,
                    std::uint64_t seed_coeffs = 0);
  static DgpSpec hp(int d, int d_imp = 10, double rho = 0.5, double effect_size = 0.5,
                    double treat_quantile = 0.1, std::uint64_t seed_coeffs = 0);
};

/// Sum of coefficient * product of the indexed columns.
struct SparsePolynomial {
  std::vector<std::pair<std::vector<int>, double>> terms;

  Vector evaluate(const Matrix& x) const;
  /// Coefficient of the monomial with these (sorted) indices, 0 when absent.
  double coefficient(std::vector<int> indices) const;
  /// Dense vector of the degree-1 coefficients.
  Vector linear_coefficients(int d) const;
};

struct OracleFunctions {
  int d = 0;
  SparsePolynomial tau_terms;
  SparsePolynomial mu0_terms;
  SparsePolynomial logit_terms;
  double tau_scale = 1.0;
  double mu0_scale = 1.0;
  /// HP: quantile subtracted from the propensity before clipping.
  std::optional<double> propensity_shift;
  std::vector<int> important_pi;
  std::vector<int> important_mu0;
  std::vector<int> important_tau;
  /// LD only: population LOCO importance of each covariate.
  std::optional<Vector> analytic_importance;

  /// True conditional average treatment effect.
  Vector tau(const Matrix& x) const;
  /// True control response E[Y | X, A = 0].
  Vector mu0(const Matrix& x) const;
  /// True treatment probability (after any shift and clipping).
  Vector pi(const Matrix& x) const;
  /// expit of the logit link, before any shift.
  Vector pi_unshifted(const Matrix& x) const;
};

struct Dataset {
  Matrix x;
  Vector a;
  Vector y;
  std::optional<OracleFunctions> oracle;
  /// Realized outcome noise Y - E[Y | X, A] (simulation only).
  std::optional<Vector> noise;
  /// Row-wise true CATE; set by the samplers or read from a tau_oracle column.
  std::optional<Vector> tau_true;

  Index rows() const noexcept { return x.rows(); }
  Index cols() const noexcept { return x.cols(); }
  /// Throws DataError on inconsistent lengths, non-binary treatment or
  /// non-finite values.
  void validate() const;
  /// Row subset; oracle functions are carried over.
  Dataset subset(std::span<const Index> rows) const;
};

Dataset sample_ld(Index n, std::uint64_t seed);
Dataset sample_ld(const DgpSpec& spec, Index n, std::uint64_t seed);
Dataset sample_hl(const DgpSpec& spec, Index n, std::uint64_t seed);
Dataset sample_hp(const DgpSpec& spec, Index n, std::uint64_t seed);
/// Dispatch on spec.kind.
Dataset sample(const DgpSpec& spec, Index n, std::uint64_t seed);

/// Fixed-coefficient linear design: equicorrelated Gaussian covariates,
/// tau = x . tau_coef, mu0 = x . mu0_coef, pi = expit(x . logit_coef).
struct LinearDesign {
  Vector tau_coef;
  Vector mu0_coef;
  Vector logit_coef;
  double rho = 0.0;
  double noise_sd = 1.0;
};

Dataset sample_linear(const LinearDesign& design, Index n, std::uint64_t seed);

/// Oracle coefficients an HL/HP spec generates (independent of n and seed).
OracleFunctions make_oracle(const DgpSpec& spec);

enum class OracleQuantity { tau, mu0, pi };

/// Throws MissingOracleError when the dataset has no oracle.
Vector oracle_eval(const Dataset& data, OracleQuantity which);

/// Empirical p-quantile with linear interpolation between order statistics.
double empirical_quantile(std::span<const double> values, double p);

}  // namespace permucate
