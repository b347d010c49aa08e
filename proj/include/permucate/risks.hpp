#pragma once

// Feasible causal risks and their oracle decompositions.

#include "permucate/cate.hpp"

#include <optional>
#include <string_view>

namespace permucate {

enum class RiskKind { po_risk, r_risk, oracle_pehe };

std::string_view to_string(RiskKind kind) noexcept;
RiskKind parse_risk_kind(std::string_view name);

/// mean (phi_i - tau_pred_i)^2
double po_risk(const Vector& tau_pred, const Vector& phi);

/// mean ((y_i - m_i) - (a_i - pi_i) tau_pred_i)^2
double r_risk(const Vector& tau_pred, const Vector& y, const Vector& a,
              const NuisanceEstimates& nuisances);

/// Scores CATE predictions on one fixed evaluation set. Pseudo-outcomes and
/// outcome residuals are computed once.
class RiskEvaluator {
 public:
  /// Throws MissingOracleError for oracle_pehe without a true CATE.
  RiskEvaluator(RiskKind kind, const Dataset& data, const NuisanceEstimates& nuisances);

  double operator()(const Vector& tau_pred) const;
  RiskKind kind() const noexcept { return kind_; }
  const Vector& phi() const noexcept { return phi_; }

 private:
  RiskKind kind_;
  Vector phi_;
  Vector residual_;   // y - m
  Vector treatment_;  // a - pi
  Vector truth_;
};

/// Pseudo-outcome risk under oracle nuisances against its decomposition into
/// PEHE plus a propensity-rescaled noise term.
struct PoDecomposition {
  double lhs = 0.0;
  double pehe = 0.0;
  /// mean (eps (a - pi) / (pi (1 - pi)))^2 -- the noise term phi actually carries.
  double noise_term = 0.0;
  /// mean (eps / (pi (1 - pi)))^2 -- the same term with the (a - pi) factor dropped.
  double noise_term_unweighted = 0.0;
  /// mean 2 (tau - tau_pred) eps (a - pi) / (pi (1 - pi)); zero in expectation.
  double cross_term = 0.0;
  /// Standard error of the cross term's mean.
  double cross_term_se = 0.0;

  double rhs() const noexcept { return pehe + noise_term; }
  double rhs_unweighted() const noexcept { return pehe + noise_term_unweighted; }
};

/// R-risk under oracle nuisances against the candidate right-hand sides.
struct RDecomposition {
  double lhs = 0.0;
  double noise_variance = 0.0;
  /// mean (a - pi)^2 (tau - tau_pred)^2, the term before taking expectations.
  double weighted_tau_risk = 0.0;
  /// mean pi (1 - pi) (tau - tau_pred)^2
  double expected_weight_term = 0.0;
  /// mean (pi (1 - pi) (tau - tau_pred))^2
  double squared_weight_term = 0.0;
  double cross_term = 0.0;

  double rhs_expected() const noexcept { return expected_weight_term + noise_variance; }
  double rhs_squared() const noexcept { return squared_weight_term + noise_variance; }
  /// Whichever candidate lies closer to lhs.
  double rhs_selected() const noexcept;
  bool selected_is_expected() const noexcept;
};

/// Needs oracle functions and realized noise (simulated data).
PoDecomposition verify_po_decomposition(const Dataset& data, const Vector& tau_pred);
RDecomposition verify_r_decomposition(const Dataset& data, const Vector& tau_pred);

}  // namespace permucate
