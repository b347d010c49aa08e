#include "permucate/risks.hpp"

#include "permucate/errors.hpp"

#include <cmath>
#include <string>

namespace permucate {

std::string_view to_string(RiskKind kind) noexcept {
  switch (kind) {
    case RiskKind::po_risk: return "po_risk";
    case RiskKind::r_risk: return "r_risk";
    case RiskKind::oracle_pehe: return "oracle_pehe";
  }
  return "unknown";
}

RiskKind parse_risk_kind(std::string_view name) {
  if (name == "po_risk" || name == "po") return RiskKind::po_risk;
  if (name == "r_risk" || name == "r") return RiskKind::r_risk;
  if (name == "oracle_pehe" || name == "pehe") return RiskKind::oracle_pehe;
  throw ConfigError("unknown risk '" + std::string(name) + "' (expected po_risk, r_risk or oracle_pehe)");
}

namespace {

double finite_risk(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string(what) + ": risk is not finite");
  return value;
}

}  // namespace

double po_risk(const Vector& tau_pred, const Vector& phi) {
  check_length(phi.size(), tau_pred.size(), "po_risk predictions");
  if (phi.size() == 0) throw DataError("po_risk of an empty sample");
  return finite_risk((phi - tau_pred).squaredNorm() / static_cast<double>(phi.size()), "po_risk");
}

double r_risk(const Vector& tau_pred, const Vector& y, const Vector& a,
              const NuisanceEstimates& nuisances) {
  check_length(y.size(), tau_pred.size(), "r_risk predictions");
  check_length(y.size(), a.size(), "r_risk treatment");
  check_length(y.size(), nuisances.size(), "r_risk nuisances");
  if (y.size() == 0) throw DataError("r_risk of an empty sample");
  const Vector resid = (y - nuisances.m_hat) - (a - nuisances.pi_hat).cwiseProduct(tau_pred);
  return finite_risk(resid.squaredNorm() / static_cast<double>(y.size()), "r_risk");
}

RiskEvaluator::RiskEvaluator(RiskKind kind, const Dataset& data, const NuisanceEstimates& nuisances)
    : kind_(kind) {
  check_length(data.rows(), nuisances.size(), "nuisance estimates");
  switch (kind) {
    case RiskKind::po_risk:
      phi_ = pseudo_outcome(data.y, data.a, nuisances);
      break;
    case RiskKind::r_risk:
      phi_ = pseudo_outcome(data.y, data.a, nuisances);
      residual_ = data.y - nuisances.m_hat;
      treatment_ = data.a - nuisances.pi_hat;
      break;
    case RiskKind::oracle_pehe:
      if (data.oracle) {
        truth_ = data.oracle->tau(data.x);
      } else if (data.tau_true) {
        truth_ = *data.tau_true;
      } else {
        throw MissingOracleError("oracle_pehe risk needs the true CATE");
      }
      break;
  }
}

double RiskEvaluator::operator()(const Vector& tau_pred) const {
  switch (kind_) {
    case RiskKind::po_risk: return po_risk(tau_pred, phi_);
    case RiskKind::r_risk: {
      check_length(residual_.size(), tau_pred.size(), "r_risk predictions");
      return finite_risk((residual_ - treatment_.cwiseProduct(tau_pred)).squaredNorm() /
                             static_cast<double>(residual_.size()),
                         "r_risk");
    }
    case RiskKind::oracle_pehe:
      check_length(truth_.size(), tau_pred.size(), "pehe predictions");
      return (tau_pred - truth_).squaredNorm() / static_cast<double>(truth_.size());
  }
  throw ConfigError("unknown risk kind");
}

namespace {

struct OracleView {
  Vector tau;
  Vector pi;
  Vector noise;
  NuisanceEstimates nuisances;
};

OracleView oracle_view(const Dataset& data, const Vector& tau_pred) {
  if (!data.oracle || !data.noise) throw MissingOracleError("decomposition needs oracle functions and noise");
  check_length(data.rows(), tau_pred.size(), "tau_pred");
  OracleView v;
  v.nuisances = oracle_nuisances(data);
  v.tau = data.oracle->tau(data.x);
  v.pi = v.nuisances.pi_hat;
  v.noise = *data.noise;
  return v;
}

}  // namespace

PoDecomposition verify_po_decomposition(const Dataset& data, const Vector& tau_pred) {
  const OracleView v = oracle_view(data, tau_pred);
  const double n = static_cast<double>(data.rows());
  PoDecomposition out;
  out.lhs = po_risk(tau_pred, pseudo_outcome(data.y, data.a, v.nuisances));
  out.pehe = (v.tau - tau_pred).squaredNorm() / n;
  Vector cross(data.rows());
  for (Index i = 0; i < data.rows(); ++i) {
    const double scale = v.pi(i) * (1.0 - v.pi(i));
    const double weighted = v.noise(i) * (data.a(i) - v.pi(i)) / scale;
    out.noise_term += weighted * weighted;
    out.noise_term_unweighted += (v.noise(i) / scale) * (v.noise(i) / scale);
    cross(i) = 2.0 * (v.tau(i) - tau_pred(i)) * weighted;
  }
  out.noise_term /= n;
  out.noise_term_unweighted /= n;
  out.cross_term = cross.mean();
  out.cross_term_se = std::sqrt(sample_variance(as_span(cross)) / n);
  return out;
}

double RDecomposition::rhs_selected() const noexcept {
  return selected_is_expected() ? rhs_expected() : rhs_squared();
}

bool RDecomposition::selected_is_expected() const noexcept {
  return std::abs(rhs_expected() - lhs) <= std::abs(rhs_squared() - lhs);
}

RDecomposition verify_r_decomposition(const Dataset& data, const Vector& tau_pred) {
  const OracleView v = oracle_view(data, tau_pred);
  const double n = static_cast<double>(data.rows());
  RDecomposition out;
  out.lhs = r_risk(tau_pred, data.y, data.a, v.nuisances);
  for (Index i = 0; i < data.rows(); ++i) {
    const double gap = v.tau(i) - tau_pred(i);
    const double centered = data.a(i) - v.pi(i);
    const double w = v.pi(i) * (1.0 - v.pi(i));
    out.noise_variance += v.noise(i) * v.noise(i);
    out.weighted_tau_risk += centered * centered * gap * gap;
    out.expected_weight_term += w * gap * gap;
    out.squared_weight_term += w * w * gap * gap;
    out.cross_term += 2.0 * centered * gap * v.noise(i);
  }
  out.noise_variance /= n;
  out.weighted_tau_risk /= n;
  out.expected_weight_term /= n;
  out.squared_weight_term /= n;
  out.cross_term /= n;
  return out;
}

}  // namespace permucate
