#include "permucate/importance.hpp"

#include "permucate/errors.hpp"
#include "permucate/random.hpp"

#include <numeric>
#include <string>

namespace permucate {

std::string_view to_string(ImportanceMethod method) noexcept {
  switch (method) {
    case ImportanceMethod::permucate: return "permucate";
    case ImportanceMethod::loco: return "loco";
  }
  return "unknown";
}

ImportanceMethod parse_importance_method(std::string_view name) {
  if (name == "permucate" || name == "cpi") return ImportanceMethod::permucate;
  if (name == "loco") return ImportanceMethod::loco;
  throw ConfigError("unknown importance method '" + std::string(name) + "' (expected permucate or loco)");
}

namespace {

bool is_constant(const Vector& v) {
  return v.size() == 0 || (v.array() == v(0)).all();
}

Vector column_copy(const Matrix& x, Index j) { return x.col(j); }

}  // namespace

std::vector<ConditionalModel> fit_conditional_models(const Matrix& x_train, const LearnerSpec& spec,
                                                     std::uint64_t seed) {
  check_design(x_train, "conditional model covariates");
  if (x_train.cols() < 2) throw DimensionError("conditional models need at least two covariates");
  std::vector<ConditionalModel> models;
  models.reserve(static_cast<std::size_t>(x_train.cols()));
  for (Index j = 0; j < x_train.cols(); ++j) {
    const Matrix others = drop_column(x_train, j);
    const Vector target = column_copy(x_train, j);
    FittedRegressor reg = fit_regressor(others, target, spec,
                                        derive_seed(seed, Stream::learner, {0xc0d, static_cast<std::uint64_t>(j)}));
    const Vector fitted = reg.predict(others);
    models.push_back(ConditionalModel{j, std::move(reg), sample_variance(as_span(fitted)),
                                      is_constant(target)});
  }
  return models;
}

std::vector<ImportanceEstimate> permucate(const CateModel& model,
                                          const NuisanceEstimates& nuisances_test,
                                          const Dataset& test,
                                          std::span<const ConditionalModel> conditional,
                                          int n_permutations, RiskKind risk, std::uint64_t seed) {
  if (n_permutations < 1) throw ConfigError("permucate: need at least one permutation");
  test.validate();
  if (static_cast<Index>(conditional.size()) != test.cols())
    throw DimensionError("permucate: need one conditional model per covariate");

  const RiskEvaluator evaluate(risk, test, nuisances_test);
  const double risk_full = evaluate(model.predict(test.x));
  const Index n = test.rows();

  std::vector<ImportanceEstimate> out;
  out.reserve(conditional.size());
  for (const ConditionalModel& cond : conditional) {
    const Index j = cond.j;
    if (j < 0 || j >= test.cols()) throw DimensionError("permucate: conditional model index out of range");
    ImportanceEstimate est;
    est.method = ImportanceMethod::permucate;
    est.j = j;
    est.risk_full = risk_full;
    est.risk_perturbed = risk_full;
    est.n_permutations = n_permutations;
    if (cond.constant_column) {
      est.constant_column = true;
      est.permutation_psi.assign(static_cast<std::size_t>(n_permutations), 0.0);
      out.push_back(std::move(est));
      continue;
    }

    const Vector nu = cond.regressor.predict(drop_column(test.x, j));
    const Vector residual = test.x.col(j) - nu;
    Matrix perturbed = test.x;
    std::vector<Index> order(static_cast<std::size_t>(n));
    double perturbed_sum = 0.0;
    for (int k = 0; k < n_permutations; ++k) {
      std::iota(order.begin(), order.end(), Index{0});
      Rng rng(derive_seed(seed, Stream::permutation,
                          {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k)}));
      rng.shuffle(std::span<Index>(order));
      for (Index i = 0; i < n; ++i) perturbed(i, j) = nu(i) + residual(order[static_cast<std::size_t>(i)]);
      const double r = evaluate(model.predict(perturbed));
      perturbed_sum += r;
      est.permutation_psi.push_back((r - risk_full) / 2.0);
    }
    est.risk_perturbed = perturbed_sum / n_permutations;
    est.psi = mean(est.permutation_psi);
    out.push_back(std::move(est));
  }
  return out;
}

LocoResult loco(const CateModel& model, const NuisanceEstimates& nuisances_train,
                const NuisanceEstimates& nuisances_test, const Dataset& train, const Dataset& test,
                const LearnerSpec& final_spec, RiskKind risk) {
  train.validate();
  test.validate();
  if (train.cols() != test.cols()) throw DimensionError("loco: train and test column counts differ");
  if (train.cols() < 2) throw DimensionError("loco: needs at least two covariates");

  const Vector phi_train = pseudo_outcome(train.y, train.a, nuisances_train);
  const RiskEvaluator evaluate(risk, test, nuisances_test);
  const double risk_full = evaluate(model.predict(test.x));
  const std::uint64_t final_seed = derive_seed(model.seed(), Stream::learner, {0xf1a1});

  LocoResult result;
  for (Index j = 0; j < train.cols(); ++j) {
    const Matrix x_train = drop_column(train.x, j);
    FittedRegressor reduced = fit_regressor(x_train, phi_train, final_spec, final_seed);
    ImportanceEstimate est;
    est.method = ImportanceMethod::loco;
    est.j = j;
    est.risk_full = risk_full;
    if (is_constant(train.x.col(j))) {
      est.constant_column = true;
      est.risk_perturbed = risk_full;
    } else {
      est.risk_perturbed = evaluate(reduced.predict(drop_column(test.x, j)));
      est.psi = est.risk_perturbed - risk_full;
    }
    result.estimates.push_back(std::move(est));
    result.reduced.push_back(std::move(reduced));
  }
  return result;
}

std::vector<LinearDiagnostics> linear_diagnostics(const FittedRegressor& full,
                                                  std::span<const FittedRegressor> reduced,
                                                  std::span<const ConditionalModel> conditional,
                                                  const Matrix& x_test) {
  if (!full.coefficients()) throw DataError("linear diagnostics: full model is not linear");
  const Vector& beta = *full.coefficients();
  const Index d = beta.size();
  if (static_cast<Index>(reduced.size()) != d || static_cast<Index>(conditional.size()) != d)
    throw DimensionError("linear diagnostics: need one reduced and one conditional model per covariate");
  if (x_test.cols() != d) throw DimensionError("linear diagnostics: test matrix has wrong width");

  std::vector<LinearDiagnostics> out;
  for (Index j = 0; j < d; ++j) {
    const auto& reduced_beta = reduced[static_cast<std::size_t>(j)].coefficients();
    if (!reduced_beta) throw DataError("linear diagnostics: reduced model is not linear");
    if (!conditional[static_cast<std::size_t>(j)].regressor.coefficients())
      throw DataError("linear diagnostics: conditional model is not linear");
    const Vector kept = [&] {
      Vector v(d - 1);
      if (j > 0) v.head(j) = beta.head(j);
      if (j + 1 < d) v.tail(d - j - 1) = beta.tail(d - j - 1);
      return v;
    }();
    const Vector nu =
        conditional[static_cast<std::size_t>(j)].regressor.predict(drop_column(x_test, j));
    out.push_back(LinearDiagnostics{j, (kept - *reduced_beta).squaredNorm(),
                                    sample_variance(as_span(nu))});
  }
  return out;
}

}  // namespace permucate
