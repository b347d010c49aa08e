#include "permucate/inference.hpp"

#include "permucate/errors.hpp"
#include "permucate/parallel.hpp"
#include "permucate/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

namespace permucate {

void CrossfitPlan::validate() const {
  if (!(outer_frac_heldout > 0.0 && outer_frac_heldout < 1.0))
    throw ConfigError("outer_frac_heldout must lie in (0, 1)");
  if (outer_folds < 2) throw ConfigError("outer_folds must be at least 2");
  if (inner_folds < 2) throw ConfigError("inner_folds must be at least 2");
  if (std::abs(outer_frac_heldout * outer_folds - 1.0) > 1e-9)
    throw ConfigError("outer_frac_heldout must equal 1 / outer_folds");
  if (n_seeds < 1) throw ConfigError("n_seeds must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n_permutations < 1) throw ConfigError("n_permutations must be at least 1");
}

WaldResult wald_statistic(std::span<const double> psis) {
  if (psis.size() < 2) throw DataError("Wald statistic needs at least two values");
  const double m = mean(psis);
  const double sd = std::sqrt(sample_variance(psis));
  WaldResult out;
  if (sd < 1e-12) {
    out.z = m > 0.0 ? 1e6 : (m < 0.0 ? -1e6 : 0.0);
  } else {
    out.z = m / sd;
  }
  out.p_value = 0.5 * std::erfc(out.z / std::sqrt(2.0));
  return out;
}

namespace {

auto row_key(const ImportanceRow& r) {
  return std::make_tuple(static_cast<int>(r.risk), static_cast<int>(r.method), r.variable, r.seed,
                         r.fold);
}

using GroupKey = std::tuple<int, int, Index>;

}  // namespace

ImportanceTable make_table(std::vector<ImportanceRow> rows, Index n, Index d, double alpha) {
  std::sort(rows.begin(), rows.end(),
            [](const ImportanceRow& l, const ImportanceRow& r) { return row_key(l) < row_key(r); });
  ImportanceTable table;
  table.n = n;
  table.d = d;
  table.alpha = alpha;

  std::map<GroupKey, std::vector<double>> pooled;
  std::map<std::tuple<int, int, Index, int>, std::vector<double>> per_seed;
  for (const auto& r : rows) {
    pooled[{static_cast<int>(r.risk), static_cast<int>(r.method), r.variable}].push_back(r.psi);
    per_seed[{static_cast<int>(r.risk), static_cast<int>(r.method), r.variable, r.seed}].push_back(r.psi);
  }
  for (const auto& [key, psis] : pooled) {
    ImportanceAggregate agg;
    agg.risk = static_cast<RiskKind>(std::get<0>(key));
    agg.method = static_cast<ImportanceMethod>(std::get<1>(key));
    agg.variable = std::get<2>(key);
    agg.count = psis.size();
    agg.mean_psi = mean(psis);
    if (psis.size() >= 2) {
      agg.std_psi = std::sqrt(sample_variance(psis));
      const WaldResult w = wald_statistic(psis);
      agg.wald = w.z;
      agg.p_value = w.p_value;
      agg.decision = w.p_value < alpha;
    }
    table.aggregates.push_back(agg);
  }
  for (const auto& [key, psis] : per_seed) {
    SeedDecision dec;
    dec.risk = static_cast<RiskKind>(std::get<0>(key));
    dec.method = static_cast<ImportanceMethod>(std::get<1>(key));
    dec.variable = std::get<2>(key);
    dec.seed = std::get<3>(key);
    if (psis.size() >= 2) {
      const WaldResult w = wald_statistic(psis);
      dec.wald = w.z;
      dec.p_value = w.p_value;
      dec.decision = w.p_value < alpha;
    }
    table.seed_decisions.push_back(dec);
  }
  table.rows = std::move(rows);
  return table;
}

const ImportanceAggregate& ImportanceTable::aggregate(ImportanceMethod method, RiskKind risk,
                                                      Index variable) const {
  for (const auto& a : aggregates)
    if (a.method == method && a.risk == risk && a.variable == variable) return a;
  throw DataError("importance table has no aggregate for variable " + std::to_string(variable + 1));
}

std::vector<double> ImportanceTable::mean_psi(ImportanceMethod method, RiskKind risk) const {
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (Index j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] = aggregate(method, risk, j).mean_psi;
  return out;
}

std::vector<int> outer_assignment(const Dataset& data, const CrossfitPlan& plan,
                                  std::uint64_t master_seed, int seed) {
  return stratified_kfold_assignment(as_span(data.a), plan.outer_folds,
                                     derive_seed(master_seed, Stream::folds,
                                                 {static_cast<std::uint64_t>(seed), 0x6f75}));
}

void check_fold_sizes(const Dataset& data, std::span<const int> outer, const CrossfitPlan& plan) {
  const Index minimum = 2 * static_cast<Index>(plan.inner_folds);
  for (int f = 0; f < plan.outer_folds; ++f) {
    Index treated = 0, control = 0, held = 0;
    for (Index i = 0; i < data.rows(); ++i) {
      if (outer[static_cast<std::size_t>(i)] == f) {
        ++held;
        continue;
      }
      (data.a(i) == 1.0 ? treated : control) += 1;
    }
    if (treated < minimum || control < minimum || held < 2) {
      throw DataError("infeasible fold sizes: outer fold " + std::to_string(f) + " trains on " +
                      std::to_string(treated) + " treated and " + std::to_string(control) +
                      " control rows, need at least " + std::to_string(minimum) + " of each");
    }
  }
}

namespace {

bool is_linear(const LearnerSpec& spec) { return spec.kind == LearnerKind::ridge_cv; }

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<ImportanceRow> importance_fold(const Dataset& data, std::span<const int> outer, int fold,
                                           const CrossfitPlan& plan, const ImportanceOptions& options,
                                           std::uint64_t master_seed, int seed) {
  const Dataset train = data.subset(rows_outside_fold(outer, fold));
  const Dataset test = data.subset(rows_in_fold(outer, fold));
  const auto s = static_cast<std::uint64_t>(seed);
  const auto f = static_cast<std::uint64_t>(fold);

  const auto fit_start = std::chrono::steady_clock::now();
  const DrLearnerFit fit = fit_dr_learner(train, plan.inner_folds, options.specs,
                                          derive_seed(master_seed, Stream::learner, {s, f}));
  const NuisanceEstimates nuis_test = fit.model.transport_nuisances(test.x);
  const double fit_ms = elapsed_ms(fit_start);

  const bool want_cpi = std::find(options.methods.begin(), options.methods.end(),
                                  ImportanceMethod::permucate) != options.methods.end();
  const bool want_loco = std::find(options.methods.begin(), options.methods.end(),
                                   ImportanceMethod::loco) != options.methods.end();
  const bool diagnostics = options.diagnostics && is_linear(options.specs.final_stage) &&
                           is_linear(options.conditional);
  if (options.diagnostics && !diagnostics)
    throw DataError("linear diagnostics need ridge final-stage and conditional models");

  std::vector<ConditionalModel> cond;
  double cond_ms = 0.0;
  if (want_cpi || diagnostics) {
    const auto start = std::chrono::steady_clock::now();
    cond = fit_conditional_models(train.x, options.conditional,
                                  derive_seed(master_seed, Stream::learner, {s, f, 0xc0d}));
    cond_ms = elapsed_ms(start);
  }

  const Index d = data.cols();
  std::vector<ImportanceRow> rows;
  std::vector<LinearDiagnostics> diag;
  for (RiskKind risk : options.risks) {
    std::vector<std::pair<ImportanceMethod, std::vector<ImportanceEstimate>>> results;
    std::vector<double> method_ms;
    if (want_cpi) {
      const auto start = std::chrono::steady_clock::now();
      results.emplace_back(ImportanceMethod::permucate,
                           permucate(fit.model, nuis_test, test, cond, plan.n_permutations, risk,
                                     derive_seed(master_seed, Stream::permutation, {s, f})));
      method_ms.push_back(elapsed_ms(start) + cond_ms);
    }
    if (want_loco || (diagnostics && diag.empty())) {
      const auto start = std::chrono::steady_clock::now();
      LocoResult lr = loco(fit.model, fit.nuisances, nuis_test, train, test,
                           options.specs.final_stage, risk);
      const double ms = elapsed_ms(start);
      if (diagnostics && diag.empty())
        diag = linear_diagnostics(fit.model.final_regressor(), lr.reduced, cond, test.x);
      if (want_loco) {
        results.emplace_back(ImportanceMethod::loco, std::move(lr.estimates));
        method_ms.push_back(ms);
      }
    }
    for (std::size_t m = 0; m < results.size(); ++m) {
      for (const auto& est : results[m].second) {
        ImportanceRow row;
        row.method = results[m].first;
        row.risk = risk;
        row.variable = est.j;
        row.seed = seed;
        row.fold = fold;
        row.n = data.rows();
        row.psi = est.psi;
        row.risk_full = est.risk_full;
        row.constant_column = est.constant_column;
        if (diagnostics) {
          row.delta_beta = diag[static_cast<std::size_t>(est.j)].delta_beta_norm_sq;
          row.nu_variance = diag[static_cast<std::size_t>(est.j)].nu_variance;
        }
        if (options.record_timing) row.wall_time_ms = (fit_ms + method_ms[m]) / static_cast<double>(d);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<ImportanceRow> importance_seed(const Dataset& data, const CrossfitPlan& plan,
                                           const ImportanceOptions& options,
                                           std::uint64_t master_seed, int seed) {
  plan.validate();
  data.validate();
  const auto outer = outer_assignment(data, plan, master_seed, seed);
  check_fold_sizes(data, outer, plan);
  std::vector<std::vector<ImportanceRow>> parts(static_cast<std::size_t>(plan.outer_folds));
  parallel_for(parts.size(), options.workers, [&](std::size_t f) {
    parts[f] = importance_fold(data, outer, static_cast<int>(f), plan, options, master_seed, seed);
  });
  std::vector<ImportanceRow> rows;
  for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
  return rows;
}

Dataset dataset_for_seed(const DgpSpec& spec, Index n, std::uint64_t master_seed, int seed) {
  return sample(spec, n,
                derive_seed(master_seed, Stream::data,
                            {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(seed)}));
}

namespace {

template <class DataFor>
ImportanceTable run_cells(Index n, Index d, const CrossfitPlan& plan, const ImportanceOptions& options,
                          std::uint64_t master_seed, DataFor&& data_for) {
  plan.validate();
  if (options.methods.empty()) throw ConfigError("no importance methods requested");
  if (options.risks.empty()) throw ConfigError("no risks requested");
  const auto seeds = static_cast<std::size_t>(plan.n_seeds);
  const auto folds = static_cast<std::size_t>(plan.outer_folds);

  std::vector<Dataset> datasets;
  std::vector<std::vector<int>> outer;
  for (std::size_t s = 0; s < seeds; ++s) {
    datasets.push_back(data_for(static_cast<int>(s)));
    datasets.back().validate();
    outer.push_back(outer_assignment(datasets.back(), plan, master_seed, static_cast<int>(s)));
    check_fold_sizes(datasets.back(), outer.back(), plan);
  }
  std::vector<std::vector<ImportanceRow>> parts(seeds * folds);
  parallel_for(parts.size(), options.workers, [&](std::size_t cell) {
    const std::size_t s = cell / folds;
    const int f = static_cast<int>(cell % folds);
    parts[cell] = importance_fold(datasets[s], outer[s], f, plan, options, master_seed, static_cast<int>(s));
  });
  std::vector<ImportanceRow> rows;
  for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
  return make_table(std::move(rows), n, d, plan.alpha);
}

}  // namespace

ImportanceTable run_crossfit_importance(const Dataset& data, const CrossfitPlan& plan,
                                        const ImportanceOptions& options, std::uint64_t master_seed) {
  return run_cells(data.rows(), data.cols(), plan, options, master_seed, [&](int) { return data; });
}

ImportanceTable run_crossfit_importance(const DgpSpec& spec, Index n, const CrossfitPlan& plan,
                                        const ImportanceOptions& options, std::uint64_t master_seed) {
  spec.validate();
  return run_cells(n, spec.d, plan, options, master_seed,
                   [&](int s) { return dataset_for_seed(spec, n, master_seed, s); });
}

std::vector<PowerSummary> power_accounting(const ImportanceTable& table,
                                           const std::vector<bool>& important) {
  if (important.empty()) throw MissingOracleError("power accounting needs the important-variable set");
  if (static_cast<Index>(important.size()) != table.d)
    throw DimensionError("important-variable set has " + std::to_string(important.size()) +
                         " entries, table has " + std::to_string(table.d) + " variables");
  std::map<std::pair<int, int>, PowerSummary> acc;
  std::map<std::pair<int, int>, std::size_t> hits;
  for (const auto& dec : table.seed_decisions) {
    const std::pair<int, int> key{static_cast<int>(dec.risk), static_cast<int>(dec.method)};
    PowerSummary& s = acc[key];
    s.method = dec.method;
    s.risk = dec.risk;
    if (important[static_cast<std::size_t>(dec.variable)]) {
      ++s.important_trials;
      if (dec.decision) ++hits[key];
    } else {
      ++s.null_trials;
      if (dec.decision) ++s.false_positives;
    }
  }
  std::vector<PowerSummary> out;
  for (auto& [key, s] : acc) {
    if (s.important_trials > 0) {
      s.tp_rate = static_cast<double>(hits[key]) / static_cast<double>(s.important_trials);
      s.fn_rate = 1.0 - s.tp_rate;
    }
    if (s.null_trials > 0)
      s.type1_rate = static_cast<double>(s.false_positives) / static_cast<double>(s.null_trials);
    out.push_back(s);
  }
  return out;
}

std::vector<double> detection_rate(const ImportanceTable& table, ImportanceMethod method,
                                   RiskKind risk) {
  std::vector<double> hits(static_cast<std::size_t>(table.d), 0.0);
  std::vector<double> total(static_cast<std::size_t>(table.d), 0.0);
  for (const auto& dec : table.seed_decisions) {
    if (dec.method != method || dec.risk != risk) continue;
    total[static_cast<std::size_t>(dec.variable)] += 1.0;
    if (dec.decision) hits[static_cast<std::size_t>(dec.variable)] += 1.0;
  }
  for (std::size_t j = 0; j < hits.size(); ++j) hits[j] = total[j] > 0.0 ? hits[j] / total[j] : 0.0;
  return hits;
}

std::vector<std::optional<Index>> min_detect_n(std::span<const ImportanceTable> sweep,
                                               ImportanceMethod method, RiskKind risk) {
  if (sweep.empty()) return {};
  const Index d = sweep.front().d;
  std::vector<std::optional<Index>> out(static_cast<std::size_t>(d));
  for (const auto& table : sweep) {
    if (table.d != d) throw DimensionError("sweep tables disagree on the number of variables");
    const auto rate = detection_rate(table, method, risk);
    for (Index j = 0; j < d; ++j) {
      auto& slot = out[static_cast<std::size_t>(j)];
      if (!slot && rate[static_cast<std::size_t>(j)] > 0.5) slot = table.n;
    }
  }
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return v[l] < v[r]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t k = i;
    while (k + 1 < order.size() && v[order[k + 1]] == v[order[i]]) ++k;
    const double r = 0.5 * static_cast<double>(i + k) + 1.0;
    for (std::size_t t = i; t <= k; ++t) rank[order[t]] = r;
    i = k + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: lengths differ");
  if (a.size() < 2) throw DataError("spearman: need at least two values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw NumericError("spearman: constant input");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace permucate
