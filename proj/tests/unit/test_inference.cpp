#include "helpers.hpp"

#include "permucate/errors.hpp"
#include "permucate/inference.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace permucate;

namespace {

// Two methods, d variables, `seeds` x 5 folds; psi = center + spread * sign pattern.
ImportanceTable fabricated(const std::vector<double>& centers, int seeds) {
  std::vector<ImportanceRow> rows;
  const double pattern[5] = {-2, -1, 0, 1, 2};
  for (ImportanceMethod m : {ImportanceMethod::permucate, ImportanceMethod::loco})
    for (int s = 0; s < seeds; ++s)
      for (int f = 0; f < 5; ++f)
        for (std::size_t j = 0; j < centers.size(); ++j) {
          ImportanceRow r;
          r.method = m;
          r.variable = static_cast<Index>(j);
          r.seed = s;
          r.fold = f;
          r.n = 100;
          r.psi = centers[j] + 0.1 * pattern[f];
          rows.push_back(r);
        }
  return make_table(std::move(rows), 100, static_cast<Index>(centers.size()), 0.05);
}

CrossfitPlan small_plan(int seeds) {
  CrossfitPlan plan;
  plan.n_seeds = seeds;
  plan.n_permutations = 20;
  return plan;
}

bool same_rows(const ImportanceTable& a, const ImportanceTable& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto &l = a.rows[i], &r = b.rows[i];
    if (l.method != r.method || l.variable != r.variable || l.seed != r.seed || l.fold != r.fold ||
        l.psi != r.psi || l.risk_full != r.risk_full)
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("Wald statistic by hand") {
  const std::vector<double> v{1, 2, 3};
  const WaldResult w = wald_statistic(v);
  CHECK(w.z == doctest::Approx(2.0));
  CHECK(w.p_value == doctest::Approx(0.022750131948179).epsilon(1e-9));

  const std::vector<double> sym{-1.5, -0.5, 0.5, 1.5};
  CHECK(wald_statistic(sym).z == 0.0);
  CHECK(wald_statistic(sym).p_value == 0.5);

  const std::vector<double> flat{0.3, 0.3, 0.3};
  CHECK(wald_statistic(flat).z == 1e6);
  CHECK(wald_statistic(flat).p_value < 1e-12);
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(wald_statistic(zeros).z == 0.0);

  const std::vector<double> single{1.0};
  CHECK_THROWS_AS(wald_statistic(single), DataError);
}

TEST_CASE("plan validation") {
  CrossfitPlan plan;
  CHECK_NOTHROW(plan.validate());
  plan.outer_frac_heldout = 0.3;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = CrossfitPlan{};
  plan.alpha = 1.5;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = CrossfitPlan{};
  plan.n_permutations = 0;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
}

TEST_CASE("outer folds partition every seed") {
  const Dataset data = sample_ld(257, 1);
  const CrossfitPlan plan;
  for (int s = 0; s < 3; ++s) {
    const auto outer = outer_assignment(data, plan, 5, s);
    REQUIRE(outer.size() == 257);
    std::vector<int> count(5, 0);
    for (int f : outer) {
      REQUIRE(f >= 0);
      REQUIRE(f < 5);
      ++count[f];
    }
    for (int c : count) CHECK(std::abs(c - 257 / 5) <= 1);
  }
  CHECK(outer_assignment(data, plan, 5, 0) != outer_assignment(data, plan, 5, 1));
}

TEST_CASE("every row lands in one evaluation fold") {
  const CrossfitPlan plan = small_plan(2);
  ImportanceOptions options;
  options.methods = {ImportanceMethod::permucate};
  const ImportanceTable table = run_crossfit_importance(DgpSpec::ld(), 300, plan, options, 2);
  // Each (seed, variable) has exactly one row per fold.
  std::map<std::pair<int, Index>, std::set<int>> folds;
  for (const auto& r : table.rows) CHECK(folds[{r.seed, r.variable}].insert(r.fold).second);
  CHECK(folds.size() == 2 * 6);
  for (const auto& [key, f] : folds) CHECK(f.size() == 5);
}

TEST_CASE("small folds are rejected") {
  const Dataset data = sample_ld(16, 3);
  const CrossfitPlan plan;
  const auto outer = outer_assignment(data, plan, 0, 0);
  CHECK_THROWS_AS(check_fold_sizes(data, outer, plan), DataError);
  CHECK_THROWS_AS(run_crossfit_importance(data, plan, ImportanceOptions{}, 0), DataError);
}

TEST_CASE("power accounting on fabricated decisions") {
  const ImportanceTable strong = fabricated({1.0, 0.0}, 3);
  const auto all = power_accounting(strong, {true, false});
  REQUIRE(all.size() == 2);
  for (const auto& s : all) {
    CHECK(s.tp_rate == 1.0);
    CHECK(s.type1_rate == 0.0);
    CHECK(s.important_trials == 3);
    CHECK(s.null_trials == 3);
  }
  const ImportanceTable weak = fabricated({0.0, 0.0}, 3);
  for (const auto& s : power_accounting(weak, {true, true})) {
    CHECK(s.tp_rate == 0.0);
    CHECK(s.fn_rate == 1.0);
  }
  CHECK_THROWS_AS(power_accounting(weak, {}), MissingOracleError);
  CHECK(detection_rate(strong, ImportanceMethod::loco, RiskKind::po_risk) == std::vector<double>{1.0, 0.0});
  const auto& agg = strong.aggregate(ImportanceMethod::permucate, RiskKind::po_risk, 0);
  CHECK(agg.count == 15);
  CHECK(agg.mean_psi == doctest::Approx(1.0));
  CHECK(agg.decision);
}

TEST_CASE("minimum detection n") {
  std::vector<ImportanceTable> sweep{fabricated({0.0, 0.0}, 3), fabricated({1.0, 0.0}, 3),
                                     fabricated({1.0, 1.0}, 3)};
  for (Index k = 0; k < 3; ++k) sweep[k].n = 100 * (k + 1);
  const auto m = min_detect_n(sweep, ImportanceMethod::permucate, RiskKind::po_risk);
  REQUIRE(m.size() == 2);
  CHECK(m[0] == Index{200});
  CHECK(m[1] == Index{300});
  sweep.pop_back();
  CHECK_FALSE(min_detect_n(sweep, ImportanceMethod::permucate, RiskKind::po_risk)[1].has_value());
}

TEST_CASE("Spearman correlation with ties") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{5, 6, 7, 8, 7}, c{5, 4, 3, 2, 1};
  CHECK(spearman(a, a) == doctest::Approx(1.0));
  CHECK(spearman(a, c) == doctest::Approx(-1.0));
  // Ranks of b: 1, 2, 3.5, 5, 3.5.
  CHECK(spearman(a, b) == doctest::Approx(0.8207826816681233));
}

TEST_CASE("LD at n=2000 flags X2 with both methods") {
  const ImportanceTable table = run_crossfit_importance(DgpSpec::ld(), 2000, small_plan(10), ImportanceOptions{}, 4);
  for (ImportanceMethod m : {ImportanceMethod::permucate, ImportanceMethod::loco})
    CHECK(table.aggregate(m, RiskKind::po_risk, 1).decision);
}

TEST_CASE("no treatment effect keeps the false-positive rate bounded") {
  const DgpSpec spec = DgpSpec::hl(10, 3, 0.5, 0.0);
  const ImportanceTable table = run_crossfit_importance(spec, 1000, small_plan(10), ImportanceOptions{}, 5);
  for (ImportanceMethod m : {ImportanceMethod::permucate, ImportanceMethod::loco}) {
    const auto rate = detection_rate(table, m, RiskKind::po_risk);
    double flagged = 0;
    for (double r : rate) flagged += r;
    const double trials = 100.0, alpha = 0.05;
    CHECK(flagged / 10.0 <= alpha + 2.0 * std::sqrt(alpha * (1 - alpha) / trials));
  }
}

TEST_CASE("LD sweep: power, type-1 and detection order") {
  std::vector<ImportanceTable> sweep;
  for (Index n : {250, 500, 1000, 2000})
    sweep.push_back(run_crossfit_importance(DgpSpec::ld(), n, small_plan(10), ImportanceOptions{}, 6));
  const auto cpi = min_detect_n(sweep, ImportanceMethod::permucate, RiskKind::po_risk);
  const auto loco = min_detect_n(sweep, ImportanceMethod::loco, RiskKind::po_risk);
  int ahead = 0;
  for (int j = 0; j < 3; ++j) {
    const Index c = cpi[j].value_or(100000), l = loco[j].value_or(100000);
    ahead += c <= l;
  }
  CHECK(ahead >= 2);

  const std::vector<bool> truth{true, true, true, false, false, false};
  for (ImportanceMethod m : {ImportanceMethod::permucate, ImportanceMethod::loco}) {
    for (int j = 0; j < 3; ++j) {
      int inversions = 0;
      for (std::size_t k = 1; k < sweep.size(); ++k)
        inversions += detection_rate(sweep[k], m, RiskKind::po_risk)[j] <
                      detection_rate(sweep[k - 1], m, RiskKind::po_risk)[j];
      CHECK(inversions <= 1);
    }
    std::size_t fp = 0, trials = 0;
    for (std::size_t k = 2; k < sweep.size(); ++k)
      for (const auto& s : power_accounting(sweep[k], truth))
        if (s.method == m) {
          fp += s.false_positives;
          trials += s.null_trials;
        }
    const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(trials));
    CHECK(static_cast<double>(fp) / static_cast<double>(trials) <= 0.05 + 3 * se);
  }
}

TEST_CASE("tables are reproducible and independent of worker count") {
  ImportanceOptions options;
  const ImportanceTable a = run_crossfit_importance(DgpSpec::ld(), 400, small_plan(3), options, 7);
  options.workers = 3;
  const ImportanceTable b = run_crossfit_importance(DgpSpec::ld(), 400, small_plan(3), options, 7);
  const ImportanceTable c = run_crossfit_importance(DgpSpec::ld(), 400, small_plan(3), options, 8);
  CHECK(same_rows(a, b));
  CHECK_FALSE(same_rows(a, c));
}

// Single permutation per fold: the setting of the closed-form variance of both estimators.
TEST_CASE("both estimators have comparable variance at large n") {
  LinearDesign design;
  design.tau_coef = Vector::Zero(5);
  design.tau_coef(0) = 1.0;
  design.tau_coef(1) = 2.0;
  design.mu0_coef = Vector::Zero(5);
  design.logit_coef = Vector::Zero(5);
  const Dataset data = sample_linear(design, 20000, 9);
  CrossfitPlan plan = small_plan(10);
  plan.n_permutations = 1;
  const ImportanceTable table = run_crossfit_importance(data, plan, ImportanceOptions{}, 9);
  const double sd_cpi = table.aggregate(ImportanceMethod::permucate, RiskKind::po_risk, 1).std_psi;
  const double sd_loco = table.aggregate(ImportanceMethod::loco, RiskKind::po_risk, 1).std_psi;
  const double ratio = (sd_loco * sd_loco) / (sd_cpi * sd_cpi);
  CHECK(ratio >= 0.5);
  CHECK(ratio <= 2.0);
}

}  // TEST_SUITE
