#pragma once

// Experiment runner: config files, result rows, CSV artifacts and manifests.
//
// Config files hold flat `key = value` lines; `#` starts a comment and list
// values are comma-separated. See README.md for the key reference.

#include "permucate/inference.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace permucate {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Experiment { fig1_ld_power, fig2_variance, fig3_tp_accuracy, s1_risk_compare, s4_delta_beta_dims };
enum class LearnerPreset { linear, superlearner };

std::string_view to_string(Experiment e) noexcept;
std::string_view to_string(LearnerPreset p) noexcept;
Experiment parse_experiment(std::string_view name);
LearnerPreset parse_preset(std::string_view name);

struct ExperimentConfig {
  Experiment experiment = Experiment::fig1_ld_power;
  /// Unset fields take the experiment's default scenario.
  std::optional<DgpKind> dgp;
  std::optional<double> rho;
  std::optional<double> effect_size;
  std::optional<double> noise_sd;
  std::optional<double> treat_quantile;
  std::optional<int> d_imp;
  std::optional<std::uint64_t> seed_coeffs;
  std::vector<Index> n_grid{250, 500, 1000, 2000};
  /// Empty: the experiment's default dimensions.
  std::vector<Index> d_grid;
  CrossfitPlan plan;
  std::vector<ImportanceMethod> methods{ImportanceMethod::permucate, ImportanceMethod::loco};
  RiskKind risk = RiskKind::po_risk;
  LearnerPreset preset = LearnerPreset::linear;
  std::filesystem::path output_dir = "results";
  std::uint64_t master_seed = 0;
  bool record_timing = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Scenario for dimension d with overrides applied.
  DgpSpec dgp_spec(Index d) const;
  std::vector<Index> dimensions() const;
  std::vector<RiskKind> risks() const;
  ImportanceOptions importance_options() const;
};

/// Throws ConfigError with the line number for unknown keys, malformed values
/// and violated constraints.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical `key = value` rendering; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& config);
/// FNV-1a of to_text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

NuisanceSpecs preset_specs(LearnerPreset preset);

struct ResultRow {
  std::string experiment;
  std::string dgp;
  Index d = 0;
  Index n = 0;
  int seed = 0;
  int fold = 0;
  Index variable = 0;  // 0-based; written as x1, x2, ...
  ImportanceMethod method = ImportanceMethod::permucate;
  RiskKind risk = RiskKind::po_risk;
  double psi = 0.0;
  /// Wald test over the folds of this row's seed.
  double wald = 0.0;
  double p_value = 0.5;
  std::optional<double> diagnostic_delta_beta;
  std::optional<double> diagnostic_nu_var;
  std::optional<double> wall_time_ms;
};

inline constexpr std::string_view kResultHeader =
    "experiment,dgp,d,n,seed,fold,variable,method,risk_kind,psi,wald,p_value,"
    "diagnostic_delta_beta,diagnostic_nu_var,wall_time_ms";

bool canonical_less(const ResultRow& l, const ResultRow& r);
std::string format_row(const ResultRow& row);
/// Header plus rows in canonical order.
void write_results_csv(std::ostream& out, std::vector<ResultRow> rows);
/// Throws DataError naming the line for malformed input.
std::vector<ResultRow> read_results_csv(std::istream& in);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

/// Result rows of one importance table (Wald columns from per-seed decisions).
std::vector<ResultRow> to_result_rows(const ImportanceTable& table, std::string_view experiment,
                                      std::string_view dgp);

/// Truly important variables by dimension, for the rate columns.
using TruthMap = std::map<Index, std::vector<bool>>;

struct SummaryRow {
  std::string experiment;
  std::string dgp;
  Index d = 0;
  Index n = 0;
  Index variable = 0;
  ImportanceMethod method = ImportanceMethod::permucate;
  RiskKind risk = RiskKind::po_risk;
  std::size_t count = 0;
  double mean_psi = 0.0;
  std::optional<double> std_psi;
  double detection_rate = 0.0;
  std::optional<double> tp_rate;
  std::optional<double> type1_rate;
};

inline constexpr std::string_view kSummaryHeader =
    "experiment,dgp,d,n,variable,method,risk_kind,count,mean_psi,std_psi,detection_rate,tp_rate,"
    "type1_rate";

/// Per variable x method x risk x n. A seed counts as detecting a variable
/// when its p_value < alpha. Throws DataError on empty input.
std::vector<SummaryRow> emit_summary(const std::vector<ResultRow>& rows, double alpha,
                                     const TruthMap& truth = {});
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

struct RunOptions {
  bool resume = false;
  int workers = 1;
  /// Called after each finished cell with (done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

struct RunResult {
  std::filesystem::path results_csv;
  std::filesystem::path summary_csv;
  std::filesystem::path manifest;
  std::size_t cells_computed = 0;
  std::size_t cells_resumed = 0;
  std::vector<ResultRow> rows;
};

/// Runs every (d, n, seed) cell, writing <experiment>.csv,
/// <experiment>_summary.csv, manifest.json and per-cell files under cells/.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Important-variable sets of the configured scenarios.
TruthMap truth_for(const ExperimentConfig& config);

/// Line chart of mean psi against n, one panel per method.
void write_plot_svg(std::ostream& out, const std::vector<ResultRow>& rows);

}  // namespace permucate
