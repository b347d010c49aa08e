// permucate: simulate data, fit DR-learners, score variable importance and
// run the benchmark experiments.

#include "permucate/bench.hpp"
#include "permucate/dataset_io.hpp"
#include "permucate/errors.hpp"
#include "permucate/parallel.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace pc = permucate;

namespace {

struct SimulateArgs {
  std::string dgp = "LD";
  long long n = 1000;
  int d = 50;
  int d_imp = 10;
  std::optional<double> rho;
  double effect_size = 0.5;
  std::optional<double> noise_sd;
  double treat_quantile = 0.1;
  std::uint64_t seed_coeffs = 0;
  std::uint64_t seed = 0;
  std::string out = "-";
  bool no_oracle = false;
};

struct FitArgs {
  std::string data;
  int folds = 5;
  std::string preset = "linear";
  std::uint64_t seed = 0;
};

struct ImportanceArgs {
  std::string data;
  std::string method = "both";
  std::string risk = "po_risk";
  int seeds = 10;
  int outer_folds = 5;
  int inner_folds = 5;
  int permutations = 50;
  double alpha = 0.05;
  std::string preset = "linear";
  std::uint64_t seed = 0;
  std::string out = "-";
};

struct BenchArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  bool resume = false;
  bool quiet = false;
};

struct PlotArgs {
  std::string input;
  std::string out;
};

template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pc::DataError("cannot open '" + path + "' for writing");
  fn(out);
}

int run_simulate(const SimulateArgs& a) {
  const pc::DgpKind kind = pc::parse_dgp_kind(a.dgp);
  pc::DgpSpec spec;
  if (kind == pc::DgpKind::LD) {
    spec = pc::DgpSpec::ld(a.rho.value_or(0.5), a.noise_sd.value_or(3.0));
  } else if (kind == pc::DgpKind::HL) {
    spec = pc::DgpSpec::hl(a.d, a.d_imp, a.rho.value_or(0.5), a.effect_size, a.seed_coeffs);
  } else {
    spec = pc::DgpSpec::hp(a.d, a.d_imp, a.rho.value_or(0.5), a.effect_size, a.treat_quantile, a.seed_coeffs);
  }
  if (kind != pc::DgpKind::LD && a.noise_sd) spec.noise_sd = *a.noise_sd;
  spec.validate();
  if (a.n < 1) throw pc::ConfigError("--n must be positive");
  const pc::Dataset data = pc::sample(spec, static_cast<pc::Index>(a.n), a.seed);
  with_output(a.out, [&](std::ostream& out) { pc::write_dataset_csv(out, data, !a.no_oracle); });
  return 0;
}

int run_fit(const FitArgs& a) {
  const pc::Dataset data = pc::read_dataset_csv(a.data);
  const pc::NuisanceSpecs specs = pc::preset_specs(pc::parse_preset(a.preset));
  const pc::DrLearnerFit fit = pc::fit_dr_learner(data, a.folds, specs, a.seed);
  const pc::Vector tau_hat = fit.model.predict(data.x);
  std::cout << "key,value\n";
  std::cout << "n," << data.rows() << "\nd," << data.cols() << '\n';
  std::cout << "ate," << pc::format_double(tau_hat.mean()) << '\n';
  std::cout << "po_risk," << pc::format_double(pc::po_risk(tau_hat, fit.phi)) << '\n';
  std::cout << "r_risk," << pc::format_double(pc::r_risk(tau_hat, data.y, data.a, fit.nuisances)) << '\n';
  if (data.oracle || data.tau_true) std::cout << "pehe," << pc::format_double(pc::pehe(tau_hat, data)) << '\n';
  if (const auto lambda = fit.model.final_regressor().selected_penalty())
    std::cout << "final_penalty," << pc::format_double(*lambda) << '\n';
  return 0;
}

int run_importance(const ImportanceArgs& a) {
  const pc::Dataset data = pc::read_dataset_csv(a.data);
  pc::CrossfitPlan plan;
  plan.n_seeds = a.seeds;
  plan.outer_folds = a.outer_folds;
  plan.outer_frac_heldout = 1.0 / a.outer_folds;
  plan.inner_folds = a.inner_folds;
  plan.n_permutations = a.permutations;
  plan.alpha = a.alpha;
  pc::ImportanceOptions options;
  if (a.method != "both") options.methods = {pc::parse_importance_method(a.method)};
  options.risks = {pc::parse_risk_kind(a.risk)};
  options.specs = pc::preset_specs(pc::parse_preset(a.preset));
  options.workers = pc::workers_from_env();
  const pc::ImportanceTable table = pc::run_crossfit_importance(data, plan, options, a.seed);
  with_output(a.out, [&](std::ostream& out) {
    pc::write_results_csv(out, pc::to_result_rows(table, "importance", "file"));
  });
  return 0;
}

int run_bench(const BenchArgs& a) {
  pc::ExperimentConfig config = a.config.empty() ? pc::parse_config("") : pc::load_config(a.config);
  if (a.seed) config.master_seed = *a.seed;
  if (!a.output_dir.empty()) config.output_dir = a.output_dir;
  pc::RunOptions options;
  options.resume = a.resume;
  options.workers = pc::workers_from_env();
  if (!a.quiet) {
    options.progress = [](std::size_t done, std::size_t total) {
      std::cerr << "\rcells " << done << "/" << total << std::flush;
      if (done == total) std::cerr << '\n';
    };
  }
  const pc::RunResult result = pc::run_experiment(config, options);
  if (!a.quiet) {
    std::cerr << "computed " << result.cells_computed << " cells, resumed " << result.cells_resumed << '\n';
    std::cout << result.results_csv.string() << '\n' << result.summary_csv.string() << '\n';
  }
  return 0;
}

int run_plot(const PlotArgs& a) {
  const auto rows = pc::read_results_csv(a.input);
  std::string out = a.out;
  if (out.empty()) out = std::filesystem::path(a.input).replace_extension(".svg").string();
  with_output(out, [&](std::ostream& os) { pc::write_plot_svg(os, rows); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable importance for conditional average treatment effects"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pc::kVersion));

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Write a simulated dataset as CSV");
  simulate->add_option("--dgp", sim.dgp, "Scenario: LD, HL or HP")->capture_default_str();
  simulate->add_option("-n,--n", sim.n, "Number of rows")->capture_default_str();
  simulate->add_option("-d,--d", sim.d, "Covariates (HL/HP)")->capture_default_str();
  simulate->add_option("--d-imp", sim.d_imp, "Important covariates per link (HL/HP)")->capture_default_str();
  simulate->add_option("--rho", sim.rho, "Covariate correlation");
  simulate->add_option("--effect-size", sim.effect_size, "Effect scale (HL/HP)")->capture_default_str();
  simulate->add_option("--noise-sd", sim.noise_sd, "Outcome noise standard deviation");
  simulate->add_option("--treat-quantile", sim.treat_quantile, "Propensity shift quantile (HP)")->capture_default_str();
  simulate->add_option("--seed-coeffs", sim.seed_coeffs, "Coefficient seed (HL/HP)")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Sampling seed")->capture_default_str();
  simulate->add_option("-o,--out", sim.out, "Output file, - for stdout")->capture_default_str();
  simulate->add_flag("--no-oracle", sim.no_oracle, "Omit the tau_oracle column");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a cross-fitted DR-learner and report its risks");
  fit_cmd->add_option("data", fit.data, "Dataset CSV")->required();
  fit_cmd->add_option("--folds", fit.folds, "Cross-fitting folds")->capture_default_str();
  fit_cmd->add_option("--preset", fit.preset, "Learners: linear or superlearner")->capture_default_str();
  fit_cmd->add_option("--seed", fit.seed, "Seed")->capture_default_str();

  ImportanceArgs imp;
  auto* imp_cmd = app.add_subcommand("importance", "PermuCATE and LOCO importance on a dataset");
  imp_cmd->add_option("data", imp.data, "Dataset CSV")->required();
  imp_cmd->add_option("--method", imp.method, "permucate, loco or both")->capture_default_str();
  imp_cmd->add_option("--risk", imp.risk, "po_risk, r_risk or oracle_pehe")->capture_default_str();
  imp_cmd->add_option("--seeds", imp.seeds, "Repetitions of the outer split")->capture_default_str();
  imp_cmd->add_option("--outer-folds", imp.outer_folds, "Outer folds")->capture_default_str();
  imp_cmd->add_option("--inner-folds", imp.inner_folds, "Cross-fitting folds")->capture_default_str();
  imp_cmd->add_option("--permutations", imp.permutations, "Permutations per covariate")->capture_default_str();
  imp_cmd->add_option("--alpha", imp.alpha, "Test level")->capture_default_str();
  imp_cmd->add_option("--preset", imp.preset, "Learners: linear or superlearner")->capture_default_str();
  imp_cmd->add_option("--seed", imp.seed, "Master seed")->capture_default_str();
  imp_cmd->add_option("-o,--out", imp.out, "Output file, - for stdout")->capture_default_str();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run an experiment config");
  bench_cmd->add_option("config", bench.config, "Config file (defaults when omitted)");
  bench_cmd->add_option("--seed", bench.seed, "Override master_seed");
  bench_cmd->add_option("--output-dir", bench.output_dir, "Override output_dir");
  bench_cmd->add_flag("--resume", bench.resume, "Reuse finished cells recorded in the manifest");
  bench_cmd->add_flag("-q,--quiet", bench.quiet, "No progress output");

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render a result CSV as an SVG chart");
  plot_cmd->add_option("input", plot.input, "Result CSV")->required();
  plot_cmd->add_option("-o,--out", plot.out, "SVG file (default: input with .svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(pc::ExitCode::config);
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*fit_cmd) return run_fit(fit);
    if (*imp_cmd) return run_importance(imp);
    if (*bench_cmd) return run_bench(bench);
    if (*plot_cmd) return run_plot(plot);
  } catch (const pc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(pc::ExitCode::numeric);
  }
  return 0;
}
