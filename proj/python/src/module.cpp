#include "permucate/bench.hpp"
#include "permucate/dataset_io.hpp"
#include "permucate/errors.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
namespace pc = permucate;

namespace {

pc::Dataset make_dataset(const pc::Matrix& x, const pc::Vector& a, const pc::Vector& y) {
  pc::Dataset data;
  data.x = x;
  data.a = a;
  data.y = y;
  data.validate();
  return data;
}

pc::DgpSpec make_spec(const std::string& dgp, int d, int d_imp, std::optional<double> rho, double effect_size,
                      std::optional<double> noise_sd, double treat_quantile, std::uint64_t seed_coeffs) {
  const pc::DgpKind kind = pc::parse_dgp_kind(dgp);
  pc::DgpSpec spec;
  if (kind == pc::DgpKind::LD) {
    spec = pc::DgpSpec::ld(rho.value_or(0.5), noise_sd.value_or(3.0));
  } else if (kind == pc::DgpKind::HL) {
    spec = pc::DgpSpec::hl(d, d_imp, rho.value_or(0.5), effect_size, seed_coeffs);
  } else {
    spec = pc::DgpSpec::hp(d, d_imp, rho.value_or(0.5), effect_size, treat_quantile, seed_coeffs);
  }
  if (kind != pc::DgpKind::LD && noise_sd) spec.noise_sd = *noise_sd;
  spec.validate();
  return spec;
}

py::dict simulate(const std::string& dgp, pc::Index n, std::uint64_t seed, int d, int d_imp,
                  std::optional<double> rho, double effect_size, std::optional<double> noise_sd,
                  double treat_quantile, std::uint64_t seed_coeffs) {
  if (n < 1) throw pc::ConfigError("n must be positive");
  const pc::DgpSpec spec = make_spec(dgp, d, d_imp, rho, effect_size, noise_sd, treat_quantile, seed_coeffs);
  const pc::Dataset data = pc::sample(spec, n, seed);
  py::dict out;
  out["x"] = data.x;
  out["a"] = data.a;
  out["y"] = data.y;
  out["tau"] = *data.tau_true;
  out["pi"] = data.oracle->pi(data.x);
  out["important"] = data.oracle->important_tau;
  return out;
}

py::dict fit(const pc::Matrix& x, const pc::Vector& a, const pc::Vector& y, int folds, const std::string& preset,
             std::uint64_t seed) {
  const pc::Dataset data = make_dataset(x, a, y);
  const pc::DrLearnerFit f = pc::fit_dr_learner(data, folds, pc::preset_specs(pc::parse_preset(preset)), seed);
  const pc::Vector tau_hat = f.model.predict(data.x);
  py::dict out;
  out["tau_hat"] = tau_hat;
  out["ate"] = tau_hat.mean();
  out["phi"] = f.phi;
  out["mu0_hat"] = f.nuisances.mu0_hat;
  out["mu1_hat"] = f.nuisances.mu1_hat;
  out["pi_hat"] = f.nuisances.pi_hat;
  out["po_risk"] = pc::po_risk(tau_hat, f.phi);
  out["r_risk"] = pc::r_risk(tau_hat, data.y, data.a, f.nuisances);
  return out;
}

py::dict importance(const pc::Matrix& x, const pc::Vector& a, const pc::Vector& y, const std::string& method,
                    const std::string& risk, int seeds, int outer_folds, int inner_folds, int permutations,
                    double alpha, const std::string& preset, std::uint64_t seed, int workers) {
  const pc::Dataset data = make_dataset(x, a, y);
  pc::CrossfitPlan plan;
  plan.n_seeds = seeds;
  plan.outer_folds = outer_folds;
  plan.outer_frac_heldout = outer_folds > 0 ? 1.0 / outer_folds : 0.0;
  plan.inner_folds = inner_folds;
  plan.n_permutations = permutations;
  plan.alpha = alpha;
  pc::ImportanceOptions options;
  if (method != "both") options.methods = {pc::parse_importance_method(method)};
  options.risks = {pc::parse_risk_kind(risk)};
  options.specs = pc::preset_specs(pc::parse_preset(preset));
  options.workers = workers;
  pc::ImportanceTable table;
  {
    py::gil_scoped_release release;
    table = pc::run_crossfit_importance(data, plan, options, seed);
  }
  py::list method_col, variable, mean_psi, std_psi, wald, p_value, decision;
  for (const auto& agg : table.aggregates) {
    method_col.append(std::string(pc::to_string(agg.method)));
    variable.append(agg.variable);
    mean_psi.append(agg.mean_psi);
    std_psi.append(agg.std_psi);
    wald.append(agg.wald);
    p_value.append(agg.p_value);
    decision.append(agg.decision);
  }
  py::dict out;
  out["method"] = method_col;
  out["variable"] = variable;
  out["mean_psi"] = mean_psi;
  out["std_psi"] = std_psi;
  out["wald"] = wald;
  out["p_value"] = p_value;
  out["decision"] = decision;
  return out;
}

py::tuple wald(const std::vector<double>& psis) {
  const pc::WaldResult w = pc::wald_statistic(psis);
  return py::make_tuple(w.z, w.p_value);
}

py::dict run_bench(const std::string& config_text, std::optional<std::string> output_dir,
                   std::optional<std::uint64_t> seed, bool resume, int workers) {
  pc::ExperimentConfig config = pc::parse_config(config_text);
  if (output_dir) config.output_dir = *output_dir;
  if (seed) config.master_seed = *seed;
  pc::RunOptions options;
  options.resume = resume;
  options.workers = workers;
  pc::RunResult result;
  {
    py::gil_scoped_release release;
    result = pc::run_experiment(config, options);
  }
  py::dict out;
  out["results_csv"] = result.results_csv.string();
  out["summary_csv"] = result.summary_csv.string();
  out["manifest"] = result.manifest.string();
  out["cells_computed"] = result.cells_computed;
  out["cells_resumed"] = result.cells_resumed;
  out["rows"] = result.rows.size();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Variable importance for conditional average treatment effects";
  m.attr("__version__") = std::string(pc::kVersion);

  static py::exception<pc::Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<pc::ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<pc::DataError> data_error(m, "DataError", base.ptr());
  static py::exception<pc::NumericError> numeric_error(m, "NumericError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pc::ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const pc::DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const pc::NumericError& e) {
      py::set_error(numeric_error, e.what());
    } catch (const pc::Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("simulate", &simulate, py::arg("dgp") = "LD", py::arg("n") = 1000, py::arg("seed") = 0,
        py::arg("d") = 50, py::arg("d_imp") = 10, py::arg("rho") = py::none(), py::arg("effect_size") = 0.5,
        py::arg("noise_sd") = py::none(), py::arg("treat_quantile") = 0.1, py::arg("seed_coeffs") = 0,
        "Draw a dataset; returns x, a, y, tau, pi and the important CATE variables.");
  m.def("fit", &fit, py::arg("x"), py::arg("a"), py::arg("y"), py::arg("folds") = 5,
        py::arg("preset") = "linear", py::arg("seed") = 0, "Cross-fitted DR-learner.");
  m.def("importance", &importance, py::arg("x"), py::arg("a"), py::arg("y"), py::arg("method") = "both",
        py::arg("risk") = "po_risk", py::arg("seeds") = 10, py::arg("outer_folds") = 5,
        py::arg("inner_folds") = 5, py::arg("permutations") = 50, py::arg("alpha") = 0.05,
        py::arg("preset") = "linear", py::arg("seed") = 0, py::arg("workers") = 1,
        "PermuCATE and LOCO importance pooled over folds and seeds.");
  m.def("wald", &wald, py::arg("psis"), "One-sided Wald test: (z, p_value).");
  m.def("run_bench", &run_bench, py::arg("config_text") = "", py::arg("output_dir") = py::none(),
        py::arg("seed") = py::none(), py::arg("resume") = false, py::arg("workers") = 1,
        "Run an experiment config given as text.");
}
