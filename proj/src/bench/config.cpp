#include "permucate/bench.hpp"

#include "permucate/dataset_io.hpp"
#include "permucate/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace permucate {

std::string_view to_string(Experiment e) noexcept {
  switch (e) {
    case Experiment::fig1_ld_power: return "fig1_ld_power";
    case Experiment::fig2_variance: return "fig2_variance";
    case Experiment::fig3_tp_accuracy: return "fig3_tp_accuracy";
    case Experiment::s1_risk_compare: return "s1_risk_compare";
    case Experiment::s4_delta_beta_dims: return "s4_delta_beta_dims";
  }
  return "unknown";
}

std::string_view to_string(LearnerPreset p) noexcept {
  switch (p) {
    case LearnerPreset::linear: return "linear";
    case LearnerPreset::superlearner: return "superlearner";
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view name) {
  for (Experiment e : {Experiment::fig1_ld_power, Experiment::fig2_variance, Experiment::fig3_tp_accuracy,
                       Experiment::s1_risk_compare, Experiment::s4_delta_beta_dims})
    if (name == to_string(e)) return e;
  throw ConfigError("unknown experiment '" + std::string(name) +
                    "' (expected fig1_ld_power, fig2_variance, fig3_tp_accuracy, s1_risk_compare or "
                    "s4_delta_beta_dims)");
}

LearnerPreset parse_preset(std::string_view name) {
  if (name == "linear") return LearnerPreset::linear;
  if (name == "superlearner") return LearnerPreset::superlearner;
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected linear or superlearner)");
}

NuisanceSpecs preset_specs(LearnerPreset preset) {
  NuisanceSpecs specs;
  if (preset == LearnerPreset::superlearner) {
    specs.outcome = LearnerSpec::stacked({LearnerSpec::gbt_regressor(), LearnerSpec::ridge()});
    specs.propensity = LearnerSpec::stacked({LearnerSpec::gbt_classifier(), LearnerSpec::logistic()});
    specs.final_stage = LearnerSpec::stacked({LearnerSpec::gbt_regressor(), LearnerSpec::ridge()});
  }
  return specs;
}

namespace {

DgpKind default_dgp(Experiment e) {
  switch (e) {
    case Experiment::fig3_tp_accuracy:
    case Experiment::s4_delta_beta_dims: return DgpKind::HL;
    default: return DgpKind::LD;
  }
}

}  // namespace

DgpSpec ExperimentConfig::dgp_spec(Index d) const {
  const DgpKind kind = dgp.value_or(default_dgp(experiment));
  DgpSpec spec;
  switch (kind) {
    case DgpKind::LD:
      // The variance study runs on the uncorrelated variant.
      spec = DgpSpec::ld(rho.value_or(experiment == Experiment::fig2_variance ? 0.0 : 0.5),
                         noise_sd.value_or(3.0));
      break;
    case DgpKind::HL:
      spec = DgpSpec::hl(static_cast<int>(d), d_imp.value_or(10), rho.value_or(0.5),
                         effect_size.value_or(0.5), seed_coeffs.value_or(0));
      if (noise_sd) spec.noise_sd = *noise_sd;
      break;
    case DgpKind::HP:
      spec = DgpSpec::hp(static_cast<int>(d), d_imp.value_or(10), rho.value_or(0.5),
                         effect_size.value_or(0.5), treat_quantile.value_or(0.1), seed_coeffs.value_or(0));
      if (noise_sd) spec.noise_sd = *noise_sd;
      break;
  }
  return spec;
}

std::vector<Index> ExperimentConfig::dimensions() const {
  if (dgp.value_or(default_dgp(experiment)) == DgpKind::LD) return {6};
  if (!d_grid.empty()) return d_grid;
  if (experiment == Experiment::s4_delta_beta_dims) return {20, 40, 80};
  return {50};
}

std::vector<RiskKind> ExperimentConfig::risks() const {
  if (experiment == Experiment::s1_risk_compare) return {RiskKind::po_risk, RiskKind::r_risk};
  return {risk};
}

ImportanceOptions ExperimentConfig::importance_options() const {
  ImportanceOptions options;
  options.methods = methods;
  options.risks = risks();
  options.specs = preset_specs(preset);
  options.diagnostics = preset == LearnerPreset::linear &&
                        (experiment == Experiment::fig2_variance ||
                         experiment == Experiment::s4_delta_beta_dims);
  options.record_timing = record_timing;
  return options;
}

void ExperimentConfig::validate() const {
  try {
    plan.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.substr(0, msg.find(' ')) + ": " + msg);
  }
  if (n_grid.empty()) throw ConfigError("n_grid: must not be empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw ConfigError("n_grid: sample sizes must be at least 2");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid: must be sorted strictly ascending");
  }
  for (Index d : d_grid)
    if (d < 2) throw ConfigError("d_grid: dimensions must be at least 2");
  const DgpKind kind = dgp.value_or(default_dgp(experiment));
  if (kind == DgpKind::LD && !d_grid.empty() && d_grid != std::vector<Index>{6})
    throw ConfigError("d_grid: the LD scenario has exactly 6 covariates");
  if (methods.empty()) throw ConfigError("methods: must not be empty");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  for (Index d : dimensions()) {
    try {
      dgp_spec(d).validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("dgp: ") + e.what());
    }
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::size_t start = 0;
  for (;;) {
    const auto comma = value.find(',', start);
    items.push_back(trim(std::string_view(value).substr(start, comma == std::string::npos ? std::string::npos
                                                                                          : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return items;
}

struct LineError {
  std::size_t line;
  std::string key;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line) + ": " + key + ": " + what);
  }
};

template <class T>
T parse_integer(const std::string& text, const LineError& at) {
  T v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size())
    at.fail("expected an integer, got '" + text + "'");
  return v;
}

double parse_real(const std::string& text, const LineError& at) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
    at.fail("expected a number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const LineError& at) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  at.fail("expected true or false, got '" + text + "'");
}

template <class Fn>
auto rethrow_at(const LineError& at, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    at.fail(e.what());
  }
}

std::vector<Index> parse_sizes(const std::string& value, const LineError& at) {
  std::vector<Index> out;
  for (const auto& item : split_list(value)) {
    const auto v = parse_integer<long long>(item, at);
    if (v < 2) at.fail("values must be at least 2");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const LineError at{line_no, key};
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing key");
    if (value.empty()) at.fail("missing value");
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
      at.fail("duplicate key (first set on line " + std::to_string(it->second) + ")");

    if (key == "experiment") {
      c.experiment = rethrow_at(at, [&] { return parse_experiment(value); });
    } else if (key == "dgp") {
      c.dgp = rethrow_at(at, [&] { return parse_dgp_kind(value); });
    } else if (key == "rho") {
      c.rho = parse_real(value, at);
      if (!(*c.rho > -1.0 && *c.rho < 1.0)) at.fail("must lie in (-1, 1)");
    } else if (key == "effect_size") {
      c.effect_size = parse_real(value, at);
      if (*c.effect_size < 0.0) at.fail("must be non-negative");
    } else if (key == "noise_sd") {
      c.noise_sd = parse_real(value, at);
      if (*c.noise_sd < 0.0) at.fail("must be non-negative");
    } else if (key == "treat_quantile") {
      c.treat_quantile = parse_real(value, at);
      if (!(*c.treat_quantile >= 0.0 && *c.treat_quantile < 1.0)) at.fail("must lie in [0, 1)");
    } else if (key == "d_imp") {
      c.d_imp = parse_integer<int>(value, at);
      if (*c.d_imp < 1) at.fail("must be at least 1");
    } else if (key == "seed_coeffs") {
      c.seed_coeffs = parse_integer<std::uint64_t>(value, at);
    } else if (key == "n_grid") {
      c.n_grid = parse_sizes(value, at);
      for (std::size_t i = 1; i < c.n_grid.size(); ++i)
        if (c.n_grid[i] <= c.n_grid[i - 1]) at.fail("must be sorted strictly ascending");
    } else if (key == "d_grid") {
      c.d_grid = parse_sizes(value, at);
    } else if (key == "outer_frac_heldout") {
      c.plan.outer_frac_heldout = parse_real(value, at);
      if (!(c.plan.outer_frac_heldout > 0.0 && c.plan.outer_frac_heldout < 1.0)) at.fail("must lie in (0, 1)");
    } else if (key == "outer_folds") {
      c.plan.outer_folds = parse_integer<int>(value, at);
      if (c.plan.outer_folds < 2) at.fail("must be at least 2");
    } else if (key == "inner_folds") {
      c.plan.inner_folds = parse_integer<int>(value, at);
      if (c.plan.inner_folds < 2) at.fail("must be at least 2");
    } else if (key == "n_seeds") {
      c.plan.n_seeds = parse_integer<int>(value, at);
      if (c.plan.n_seeds < 1) at.fail("must be at least 1");
    } else if (key == "alpha") {
      c.plan.alpha = parse_real(value, at);
      if (!(c.plan.alpha > 0.0 && c.plan.alpha < 1.0)) at.fail("must lie in (0, 1)");
    } else if (key == "n_permutations") {
      c.plan.n_permutations = parse_integer<int>(value, at);
      if (c.plan.n_permutations < 1) at.fail("must be at least 1");
    } else if (key == "methods") {
      c.methods.clear();
      for (const auto& item : split_list(value)) {
        const auto m = rethrow_at(at, [&] { return parse_importance_method(item); });
        if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end()) at.fail("duplicate method");
        c.methods.push_back(m);
      }
    } else if (key == "risk") {
      c.risk = rethrow_at(at, [&] { return parse_risk_kind(value); });
    } else if (key == "preset") {
      c.preset = rethrow_at(at, [&] { return parse_preset(value); });
    } else if (key == "output_dir") {
      c.output_dir = value;
    } else if (key == "master_seed") {
      c.master_seed = parse_integer<std::uint64_t>(value, at);
    } else if (key == "record_timing") {
      c.record_timing = parse_bool(value, at);
    } else {
      at.fail("unknown key");
    }
  }
  if (!seen.count("outer_frac_heldout") && c.plan.outer_folds > 0)
    c.plan.outer_frac_heldout = 1.0 / c.plan.outer_folds;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const std::string field = msg.substr(0, msg.find(':'));
    const auto it = seen.find(field);
    if (it != seen.end()) throw ConfigError("line " + std::to_string(it->second) + ": " + msg);
    throw;
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  const auto list = [](const std::vector<Index>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  out << "experiment = " << to_string(c.experiment) << '\n';
  if (c.dgp) out << "dgp = " << to_string(*c.dgp) << '\n';
  if (c.rho) out << "rho = " << format_double(*c.rho) << '\n';
  if (c.effect_size) out << "effect_size = " << format_double(*c.effect_size) << '\n';
  if (c.noise_sd) out << "noise_sd = " << format_double(*c.noise_sd) << '\n';
  if (c.treat_quantile) out << "treat_quantile = " << format_double(*c.treat_quantile) << '\n';
  if (c.d_imp) out << "d_imp = " << *c.d_imp << '\n';
  if (c.seed_coeffs) out << "seed_coeffs = " << *c.seed_coeffs << '\n';
  out << "n_grid = " << list(c.n_grid) << '\n';
  if (!c.d_grid.empty()) out << "d_grid = " << list(c.d_grid) << '\n';
  out << "outer_frac_heldout = " << format_double(c.plan.outer_frac_heldout) << '\n';
  out << "outer_folds = " << c.plan.outer_folds << '\n';
  out << "inner_folds = " << c.plan.inner_folds << '\n';
  out << "n_seeds = " << c.plan.n_seeds << '\n';
  out << "alpha = " << format_double(c.plan.alpha) << '\n';
  out << "n_permutations = " << c.plan.n_permutations << '\n';
  out << "methods = ";
  for (std::size_t i = 0; i < c.methods.size(); ++i) out << (i ? "," : "") << to_string(c.methods[i]);
  out << '\n';
  out << "risk = " << to_string(c.risk) << '\n';
  out << "preset = " << to_string(c.preset) << '\n';
  out << "output_dir = " << c.output_dir.string() << '\n';
  out << "master_seed = " << c.master_seed << '\n';
  out << "record_timing = " << (c.record_timing ? "true" : "false") << '\n';
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace permucate
