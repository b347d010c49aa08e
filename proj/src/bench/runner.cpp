#include "permucate/bench.hpp"

#include "permucate/errors.hpp"
#include "permucate/parallel.hpp"
#include "permucate/random.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <tuple>

namespace permucate {

namespace fs = std::filesystem;

TruthMap truth_for(const ExperimentConfig& config) {
  TruthMap truth;
  for (Index d : config.dimensions()) {
    const OracleFunctions oracle = make_oracle(config.dgp_spec(d));
    std::vector<bool> important(static_cast<std::size_t>(d), false);
    for (int j : oracle.important_tau) important[static_cast<std::size_t>(j)] = true;
    truth[d] = std::move(important);
  }
  return truth;
}

namespace {

struct Cell {
  Index d = 0;
  Index n = 0;
  int seed = 0;

  auto key() const { return std::tie(d, n, seed); }
  bool operator<(const Cell& o) const { return key() < o.key(); }
  std::string file_name(Experiment e) const {
    return std::string(to_string(e)) + "_d" + std::to_string(d) + "_n" + std::to_string(n) + "_s" +
           std::to_string(seed) + ".csv";
  }
};

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("output_dir: cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw ConfigError("output_dir: failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

nlohmann::json manifest_json(const ExperimentConfig& config, const std::set<Cell>& done,
                             const std::map<Cell, std::size_t>& row_counts, bool finished) {
  nlohmann::json j;
  j["tool"] = "permucate";
  j["version"] = std::string(kVersion);
  j["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  j["experiment"] = std::string(to_string(config.experiment));
  j["config_hash"] = config_hash(config);
  j["master_seed"] = config.master_seed;
  j["config"] = to_text(config);
  j["finished"] = finished;
  nlohmann::json cells = nlohmann::json::array();
  for (const Cell& c : done) {
    cells.push_back({{"d", c.d},
                     {"n", c.n},
                     {"seed", c.seed},
                     {"file", "cells/" + c.file_name(config.experiment)},
                     {"rows", row_counts.at(c)}});
  }
  j["cells"] = std::move(cells);
  if (finished) {
    j["results"] = std::string(to_string(config.experiment)) + ".csv";
    j["summary"] = std::string(to_string(config.experiment)) + "_summary.csv";
  }
  return j;
}

std::set<Cell> resumable_cells(const ExperimentConfig& config, const fs::path& manifest_path) {
  std::set<Cell> done;
  std::ifstream in(manifest_path);
  if (!in) return done;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return done;
  }
  if (!j.contains("config_hash") || j["config_hash"] != config_hash(config) || !j.contains("cells")) return done;
  for (const auto& c : j["cells"]) {
    Cell cell{c.at("d").get<Index>(), c.at("n").get<Index>(), c.at("seed").get<int>()};
    if (fs::exists(manifest_path.parent_path() / "cells" / cell.file_name(config.experiment))) done.insert(cell);
  }
  return done;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const fs::path dir = config.output_dir;
  const fs::path cell_dir = dir / "cells";
  std::error_code ec;
  fs::create_directories(cell_dir, ec);
  if (ec || !fs::is_directory(cell_dir))
    throw ConfigError("output_dir: cannot create '" + cell_dir.string() + "'");

  const std::string experiment(to_string(config.experiment));
  const ImportanceOptions importance = config.importance_options();
  std::vector<Cell> cells;
  for (Index d : config.dimensions())
    for (Index n : config.n_grid)
      for (int s = 0; s < config.plan.n_seeds; ++s) cells.push_back(Cell{d, n, s});

  RunResult result;
  result.manifest = dir / "manifest.json";
  result.results_csv = dir / (experiment + ".csv");
  result.summary_csv = dir / (experiment + "_summary.csv");

  std::set<Cell> done;
  if (options.resume) done = resumable_cells(config, result.manifest);
  std::map<Cell, std::vector<ResultRow>> rows_by_cell;
  std::map<Cell, std::size_t> row_counts;
  for (const Cell& c : done) {
    rows_by_cell[c] = read_results_csv(cell_dir / c.file_name(config.experiment));
    row_counts[c] = rows_by_cell[c].size();
  }
  result.cells_resumed = done.size();

  std::vector<Cell> todo;
  for (const Cell& c : cells)
    if (!done.count(c)) todo.push_back(c);

  std::mutex mutex;
  std::size_t finished = done.size();
  parallel_for(todo.size(), options.workers, [&](std::size_t t) {
    const Cell cell = todo[t];
    const DgpSpec spec = config.dgp_spec(cell.d);
    const std::uint64_t master = derive_seed(
        config.master_seed, {static_cast<std::uint64_t>(config.experiment), static_cast<std::uint64_t>(cell.d)});
    const Dataset data = dataset_for_seed(spec, cell.n, master, cell.seed);
    const ImportanceTable table = make_table(importance_seed(data, config.plan, importance, master, cell.seed),
                                             cell.n, cell.d, config.plan.alpha);
    std::vector<ResultRow> rows = to_result_rows(table, experiment, to_string(spec.kind));

    std::ostringstream text;
    write_results_csv(text, rows);
    write_text(cell_dir / cell.file_name(config.experiment), text.str());

    std::lock_guard lock(mutex);
    row_counts[cell] = rows.size();
    rows_by_cell[cell] = std::move(rows);
    done.insert(cell);
    write_text(result.manifest, manifest_json(config, done, row_counts, false).dump(2) + "\n");
    ++finished;
    if (options.progress) options.progress(finished, cells.size());
  });
  result.cells_computed = todo.size();

  for (const Cell& c : cells) {
    auto& part = rows_by_cell.at(c);
    result.rows.insert(result.rows.end(), part.begin(), part.end());
  }
  std::stable_sort(result.rows.begin(), result.rows.end(), canonical_less);

  std::ostringstream csv;
  write_results_csv(csv, result.rows);
  write_text(result.results_csv, csv.str());
  std::ostringstream summary;
  write_summary_csv(summary, emit_summary(result.rows, config.plan.alpha, truth_for(config)));
  write_text(result.summary_csv, summary.str());
  write_text(result.manifest, manifest_json(config, done, row_counts, true).dump(2) + "\n");
  return result;
}

}  // namespace permucate
