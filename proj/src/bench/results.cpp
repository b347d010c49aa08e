#include "permucate/bench.hpp"

#include "permucate/dataset_io.hpp"
#include "permucate/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace permucate {

namespace {

auto sort_key(const ResultRow& r) {
  return std::tie(r.experiment, r.dgp, r.d, r.n, r.seed, r.fold, r.variable, r.method, r.risk);
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

bool canonical_less(const ResultRow& l, const ResultRow& r) { return sort_key(l) < sort_key(r); }

std::string format_row(const ResultRow& r) {
  std::string s;
  s += r.experiment + ',' + r.dgp + ',' + std::to_string(r.d) + ',' + std::to_string(r.n) + ',' +
       std::to_string(r.seed) + ',' + std::to_string(r.fold) + ",x" + std::to_string(r.variable + 1) + ',';
  s += std::string(to_string(r.method)) + ',' + std::string(to_string(r.risk)) + ',';
  s += format_double(r.psi) + ',' + format_double(r.wald) + ',' + format_double(r.p_value) + ',';
  s += optional_field(r.diagnostic_delta_beta) + ',' + optional_field(r.diagnostic_nu_var) + ',' +
       optional_field(r.wall_time_ms);
  return s;
}

void write_results_csv(std::ostream& out, std::vector<ResultRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), canonical_less);
  out << kResultHeader << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

struct FieldReader {
  std::size_t line;

  [[noreturn]] void fail(std::string_view column, const std::string& what) const {
    throw DataError("line " + std::to_string(line) + ": " + std::string(column) + ": " + what);
  }

  double real(const std::string& text, std::string_view column) const {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || end != text.data() + text.size())
      fail(column, "'" + text + "' is not a number");
    return v;
  }

  std::optional<double> optional_real(const std::string& text, std::string_view column) const {
    if (text.empty()) return std::nullopt;
    return real(text, column);
  }

  long long integer(const std::string& text, std::string_view column) const {
    long long v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || end != text.data() + text.size())
      fail(column, "'" + text + "' is not an integer");
    return v;
  }
};

}  // namespace

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("result file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultHeader) throw DataError("line 1: unexpected result header");
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    const FieldReader rd{line_no};
    if (f.size() != 15) throw DataError("line " + std::to_string(line_no) + ": expected 15 fields");
    ResultRow r;
    r.experiment = f[0];
    r.dgp = f[1];
    r.d = static_cast<Index>(rd.integer(f[2], "d"));
    r.n = static_cast<Index>(rd.integer(f[3], "n"));
    r.seed = static_cast<int>(rd.integer(f[4], "seed"));
    r.fold = static_cast<int>(rd.integer(f[5], "fold"));
    if (f[6].size() < 2 || f[6][0] != 'x') rd.fail("variable", "expected x<index>");
    r.variable = static_cast<Index>(rd.integer(f[6].substr(1), "variable")) - 1;
    try {
      r.method = parse_importance_method(f[7]);
      r.risk = parse_risk_kind(f[8]);
    } catch (const ConfigError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    r.psi = rd.real(f[9], "psi");
    r.wald = rd.real(f[10], "wald");
    r.p_value = rd.real(f[11], "p_value");
    r.diagnostic_delta_beta = rd.optional_real(f[12], "diagnostic_delta_beta");
    r.diagnostic_nu_var = rd.optional_real(f[13], "diagnostic_nu_var");
    r.wall_time_ms = rd.optional_real(f[14], "wall_time_ms");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open result file '" + path.string() + "'");
  return read_results_csv(in);
}

std::vector<ResultRow> to_result_rows(const ImportanceTable& table, std::string_view experiment,
                                      std::string_view dgp) {
  std::map<std::tuple<int, int, Index, int>, const SeedDecision*> decisions;
  for (const auto& dec : table.seed_decisions)
    decisions[{static_cast<int>(dec.method), static_cast<int>(dec.risk), dec.variable, dec.seed}] = &dec;
  std::vector<ResultRow> out;
  out.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    ResultRow row;
    row.experiment = experiment;
    row.dgp = dgp;
    row.d = table.d;
    row.n = r.n;
    row.seed = r.seed;
    row.fold = r.fold;
    row.variable = r.variable;
    row.method = r.method;
    row.risk = r.risk;
    row.psi = r.psi;
    const SeedDecision* dec = decisions.at({static_cast<int>(r.method), static_cast<int>(r.risk), r.variable, r.seed});
    row.wald = dec->wald;
    row.p_value = dec->p_value;
    row.diagnostic_delta_beta = r.delta_beta;
    row.diagnostic_nu_var = r.nu_variance;
    row.wall_time_ms = r.wall_time_ms;
    out.push_back(std::move(row));
  }
  std::stable_sort(out.begin(), out.end(), canonical_less);
  return out;
}

std::vector<SummaryRow> emit_summary(const std::vector<ResultRow>& rows, double alpha, const TruthMap& truth) {
  if (rows.empty()) throw DataError("summary of an empty result set");
  using CellKey = std::tuple<std::string, std::string, Index, Index, int, int>;  // ..., method, risk
  using VarKey = std::tuple<std::string, std::string, Index, Index, int, int, Index>;
  struct VarAcc {
    std::vector<double> psi;
    std::map<int, bool> seed_detects;
  };
  std::map<VarKey, VarAcc> vars;
  for (const auto& r : rows) {
    VarAcc& acc = vars[{r.experiment, r.dgp, r.d, r.n, static_cast<int>(r.method), static_cast<int>(r.risk), r.variable}];
    acc.psi.push_back(r.psi);
    acc.seed_detects[r.seed] = r.p_value < alpha;
  }

  struct CellAcc {
    std::size_t important = 0, important_hits = 0, null = 0, null_hits = 0;
  };
  std::map<CellKey, CellAcc> cells;
  for (const auto& [key, acc] : vars) {
    const auto& [exp, dgp, d, n, method, risk, j] = key;
    const auto it = truth.find(d);
    if (it == truth.end()) continue;
    if (j < 0 || j >= static_cast<Index>(it->second.size()))
      throw DimensionError("summary: variable outside the important-variable set");
    CellAcc& c = cells[{exp, dgp, d, n, method, risk}];
    for (const auto& [seed, hit] : acc.seed_detects) {
      if (it->second[static_cast<std::size_t>(j)]) {
        ++c.important;
        c.important_hits += hit;
      } else {
        ++c.null;
        c.null_hits += hit;
      }
    }
  }

  std::vector<SummaryRow> out;
  for (const auto& [key, acc] : vars) {
    const auto& [exp, dgp, d, n, method, risk, j] = key;
    SummaryRow s;
    s.experiment = exp;
    s.dgp = dgp;
    s.d = d;
    s.n = n;
    s.variable = j;
    s.method = static_cast<ImportanceMethod>(method);
    s.risk = static_cast<RiskKind>(risk);
    s.count = acc.psi.size();
    s.mean_psi = mean(acc.psi);
    if (acc.psi.size() >= 2) s.std_psi = std::sqrt(sample_variance(acc.psi));
    std::size_t hits = 0;
    for (const auto& [seed, hit] : acc.seed_detects) hits += hit;
    s.detection_rate = static_cast<double>(hits) / static_cast<double>(acc.seed_detects.size());
    if (const auto c = cells.find({exp, dgp, d, n, method, risk}); c != cells.end()) {
      if (c->second.important > 0)
        s.tp_rate = static_cast<double>(c->second.important_hits) / static_cast<double>(c->second.important);
      if (c->second.null > 0)
        s.type1_rate = static_cast<double>(c->second.null_hits) / static_cast<double>(c->second.null);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) {
    out << s.experiment << ',' << s.dgp << ',' << s.d << ',' << s.n << ",x" << (s.variable + 1) << ','
        << to_string(s.method) << ',' << to_string(s.risk) << ',' << s.count << ','
        << format_double(s.mean_psi) << ',' << optional_field(s.std_psi) << ','
        << format_double(s.detection_rate) << ',' << optional_field(s.tp_rate) << ','
        << optional_field(s.type1_rate) << '\n';
  }
}

void write_plot_svg(std::ostream& out, const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw DataError("nothing to plot");
  const RiskKind risk = rows.front().risk;
  std::map<int, std::map<Index, std::map<Index, std::pair<double, int>>>> series;  // method, variable, n
  std::set<Index> ns;
  double lo = 0.0, hi = 0.0;
  for (const auto& r : rows) {
    if (r.risk != risk) continue;
    auto& cell = series[static_cast<int>(r.method)][r.variable][r.n];
    cell.first += r.psi;
    cell.second += 1;
    ns.insert(r.n);
  }
  for (auto& [m, vars] : series)
    for (auto& [j, pts] : vars)
      for (auto& [n, acc] : pts) {
        acc.first /= acc.second;
        lo = std::min(lo, acc.first);
        hi = std::max(hi, acc.first);
      }
  if (hi == lo) hi = lo + 1.0;

  constexpr double W = 420, H = 300, L = 50, R = 20, T = 30, B = 40;
  const double x_lo = std::log(static_cast<double>(*ns.begin()));
  const double x_hi = std::max(std::log(static_cast<double>(*ns.rbegin())), x_lo + 1e-9);
  const auto px = [&](Index n, double offset) {
    const double t = ns.size() == 1 ? 0.5 : (std::log(static_cast<double>(n)) - x_lo) / (x_hi - x_lo);
    return offset + L + t * (W - L - R);
  };
  const auto py = [&](double v) { return T + (hi - v) / (hi - lo) * (H - T - B); };
  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W * static_cast<double>(series.size())
      << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  double offset = 0.0;
  for (const auto& [m, vars] : series) {
    out << "<text x=\"" << offset + L << "\" y=\"18\">" << to_string(static_cast<ImportanceMethod>(m)) << " ("
        << to_string(risk) << ")</text>\n";
    out << "<line x1=\"" << offset + L << "\" y1=\"" << H - B << "\" x2=\"" << offset + W - R << "\" y2=\""
        << H - B << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << offset + L << "\" y1=\"" << T << "\" x2=\"" << offset + L << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << offset + L << "\" y1=\"" << py(0.0) << "\" x2=\"" << offset + W - R << "\" y2=\""
        << py(0.0) << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";
    for (Index n : ns)
      out << "<text x=\"" << px(n, offset) << "\" y=\"" << H - B + 15 << "\" text-anchor=\"middle\">" << n
          << "</text>\n";
    out << "<text x=\"" << offset + L - 5 << "\" y=\"" << py(hi) + 4 << "\" text-anchor=\"end\">"
        << format_double(std::round(hi * 1000) / 1000) << "</text>\n";
    out << "<text x=\"" << offset + L - 5 << "\" y=\"" << py(lo) + 4 << "\" text-anchor=\"end\">"
        << format_double(std::round(lo * 1000) / 1000) << "</text>\n";
    for (const auto& [j, pts] : vars) {
      const char* colour = palette[static_cast<std::size_t>(j) % std::size(palette)];
      out << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
      for (const auto& [n, acc] : pts) out << px(n, offset) << ',' << py(acc.first) << ' ';
      out << "\"><title>x" << (j + 1) << "</title></polyline>\n";
    }
    offset += W;
  }
  out << "</svg>\n";
}

}  // namespace permucate
