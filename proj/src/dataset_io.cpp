#include "permucate/dataset_io.hpp"

#include "permucate/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace permucate {

std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_dataset_csv(std::ostream& out, const Dataset& data, bool with_tau) {
  data.validate();
  Vector tau;
  const bool tau_column = with_tau && (data.oracle || data.tau_true);
  if (tau_column) tau = data.tau_true ? *data.tau_true : data.oracle->tau(data.x);
  for (Index j = 0; j < data.cols(); ++j) out << 'x' << (j + 1) << ',';
  out << "a,y" << (tau_column ? ",tau_oracle" : "") << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) out << format_double(data.x(i, j)) << ',';
    out << format_double(data.a(i)) << ',' << format_double(data.y(i));
    if (tau_column) out << ',' << format_double(tau(i));
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, bool with_tau) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_dataset_csv(out, data, with_tau);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.pop_back();
    std::size_t lead = 0;
    while (lead < field.size() && (field[lead] == ' ' || field[lead] == '\t')) ++lead;
    fields.push_back(field.substr(lead));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size())
    throw DataError("line " + std::to_string(line) + ": column " + column + ": '" + text +
                    "' is not a number");
  return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("dataset is empty");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);

  Index d = 0;
  while (d < static_cast<Index>(header.size()) &&
         header[static_cast<std::size_t>(d)] == "x" + std::to_string(d + 1))
    ++d;
  const std::size_t rest = header.size() - static_cast<std::size_t>(d);
  const bool has_tau = rest == 3 && header.back() == "tau_oracle";
  if (d == 0 || !(rest == 2 || has_tau) || header[static_cast<std::size_t>(d)] != "a" ||
      header[static_cast<std::size_t>(d) + 1] != "y")
    throw DataError("line 1: header must be x1..xd,a,y with an optional tau_oracle column");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = parse_number(fields[c], line_no, header[c]);
    const double a = row[static_cast<std::size_t>(d)];
    if (a != 0.0 && a != 1.0)
      throw DataError("line " + std::to_string(line_no) + ": treatment must be 0 or 1");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("dataset has a header but no rows");

  const auto n = static_cast<Index>(rows.size());
  Dataset data;
  data.x.resize(n, d);
  data.a.resize(n);
  data.y.resize(n);
  Vector tau(has_tau ? n : 0);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d; ++j) data.x(i, j) = r[static_cast<std::size_t>(j)];
    data.a(i) = r[static_cast<std::size_t>(d)];
    data.y(i) = r[static_cast<std::size_t>(d) + 1];
    if (has_tau) tau(i) = r[static_cast<std::size_t>(d) + 2];
  }
  if (has_tau) data.tau_true = std::move(tau);
  data.validate();
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return read_dataset_csv(in);
}

}  // namespace permucate
