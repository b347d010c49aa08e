#include "permucate/linalg.hpp"

#include "permucate/errors.hpp"
#include "permucate/random.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace permucate {

void check_design(const Matrix& x, std::string_view what) {
  if (x.rows() < 1 || x.cols() < 1) {
    throw DataError(std::string(what) + ": needs at least one row and one column");
  }
  if (!x.allFinite()) throw DataError(std::string(what) + ": contains non-finite entries");
}

void check_length(Index expected, Index actual, std::string_view what) {
  if (expected != actual) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                         ", got " + std::to_string(actual));
  }
}

Matrix take_rows(const Matrix& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

Vector take_rows(const Vector& v, std::span<const Index> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

Matrix drop_column(const Matrix& x, Index j) {
  if (j < 0 || j >= x.cols()) throw DimensionError("drop_column: index out of range");
  Matrix out(x.rows(), x.cols() - 1);
  if (j > 0) out.leftCols(j) = x.leftCols(j);
  if (j + 1 < x.cols()) out.rightCols(x.cols() - j - 1) = x.rightCols(x.cols() - j - 1);
  return out;
}

std::vector<int> kfold_assignment(Index n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(std::span<Index>(order));
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < order.size(); ++p) fold[order[p]] = static_cast<int>(p % k);
  return fold;
}

std::vector<int> stratified_kfold_assignment(std::span<const double> labels, int k,
                                             std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  std::vector<Index> positive;
  std::vector<Index> negative;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] > 0.5 ? positive : negative).push_back(static_cast<Index>(i));
  }
  Rng rng(seed);
  rng.shuffle(std::span<Index>(positive));
  rng.shuffle(std::span<Index>(negative));
  std::vector<int> fold(labels.size());
  std::size_t p = 0;
  for (Index i : positive) fold[i] = static_cast<int>(p++ % k);
  for (Index i : negative) fold[i] = static_cast<int>(p++ % k);
  return fold;
}

std::vector<Index> rows_in_fold(std::span<const int> assignment, int fold) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == fold) rows.push_back(static_cast<Index>(i));
  return rows;
}

std::vector<Index> rows_outside_fold(std::span<const int> assignment, int fold) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != fold) rows.push_back(static_cast<Index>(i));
  return rows;
}

double expit(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return s / static_cast<double>(values.size() - 1);
}

}  // namespace permucate
