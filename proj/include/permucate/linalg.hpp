#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace permucate {

/// Row-per-sample covariate matrix.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Throws DataError unless x has at least one row and column and every entry
/// is finite.
void check_design(const Matrix& x, std::string_view what = "design matrix");

/// Throws DimensionError when lengths disagree.
void check_length(Index expected, Index actual, std::string_view what);

Matrix take_rows(const Matrix& x, std::span<const Index> rows);
Vector take_rows(const Vector& v, std::span<const Index> rows);

/// x with column j removed.
Matrix drop_column(const Matrix& x, Index j);

/// Positions in [0, n) shuffled with the given seed and dealt round-robin
/// into k folds. Fold sizes differ by at most one.
std::vector<int> kfold_assignment(Index n, int k, std::uint64_t seed);

/// As kfold_assignment, but rows with label 1 are dealt first, then rows with
/// label 0, so both labels spread evenly across folds.
std::vector<int> stratified_kfold_assignment(std::span<const double> labels, int k,
                                             std::uint64_t seed);

/// Rows whose fold equals (or differs from) `fold`.
std::vector<Index> rows_in_fold(std::span<const int> assignment, int fold);
std::vector<Index> rows_outside_fold(std::span<const int> assignment, int fold);

double expit(double z) noexcept;

double mean(std::span<const double> values);
/// Sample variance, denominator n - 1. Zero for fewer than two values.
double sample_variance(std::span<const double> values);

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace permucate
