#pragma once

#include "permucate/linalg.hpp"
#include "permucate/random.hpp"

#include <random>

namespace testing {

using permucate::Index;
using permucate::Matrix;
using permucate::Vector;

// Independent generator for test oracles; deliberately not the library RNG.
inline Matrix gaussian(Index n, Index d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = z(gen);
  return x;
}

inline double correlation(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

inline double variance(const Vector& v) {
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace testing
