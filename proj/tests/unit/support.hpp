#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "mgruip/tensor.hpp"

namespace mgruip::test {

template <typename T>
Tensor<T> gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor<T> t(rows, cols);
  for (T& v : t.values()) v = static_cast<T>(n(rng));
  return t;
}

template <typename A, typename B>
double max_abs_diff(const Tensor<A>& a, const Tensor<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

inline double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Repository root, baked in at configure time.
inline std::filesystem::path source_dir() { return MGRUIP_SOURCE_DIR; }

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  std::filesystem::path p = std::filesystem::path(MGRUIP_SCRATCH_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace mgruip::test
