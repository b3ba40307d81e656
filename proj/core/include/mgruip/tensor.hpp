#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mgruip/errors.hpp"

namespace mgruip {

/// Dense row-major matrix. Vectors are 1 x n rows; batched activations keep one
/// sequence per row, and weights are stored (outputs x inputs), so a batched
/// affine map is `matmul_nt(x, w)`.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T{0});
  Tensor(std::size_t rows, std::size_t cols, std::vector<T> data);

  static Tensor row(std::vector<T> values);
  static Tensor column(std::vector<T> values);
  static Tensor identity(std::size_t n);
  /// Uniform in [-bound, bound].
  static Tensor uniform(std::size_t rows, std::size_t cols, T bound, std::mt19937_64& rng);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::span<T> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(T value);
  void set_zero() { fill(T{0}); }
  bool same_shape(const Tensor& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(T scale);
  /// this += scale * other
  Tensor& add_scaled(const Tensor& other, T scale);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

std::string shape_string(std::size_t rows, std::size_t cols);

template <typename T>
std::string shape_of(const Tensor<T>& t) {
  return shape_string(t.rows(), t.cols());
}

/// a * b
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a * b^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
/// a^T * b
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
  return a += b;
}
template <typename T>
Tensor<T> operator-(Tensor<T> a, const Tensor<T>& b) {
  return a -= b;
}
template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b);

/// Adds a 1 x cols row to every row of x.
template <typename T>
Tensor<T> add_row(Tensor<T> x, const Tensor<T>& row);
/// Column sums as a 1 x cols row.
template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x);

/// Horizontal concatenation: per row, [a ; b].
template <typename T>
Tensor<T> hconcat(const Tensor<T>& a, const Tensor<T>& b);
/// Columns [begin, begin + count).
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t count);

template <typename T>
Tensor<T> sigmoid(Tensor<T> x);
template <typename T>
Tensor<T> relu(Tensor<T> x);
template <typename T>
Tensor<T> tanh(Tensor<T> x);

template <typename T>
T sigmoid_scalar(T x) noexcept;

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  std::vector<To> data(t.values().begin(), t.values().end());
  return Tensor<To>(t.rows(), t.cols(), std::move(data));
}

/// Throws DimensionError with `what` unless the shape matches.
template <typename T>
void expect_shape(const Tensor<T>& t, std::size_t rows, std::size_t cols, const char* what);

}  // namespace mgruip
