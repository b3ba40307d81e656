#include "mgruip/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mgruip {

template <typename T>
Tensor<T>::Tensor(std::size_t rows, std::size_t cols, T fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

template <typename T>
Tensor<T>::Tensor(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(rows, cols));
  }
}

template <typename T>
Tensor<T> Tensor<T>::row(std::vector<T> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

template <typename T>
Tensor<T> Tensor<T>::column(std::vector<T> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

template <typename T>
Tensor<T> Tensor<T>::identity(std::size_t n) {
  Tensor out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = T{1};
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::uniform(std::size_t rows, std::size_t cols, T bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  Tensor out(rows, cols);
  for (auto& v : out.data_) v = static_cast<T>(dist(rng));
  return out;
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Tensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  return add_scaled(other, T{1});
}

template <typename T>
Tensor<T>& Tensor<T>::operator-=(const Tensor& other) {
  return add_scaled(other, T{-1});
}

template <typename T>
Tensor<T>& Tensor<T>::operator*=(T scale) {
  for (auto& v : data_) v *= scale;
  return *this;
}

template <typename T>
Tensor<T>& Tensor<T>::add_scaled(const Tensor& other, T scale) {
  if (!same_shape(other)) {
    throw DimensionError("elementwise operands " + shape_of(*this) + " and " + shape_of(other));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
  return *this;
}

std::string shape_string(std::size_t rows, std::size_t cols) {
  std::ostringstream os;
  os << '(' << rows << 'x' << cols << ')';
  return os.str();
}

template <typename T>
void expect_shape(const Tensor<T>& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.rows() != rows || t.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + shape_string(rows, cols) + ", got " +
                         shape_of(t));
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul " + shape_of(a) + " x " + shape_of(b));
  }
  Tensor<T> out(a.rows(), b.cols());
  const std::size_t n = a.cols();
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* o = out.row_span(i).data();
    for (std::size_t k = 0; k < n; ++k) {
      const T aik = a(i, k);
      if (aik == T{0}) continue;
      const T* brow = b.row_span(k).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt " + shape_of(a) + " x " + shape_of(b) + "^T");
  }
  Tensor<T> out(a.rows(), b.rows());
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const T* arow = a.row_span(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const T* brow = b.row_span(j).data();
      T acc{0};
      for (std::size_t k = 0; k < n; ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn " + shape_of(a) + "^T x " + shape_of(b));
  }
  Tensor<T> out(a.cols(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T* brow = b.row_span(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T ari = a(r, i);
      if (ari == T{0}) continue;
      T* o = out.row_span(i).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += ari * brow[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("hadamard " + shape_of(a) + " * " + shape_of(b));
  }
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

template <typename T>
Tensor<T> add_row(Tensor<T> x, const Tensor<T>& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw DimensionError("add_row " + shape_of(x) + " + " + shape_of(row));
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto dst = x.row_span(r);
    for (std::size_t c = 0; c < x.cols(); ++c) dst[c] += row[c];
  }
  return x;
}

template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  Tensor<T> out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row_span(r);
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += src[c];
  }
  return out;
}

template <typename T>
Tensor<T> hconcat(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("hconcat " + shape_of(a) + " | " + shape_of(b));
  }
  Tensor<T> out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row_span(r);
    std::copy(a.row_span(r).begin(), a.row_span(r).end(), dst.begin());
    std::copy(b.row_span(r).begin(), b.row_span(r).end(), dst.begin() + a.cols());
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  if (begin + count > x.cols()) {
    throw DimensionError("slice_cols beyond " + shape_of(x));
  }
  Tensor<T> out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row_span(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return out;
}

template <typename T>
T sigmoid_scalar(T x) noexcept {
  if (x >= T{0}) {
    return T{1} / (T{1} + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> sigmoid(Tensor<T> x) {
  for (auto& v : x.values()) v = sigmoid_scalar(v);
  return x;
}

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  for (auto& v : x.values()) v = v > T{0} ? v : T{0};
  return x;
}

template <typename T>
Tensor<T> tanh(Tensor<T> x) {
  for (auto& v : x.values()) v = std::tanh(v);
  return x;
}

#define MGRUIP_INSTANTIATE_TENSOR(T)                                                         \
  template class Tensor<T>;                                                                  \
  template void expect_shape<T>(const Tensor<T>&, std::size_t, std::size_t, const char*);   \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> matmul_nt<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> matmul_tn<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> hadamard<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> add_row<T>(Tensor<T>, const Tensor<T>&);                                \
  template Tensor<T> sum_rows<T>(const Tensor<T>&);                                          \
  template Tensor<T> hconcat<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> slice_cols<T>(const Tensor<T>&, std::size_t, std::size_t);              \
  template T sigmoid_scalar<T>(T) noexcept;                                                  \
  template Tensor<T> sigmoid<T>(Tensor<T>);                                                  \
  template Tensor<T> relu<T>(Tensor<T>);                                                     \
  template Tensor<T> tanh<T>(Tensor<T>);

MGRUIP_INSTANTIATE_TENSOR(float)
MGRUIP_INSTANTIATE_TENSOR(double)

}  // namespace mgruip
