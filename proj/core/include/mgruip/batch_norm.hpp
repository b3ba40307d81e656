#pragma once

#include <cstddef>

#include "mgruip/tensor.hpp"

namespace mgruip {

enum class BnMode { train, infer };

/// Per-unit affine normalization state. gamma/beta are trained; the running
/// statistics are buffers updated from training batches and used in infer mode.
template <typename T>
struct BatchNormState {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T epsilon = T(1e-5);

  /// gamma = 1, beta = 0, running mean 0, running variance 1.
  static BatchNormState make(std::size_t units);

  std::size_t units() const noexcept { return gamma.cols(); }

  friend bool operator==(const BatchNormState&, const BatchNormState&) = default;
};

template <typename T>
struct BatchNormCache {
  BnMode mode = BnMode::infer;
  Tensor<T> x_hat;       // normalized input, batch x units
  Tensor<T> inv_std;     // 1 x units
  Tensor<T> batch_mean;  // train mode only
  Tensor<T> batch_var;   // biased, train mode only
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> dx;
  Tensor<T> dgamma;
  Tensor<T> dbeta;
};

/// Normalizes each column of x (rows are the batch). Train mode uses the batch
/// statistics and needs at least two rows; infer mode uses the running ones.
/// Does not touch the running statistics.
template <typename T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, const BatchNormState<T>& state, BnMode mode,
                             BatchNormCache<T>* cache = nullptr);

/// running = (1 - momentum) * running + momentum * batch, with the unbiased
/// batch variance. No-op for an infer-mode cache.
template <typename T>
void update_running_stats(BatchNormState<T>& state, const BatchNormCache<T>& cache);

/// Forward pass followed by the running-statistics update in train mode.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state, BnMode mode);

template <typename T>
BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>& cache, const BatchNormState<T>& state,
                                      const Tensor<T>& dy);

}  // namespace mgruip
