#include "mgruip/batch_norm.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mgruip {

template <typename T>
BatchNormState<T> BatchNormState<T>::make(std::size_t units) {
  BatchNormState s;
  s.gamma = Tensor<T>(1, units, T{1});
  s.beta = Tensor<T>(1, units, T{0});
  s.running_mean = Tensor<T>(1, units, T{0});
  s.running_var = Tensor<T>(1, units, T{1});
  return s;
}

template <typename T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, const BatchNormState<T>& state, BnMode mode,
                             BatchNormCache<T>* cache) {
  const std::size_t units = state.units();
  if (x.cols() != units) {
    throw DimensionError("batch_norm input " + shape_of(x) + " for " + std::to_string(units) +
                         " units");
  }
  const std::size_t batch = x.rows();
  // Statistics and outputs are formed in double and rounded once to T.
  std::vector<double> mean(units, 0.0);
  std::vector<double> var(units, 0.0);
  if (mode == BnMode::train) {
    if (batch < 2) {
      throw DegenerateBatchError("batch_norm train mode needs at least 2 rows, got " +
                                 std::to_string(batch));
    }
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < units; ++c) mean[c] += static_cast<double>(x(r, c));
    for (std::size_t c = 0; c < units; ++c) mean[c] /= static_cast<double>(batch);
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < units; ++c) {
        const double d = static_cast<double>(x(r, c)) - mean[c];
        var[c] += d * d;
      }
    for (std::size_t c = 0; c < units; ++c) var[c] /= static_cast<double>(batch);
  } else {
    for (std::size_t c = 0; c < units; ++c) {
      mean[c] = static_cast<double>(state.running_mean[c]);
      var[c] = static_cast<double>(state.running_var[c]);
    }
  }

  std::vector<double> inv_std(units);
  for (std::size_t c = 0; c < units; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + static_cast<double>(state.epsilon));

  Tensor<T> x_hat(batch, units);
  Tensor<T> y(batch, units);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t c = 0; c < units; ++c) {
      const double normalized = (static_cast<double>(x(r, c)) - mean[c]) * inv_std[c];
      x_hat(r, c) = static_cast<T>(normalized);
      y(r, c) = static_cast<T>(static_cast<double>(state.gamma[c]) * normalized + static_cast<double>(state.beta[c]));
    }
  }
  auto as_row = [](const std::vector<double>& v) {
    Tensor<T> t(1, v.size());
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<T>(v[i]);
    return t;
  };
  if (cache != nullptr) {
    cache->mode = mode;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = as_row(inv_std);
    if (mode == BnMode::train) {
      cache->batch_mean = as_row(mean);
      cache->batch_var = as_row(var);
    } else {
      cache->batch_mean = Tensor<T>();
      cache->batch_var = Tensor<T>();
    }
  }
  return y;
}

template <typename T>
void update_running_stats(BatchNormState<T>& state, const BatchNormCache<T>& cache) {
  if (cache.mode != BnMode::train) return;
  const std::size_t batch = cache.x_hat.rows();
  const T unbias = static_cast<T>(batch) / static_cast<T>(batch - 1);
  for (std::size_t c = 0; c < state.units(); ++c) {
    state.running_mean[c] =
        (T{1} - state.momentum) * state.running_mean[c] + state.momentum * cache.batch_mean[c];
    state.running_var[c] =
        (T{1} - state.momentum) * state.running_var[c] + state.momentum * cache.batch_var[c] * unbias;
  }
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state, BnMode mode) {
  BatchNormCache<T> cache;
  Tensor<T> y = batch_norm_forward(x, state, mode, &cache);
  update_running_stats(state, cache);
  return y;
}

template <typename T>
BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>& cache, const BatchNormState<T>& state,
                                      const Tensor<T>& dy) {
  if (!dy.same_shape(cache.x_hat)) {
    throw ContractError("batch_norm_backward: upstream gradient " + shape_of(dy) +
                        " does not match cached batch " + shape_of(cache.x_hat));
  }
  const std::size_t batch = dy.rows();
  const std::size_t units = dy.cols();
  BatchNormGrads<T> g{Tensor<T>(batch, units), Tensor<T>(1, units), Tensor<T>(1, units)};
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t c = 0; c < units; ++c) {
      g.dgamma[c] += dy(r, c) * cache.x_hat(r, c);
      g.dbeta[c] += dy(r, c);
    }
  }
  if (cache.mode == BnMode::infer) {
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < units; ++c) g.dx(r, c) = dy(r, c) * state.gamma[c] * cache.inv_std[c];
    return g;
  }
  // dx = inv_std / B * (B * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat)), dxhat = dy * gamma
  const T n = static_cast<T>(batch);
  for (std::size_t c = 0; c < units; ++c) {
    const T sum_dxhat = g.dbeta[c] * state.gamma[c];
    const T sum_dxhat_xhat = g.dgamma[c] * state.gamma[c];
    for (std::size_t r = 0; r < batch; ++r) {
      const T dxhat = dy(r, c) * state.gamma[c];
      g.dx(r, c) = cache.inv_std[c] / n * (n * dxhat - sum_dxhat - cache.x_hat(r, c) * sum_dxhat_xhat);
    }
  }
  return g;
}

#define MGRUIP_INSTANTIATE_BN(T)                                                               \
  template struct BatchNormState<T>;                                                           \
  template Tensor<T> batch_norm_forward<T>(const Tensor<T>&, const BatchNormState<T>&, BnMode, \
                                           BatchNormCache<T>*);                                \
  template void update_running_stats<T>(BatchNormState<T>&, const BatchNormCache<T>&);        \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, BatchNormState<T>&, BnMode);              \
  template BatchNormGrads<T> batch_norm_backward<T>(const BatchNormCache<T>&,                  \
                                                    const BatchNormState<T>&, const Tensor<T>&);

MGRUIP_INSTANTIATE_BN(float)
MGRUIP_INSTANTIATE_BN(double)

}  // namespace mgruip
