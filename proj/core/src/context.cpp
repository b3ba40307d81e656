#include "mgruip/context.hpp"

#include <string>

#include "mgruip/cells.hpp"

namespace mgruip {

std::string_view to_string(ContextKind kind) noexcept {
  switch (kind) {
    case ContextKind::none: return "none";
    case ContextKind::encoding: return "encoding";
    case ContextKind::convolution: return "convolution";
  }
  return "?";
}

std::string_view to_string(EncodingTransform transform) noexcept {
  switch (transform) {
    case EncodingTransform::identity: return "identity";
    case EncodingTransform::scale: return "scale";
    case EncodingTransform::affine: return "affine";
  }
  return "?";
}

template <typename T>
ContextParams<T> ContextParams<T>::zeros(const ContextSpec& spec, std::size_t projection,
                                         std::size_t lower_width) {
  ContextParams p;
  if (spec.kind == ContextKind::encoding) {
    if (spec.transform == EncodingTransform::scale) p.scale = Tensor<T>(1, 1);
    if (spec.transform == EncodingTransform::affine) p.W_f = Tensor<T>(projection, projection);
  } else if (spec.kind == ContextKind::convolution) {
    p.W_p = Tensor<T>(projection, spec.order * lower_width);
  }
  return p;
}

template <typename T>
ContextParams<T> ContextParams<T>::init(const ContextSpec& spec, std::size_t projection,
                                        std::size_t lower_width, std::mt19937_64& rng) {
  ContextParams p = zeros(spec, projection, lower_width);
  if (!p.scale.empty()) p.scale[0] = T{1};
  if (!p.W_f.empty()) {
    p.W_f = Tensor<T>::uniform(projection, projection,
                               static_cast<T>(glorot_bound(projection, projection)), rng);
  }
  if (!p.W_p.empty()) {
    p.W_p = Tensor<T>::uniform(p.W_p.rows(), p.W_p.cols(),
                               static_cast<T>(glorot_bound(p.W_p.cols(), p.W_p.rows())), rng);
  }
  return p;
}

namespace {

void expect_order(const ContextSpec& spec, std::size_t given, const char* what) {
  if (given != spec.order) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(spec.order) +
                         " future frames, got " + std::to_string(given));
  }
}

}  // namespace

template <typename T>
Tensor<T> temporal_encode(const ContextSpec& spec, const ContextParams<T>& params,
                          std::span<const Tensor<T>> v_future, std::size_t projection,
                          std::size_t batch, ContextCache<T>* cache) {
  if (spec.kind != ContextKind::encoding) throw ContractError("temporal_encode on a non-encoding spec");
  expect_order(spec, v_future.size(), "temporal_encode");
  Tensor<T> sum(batch, projection);
  for (const auto& v : v_future) {
    expect_shape(v, batch, projection, "temporal_encode future projection");
    sum += v;
  }
  Tensor<T> out;
  switch (spec.transform) {
    case EncodingTransform::identity:
      out = sum;
      break;
    case EncodingTransform::scale:
      expect_shape(params.scale, 1, 1, "temporal_encode scale");
      out = sum;
      out *= params.scale[0];
      break;
    case EncodingTransform::affine:
      expect_shape(params.W_f, projection, projection, "temporal_encode W_f");
      // Linear, so sum_i W_f v_i == W_f sum_i v_i.
      out = matmul_nt(sum, params.W_f);
      break;
  }
  if (cache != nullptr) {
    cache->kind = ContextKind::encoding;
    cache->futures.assign(v_future.begin(), v_future.end());
    cache->summed = std::move(sum);
    cache->spliced = Tensor<T>();
  }
  return out;
}

template <typename T>
Tensor<T> temporal_convolve(const ContextSpec& spec, const ContextParams<T>& params,
                            std::span<const Tensor<T>> h_future, ContextCache<T>* cache) {
  if (spec.kind != ContextKind::convolution) {
    throw ContractError("temporal_convolve on a non-convolution spec");
  }
  expect_order(spec, h_future.size(), "temporal_convolve");
  if (h_future.empty()) throw DimensionError("temporal_convolve needs at least one future frame");
  Tensor<T> spliced = h_future[0];
  for (std::size_t i = 1; i < h_future.size(); ++i) {
    if (!h_future[i].same_shape(h_future[0])) {
      throw DimensionError("temporal_convolve future frames of differing shape " +
                           shape_of(h_future[0]) + " and " + shape_of(h_future[i]));
    }
    spliced = hconcat(spliced, h_future[i]);
  }
  if (params.W_p.cols() != spliced.cols()) {
    throw DimensionError("temporal_convolve W_p " + shape_of(params.W_p) + " for spliced width " +
                         std::to_string(spliced.cols()));
  }
  Tensor<T> out = matmul_nt(spliced, params.W_p);
  if (cache != nullptr) {
    cache->kind = ContextKind::convolution;
    cache->futures.assign(h_future.begin(), h_future.end());
    cache->summed = Tensor<T>();
    cache->spliced = std::move(spliced);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> context_backward(const ContextSpec& spec, const ContextParams<T>& params,
                                        const ContextCache<T>& cache, const Tensor<T>& grad_out,
                                        ContextParams<T>& grads) {
  if (cache.kind != spec.kind || cache.futures.size() != spec.order) {
    throw ContractError("context_backward: cache was not produced by this context spec");
  }
  std::vector<Tensor<T>> out;
  out.reserve(cache.futures.size());
  if (spec.kind == ContextKind::encoding) {
    Tensor<T> g;
    switch (spec.transform) {
      case EncodingTransform::identity:
        g = grad_out;
        break;
      case EncodingTransform::scale: {
        T dm{0};
        for (std::size_t i = 0; i < grad_out.size(); ++i) dm += grad_out[i] * cache.summed[i];
        grads.scale[0] += dm;
        g = grad_out;
        g *= params.scale[0];
        break;
      }
      case EncodingTransform::affine:
        grads.W_f += matmul_tn(grad_out, cache.summed);
        g = matmul(grad_out, params.W_f);
        break;
    }
    for (std::size_t i = 0; i < cache.futures.size(); ++i) out.push_back(g);
  } else if (spec.kind == ContextKind::convolution) {
    grads.W_p += matmul_tn(grad_out, cache.spliced);
    const Tensor<T> dspliced = matmul(grad_out, params.W_p);
    const std::size_t width = cache.futures.front().cols();
    for (std::size_t i = 0; i < cache.futures.size(); ++i) {
      out.push_back(slice_cols(dspliced, i * width, width));
    }
  }
  return out;
}

#define MGRUIP_INSTANTIATE_CONTEXT(T)                                                            \
  template struct ContextParams<T>;                                                              \
  template Tensor<T> temporal_encode<T>(const ContextSpec&, const ContextParams<T>&,             \
                                        std::span<const Tensor<T>>, std::size_t, std::size_t,    \
                                        ContextCache<T>*);                                       \
  template Tensor<T> temporal_convolve<T>(const ContextSpec&, const ContextParams<T>&,           \
                                          std::span<const Tensor<T>>, ContextCache<T>*);         \
  template std::vector<Tensor<T>> context_backward<T>(const ContextSpec&, const ContextParams<T>&, \
                                                      const ContextCache<T>&, const Tensor<T>&,  \
                                                      ContextParams<T>&);

MGRUIP_INSTANTIATE_CONTEXT(float)
MGRUIP_INSTANTIATE_CONTEXT(double)

}  // namespace mgruip
