#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "mgruip/tensor.hpp"

namespace mgruip {

enum class ContextKind { none, encoding, convolution };

/// Transform applied to each future projection vector by temporal encoding.
enum class EncodingTransform { identity, scale, affine };

std::string_view to_string(ContextKind kind) noexcept;
std::string_view to_string(EncodingTransform transform) noexcept;

/// Structural description of a future-context module. Reads lower-layer frames
/// t + stride * i for i = 1..order, strides in base frames.
struct ContextSpec {
  ContextKind kind = ContextKind::none;
  std::size_t order = 0;   // K
  std::size_t stride = 1;  // s
  EncodingTransform transform = EncodingTransform::identity;

  std::size_t lookahead_frames() const noexcept { return kind == ContextKind::none ? 0 : order * stride; }

  friend bool operator==(const ContextSpec&, const ContextSpec&) = default;
};

/// Trainable weights of a context module; only the tensors its ContextSpec needs are
/// non-empty (m for scale, W_f for affine, W_p for convolution).
template <typename T>
struct ContextParams {
  Tensor<T> scale;  // 1 x 1
  Tensor<T> W_f;    // projection x projection
  Tensor<T> W_p;    // projection x (order * lower_width)

  /// `lower_width` is the lower layer's projection size for encoding and its
  /// unit count (or the spliced input width) for convolution.
  static ContextParams zeros(const ContextSpec& spec, std::size_t projection, std::size_t lower_width);
  /// m = 1; matrices Glorot-uniform.
  static ContextParams init(const ContextSpec& spec, std::size_t projection, std::size_t lower_width,
                            std::mt19937_64& rng);

  std::size_t parameter_count() const noexcept { return scale.size() + W_f.size() + W_p.size(); }

  template <class F>
  void for_each_param(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_param(F&& f) const { visit(*this, f); }

  friend bool operator==(const ContextParams&, const ContextParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f) {
    if (!p.scale.empty()) f("context.m", p.scale);
    if (!p.W_f.empty()) f("context.W_f", p.W_f);
    if (!p.W_p.empty()) f("context.W_p", p.W_p);
  }
};

template <typename T>
struct ContextCache {
  ContextKind kind = ContextKind::none;
  std::vector<Tensor<T>> futures;  // inputs in order i = 1..K
  Tensor<T> summed;                // encoding: sum of futures
  Tensor<T> spliced;               // convolution: [h_1 ; ... ; h_K]
};

/// Sum over i of f(v_future[i]). Each entry is batch x projection; with no
/// entries (order 0) the result is a zero tensor of `batch` rows.
template <typename T>
Tensor<T> temporal_encode(const ContextSpec& spec, const ContextParams<T>& params,
                          std::span<const Tensor<T>> v_future, std::size_t projection,
                          std::size_t batch, ContextCache<T>* cache = nullptr);

/// W_p [h_future[1] ; ... ; h_future[K]].
template <typename T>
Tensor<T> temporal_convolve(const ContextSpec& spec, const ContextParams<T>& params,
                            std::span<const Tensor<T>> h_future, ContextCache<T>* cache = nullptr);

/// Gradients wrt each future input (same order as the forward call); weight
/// gradients accumulate into `grads`.
template <typename T>
std::vector<Tensor<T>> context_backward(const ContextSpec& spec, const ContextParams<T>& params,
                                        const ContextCache<T>& cache, const Tensor<T>& grad_out,
                                        ContextParams<T>& grads);

}  // namespace mgruip
