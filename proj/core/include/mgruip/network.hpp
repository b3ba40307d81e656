#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgruip/cells.hpp"
#include "mgruip/context.hpp"
#include "mgruip/topology.hpp"

namespace mgruip {

template <typename T>
struct LayerParams {
  CellParams<T> cell;
  ContextParams<T> context;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// All weights of a network. The same type doubles as the gradient holder and
/// as optimizer state, so every container shares one tensor ordering.
template <typename T>
struct NetworkParams {
  std::vector<LayerParams<T>> layers;
  Tensor<T> bottleneck;  // bottleneck_dim x top units; empty when disabled
  Tensor<T> output_w;    // output_dim x head input
  Tensor<T> output_b;    // 1 x output_dim

  static NetworkParams zeros(const NetworkTopology& topology);
  /// Glorot-uniform matrices, zero biases, identity batch norm; all draws come
  /// from one generator seeded with `seed`.
  static NetworkParams init(const NetworkTopology& topology, std::uint64_t seed);

  /// f(name, tensor) for every trainable tensor, e.g. "layer2.context.W_p".
  template <class F>
  void for_each_param(F&& f) { visit_params(*this, f); }
  template <class F>
  void for_each_param(F&& f) const { visit_params(*this, f); }
  /// f(name, tensor) for batch-norm running statistics.
  template <class F>
  void for_each_buffer(F&& f) { visit_buffers(*this, f); }
  template <class F>
  void for_each_buffer(F&& f) const { visit_buffers(*this, f); }

  std::size_t parameter_count() const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  template <class Self, class F>
  static void visit_params(Self& self, F& f) {
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string prefix = "layer" + std::to_string(l + 1) + ".";
      auto named = [&](const char* name, auto& t) { f(prefix + name, t); };
      std::visit([&](auto& cell) { cell.for_each_param(named); }, self.layers[l].cell);
      self.layers[l].context.for_each_param(named);
    }
    if (!self.bottleneck.empty()) f(std::string("bottleneck.W"), self.bottleneck);
    f(std::string("output.W"), self.output_w);
    f(std::string("output.b"), self.output_b);
  }
  template <class Self, class F>
  static void visit_buffers(Self& self, F& f) {
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string prefix = "layer" + std::to_string(l + 1) + ".";
      auto named = [&](const char* name, auto& t) { f(prefix + name, t); };
      std::visit([&](auto& cell) { cell.for_each_buffer(named); }, self.layers[l].cell);
    }
  }
};

/// Pointers to every trainable tensor in for_each_param order.
template <typename T>
std::vector<Tensor<T>*> param_tensors(NetworkParams<T>& params);
template <typename T>
std::vector<const Tensor<T>*> param_tensors(const NetworkParams<T>& params);

/// Throws DimensionError unless every tensor of `params` has the shape the
/// topology calls for.
template <typename T>
void check_param_shapes(const NetworkTopology& topology, const NetworkParams<T>& params);

/// Per-layer record of a forward pass. Step k of a layer runs at base frame
/// k * period.
template <typename T>
struct LayerTrace {
  std::size_t period = 1;
  std::vector<Tensor<T>> h;
  std::vector<Tensor<T>> v;  // mgruip only
  std::vector<CellCache<T>> cells;
  std::vector<ContextCache<T>> contexts;
  std::vector<std::size_t> input_source;  // lower step feeding x
  /// Per step, lower step of each future tap; -1 marks a zero-padded tap past
  /// the end of the sequence.
  std::vector<std::vector<std::ptrdiff_t>> context_sources;
};

template <typename T>
struct ForwardCache {
  std::size_t frames = 0;
  std::size_t batch = 0;
  BnMode mode = BnMode::infer;
  std::vector<Tensor<T>> spliced;  // per base frame
  std::vector<LayerTrace<T>> layers;
  std::vector<Tensor<T>> head_hidden;  // bottleneck activations per output step
};

template <typename T>
struct ForwardResult {
  std::vector<Tensor<T>> logits;  // per output step, batch x output_dim
  ForwardCache<T> cache;
};

/// Which lower frames a layer step read: `max_lower_frame` is the largest base
/// frame index consumed from the layer below (input frames for layer 0).
struct FrameAccess {
  std::size_t layer = 0;
  std::size_t frame = 0;
  std::size_t max_lower_frame = 0;
};

/// Runs equal-length sequences (each frames x input_dim) in lockstep. Does not
/// modify running batch-norm statistics; see apply_running_stats.
template <typename T>
ForwardResult<T> forward_batch(const NetworkTopology& topology, const NetworkParams<T>& params,
                               std::span<const Tensor<T>> sequences, BnMode mode,
                               std::vector<FrameAccess>* access_log = nullptr);

/// Folds the batch statistics of a train-mode pass into the running stats, in
/// forward order.
template <typename T>
void apply_running_stats(NetworkParams<T>& params, const ForwardCache<T>& cache);

/// Single sequence, infer-mode batch norm. Returns output_frames(T) x output_dim.
template <typename T>
Tensor<T> forward_sequence(const NetworkTopology& topology, const NetworkParams<T>& params,
                           const Tensor<T>& frames);

/// Backpropagation through time over a cached forward pass, including the
/// cross-time edges of context modules.
template <typename T>
NetworkParams<T> backward_batch(const NetworkTopology& topology, const NetworkParams<T>& params,
                                const ForwardCache<T>& cache, std::span<const Tensor<T>> grad_logits);

/// Base frame whose label output step `k` is trained on, or -1 when the output
/// delay pushes it before the start of the sequence.
std::ptrdiff_t target_frame(const NetworkTopology& topology, std::size_t output_step) noexcept;

template <typename T>
struct LossResult {
  double loss = 0.0;
  std::size_t counted = 0;
  std::size_t correct = 0;
  std::vector<Tensor<T>> grad_logits;
};

/// Mean cross-entropy over unmasked (sequence, output step) pairs. `labels[b]`
/// holds one class per base frame of sequence b.
template <typename T>
LossResult<T> masked_cross_entropy(const NetworkTopology& topology, std::span<const Tensor<T>> logits,
                                   std::span<const std::vector<int>> labels);

}  // namespace mgruip
