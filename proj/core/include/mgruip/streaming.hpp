#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mgruip/network.hpp"
#include "mgruip/ring.hpp"

namespace mgruip {

template <typename T>
struct StreamOutput {
  std::size_t frame = 0;     // base frame of the top-layer step
  std::size_t consumed = 0;  // input frames pushed when it was emitted
  Tensor<T> logits;          // 1 x output_dim
};

struct StreamBufferInfo {
  std::string name;
  std::size_t capacity = 0;
  std::size_t future_frames = 0;  // base frames of lookahead this buffer holds
  std::size_t max_occupancy = 0;
};

/// Frame-incremental inference. Each layer keeps a ring of lower-layer outputs
/// covering exactly its current step plus its K * s future taps, and fires as
/// soon as the furthest tap is available. Batch norm runs in infer mode.
///
/// Holds a reference to `params`; they must outlive the stream and must not be
/// modified while it is open. Distinct streams share nothing else.
template <typename T>
class StreamState {
 public:
  StreamState(const NetworkTopology& topology, const NetworkParams<T>& params);

  /// Appends one frame (input_dim values) and returns every output whose
  /// lookahead window is now complete. Throws ContractError after flush.
  std::vector<StreamOutput<T>> push(std::span<const T> frame);

  /// Treats frames past the end as zeros and emits everything still pending.
  std::vector<StreamOutput<T>> flush();

  bool flushed() const noexcept { return flushed_; }
  std::size_t frames_consumed() const noexcept { return consumed_; }
  std::size_t outputs_emitted() const noexcept { return emitted_; }

  /// Sum of the future spans of all buffers, in base frames.
  std::size_t lookahead_frames() const noexcept;
  std::vector<StreamBufferInfo> buffers() const;

 private:
  struct LowerEntry {
    std::size_t frame = 0;
    Tensor<T> h;
    Tensor<T> v;
  };
  struct LayerState {
    std::size_t next_frame = 0;
    Tensor<T> h;
    BoundedRing<LowerEntry> pending;
    bool lower_done = false;
    bool has_latest = false;
    std::size_t lower_latest = 0;
  };

  Tensor<T> splice(std::size_t center) const;
  void deliver(std::size_t layer, LowerEntry entry, std::vector<StreamOutput<T>>& out);
  void drain(std::size_t layer, std::vector<StreamOutput<T>>& out);
  bool ready(std::size_t layer) const;
  const LowerEntry* find(const LayerState& state, std::size_t frame) const;
  void fire(std::size_t layer, std::vector<StreamOutput<T>>& out);

  NetworkTopology topology_;
  const NetworkParams<T>* params_;
  BoundedRing<Tensor<T>> input_;
  std::vector<LayerState> layers_;
  std::size_t consumed_ = 0;
  std::size_t emitted_ = 0;
  bool flushed_ = false;
};

struct LatencyMeasurement {
  std::vector<std::size_t> delays;  // per output: newest input frame index - output frame
  std::size_t max_delay_frames = 0;
  std::size_t outputs_before_flush = 0;
  double empirical_ms = 0.0;  // max delay in ms plus the output delay
};

/// Streams `probe` (frames x input_dim) through a fresh StreamState.
template <typename T>
LatencyMeasurement measure_latency(const NetworkTopology& topology, const NetworkParams<T>& params,
                                   const Tensor<T>& probe);

}  // namespace mgruip
