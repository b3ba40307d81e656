#include "mgruip/streaming.hpp"

#include <algorithm>

namespace mgruip {

template <typename T>
StreamState<T>::StreamState(const NetworkTopology& topology, const NetworkParams<T>& params)
    : topology_(topology),
      params_(&params),
      input_(topology.splice_past + 1 + topology.splice_future) {
  topology_.validate();
  check_param_shapes(topology_, params);
  for (std::size_t l = 0; l < topology_.layers.size(); ++l) {
    const LayerSpec& spec = topology_.layers[l];
    LayerState s;
    s.h = Tensor<T>(1, spec.units);
    s.pending = BoundedRing<LowerEntry>(spec.context.lookahead_frames() / topology_.lower_period(l) + 1);
    layers_.push_back(std::move(s));
  }
}

template <typename T>
std::size_t StreamState<T>::lookahead_frames() const noexcept {
  std::size_t total = topology_.splice_future;
  for (const LayerSpec& spec : topology_.layers) total += spec.context.lookahead_frames();
  return total;
}

template <typename T>
std::vector<StreamBufferInfo> StreamState<T>::buffers() const {
  std::vector<StreamBufferInfo> out;
  out.push_back({"input", input_.capacity(), topology_.splice_future, input_.max_occupancy()});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    out.push_back({"layer" + std::to_string(l + 1), layers_[l].pending.capacity(),
                   topology_.layers[l].context.lookahead_frames(), layers_[l].pending.max_occupancy()});
  }
  return out;
}

template <typename T>
Tensor<T> StreamState<T>::splice(std::size_t center) const {
  const std::size_t d = topology_.input_dim;
  Tensor<T> out(1, topology_.spliced_dim());
  // input_ holds frames [consumed_ - size, consumed_).
  const std::size_t oldest = consumed_ - input_.size();
  std::size_t slot = 0;
  for (std::ptrdiff_t j = -static_cast<std::ptrdiff_t>(topology_.splice_past);
       j <= static_cast<std::ptrdiff_t>(topology_.splice_future); ++j, ++slot) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(center) + j;
    if (src < 0 || static_cast<std::size_t>(src) >= consumed_) continue;
    const Tensor<T>& frame = input_[static_cast<std::size_t>(src) - oldest];
    std::copy(frame.values().begin(), frame.values().end(), out.values().begin() + slot * d);
  }
  return out;
}

template <typename T>
std::vector<StreamOutput<T>> StreamState<T>::push(std::span<const T> frame) {
  if (flushed_) throw ContractError("stream: push after flush");
  if (frame.size() != topology_.input_dim) {
    throw DimensionError("stream: frame has " + std::to_string(frame.size()) + " values, expected " +
                         std::to_string(topology_.input_dim));
  }
  if (input_.full()) input_.pop_front();
  input_.push_back(Tensor<T>(1, frame.size(), std::vector<T>(frame.begin(), frame.end())));
  ++consumed_;

  std::vector<StreamOutput<T>> out;
  if (consumed_ > topology_.splice_future) {
    const std::size_t center = consumed_ - 1 - topology_.splice_future;
    deliver(0, LowerEntry{center, splice(center), Tensor<T>()}, out);
  }
  return out;
}

template <typename T>
std::vector<StreamOutput<T>> StreamState<T>::flush() {
  if (flushed_) throw ContractError("stream: flush called twice");
  flushed_ = true;
  std::vector<StreamOutput<T>> out;
  const std::size_t first = consumed_ > topology_.splice_future ? consumed_ - topology_.splice_future : 0;
  for (std::size_t center = first; center < consumed_; ++center) {
    deliver(0, LowerEntry{center, splice(center), Tensor<T>()}, out);
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].lower_done = true;
    drain(l, out);
  }
  return out;
}

template <typename T>
void StreamState<T>::deliver(std::size_t layer, LowerEntry entry, std::vector<StreamOutput<T>>& out) {
  LayerState& s = layers_[layer];
  s.has_latest = true;
  s.lower_latest = entry.frame;
  if (entry.frame >= s.next_frame) s.pending.push_back(std::move(entry));
  drain(layer, out);
}

template <typename T>
const typename StreamState<T>::LowerEntry* StreamState<T>::find(const LayerState& state,
                                                                 std::size_t frame) const {
  for (std::size_t i = 0; i < state.pending.size(); ++i) {
    if (state.pending[i].frame == frame) return &state.pending[i];
  }
  return nullptr;
}

template <typename T>
bool StreamState<T>::ready(std::size_t layer) const {
  const LayerState& s = layers_[layer];
  if (!s.has_latest || s.lower_latest < s.next_frame) return false;
  if (s.lower_done) return true;
  return s.lower_latest >= s.next_frame + topology_.layers[layer].context.lookahead_frames();
}

template <typename T>
void StreamState<T>::drain(std::size_t layer, std::vector<StreamOutput<T>>& out) {
  while (ready(layer)) fire(layer, out);
}

template <typename T>
void StreamState<T>::fire(std::size_t layer, std::vector<StreamOutput<T>>& out) {
  const LayerSpec& spec = topology_.layers[layer];
  const LayerParams<T>& lp = params_->layers[layer];
  LayerState& s = layers_[layer];
  const std::size_t f = s.next_frame;
  const LowerEntry* current = find(s, f);
  if (current == nullptr) throw ContractError("stream: missing lower frame " + std::to_string(f));

  const ContextSpec& ctx = spec.context;
  Tensor<T> context_term;
  if (ctx.kind != ContextKind::none) {
    std::vector<Tensor<T>> taps;
    const std::size_t width = topology_.context_input_dim(layer);
    for (std::size_t i = 1; i <= ctx.order; ++i) {
      const LowerEntry* e = find(s, f + ctx.stride * i);
      if (e == nullptr) {
        if (!s.lower_done) throw ContractError("stream: future tap missing before end of stream");
        taps.emplace_back(1, width);
      } else {
        taps.push_back(ctx.kind == ContextKind::encoding ? e->v : e->h);
      }
    }
    context_term = ctx.kind == ContextKind::encoding
                       ? temporal_encode<T>(ctx, lp.context, taps, spec.projection, 1)
                       : temporal_convolve<T>(ctx, lp.context, taps);
  }

  LowerEntry produced;
  produced.frame = f;
  std::visit(
      [&](const auto& cell) {
        using P = std::decay_t<decltype(cell)>;
        if constexpr (std::is_same_v<P, GruParams<T>>) {
          produced.h = gru_step(cell, current->h, s.h).h;
        } else if constexpr (std::is_same_v<P, MgruParams<T>>) {
          produced.h = mgru_step(cell, current->h, s.h, BnMode::infer).h;
        } else {
          auto step = mgruip_step(cell, current->h, s.h,
                                  ctx.kind == ContextKind::none ? nullptr : &context_term, BnMode::infer);
          produced.h = std::move(step.h);
          produced.v = std::move(step.v);
        }
      },
      lp.cell);
  s.h = produced.h;
  s.next_frame += spec.frame_period;
  while (!s.pending.empty() && s.pending.front().frame < s.next_frame) s.pending.pop_front();

  if (layer + 1 < layers_.size()) {
    deliver(layer + 1, std::move(produced), out);
    return;
  }
  StreamOutput<T> o;
  o.frame = f;
  o.consumed = consumed_;
  if (!params_->bottleneck.empty()) {
    o.logits = add_row(matmul_nt(matmul_nt(produced.h, params_->bottleneck), params_->output_w), params_->output_b);
  } else {
    o.logits = add_row(matmul_nt(produced.h, params_->output_w), params_->output_b);
  }
  ++emitted_;
  out.push_back(std::move(o));
}

template <typename T>
LatencyMeasurement measure_latency(const NetworkTopology& topology, const NetworkParams<T>& params,
                                   const Tensor<T>& probe) {
  expect_shape(probe, probe.rows(), topology.input_dim, "latency probe");
  StreamState<T> stream(topology, params);
  LatencyMeasurement m;
  auto record = [&](const std::vector<StreamOutput<T>>& outs) {
    for (const auto& o : outs) {
      const std::size_t delay = o.consumed - 1 - o.frame;
      m.delays.push_back(delay);
      m.max_delay_frames = std::max(m.max_delay_frames, delay);
    }
  };
  for (std::size_t t = 0; t < probe.rows(); ++t) {
    auto outs = stream.push(probe.row_span(t));
    m.outputs_before_flush += outs.size();
    record(outs);
  }
  record(stream.flush());
  m.empirical_ms = topology.base_frame_period_ms *
                   static_cast<double>(m.max_delay_frames + topology.output_delay_frames);
  return m;
}

template class StreamState<float>;
template class StreamState<double>;
template LatencyMeasurement measure_latency<float>(const NetworkTopology&, const NetworkParams<float>&,
                                                   const Tensor<float>&);
template LatencyMeasurement measure_latency<double>(const NetworkTopology&, const NetworkParams<double>&,
                                                    const Tensor<double>&);

}  // namespace mgruip
