#include "mgruip/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mgruip {

namespace {

template <typename T>
CellParams<T> make_cell(const LayerSpec& layer, std::size_t inputs, std::mt19937_64* rng) {
  switch (layer.cell) {
    case CellType::gru:
      return rng ? GruParams<T>::init(inputs, layer.units, *rng) : GruParams<T>::zeros(inputs, layer.units);
    case CellType::mgru:
      return rng ? MgruParams<T>::init(inputs, layer.units, *rng) : MgruParams<T>::zeros(inputs, layer.units);
    case CellType::mgruip:
      return rng ? MgruipParams<T>::init(inputs, layer.units, layer.projection, *rng)
                 : MgruipParams<T>::zeros(inputs, layer.units, layer.projection);
  }
  throw ValidationError("unknown cell type");
}

template <typename T>
NetworkParams<T> build(const NetworkTopology& topology, std::mt19937_64* rng) {
  topology.validate();
  NetworkParams<T> p;
  for (std::size_t l = 0; l < topology.layers.size(); ++l) {
    const LayerSpec& layer = topology.layers[l];
    LayerParams<T> lp;
    lp.cell = make_cell<T>(layer, topology.layer_input_dim(l), rng);
    const std::size_t lower = topology.context_input_dim(l);
    lp.context = rng ? ContextParams<T>::init(layer.context, layer.projection, lower, *rng)
                     : ContextParams<T>::zeros(layer.context, layer.projection, lower);
    p.layers.push_back(std::move(lp));
  }
  const std::size_t top = topology.layers.back().units;
  const std::size_t head = topology.head_input_dim();
  if (topology.bottleneck_dim > 0) {
    p.bottleneck = rng ? Tensor<T>::uniform(topology.bottleneck_dim, top,
                                            static_cast<T>(glorot_bound(top, topology.bottleneck_dim)), *rng)
                       : Tensor<T>(topology.bottleneck_dim, top);
  }
  p.output_w = rng ? Tensor<T>::uniform(topology.output_dim, head,
                                        static_cast<T>(glorot_bound(head, topology.output_dim)), *rng)
                   : Tensor<T>(topology.output_dim, head);
  p.output_b = Tensor<T>(1, topology.output_dim);
  return p;
}

template <typename T>
Tensor<T> splice_frame(const NetworkTopology& topology, std::span<const Tensor<T>> sequences,
                       std::size_t frame) {
  const std::size_t frames = sequences.front().rows();
  const std::size_t d = topology.input_dim;
  Tensor<T> out(sequences.size(), topology.spliced_dim());
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    auto dst = out.row_span(b);
    std::size_t slot = 0;
    for (std::ptrdiff_t j = -static_cast<std::ptrdiff_t>(topology.splice_past);
         j <= static_cast<std::ptrdiff_t>(topology.splice_future); ++j, ++slot) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(frame) + j;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
      auto row = sequences[b].row_span(static_cast<std::size_t>(src));
      std::copy(row.begin(), row.end(), dst.begin() + slot * d);
    }
  }
  return out;
}

}  // namespace

template <typename T>
NetworkParams<T> NetworkParams<T>::zeros(const NetworkTopology& topology) {
  return build<T>(topology, nullptr);
}

template <typename T>
NetworkParams<T> NetworkParams<T>::init(const NetworkTopology& topology, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return build<T>(topology, &rng);
}

template <typename T>
std::size_t NetworkParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_param([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
std::vector<Tensor<T>*> param_tensors(NetworkParams<T>& params) {
  std::vector<Tensor<T>*> out;
  params.for_each_param([&](const std::string&, Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> param_tensors(const NetworkParams<T>& params) {
  std::vector<const Tensor<T>*> out;
  params.for_each_param([&](const std::string&, const Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <typename T>
void check_param_shapes(const NetworkTopology& topology, const NetworkParams<T>& params) {
  if (params.layers.size() != topology.layers.size()) {
    throw DimensionError("parameters hold " + std::to_string(params.layers.size()) +
                         " layers, topology " + std::to_string(topology.layers.size()));
  }
  std::vector<std::pair<std::string, std::string>> expected, actual;
  build<T>(topology, nullptr).for_each_param(
      [&](const std::string& name, const Tensor<T>& t) { expected.emplace_back(name, shape_of(t)); });
  params.for_each_param([&](const std::string& name, const Tensor<T>& t) { actual.emplace_back(name, shape_of(t)); });
  for (std::size_t i = 0; i < std::max(expected.size(), actual.size()); ++i) {
    if (i >= expected.size()) throw DimensionError("unexpected parameter " + actual[i].first);
    if (i >= actual.size()) throw DimensionError("missing parameter " + expected[i].first);
    if (expected[i] != actual[i]) {
      throw DimensionError("parameter " + actual[i].first + " " + actual[i].second + " where topology needs " +
                           expected[i].first + " " + expected[i].second);
    }
  }
}

std::ptrdiff_t target_frame(const NetworkTopology& topology, std::size_t output_step) noexcept {
  return static_cast<std::ptrdiff_t>(output_step * topology.output_period()) -
         static_cast<std::ptrdiff_t>(topology.output_delay_frames);
}

template <typename T>
ForwardResult<T> forward_batch(const NetworkTopology& topology, const NetworkParams<T>& params,
                               std::span<const Tensor<T>> sequences, BnMode mode,
                               std::vector<FrameAccess>* access_log) {
  topology.validate();
  check_param_shapes(topology, params);
  if (sequences.empty()) throw DimensionError("forward_batch: empty batch");
  const std::size_t frames = sequences.front().rows();
  if (frames == 0) throw DimensionError("forward_batch: empty sequence");
  for (const auto& s : sequences) expect_shape(s, frames, topology.input_dim, "input sequence");
  const std::size_t batch = sequences.size();

  ForwardResult<T> result;
  ForwardCache<T>& cache = result.cache;
  cache.frames = frames;
  cache.batch = batch;
  cache.mode = mode;
  cache.spliced.reserve(frames);
  for (std::size_t f = 0; f < frames; ++f) cache.spliced.push_back(splice_frame(topology, sequences, f));

  for (std::size_t l = 0; l < topology.layers.size(); ++l) {
    const LayerSpec& spec = topology.layers[l];
    const LayerParams<T>& lp = params.layers[l];
    if (static_cast<std::size_t>(lp.cell.index()) != static_cast<std::size_t>(spec.cell)) {
      throw DimensionError("layer " + std::to_string(l + 1) + ": parameter cell type differs from topology");
    }
    LayerTrace<T> trace;
    trace.period = spec.frame_period;
    const std::size_t lower_period = topology.lower_period(l);
    const std::vector<Tensor<T>>& lower_h = l == 0 ? cache.spliced : cache.layers[l - 1].h;
    const std::vector<Tensor<T>>* lower_v = l == 0 ? nullptr : &cache.layers[l - 1].v;
    const ContextSpec& ctx = spec.context;
    const std::size_t tap_width = topology.context_input_dim(l);
    const std::size_t steps = (frames + spec.frame_period - 1) / spec.frame_period;

    Tensor<T> h_prev(batch, spec.units);
    for (std::size_t k = 0; k < steps; ++k) {
      const std::size_t f = k * spec.frame_period;
      const std::size_t src = f / lower_period;
      std::size_t max_read = f;

      std::vector<Tensor<T>> taps;
      std::vector<std::ptrdiff_t> sources;
      if (ctx.kind != ContextKind::none) {
        for (std::size_t i = 1; i <= ctx.order; ++i) {
          const std::size_t g = f + ctx.stride * i;
          if (g < frames) {
            const std::size_t idx = g / lower_period;
            taps.push_back(ctx.kind == ContextKind::encoding ? (*lower_v)[idx] : lower_h[idx]);
            sources.push_back(static_cast<std::ptrdiff_t>(idx));
            max_read = std::max(max_read, g);
          } else {
            taps.push_back(Tensor<T>(batch, tap_width));
            sources.push_back(-1);
          }
        }
      }
      if (access_log != nullptr) {
        std::size_t logged = max_read;
        if (l == 0) logged = std::min(max_read + topology.splice_future, frames - 1);
        access_log->push_back({l, f, logged});
      }

      ContextCache<T> ctx_cache;
      Tensor<T> context_term;
      if (ctx.kind == ContextKind::encoding) {
        context_term = temporal_encode<T>(ctx, lp.context, taps, spec.projection, batch, &ctx_cache);
      } else if (ctx.kind == ContextKind::convolution) {
        context_term = temporal_convolve<T>(ctx, lp.context, taps, &ctx_cache);
      }

      const Tensor<T>& x = lower_h[src];
      std::visit(
          [&](const auto& cell) {
            using P = std::decay_t<decltype(cell)>;
            if constexpr (std::is_same_v<P, GruParams<T>>) {
              auto step = gru_step(cell, x, h_prev);
              h_prev = std::move(step.h);
              trace.cells.emplace_back(std::move(step.cache));
            } else if constexpr (std::is_same_v<P, MgruParams<T>>) {
              auto step = mgru_step(cell, x, h_prev, mode);
              h_prev = std::move(step.h);
              trace.cells.emplace_back(std::move(step.cache));
            } else {
              auto step = mgruip_step(cell, x, h_prev,
                                      ctx.kind == ContextKind::none ? nullptr : &context_term, mode);
              h_prev = std::move(step.h);
              trace.v.push_back(std::move(step.v));
              trace.cells.emplace_back(std::move(step.cache));
            }
          },
          lp.cell);
      trace.h.push_back(h_prev);
      trace.contexts.push_back(std::move(ctx_cache));
      trace.input_source.push_back(src);
      trace.context_sources.push_back(std::move(sources));
    }
    cache.layers.push_back(std::move(trace));
  }

  const LayerTrace<T>& top = cache.layers.back();
  result.logits.reserve(top.h.size());
  for (const Tensor<T>& h : top.h) {
    if (!params.bottleneck.empty()) {
      cache.head_hidden.push_back(matmul_nt(h, params.bottleneck));
      result.logits.push_back(add_row(matmul_nt(cache.head_hidden.back(), params.output_w), params.output_b));
    } else {
      result.logits.push_back(add_row(matmul_nt(h, params.output_w), params.output_b));
    }
  }
  return result;
}

template <typename T>
void apply_running_stats(NetworkParams<T>& params, const ForwardCache<T>& cache) {
  if (cache.mode != BnMode::train) return;
  for (std::size_t l = 0; l < cache.layers.size(); ++l) {
    for (const CellCache<T>& c : cache.layers[l].cells) {
      if (const auto* m = std::get_if<MgruCache<T>>(&c)) {
        update_running_stats(std::get<MgruParams<T>>(params.layers[l].cell).bn, m->bn);
      } else if (const auto* mp = std::get_if<MgruipCache<T>>(&c)) {
        update_running_stats(std::get<MgruipParams<T>>(params.layers[l].cell).bn, mp->bn);
      }
    }
  }
}

template <typename T>
Tensor<T> forward_sequence(const NetworkTopology& topology, const NetworkParams<T>& params,
                           const Tensor<T>& frames) {
  const std::span<const Tensor<T>> one(&frames, 1);
  ForwardResult<T> r = forward_batch(topology, params, one, BnMode::infer);
  Tensor<T> out(r.logits.size(), topology.output_dim);
  for (std::size_t k = 0; k < r.logits.size(); ++k) {
    std::copy(r.logits[k].values().begin(), r.logits[k].values().end(), out.row_span(k).begin());
  }
  return out;
}

template <typename T>
NetworkParams<T> backward_batch(const NetworkTopology& topology, const NetworkParams<T>& params,
                                const ForwardCache<T>& cache, std::span<const Tensor<T>> grad_logits) {
  if (cache.layers.size() != topology.layers.size() || cache.layers.empty()) {
    throw ContractError("backward_batch: cache does not match the topology");
  }
  const LayerTrace<T>& top = cache.layers.back();
  if (grad_logits.size() != top.h.size()) {
    throw ContractError("backward_batch: " + std::to_string(grad_logits.size()) +
                        " logit gradients for " + std::to_string(top.h.size()) + " outputs");
  }
  const std::size_t batch = cache.batch;
  NetworkParams<T> grads = NetworkParams<T>::zeros(topology);

  const std::size_t n_layers = topology.layers.size();
  std::vector<std::vector<Tensor<T>>> dh(n_layers);
  std::vector<std::vector<Tensor<T>>> dv(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    dh[l].assign(cache.layers[l].h.size(), Tensor<T>(batch, topology.layers[l].units));
    dv[l].resize(cache.layers[l].h.size());
  }

  for (std::size_t k = 0; k < grad_logits.size(); ++k) {
    const Tensor<T>& g = grad_logits[k];
    expect_shape(g, batch, topology.output_dim, "logit gradient");
    grads.output_b += sum_rows(g);
    const Tensor<T> dhead = matmul(g, params.output_w);
    if (!params.bottleneck.empty()) {
      grads.output_w += matmul_tn(g, cache.head_hidden[k]);
      grads.bottleneck += matmul_tn(dhead, top.h[k]);
      dh[n_layers - 1][k] += matmul(dhead, params.bottleneck);
    } else {
      grads.output_w += matmul_tn(g, top.h[k]);
      dh[n_layers - 1][k] += dhead;
    }
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const LayerSpec& spec = topology.layers[l];
    const LayerTrace<T>& trace = cache.layers[l];
    const LayerParams<T>& lp = params.layers[l];
    LayerParams<T>& lg = grads.layers[l];
    for (std::size_t k = trace.h.size(); k-- > 0;) {
      const Tensor<T>* dv_ext = dv[l][k].empty() ? nullptr : &dv[l][k];
      CellInputGrads<T> ig = cell_backward(lp.cell, trace.cells[k], dh[l][k], dv_ext, lg.cell);
      if (k > 0) dh[l][k - 1] += ig.dh_prev;
      if (l > 0) dh[l - 1][trace.input_source[k]] += ig.dx;
      if (spec.context.kind == ContextKind::none) continue;

      std::vector<Tensor<T>> taps = context_backward(spec.context, lp.context, trace.contexts[k],
                                                     ig.dcontext, lg.context);
      const auto& sources = trace.context_sources[k];
      for (std::size_t i = 0; i < taps.size(); ++i) {
        if (sources[i] < 0 || l == 0) continue;
        const auto idx = static_cast<std::size_t>(sources[i]);
        if (spec.context.kind == ContextKind::encoding) {
          if (dv[l - 1][idx].empty()) dv[l - 1][idx] = Tensor<T>(batch, spec.projection);
          dv[l - 1][idx] += taps[i];
        } else {
          dh[l - 1][idx] += taps[i];
        }
      }
    }
  }
  return grads;
}

template <typename T>
LossResult<T> masked_cross_entropy(const NetworkTopology& topology, std::span<const Tensor<T>> logits,
                                   std::span<const std::vector<int>> labels) {
  LossResult<T> r;
  r.grad_logits.reserve(logits.size());
  for (const auto& lg : logits) r.grad_logits.emplace_back(lg.rows(), lg.cols());
  if (logits.empty()) return r;
  const std::size_t batch = logits.front().rows();
  if (labels.size() != batch) {
    throw DimensionError("masked_cross_entropy: " + std::to_string(labels.size()) + " label rows for batch " +
                         std::to_string(batch));
  }
  const std::size_t classes = topology.output_dim;
  double total = 0.0;
  std::vector<T> prob(classes);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    expect_shape(logits[k], batch, classes, "logits");
    const std::ptrdiff_t tf = target_frame(topology, k);
    if (tf < 0) continue;
    for (std::size_t b = 0; b < batch; ++b) {
      if (static_cast<std::size_t>(tf) >= labels[b].size()) {
        throw DimensionError("masked_cross_entropy: label sequence shorter than the input");
      }
      const int label = labels[b][static_cast<std::size_t>(tf)];
      if (label < 0 || static_cast<std::size_t>(label) >= classes) {
        throw DimensionError("masked_cross_entropy: label " + std::to_string(label) + " out of range");
      }
      auto row = logits[k].row_span(b);
      const T mx = *std::max_element(row.begin(), row.end());
      T denom{0};
      std::size_t argmax = 0;
      for (std::size_t c = 0; c < classes; ++c) {
        prob[c] = std::exp(row[c] - mx);
        denom += prob[c];
        if (row[c] > row[argmax]) argmax = c;
      }
      for (auto& p : prob) p /= denom;
      // The loss value is accumulated in double whatever T is.
      double denom_wide = 0.0;
      for (std::size_t c = 0; c < classes; ++c) denom_wide += std::exp(static_cast<double>(row[c]) - mx);
      total += -(static_cast<double>(row[static_cast<std::size_t>(label)]) - mx - std::log(denom_wide));
      auto g = r.grad_logits[k].row_span(b);
      for (std::size_t c = 0; c < classes; ++c) g[c] = prob[c];
      g[static_cast<std::size_t>(label)] -= T{1};
      ++r.counted;
      if (argmax == static_cast<std::size_t>(label)) ++r.correct;
    }
  }
  if (r.counted == 0) return r;
  r.loss = total / static_cast<double>(r.counted);
  const T scale = T{1} / static_cast<T>(r.counted);
  for (auto& g : r.grad_logits) g *= scale;
  return r;
}

#define MGRUIP_INSTANTIATE_NETWORK(T)                                                               \
  template struct NetworkParams<T>;                                                                 \
  template std::vector<Tensor<T>*> param_tensors<T>(NetworkParams<T>&);                             \
  template std::vector<const Tensor<T>*> param_tensors<T>(const NetworkParams<T>&);                 \
  template void check_param_shapes<T>(const NetworkTopology&, const NetworkParams<T>&);               \
  template ForwardResult<T> forward_batch<T>(const NetworkTopology&, const NetworkParams<T>&,       \
                                             std::span<const Tensor<T>>, BnMode,                    \
                                             std::vector<FrameAccess>*);                            \
  template void apply_running_stats<T>(NetworkParams<T>&, const ForwardCache<T>&);                  \
  template Tensor<T> forward_sequence<T>(const NetworkTopology&, const NetworkParams<T>&,           \
                                         const Tensor<T>&);                                         \
  template NetworkParams<T> backward_batch<T>(const NetworkTopology&, const NetworkParams<T>&,      \
                                              const ForwardCache<T>&, std::span<const Tensor<T>>);  \
  template LossResult<T> masked_cross_entropy<T>(const NetworkTopology&, std::span<const Tensor<T>>, \
                                                 std::span<const std::vector<int>>);

MGRUIP_INSTANTIATE_NETWORK(float)
MGRUIP_INSTANTIATE_NETWORK(double)

}  // namespace mgruip
