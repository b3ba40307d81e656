#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "mgruip/accounting.hpp"
#include "mgruip/streaming.hpp"
#include "support.hpp"

namespace mgruip {
namespace {

using test::gaussian;

LayerSpec layer(CellType cell, std::size_t period, ContextSpec ctx = {}) {
  LayerSpec l;
  l.cell = cell;
  l.units = 6;
  l.projection = cell == CellType::mgruip ? 3 : 0;
  l.frame_period = period;
  l.context = ctx;
  return l;
}

// First-layer cell x upper-layer context kind, plus a few shapes the matrix misses.
std::vector<std::pair<std::string, NetworkTopology>> topologies() {
  std::vector<std::pair<std::string, NetworkTopology>> out;
  for (CellType first : {CellType::gru, CellType::mgru, CellType::mgruip}) {
    for (ContextKind kind : {ContextKind::none, ContextKind::encoding, ContextKind::convolution}) {
      NetworkTopology t;
      t.input_dim = 2;
      t.output_dim = 3;
      t.bottleneck_dim = 4;
      t.layers.push_back(layer(first, 1));
      t.layers.push_back(layer(CellType::mgruip, 3, kind == ContextKind::convolution
                                                        ? ContextSpec{kind, 2, 1, EncodingTransform::identity}
                                                        : ContextSpec{}));
      ContextSpec top;
      if (kind == ContextKind::encoding) top = {kind, 2, 3, EncodingTransform::scale};
      if (kind == ContextKind::convolution) top = {kind, 1, 3, EncodingTransform::identity};
      t.layers.push_back(layer(CellType::mgruip, 3, top));
      out.emplace_back(std::string(to_string(first)) + "-" + std::string(to_string(kind)), t);
    }
  }
  NetworkTopology b;
  b.input_dim = 3;
  b.output_dim = 2;
  b.bottleneck_dim = 4;
  b.layers.push_back(layer(CellType::mgruip, 1));
  for (std::size_t s : {1u, 3u, 3u, 3u}) {
    b.layers.push_back(layer(CellType::mgruip, 3, {ContextKind::convolution, 1, s, EncodingTransform::identity}));
  }
  out.emplace_back("five-layer-conv", b);

  NetworkTopology causal;
  causal.input_dim = 2;
  causal.output_dim = 2;
  causal.splice_future = 0;
  causal.output_delay_frames = 0;
  causal.layers.push_back(layer(CellType::mgruip, 1));
  causal.layers.push_back(layer(CellType::mgru, 1));
  out.emplace_back("causal-100hz", causal);

  NetworkTopology fast_ctx = causal;
  fast_ctx.splice_past = 0;
  fast_ctx.layers[1] = layer(CellType::mgruip, 1, {ContextKind::encoding, 3, 2, EncodingTransform::affine});
  out.emplace_back("100hz-encoding", fast_ctx);

  NetworkTopology first_conv = causal;
  first_conv.splice_future = 1;
  first_conv.layers[0] = layer(CellType::mgruip, 1, {ContextKind::convolution, 2, 2, EncodingTransform::identity});
  first_conv.layers[1] = layer(CellType::gru, 3);
  out.emplace_back("first-layer-conv", first_conv);
  return out;
}

template <typename T>
std::vector<StreamOutput<T>> stream_all(const NetworkTopology& t, const NetworkParams<T>& p, const Tensor<T>& x) {
  StreamState<T> s(t, p);
  std::vector<StreamOutput<T>> out;
  for (std::size_t f = 0; f < x.rows(); ++f) {
    auto o = s.push(x.row_span(f));
    out.insert(out.end(), o.begin(), o.end());
  }
  auto o = s.flush();
  out.insert(out.end(), o.begin(), o.end());
  return out;
}

template <typename T>
double discrepancy(const std::vector<StreamOutput<T>>& streamed, const Tensor<T>& offline) {
  double worst = 0.0;
  for (std::size_t k = 0; k < streamed.size(); ++k)
    for (std::size_t c = 0; c < offline.cols(); ++c)
      worst = std::max(worst, std::abs(static_cast<double>(streamed[k].logits(0, c)) - offline(k, c)));
  return worst;
}

TEST(Stream, FlushRightAfterOpenIsEmpty) {
  for (const auto& [name, t] : topologies()) {
    const auto p = NetworkParams<float>::init(t, 1);
    StreamState<float> s(t, p);
    EXPECT_TRUE(s.flush().empty()) << name;
    EXPECT_TRUE(s.flushed());
  }
}

TEST(Stream, LookaheadEqualsLatencyCalculator) {
  for (const auto& [name, t] : topologies()) {
    const auto p = NetworkParams<float>::init(t, 1);
    StreamState<float> s(t, p);
    const std::size_t lookahead = compute_latency(t).lookahead_frames;
    EXPECT_EQ(s.lookahead_frames(), lookahead) << name;
    std::size_t sum = 0;
    for (const StreamBufferInfo& b : s.buffers()) sum += b.future_frames;
    EXPECT_EQ(sum, lookahead) << name;
  }
}

TEST(Stream, MatchesOfflineOnRandomSixtyFrames) {
  std::mt19937_64 rng(2);
  for (const auto& [name, t] : topologies()) {
    const auto p = NetworkParams<float>::init(t, 3);
    const Tensor<float> x = gaussian<float>(60, t.input_dim, rng);
    const Tensor<float> offline = forward_sequence(t, p, x);
    const auto streamed = stream_all(t, p, x);
    ASSERT_EQ(streamed.size(), offline.rows()) << name;
    EXPECT_LT(discrepancy(streamed, offline), 1e-5) << name;
    for (std::size_t k = 0; k < streamed.size(); ++k) EXPECT_EQ(streamed[k].frame, k * t.output_period()) << name;
  }
}

TEST(Stream, EveryLengthMatchesOffline) {
  std::mt19937_64 rng(4);
  for (const auto& [name, t] : topologies()) {
    const auto p = NetworkParams<double>::init(t, 5);
    for (std::size_t n = 1; n <= 40; ++n) {
      const Tensor<double> x = gaussian<double>(n, t.input_dim, rng);
      const Tensor<double> offline = forward_sequence(t, p, x);
      const auto streamed = stream_all(t, p, x);
      ASSERT_EQ(streamed.size(), offline.rows()) << name << " length " << n;
      EXPECT_LT(discrepancy(streamed, offline), 1e-12) << name << " length " << n;
    }
  }
}

// Pushes 1..L emit nothing; push L + 1 completes the window of output 0.
TEST(Stream, FirstOutputArrivesAfterLookahead) {
  std::mt19937_64 rng(6);
  for (const auto& [name, t] : topologies()) {
    const auto p = NetworkParams<float>::init(t, 7);
    const std::size_t lookahead = compute_latency(t).lookahead_frames;
    StreamState<float> s(t, p);
    const Tensor<float> x = gaussian<float>(lookahead + 1, t.input_dim, rng);
    for (std::size_t f = 0; f < lookahead; ++f) EXPECT_TRUE(s.push(x.row_span(f)).empty()) << name << " push " << f + 1;
    const auto first = s.push(x.row_span(lookahead));
    ASSERT_EQ(first.size(), 1u) << name;
    EXPECT_EQ(first[0].frame, 0u);
    EXPECT_EQ(first[0].consumed, lookahead + 1);
  }
}

TEST(Stream, CausalEmitsOnEveryPush) {
  const auto all = topologies();
  const NetworkTopology& t = std::find_if(all.begin(), all.end(), [](const auto& e) { return e.first == "causal-100hz"; })->second;
  ASSERT_EQ(compute_latency(t).lookahead_frames, 0u);
  const auto p = NetworkParams<float>::init(t, 8);
  StreamState<float> s(t, p);
  std::mt19937_64 rng(9);
  const Tensor<float> x = gaussian<float>(25, t.input_dim, rng);
  for (std::size_t f = 0; f < x.rows(); ++f) {
    const auto out = s.push(x.row_span(f));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].frame, f);
  }
  EXPECT_TRUE(s.flush().empty());
}

TEST(Stream, FlushEmitsTheOfflineTail) {
  std::mt19937_64 rng(10);
  for (const auto& [name, t] : topologies()) {
    const auto p = NetworkParams<float>::init(t, 11);
    const Tensor<float> x = gaussian<float>(47, t.input_dim, rng);
    const Tensor<float> offline = forward_sequence(t, p, x);
    StreamState<float> s(t, p);
    std::size_t before = 0;
    for (std::size_t f = 0; f < x.rows(); ++f) before += s.push(x.row_span(f)).size();
    const auto tail = s.flush();
    EXPECT_EQ(before + tail.size(), offline.rows()) << name;
    EXPECT_EQ(s.outputs_emitted(), offline.rows());
    for (std::size_t i = 0; i < tail.size(); ++i)
      for (std::size_t c = 0; c < offline.cols(); ++c)
        EXPECT_NEAR(tail[i].logits(0, c), offline(before + i, c), 1e-5) << name;
  }
}

TEST(Stream, StreamsAreIndependent) {
  const auto all = topologies();
  const NetworkTopology& t = all.back().second;
  const auto p = NetworkParams<float>::init(t, 12);
  std::mt19937_64 rng(13);
  const Tensor<float> x = gaussian<float>(30, t.input_dim, rng);
  const Tensor<float> noise = gaussian<float>(30, t.input_dim, rng, 10.0);
  StreamState<float> a(t, p), b(t, p);
  std::vector<StreamOutput<float>> from_a;
  for (std::size_t f = 0; f < x.rows(); ++f) {
    b.push(noise.row_span(f));
    auto o = a.push(x.row_span(f));
    from_a.insert(from_a.end(), o.begin(), o.end());
  }
  b.flush();
  auto o = a.flush();
  from_a.insert(from_a.end(), o.begin(), o.end());
  EXPECT_EQ(discrepancy(from_a, forward_sequence(t, p, x)), 0.0);
}

TEST(Stream, OccupancyStaysBounded) {
  std::mt19937_64 rng(14);
  for (const auto& [name, t] : topologies()) {
    const auto p = NetworkParams<float>::init(t, 15);
    std::vector<std::size_t> peaks;
    for (std::size_t n : {50u, 400u}) {
      StreamState<float> s(t, p);
      const Tensor<float> x = gaussian<float>(n, t.input_dim, rng);
      for (std::size_t f = 0; f < n; ++f) s.push(x.row_span(f));
      s.flush();
      std::size_t total = 0;
      for (const StreamBufferInfo& b : s.buffers()) {
        EXPECT_LE(b.max_occupancy, b.capacity) << name << " " << b.name;
        total += b.max_occupancy;
      }
      peaks.push_back(total);
    }
    EXPECT_EQ(peaks[0], peaks[1]) << name;
  }
}

TEST(Stream, MisuseIsRejected) {
  const auto all = topologies();
  const NetworkTopology& t = all.front().second;
  const auto p = NetworkParams<float>::init(t, 16);
  StreamState<float> s(t, p);
  const std::vector<float> wrong(t.input_dim + 1, 0.0f);
  EXPECT_THROW(s.push(wrong), DimensionError);
  s.flush();
  const std::vector<float> frame(t.input_dim, 0.0f);
  EXPECT_THROW(s.push(frame), ContractError);
  EXPECT_THROW(s.flush(), ContractError);
  const auto other = NetworkParams<float>::init(all[2].second, 16);
  EXPECT_THROW(StreamState<float>(t, other), DimensionError);
}

NetworkTopology five_layer(bool contexts) {
  NetworkTopology t;
  t.input_dim = 3;
  t.output_dim = 2;
  t.bottleneck_dim = 4;
  t.layers.push_back(layer(CellType::mgruip, 1));
  for (std::size_t s : {1u, 3u, 3u, 3u}) {
    t.layers.push_back(layer(CellType::mgruip, 3,
                             contexts ? ContextSpec{ContextKind::convolution, 1, s, EncodingTransform::identity}
                                      : ContextSpec{}));
  }
  return t;
}

TEST(MeasureLatency, MatchesAnalyticalFigures) {
  std::mt19937_64 rng(17);
  struct Case {
    NetworkTopology topology;
    double ms;
  };
  NetworkTopology causal = five_layer(false);
  causal.splice_future = 0;
  causal.output_delay_frames = 0;
  for (const Case& c : {Case{five_layer(false), 70.0}, Case{five_layer(true), 170.0}, Case{causal, 0.0}}) {
    const auto p = NetworkParams<float>::init(c.topology, 18);
    const LatencyMeasurement m = measure_latency(c.topology, p, gaussian<float>(90, 3, rng));
    EXPECT_EQ(m.max_delay_frames, compute_latency(c.topology).lookahead_frames);
    EXPECT_EQ(m.empirical_ms, c.ms);
    EXPECT_EQ(m.empirical_ms, compute_latency(c.topology).total_ms);
    EXPECT_EQ(m.delays.size(), 30u);
  }
}

TEST(MeasureLatency, EveryTopologyAgreesWithCalculator) {
  std::mt19937_64 rng(19);
  for (const auto& [name, t] : topologies()) {
    const auto p = NetworkParams<float>::init(t, 20);
    const LatencyMeasurement m = measure_latency(t, p, gaussian<float>(80, t.input_dim, rng));
    EXPECT_EQ(m.max_delay_frames, compute_latency(t).lookahead_frames) << name;
    EXPECT_EQ(m.empirical_ms, compute_latency(t).total_ms) << name;
  }
}

}  // namespace
}  // namespace mgruip
