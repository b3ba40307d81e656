#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mgruip/accounting.hpp"
#include "mgruip/grad_check.hpp"
#include "mgruip/network.hpp"
#include "support.hpp"

namespace mgruip {
namespace {

using test::gaussian;
using test::max_abs_diff;

LayerSpec mgruip_layer(std::size_t units, std::size_t projection, std::size_t period, ContextSpec ctx = {}) {
  LayerSpec l;
  l.cell = CellType::mgruip;
  l.units = units;
  l.projection = projection;
  l.frame_period = period;
  l.context = ctx;
  return l;
}

ContextSpec conv(std::size_t order, std::size_t stride) {
  return {ContextKind::convolution, order, stride, EncodingTransform::identity};
}

ContextSpec encd(std::size_t order, std::size_t stride, EncodingTransform t = EncodingTransform::identity) {
  return {ContextKind::encoding, order, stride, t};
}

// Five mGRUIP layers, MFR 1/3/3/3/3, contexts on layers 2-5 with K x s = 1x1, 1x3, 1x3, 1x3.
NetworkTopology toy_b(ContextKind kind) {
  NetworkTopology t;
  t.input_dim = 3;
  t.output_dim = 4;
  t.bottleneck_dim = 5;
  const std::size_t strides[] = {1, 3, 3, 3};
  t.layers.push_back(mgruip_layer(8, 4, 1));
  for (std::size_t s : strides) {
    ContextSpec ctx;
    if (kind == ContextKind::convolution) ctx = conv(1, s);
    if (kind == ContextKind::encoding) ctx = encd(1, s);
    t.layers.push_back(mgruip_layer(8, 4, 3, ctx));
  }
  return t;
}

template <typename T>
void randomize_non_weights(NetworkParams<T>& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  for (auto& layer : p.layers) {
    auto& cell = std::get<MgruipParams<T>>(layer.cell);
    cell.b_z = gaussian<T>(1, cell.units(), rng, 0.5);
    cell.b_h = gaussian<T>(1, cell.units(), rng, 0.5);
    cell.bn.beta = gaussian<T>(1, cell.units(), rng, 0.3);
    cell.bn.running_mean = gaussian<T>(1, cell.units(), rng, 0.3);
    for (auto& g : cell.bn.gamma.values()) g = static_cast<T>(pos(rng));
    for (auto& v : cell.bn.running_var.values()) v = static_cast<T>(pos(rng));
  }
  p.output_b = gaussian<T>(1, p.output_b.cols(), rng, 0.5);
}

using Vec = std::vector<double>;

Vec matvec(const Tensor<float>& w, const Vec& x) {
  Vec y(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) y[r] += static_cast<double>(w(r, c)) * x[c];
  return y;
}

// Straight-line evaluation of one sequence in infer mode, written against the
// cell and context definitions rather than the library's layer loop.
std::vector<Vec> unrolled_reference(const NetworkTopology& topo, const NetworkParams<float>& params,
                                    const Tensor<float>& input) {
  const std::ptrdiff_t frames = static_cast<std::ptrdiff_t>(input.rows());
  // Layer outputs and projections indexed by base frame; only frames the layer ran at are filled.
  std::vector<Vec> below_h(static_cast<std::size_t>(frames)), below_v;
  for (std::ptrdiff_t t = 0; t < frames; ++t) {
    Vec x;
    for (std::ptrdiff_t j = -static_cast<std::ptrdiff_t>(topo.splice_past);
         j <= static_cast<std::ptrdiff_t>(topo.splice_future); ++j)
      for (std::size_t d = 0; d < topo.input_dim; ++d)
        x.push_back(t + j >= 0 && t + j < frames ? input(static_cast<std::size_t>(t + j), d) : 0.0);
    below_h[static_cast<std::size_t>(t)] = x;
  }

  for (std::size_t l = 0; l < topo.layers.size(); ++l) {
    const LayerSpec& spec = topo.layers[l];
    const auto& p = std::get<MgruipParams<float>>(params.layers[l].cell);
    const auto& ctxp = params.layers[l].context;
    std::vector<Vec> out_h(static_cast<std::size_t>(frames)), out_v(static_cast<std::size_t>(frames));
    Vec h(spec.units, 0.0);
    for (std::ptrdiff_t t = 0; t < frames; t += static_cast<std::ptrdiff_t>(spec.frame_period)) {
      const std::size_t lp = topo.lower_period(l);
      auto lower_frame = [&](std::ptrdiff_t g) { return static_cast<std::size_t>(g / static_cast<std::ptrdiff_t>(lp) * static_cast<std::ptrdiff_t>(lp)); };
      Vec xh = below_h[lower_frame(t)];
      xh.insert(xh.end(), h.begin(), h.end());
      Vec v = matvec(p.W_v, xh);

      const ContextSpec& c = spec.context;
      for (std::size_t i = 1; i <= c.order; ++i) {
        const std::ptrdiff_t g = t + static_cast<std::ptrdiff_t>(c.stride * i);
        if (g >= frames) continue;
        if (c.kind == ContextKind::convolution) {
          const Vec& tap = below_h[lower_frame(g)];
          for (std::size_t r = 0; r < spec.projection; ++r)
            for (std::size_t k = 0; k < tap.size(); ++k)
              v[r] += static_cast<double>(ctxp.W_p(r, (i - 1) * tap.size() + k)) * tap[k];
        } else {
          const Vec& tap = below_v[lower_frame(g)];
          for (std::size_t r = 0; r < spec.projection; ++r) v[r] += tap[r];
        }
      }

      const Vec zpre = matvec(p.W_z, v);
      const Vec cpre = matvec(p.W_h, v);
      for (std::size_t u = 0; u < spec.units; ++u) {
        const double z = 1.0 / (1.0 + std::exp(-(zpre[u] + p.b_z[u])));
        const double norm = (cpre[u] - p.bn.running_mean[u]) /
                                std::sqrt(static_cast<double>(p.bn.running_var[u]) + p.bn.epsilon) *
                                p.bn.gamma[u] +
                            p.bn.beta[u];
        const double cand = std::max(0.0, norm + p.b_h[u]);
        h[u] = z * h[u] + (1.0 - z) * cand;
      }
      out_h[static_cast<std::size_t>(t)] = h;
      out_v[static_cast<std::size_t>(t)] = v;
    }
    below_h = std::move(out_h);
    below_v = std::move(out_v);
  }

  std::vector<Vec> logits;
  for (std::ptrdiff_t t = 0; t < frames; t += static_cast<std::ptrdiff_t>(topo.output_period())) {
    Vec y = matvec(params.output_w, matvec(params.bottleneck, below_h[static_cast<std::size_t>(t)]));
    for (std::size_t c = 0; c < y.size(); ++c) y[c] += params.output_b[c];
    logits.push_back(y);
  }
  return logits;
}

void expect_matches_reference(ContextKind kind, std::uint64_t seed) {
  const NetworkTopology topo = toy_b(kind);
  auto params = NetworkParams<float>::init(topo, seed);
  std::mt19937_64 rng(seed + 100);
  randomize_non_weights(params, rng);
  const Tensor<float> input = gaussian<float>(60, topo.input_dim, rng);
  const Tensor<float> got = forward_sequence(topo, params, input);
  const std::vector<Vec> want = unrolled_reference(topo, params, input);
  ASSERT_EQ(got.rows(), want.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < want.size(); ++k)
    for (std::size_t c = 0; c < topo.output_dim; ++c) worst = std::max(worst, std::abs(got(k, c) - want[k][c]));
  EXPECT_LT(worst, 1e-5) << to_string(kind) << " seed " << seed;
}

TEST(Forward, MatchesUnrolledReferenceWithConvolution) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) expect_matches_reference(ContextKind::convolution, seed);
}

TEST(Forward, MatchesUnrolledReferenceWithEncoding) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) expect_matches_reference(ContextKind::encoding, seed);
}

TEST(Forward, MatchesUnrolledReferenceWithoutContext) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) expect_matches_reference(ContextKind::none, seed);
}

TEST(Forward, SingleFrameSingleLayer) {
  NetworkTopology t;
  t.input_dim = 3;
  t.output_dim = 2;
  t.layers.push_back(mgruip_layer(4, 2, 1));
  const auto p = NetworkParams<float>::init(t, 1);
  const Tensor<float> out = forward_sequence(t, p, Tensor<float>(1, 3, 0.5f));
  EXPECT_EQ(out.rows(), 1u);
  EXPECT_EQ(out.cols(), 2u);
}

TEST(Forward, OutputLengthIsCeilOfFramesOverPeriod) {
  const NetworkTopology t = toy_b(ContextKind::none);
  const auto p = NetworkParams<float>::init(t, 2);
  for (std::size_t frames : {1u, 2u, 3u, 4u, 59u, 60u, 61u}) {
    EXPECT_EQ(forward_sequence(t, p, Tensor<float>(frames, 3, 0.1f)).rows(), (frames + 2) / 3) << frames;
  }
  NetworkTopology single;
  single.input_dim = 3;
  single.output_dim = 2;
  single.layers.push_back(mgruip_layer(4, 2, 1));
  const auto q = NetworkParams<float>::init(single, 2);
  EXPECT_EQ(forward_sequence(single, q, Tensor<float>(7, 3, 0.1f)).rows(), 7u);
}

TEST(Forward, Errors) {
  const NetworkTopology t = toy_b(ContextKind::none);
  const auto p = NetworkParams<float>::init(t, 3);
  EXPECT_THROW(forward_sequence(t, p, Tensor<float>(0, 3)), DimensionError);
  EXPECT_THROW(forward_sequence(t, p, Tensor<float>(5, 4)), DimensionError);
  const auto other = NetworkParams<float>::init(toy_b(ContextKind::convolution), 3);
  EXPECT_THROW(forward_sequence(t, other, Tensor<float>(5, 3)), std::exception);
}

// Zeroed context weights must reproduce the context-free network.
TEST(Forward, ZeroedContextsMatchNoContext) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    for (ContextKind kind : {ContextKind::convolution, ContextKind::encoding}) {
      NetworkTopology with = toy_b(kind);
      if (kind == ContextKind::encoding)
        for (std::size_t l = 1; l < with.layers.size(); ++l) with.layers[l].context.transform = EncodingTransform::scale;
      const NetworkTopology without = toy_b(ContextKind::none);
      auto pw = NetworkParams<double>::init(with, 10 + trial);
      randomize_non_weights(pw, rng);
      NetworkParams<double> pn = pw;
      for (std::size_t l = 0; l < pw.layers.size(); ++l) {
        pw.layers[l].context.for_each_param([](const std::string&, Tensor<double>& t) { t.set_zero(); });
        pn.layers[l].context = {};
      }
      const Tensor<double> x = gaussian<double>(20 + static_cast<std::size_t>(trial), 3, rng);
      EXPECT_LT(max_abs_diff(forward_sequence(with, pw, x), forward_sequence(without, pn, x)), 1e-7);
    }
  }
}

// Output step k at base frame t = 3k may only depend on input frames <= t + lookahead.
TEST(Forward, OutputsIgnoreInputsBeyondLookahead) {
  for (ContextKind kind : {ContextKind::none, ContextKind::encoding, ContextKind::convolution}) {
    const NetworkTopology t = toy_b(kind);
    const std::size_t lookahead = compute_latency(t).lookahead_frames;
    const auto p = NetworkParams<double>::init(t, 5);
    std::mt19937_64 rng(6);
    const Tensor<double> x = gaussian<double>(45, 3, rng);
    const Tensor<double> base = forward_sequence(t, p, x);
    for (std::size_t k = 0; k < base.rows(); ++k) {
      const std::size_t frame = 3 * k;
      const std::size_t first_hidden = frame + lookahead + 1;
      if (first_hidden >= x.rows()) continue;
      Tensor<double> y = x;
      for (std::size_t f = first_hidden; f < y.rows(); ++f)
        for (std::size_t d = 0; d < 3; ++d) y(f, d) += 5.0;
      const Tensor<double> changed = forward_sequence(t, p, y);
      for (std::size_t c = 0; c < base.cols(); ++c) EXPECT_EQ(changed(k, c), base(k, c)) << to_string(kind);
      // The frame just inside the window does matter.
      Tensor<double> z = x;
      z(first_hidden - 1, 0) += 5.0;
      EXPECT_GT(max_abs_diff(forward_sequence(t, p, z), base), 0.0);
    }
  }
}

TEST(Forward, AccessLogStaysWithinLookahead) {
  const NetworkTopology t = toy_b(ContextKind::convolution);
  const LatencyReport lat = compute_latency(t);
  const auto p = NetworkParams<float>::init(t, 7);
  std::mt19937_64 rng(8);
  const std::vector<Tensor<float>> x{gaussian<float>(40, 3, rng)};
  std::vector<FrameAccess> log;
  forward_batch<float>(t, p, x, BnMode::infer, &log);
  ASSERT_FALSE(log.empty());
  for (const FrameAccess& a : log) {
    std::size_t allowed = a.frame + t.splice_future;
    for (std::size_t l = 0; l <= a.layer; ++l) allowed += lat.context_frames[l];
    EXPECT_LE(a.max_lower_frame, allowed) << "layer " << a.layer << " frame " << a.frame;
    EXPECT_LE(a.max_lower_frame, a.frame + lat.lookahead_frames);
  }
}

TEST(Forward, TargetFrameShiftsByDelay) {
  const NetworkTopology t = toy_b(ContextKind::none);
  EXPECT_EQ(target_frame(t, 0), -5);
  EXPECT_EQ(target_frame(t, 1), -2);
  EXPECT_EQ(target_frame(t, 2), 1);
  EXPECT_EQ(target_frame(t, 10), 25);
}

NetworkTopology single_layer(CellType cell, std::size_t inputs, std::size_t units, std::size_t projection) {
  NetworkTopology t;
  t.input_dim = inputs;
  t.splice_past = 0;
  t.splice_future = 0;
  t.output_dim = 2;
  LayerSpec l;
  l.cell = cell;
  l.units = units;
  l.projection = projection;
  t.layers.push_back(l);
  return t;
}

TEST(Accounting, MgruFormulaAtFullSize) {
  EXPECT_EQ(mgru_parameter_formula(1024, 1024), 4194304u);
  const ParameterReport r = count_parameters(single_layer(CellType::mgru, 1024, 1024, 0));
  EXPECT_EQ(r.layers.at(0).weights, 4194304u);
  EXPECT_EQ(r.total_bias_free, 4194304u);
}

TEST(Accounting, MgruipIsHalfOfMgru) {
  const ParameterReport r = count_parameters(single_layer(CellType::mgruip, 1024, 1024, 512));
  EXPECT_EQ(r.layers.at(0).weights, mgruip_parameter_formula(1024, 1024, 512));
  EXPECT_EQ(r.layers.at(0).mgru_equivalent, 4194304u);
  EXPECT_EQ(r.layers.at(0).ratio_vs_mgru(), 0.5);
}

TEST(Accounting, FormulasByHand) {
  EXPECT_EQ(mgruip_parameter_formula(3, 4, 2), 7u * 2 + 2 * 4 * 2);
  EXPECT_EQ(mgru_parameter_formula(3, 4), 3u * 4 * 2 + 4 * 4 * 2);
  EXPECT_EQ(gru_parameter_formula(3, 4), 3u * 4 * 3 + 4 * 4 * 3);
}

NetworkTopology wide_b(ContextSpec upper) {
  NetworkTopology t;
  t.input_dim = 40;
  t.output_dim = 100;
  t.layers.push_back(mgruip_layer(2560, 256, 1));
  for (int i = 0; i < 4; ++i) t.layers.push_back(mgruip_layer(2560, 256, 3, upper));
  return t;
}

TEST(Accounting, ConvolutionContextDelta) {
  const ParameterReport plain = count_parameters(wide_b({}));
  const ParameterReport with = count_parameters(wide_b(conv(1, 3)));
  EXPECT_EQ(with.layers.at(1).context, 655360u);
  EXPECT_EQ(with.total_bias_free - plain.total_bias_free, 2621440u);
  EXPECT_EQ(with.total_with_bias - plain.total_with_bias, 2621440u);
}

TEST(Accounting, ContextDeltaIsOrderTimesWidthTimesProjection) {
  const NetworkTopology base = toy_b(ContextKind::none);
  const std::size_t before = count_parameters(base).total_with_bias;
  for (std::size_t l = 1; l < base.layers.size(); ++l) {
    for (std::size_t order : {1u, 2u, 3u}) {
      NetworkTopology t = base;
      t.layers[l].context = conv(order, 3);
      EXPECT_EQ(count_parameters(t).total_with_bias - before, order * t.layer_input_dim(l) * t.layers[l].projection);
      t.layers[l].context = encd(order, 3);
      EXPECT_EQ(count_parameters(t).total_with_bias, before);
      t.layers[l].context = encd(order, 3, EncodingTransform::affine);
      EXPECT_EQ(count_parameters(t).total_with_bias - before, t.layers[l].projection * t.layers[l].projection);
    }
  }
}

TEST(Accounting, WithBiasTotalMatchesParamsTensors) {
  for (ContextKind kind : {ContextKind::none, ContextKind::encoding, ContextKind::convolution}) {
    const NetworkTopology t = toy_b(kind);
    EXPECT_EQ(count_parameters(t).total_with_bias, NetworkParams<float>::zeros(t).parameter_count());
  }
}

NetworkTopology latency_base(ContextKind kind) {
  NetworkTopology t = toy_b(kind);
  t.splice_future = 2;
  t.output_delay_frames = 5;
  return t;
}

TEST(Latency, BaselineIsSeventyMs) {
  const LatencyReport r = compute_latency(latency_base(ContextKind::none));
  EXPECT_EQ(r.total_ms, 70.0);
  EXPECT_EQ(r.lookahead_frames, 2u);
  EXPECT_EQ(r.output_delay_ms, 50.0);
}

TEST(Latency, ContextScheduleIsOneSeventyMs) {
  const LatencyReport r = compute_latency(latency_base(ContextKind::convolution));
  EXPECT_EQ(r.total_ms, 170.0);
  EXPECT_EQ(r.lookahead_frames, 12u);
  EXPECT_EQ(compute_latency(latency_base(ContextKind::encoding)).total_ms, 170.0);
}

TEST(Latency, CausalIsZero) {
  NetworkTopology t = toy_b(ContextKind::none);
  t.splice_future = 0;
  t.output_delay_frames = 0;
  EXPECT_EQ(compute_latency(t).total_ms, 0.0);
}

TEST(Latency, PartsAddUp) {
  const NetworkTopology t = latency_base(ContextKind::convolution);
  const LatencyReport r = compute_latency(t);
  double sum = r.splice_ms + r.output_delay_ms;
  for (double c : r.context_ms) sum += c;
  EXPECT_EQ(sum, r.total_ms);
  for (std::size_t l = 1; l < t.layers.size(); ++l) {
    NetworkTopology cut = t;
    const ContextSpec removed = cut.layers[l].context;
    cut.layers[l].context = {};
    EXPECT_EQ(r.total_ms - compute_latency(cut).total_ms, 10.0 * static_cast<double>(removed.order * removed.stride));
  }
}

// Two-layer toy, convolution K=1 s=1 on layer 2, six frames.
NetworkTopology two_layer_toy() {
  NetworkTopology t;
  t.input_dim = 3;
  t.splice_past = 0;
  t.splice_future = 0;
  t.output_dim = 3;
  t.bottleneck_dim = 0;
  t.output_delay_frames = 0;
  t.layers.push_back(mgruip_layer(4, 2, 1));
  t.layers.push_back(mgruip_layer(4, 2, 1, conv(1, 1)));
  return t;
}

struct Batch {
  std::vector<Tensor<float>> frames;
  std::vector<std::vector<int>> labels;
};

Batch random_batch(const NetworkTopology& t, std::size_t batch, std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(0, static_cast<int>(t.output_dim) - 1);
  Batch b;
  for (std::size_t i = 0; i < batch; ++i) {
    b.frames.push_back(gaussian<float>(frames, t.input_dim, rng));
    std::vector<int> l(frames);
    for (int& c : l) c = cls(rng);
    b.labels.push_back(l);
  }
  return b;
}

TEST(Backward, TwoLayerToyMatchesFiniteDifferences) {
  const NetworkTopology t = two_layer_toy();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = NetworkParams<float>::init(t, seed);
    const Batch b = random_batch(t, 8, 6, seed + 50);
    for (BnMode mode : {BnMode::train, BnMode::infer}) {
      GradCheckOptions o = default_grad_check_options<float>();
      o.mode = mode;
      const GradCheckReport r = grad_check<float>(t, p, b.frames, b.labels, o);
      EXPECT_TRUE(r.passed) << "seed " << seed << " " << r.worst_parameter << " rel " << r.max_rel_error;
      EXPECT_EQ(r.checked, p.parameter_count());
    }
  }
}

TEST(Backward, CorruptedGradientIsCaught) {
  const NetworkTopology t = two_layer_toy();
  const auto p = NetworkParams<float>::init(t, 1);
  const Batch b = random_batch(t, 8, 6, 9);
  const GradCheckReport r = grad_check<float>(t, p, b.frames, b.labels, default_grad_check_options<float>(),
                                              [](NetworkParams<float>& g) { g.layers[1].context.W_p[0] += 0.05f; });
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_parameter, "layer2.context.W_p[0]");
}

TEST(Backward, GradientIsLinearInUpstream) {
  const NetworkTopology t = toy_b(ContextKind::convolution);
  const auto p = NetworkParams<double>::init(t, 11);
  std::mt19937_64 rng(12);
  const std::vector<Tensor<double>> x{gaussian<double>(30, 3, rng), gaussian<double>(30, 3, rng)};
  const ForwardResult<double> fwd = forward_batch<double>(t, p, x, BnMode::train);
  std::vector<Tensor<double>> g, g2;
  for (const auto& lg : fwd.logits) {
    g.push_back(gaussian<double>(lg.rows(), lg.cols(), rng));
    g2.push_back(g.back());
    g2.back() *= 2.0;
  }
  const auto a = backward_batch<double>(t, p, fwd.cache, g);
  const auto b = backward_batch<double>(t, p, fwd.cache, g2);
  const auto ta = param_tensors(a);
  const auto tb = param_tensors(b);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    Tensor<double> twice = *ta[i];
    twice *= 2.0;
    EXPECT_LT(max_abs_diff(twice, *tb[i]), 1e-6);
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const NetworkTopology t = toy_b(ContextKind::encoding);
  const auto p = NetworkParams<float>::init(t, 13);
  std::mt19937_64 rng(14);
  const std::vector<Tensor<float>> x{gaussian<float>(20, 3, rng), gaussian<float>(20, 3, rng)};
  const ForwardResult<float> fwd = forward_batch<float>(t, p, x, BnMode::train);
  std::vector<Tensor<float>> zero;
  for (const auto& lg : fwd.logits) zero.emplace_back(lg.rows(), lg.cols());
  const auto g = backward_batch<float>(t, p, fwd.cache, zero);
  g.for_each_param([](const std::string& name, const Tensor<float>& tensor) {
    for (float v : tensor.values()) EXPECT_EQ(v, 0.0f) << name;
  });
}

TEST(Backward, MismatchedCacheIsRejected) {
  const NetworkTopology t = toy_b(ContextKind::none);
  const auto p = NetworkParams<float>::init(t, 15);
  const std::vector<Tensor<float>> x{Tensor<float>(9, 3, 0.1f)};
  const ForwardResult<float> fwd = forward_batch<float>(t, p, x, BnMode::infer);
  EXPECT_THROW(backward_batch<float>(t, p, fwd.cache, std::span<const Tensor<float>>(fwd.logits.data(), 1)),
               ContractError);
  EXPECT_THROW(backward_batch<float>(two_layer_toy(), NetworkParams<float>::init(two_layer_toy(), 1), fwd.cache,
                                     fwd.logits),
               ContractError);
}

TEST(Loss, MasksTargetsBeforeTheDelay) {
  NetworkTopology t = two_layer_toy();
  t.output_delay_frames = 2;
  std::vector<Tensor<float>> logits(5, Tensor<float>(1, 3));
  const std::vector<std::vector<int>> labels{{0, 1, 2, 0, 1}};
  const LossResult<float> r = masked_cross_entropy<float>(t, logits, labels);
  EXPECT_EQ(r.counted, 3u);
  EXPECT_NEAR(r.loss, std::log(3.0), 1e-6);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(r.grad_logits[k], Tensor<float>(1, 3));
}

TEST(Params, InitIsSeedDeterministic) {
  const NetworkTopology t = toy_b(ContextKind::convolution);
  EXPECT_EQ(NetworkParams<float>::init(t, 3), NetworkParams<float>::init(t, 3));
  EXPECT_NE(NetworkParams<float>::init(t, 3), NetworkParams<float>::init(t, 4));
}

}  // namespace
}  // namespace mgruip
