#pragma once

#include <cstddef>
#include <vector>

#include "mgruip/topology.hpp"

namespace mgruip {

/// Bias-free weight counts of a single recurrent layer.
std::size_t gru_parameter_formula(std::size_t inputs, std::size_t units) noexcept;
/// n_i * n_c * 2 + n_c * n_c * 2
std::size_t mgru_parameter_formula(std::size_t inputs, std::size_t units) noexcept;
/// (n_i + n_c) * n_p + n_p * n_c * 2
std::size_t mgruip_parameter_formula(std::size_t inputs, std::size_t units, std::size_t projection) noexcept;

struct LayerParameterCount {
  std::size_t inputs = 0;
  std::size_t weights = 0;  // recurrent-layer formula, biases excluded
  std::size_t context = 0;  // context-module weights
  std::size_t biases = 0;   // b_* plus batch-norm gamma/beta
  std::size_t mgru_equivalent = 0;  // mGRU formula at the same n_i, n_c

  std::size_t bias_free() const noexcept { return weights + context; }
  std::size_t with_bias() const noexcept { return weights + context + biases; }
  double ratio_vs_mgru() const noexcept {
    return static_cast<double>(weights) / static_cast<double>(mgru_equivalent);
  }
};

struct ParameterReport {
  std::vector<LayerParameterCount> layers;
  std::size_t output_layers = 0;    // bottleneck + softmax affine, with bias
  std::size_t total_bias_free = 0;  // recurrent layers and context modules only
  std::size_t total_with_bias = 0;  // every trainable scalar
};

ParameterReport count_parameters(const NetworkTopology& topology);

struct LatencyReport {
  std::size_t splice_frames = 0;
  double splice_ms = 0.0;
  std::vector<std::size_t> context_frames;  // per layer, K * s
  std::vector<double> context_ms;
  std::size_t output_delay_frames = 0;
  double output_delay_ms = 0.0;
  std::size_t lookahead_frames = 0;  // splice + all context frames
  double total_ms = 0.0;
};

/// Lookahead adds up along the stack: each layer can only fire once the layer
/// below has produced its furthest future tap.
LatencyReport compute_latency(const NetworkTopology& topology);

}  // namespace mgruip
