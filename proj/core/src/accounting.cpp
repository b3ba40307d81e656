#include "mgruip/accounting.hpp"

namespace mgruip {

std::size_t gru_parameter_formula(std::size_t inputs, std::size_t units) noexcept {
  return inputs * units * 3 + units * units * 3;
}

std::size_t mgru_parameter_formula(std::size_t inputs, std::size_t units) noexcept {
  return inputs * units * 2 + units * units * 2;
}

std::size_t mgruip_parameter_formula(std::size_t inputs, std::size_t units,
                                     std::size_t projection) noexcept {
  return (inputs + units) * projection + projection * units * 2;
}

ParameterReport count_parameters(const NetworkTopology& topology) {
  ParameterReport report;
  for (std::size_t l = 0; l < topology.layers.size(); ++l) {
    const LayerSpec& layer = topology.layers[l];
    LayerParameterCount c;
    c.inputs = topology.layer_input_dim(l);
    c.mgru_equivalent = mgru_parameter_formula(c.inputs, layer.units);
    switch (layer.cell) {
      case CellType::gru:
        c.weights = gru_parameter_formula(c.inputs, layer.units);
        c.biases = 3 * layer.units;
        break;
      case CellType::mgru:
        c.weights = c.mgru_equivalent;
        c.biases = 2 * layer.units + 2 * layer.units;
        break;
      case CellType::mgruip:
        c.weights = mgruip_parameter_formula(c.inputs, layer.units, layer.projection);
        c.biases = 2 * layer.units + 2 * layer.units;
        break;
    }
    const ContextSpec& ctx = layer.context;
    if (ctx.kind == ContextKind::encoding) {
      if (ctx.transform == EncodingTransform::scale) c.context = 1;
      if (ctx.transform == EncodingTransform::affine) c.context = layer.projection * layer.projection;
    } else if (ctx.kind == ContextKind::convolution) {
      c.context = ctx.order * topology.context_input_dim(l) * layer.projection;
    }
    report.total_bias_free += c.bias_free();
    report.total_with_bias += c.with_bias();
    report.layers.push_back(c);
  }
  const std::size_t top = topology.layers.back().units;
  if (topology.bottleneck_dim > 0) report.output_layers += topology.bottleneck_dim * top;
  report.output_layers += topology.output_dim * topology.head_input_dim() + topology.output_dim;
  report.total_with_bias += report.output_layers;
  return report;
}

LatencyReport compute_latency(const NetworkTopology& topology) {
  const double period = topology.base_frame_period_ms;
  LatencyReport r;
  r.splice_frames = topology.splice_future;
  r.splice_ms = period * static_cast<double>(r.splice_frames);
  r.lookahead_frames = r.splice_frames;
  for (const LayerSpec& layer : topology.layers) {
    const std::size_t frames = layer.context.lookahead_frames();
    r.context_frames.push_back(frames);
    r.context_ms.push_back(period * static_cast<double>(frames));
    r.lookahead_frames += frames;
  }
  r.output_delay_frames = topology.output_delay_frames;
  r.output_delay_ms = period * static_cast<double>(r.output_delay_frames);
  r.total_ms = period * static_cast<double>(r.lookahead_frames) + r.output_delay_ms;
  return r;
}

}  // namespace mgruip
