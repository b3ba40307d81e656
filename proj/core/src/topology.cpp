#include "mgruip/topology.hpp"

#include <string>

#include "mgruip/errors.hpp"

namespace mgruip {

std::size_t NetworkTopology::layer_input_dim(std::size_t l) const {
  return l == 0 ? spliced_dim() : layers.at(l - 1).units;
}

std::size_t NetworkTopology::lower_period(std::size_t l) const {
  return l == 0 ? 1 : layers.at(l - 1).frame_period;
}

std::size_t NetworkTopology::context_input_dim(std::size_t l) const {
  const LayerSpec& layer = layers.at(l);
  switch (layer.context.kind) {
    case ContextKind::none: return 0;
    case ContextKind::encoding: return l == 0 ? 0 : layers[l - 1].projection;
    case ContextKind::convolution: return layer_input_dim(l);
  }
  return 0;
}

std::size_t NetworkTopology::output_frames(std::size_t frames) const {
  const std::size_t p = output_period();
  return (frames + p - 1) / p;
}

std::size_t NetworkTopology::head_input_dim() const {
  return bottleneck_dim > 0 ? bottleneck_dim : layers.back().units;
}

void NetworkTopology::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (input_dim == 0) fail("topology: input_dim must be positive");
  if (output_dim == 0) fail("topology: output_dim must be positive");
  if (layers.empty()) fail("topology: at least one layer is required");
  if (!(base_frame_period_ms > 0.0)) fail("topology: base_frame_period_ms must be positive");

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& layer = layers[l];
    const std::string where = "layer " + std::to_string(l + 1) + ": ";
    if (layer.units == 0) fail(where + "n_c must be positive");
    if (layer.cell == CellType::mgruip) {
      if (layer.projection == 0) fail(where + "mgruip needs n_p > 0");
      if (layer.projection >= layer_input_dim(l) + layer.units) {
        fail(where + "n_p must be smaller than n_i + n_c (" +
             std::to_string(layer_input_dim(l) + layer.units) + ")");
      }
    } else if (layer.projection != 0) {
      fail(where + "n_p is only meaningful for mgruip");
    }
    if (layer.frame_period != 1 && layer.frame_period != 3) fail(where + "frame_period must be 1 or 3");
    if (l == 0 && layer.frame_period != 1) fail(where + "the first layer runs at the base frame rate");
    if (l > 0 && layer.frame_period < layers[l - 1].frame_period) {
      fail(where + "frame_period may not decrease going up the stack");
    }

    const ContextSpec& ctx = layer.context;
    if (ctx.stride == 0) fail(where + "context stride must be >= 1");
    if (ctx.kind != ContextKind::encoding && ctx.transform != EncodingTransform::identity) {
      fail(where + "transform applies to temporal encoding only");
    }
    if (ctx.kind == ContextKind::none) {
      if (ctx.order != 0) fail(where + "context order must be 0 when kind is none");
      continue;
    }
    if (layer.cell != CellType::mgruip) fail(where + "context modules attach to mgruip layers only");
    if (ctx.stride % lower_period(l) != 0) {
      fail(where + "context stride must be a multiple of the lower layer's frame period (" +
           std::to_string(lower_period(l)) + ")");
    }
    if (ctx.kind == ContextKind::encoding) {
      if (l == 0) fail(where + "temporal encoding needs a lower mgruip layer");
      const LayerSpec& lower = layers[l - 1];
      if (lower.cell != CellType::mgruip) fail(where + "temporal encoding needs a lower mgruip layer");
      if (lower.projection != layer.projection) {
        fail(where + "temporal encoding needs the lower layer's n_p to equal this layer's");
      }
    } else if (ctx.order == 0) {
      fail(where + "temporal convolution needs order >= 1");
    }
  }
}

}  // namespace mgruip
