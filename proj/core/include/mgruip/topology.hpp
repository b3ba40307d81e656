#pragma once

#include <cstddef>
#include <vector>

#include "mgruip/cells.hpp"
#include "mgruip/context.hpp"

namespace mgruip {

/// One recurrent layer. `frame_period` is the number of base frames between
/// consecutive steps: 1 runs at the base rate, 3 at a third of it.
struct LayerSpec {
  CellType cell = CellType::mgruip;
  std::size_t units = 0;       // n_c
  std::size_t projection = 0;  // n_p, mgruip only
  ContextSpec context;
  std::size_t frame_period = 1;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkTopology {
  std::size_t input_dim = 0;
  std::size_t splice_past = 2;
  std::size_t splice_future = 2;
  std::vector<LayerSpec> layers;
  std::size_t bottleneck_dim = 512;  // 0 disables the linear bottleneck
  std::size_t output_dim = 0;
  std::size_t output_delay_frames = 5;
  double base_frame_period_ms = 10.0;

  std::size_t spliced_dim() const noexcept { return input_dim * (splice_past + 1 + splice_future); }
  /// Width of x for layer `l` (0-based).
  std::size_t layer_input_dim(std::size_t l) const;
  /// Frame period of whatever layer `l` reads from; the spliced input runs at 1.
  std::size_t lower_period(std::size_t l) const;
  /// Width of one future tap read by the context module of layer `l`.
  std::size_t context_input_dim(std::size_t l) const;
  std::size_t output_period() const { return layers.back().frame_period; }
  std::size_t output_frames(std::size_t frames) const;
  std::size_t head_input_dim() const;

  /// Throws ValidationError describing the first violated constraint.
  void validate() const;

  friend bool operator==(const NetworkTopology&, const NetworkTopology&) = default;
};

}  // namespace mgruip
