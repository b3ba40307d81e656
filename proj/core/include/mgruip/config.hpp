#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "mgruip/tasks.hpp"
#include "mgruip/topology.hpp"
#include "mgruip/training.hpp"

namespace mgruip {

/// Data section of a config. Input width and class count come from the
/// topology; the generator seed comes from the top-level seed.
struct TaskConfig {
  TaskKind kind = TaskKind::lookahead_parity;
  std::size_t seq_len = 60;
  std::size_t lookahead_span = 0;
  double positive_rate = 0.5;
  std::size_t sequences = 200;

  friend bool operator==(const TaskConfig&, const TaskConfig&) = default;
};

struct GradCheckConfig {
  std::size_t batch = 3;
  std::size_t seq_len = 9;

  friend bool operator==(const GradCheckConfig&, const GradCheckConfig&) = default;
};

/// Everything one config file describes.
///
///   seed: 7
///   topology:
///     input_dim: 4            # required
///     output_dim: 2           # required
///     splice: {past: 2, future: 2}
///     bottleneck_dim: 512     # 0 disables
///     output_delay_frames: 5
///     frame_period_ms: 10
///     layers:                 # at least one
///       - cell: mgruip        # gru | mgru | mgruip
///         units: 1024
///         projection: 512     # mgruip only
///         frame_period: 1     # 1 or 3
///         context: {kind: convolution, order: 1, stride: 3}
///   task: {name: lookahead-parity, seq_len: 60, lookahead_span: 10,
///          positive_rate: 0.5, sequences: 200}
///   training: {optimizer: adam, learning_rate: 0.001, momentum: 0,
///              beta1: 0.9, beta2: 0.999, epsilon: 1e-8, batch_size: 16,
///              epochs: 10, bptt_full: true, grad_clip_norm: 5,
///              eval_split: 0.2}
///   gradcheck: {batch: 3, seq_len: 9}
///
/// Omitted keys take the defaults shown; unknown keys are errors.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  NetworkTopology topology;
  std::optional<TaskConfig> task;
  std::optional<TrainConfig> training;
  std::optional<GradCheckConfig> gradcheck;

  /// The toy task for this config, drawn from `seed`.
  ToyTask toy_task(std::uint64_t seed) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ValidationError carrying the 1-based line of the offending node.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

/// The `topology` section alone, as stored inside model files.
NetworkTopology parse_topology(std::string_view text);
std::string serialize_topology(const NetworkTopology& topology);

}  // namespace mgruip
