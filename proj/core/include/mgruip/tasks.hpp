#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mgruip/tensor.hpp"

namespace mgruip {

enum class TaskKind { lookahead_parity, delayed_copy, context_window_class };

std::string_view to_string(TaskKind kind) noexcept;
std::optional<TaskKind> parse_task_kind(std::string_view name) noexcept;

/// Synthetic frame-labelling task. Every label is a closed-form function of the
/// emitted frames:
///  - lookahead-parity: XOR of the sign bits of channel 0 over frames
///    t .. t + lookahead_span (frames past the end count as 0). Channel 0 is
///    positive with probability `positive_rate`; other channels are noise.
///  - delayed-copy: one-hot class on channels 0..num_classes-1; label at t is
///    the class shown at t - lookahead_span (class 0 before that).
///  - context-window-class: Gaussian frames; label bins tanh of a fixed linear
///    functional of channel 0 over frames t-2 .. t+2 into num_classes classes.
struct ToyTask {
  TaskKind kind = TaskKind::lookahead_parity;
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::size_t seq_len = 60;
  std::size_t lookahead_span = 0;
  std::uint64_t seed = 0;
  double positive_rate = 0.5;

  void validate() const;

  friend bool operator==(const ToyTask&, const ToyTask&) = default;
};

struct Sequence {
  Tensor<float> frames;     // seq_len x input_dim
  std::vector<int> labels;  // one per frame
};

using Dataset = std::vector<Sequence>;

/// Weights of the context-window-class functional, frames t-2 .. t+2.
inline constexpr double kContextWindowWeights[5] = {0.5, -1.0, 1.5, -1.0, 0.5};

/// Deterministic in (task, n_sequences).
Dataset generate_task(const ToyTask& task, std::size_t n_sequences);

/// Applies the task's labelling rule to arbitrary frames.
std::vector<int> label_frames(const ToyTask& task, const Tensor<float>& frames);

/// Best achievable lookahead-parity accuracy for a predictor that sees frames
/// up to t + visible_future when labelling frame t: the unseen bits contribute
/// an XOR whose most likely value is right with probability
/// (1 + |1 - 2q|^unseen) / 2.
double parity_accuracy_ceiling(const ToyTask& task, std::size_t visible_future);

/// Split off the trailing `eval_fraction` of sequences (at least one each).
struct DatasetSplit {
  Dataset train;
  Dataset eval;
};
DatasetSplit split_dataset(Dataset data, double eval_fraction);

}  // namespace mgruip
