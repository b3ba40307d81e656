#include "mgruip/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mgruip/errors.hpp"

namespace mgruip {

std::string_view to_string(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::lookahead_parity: return "lookahead-parity";
    case TaskKind::delayed_copy: return "delayed-copy";
    case TaskKind::context_window_class: return "context-window-class";
  }
  return "?";
}

std::optional<TaskKind> parse_task_kind(std::string_view name) noexcept {
  for (TaskKind k : {TaskKind::lookahead_parity, TaskKind::delayed_copy, TaskKind::context_window_class}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void ToyTask::validate() const {
  if (seq_len == 0) throw ValidationError("task: seq_len must be positive");
  if (input_dim == 0) throw ValidationError("task: input_dim must be positive");
  if (num_classes < 2) throw ValidationError("task: num_classes must be at least 2");
  switch (kind) {
    case TaskKind::lookahead_parity:
      if (num_classes != 2) throw ValidationError("task: lookahead-parity has exactly 2 classes");
      if (!(positive_rate > 0.0 && positive_rate < 1.0)) {
        throw ValidationError("task: positive_rate must lie in (0, 1)");
      }
      break;
    case TaskKind::delayed_copy:
      if (input_dim < num_classes) throw ValidationError("task: delayed-copy needs input_dim >= num_classes");
      break;
    case TaskKind::context_window_class:
      break;
  }
}

std::vector<int> label_frames(const ToyTask& task, const Tensor<float>& frames) {
  const std::size_t n = frames.rows();
  std::vector<int> labels(n, 0);
  switch (task.kind) {
    case TaskKind::lookahead_parity: {
      // Suffix XOR: parity over [t, t + span] = suffix[t] ^ suffix[t + span + 1].
      std::vector<int> suffix(n + 1, 0);
      for (std::size_t t = n; t-- > 0;) suffix[t] = suffix[t + 1] ^ (frames(t, 0) > 0.0f ? 1 : 0);
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t end = std::min(n, t + task.lookahead_span + 1);
        labels[t] = suffix[t] ^ suffix[end];
      }
      break;
    }
    case TaskKind::delayed_copy: {
      for (std::size_t t = task.lookahead_span; t < n; ++t) {
        auto row = frames.row_span(t - task.lookahead_span).first(task.num_classes);
        labels[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      }
      break;
    }
    case TaskKind::context_window_class: {
      const double k = static_cast<double>(task.num_classes);
      for (std::size_t t = 0; t < n; ++t) {
        double g = 0.0;
        for (int j = -2; j <= 2; ++j) {
          const auto src = static_cast<std::ptrdiff_t>(t) + j;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
          g += kContextWindowWeights[j + 2] * frames(static_cast<std::size_t>(src), 0);
        }
        const double bin = std::floor((std::tanh(g) + 1.0) / 2.0 * k);
        labels[t] = static_cast<int>(std::clamp(bin, 0.0, k - 1.0));
      }
      break;
    }
  }
  return labels;
}

Dataset generate_task(const ToyTask& task, std::size_t n_sequences) {
  task.validate();
  std::mt19937_64 rng(task.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  std::bernoulli_distribution positive(task.positive_rate);
  std::uniform_int_distribution<std::size_t> cls(0, task.num_classes - 1);

  Dataset out;
  out.reserve(n_sequences);
  for (std::size_t s = 0; s < n_sequences; ++s) {
    Tensor<float> frames(task.seq_len, task.input_dim);
    for (std::size_t t = 0; t < task.seq_len; ++t) {
      switch (task.kind) {
        case TaskKind::lookahead_parity:
          frames(t, 0) = static_cast<float>((positive(rng) ? 1.0 : -1.0) * magnitude(rng));
          for (std::size_t d = 1; d < task.input_dim; ++d) frames(t, d) = static_cast<float>(noise(rng));
          break;
        case TaskKind::delayed_copy:
          frames(t, cls(rng)) = 1.0f;
          for (std::size_t d = task.num_classes; d < task.input_dim; ++d) {
            frames(t, d) = static_cast<float>(noise(rng));
          }
          break;
        case TaskKind::context_window_class:
          for (std::size_t d = 0; d < task.input_dim; ++d) frames(t, d) = static_cast<float>(noise(rng));
          break;
      }
    }
    std::vector<int> labels = label_frames(task, frames);
    out.push_back({std::move(frames), std::move(labels)});
  }
  return out;
}

double parity_accuracy_ceiling(const ToyTask& task, std::size_t visible_future) {
  if (visible_future >= task.lookahead_span) return 1.0;
  const double unseen = static_cast<double>(task.lookahead_span - visible_future);
  return 0.5 * (1.0 + std::pow(std::abs(1.0 - 2.0 * task.positive_rate), unseen));
}

DatasetSplit split_dataset(Dataset data, double eval_fraction) {
  if (data.size() < 2) throw ValidationError("dataset needs at least two sequences to split");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ValidationError("eval_split_fraction must lie in (0, 1)");
  }
  auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(data.size())));
  n_eval = std::clamp<std::size_t>(n_eval, 1, data.size() - 1);
  DatasetSplit split;
  const auto cut = data.end() - static_cast<std::ptrdiff_t>(n_eval);
  split.train.assign(std::make_move_iterator(data.begin()), std::make_move_iterator(cut));
  split.eval.assign(std::make_move_iterator(cut), std::make_move_iterator(data.end()));
  return split;
}

}  // namespace mgruip
