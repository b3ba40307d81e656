#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <optional>
#include <vector>

#include "mgruip/network.hpp"
#include "mgruip/tasks.hpp"

namespace mgruip {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind) noexcept;
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name) noexcept;

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double momentum = 0.0;  // sgd
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  bool bptt_full = true;
  double grad_clip_norm = 5.0;  // global norm; 0 disables clipping
  double eval_split_fraction = 0.2;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

template <typename T>
double global_norm(const NetworkParams<T>& grads);

/// Rescales `grads` so their global norm is at most `max_norm`; returns the norm
/// before clipping.
template <typename T>
double clip_global_norm(NetworkParams<T>& grads, double max_norm);

template <typename T>
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const NetworkParams<T>& like);

  void step(NetworkParams<T>& params, const NetworkParams<T>& grads);

 private:
  TrainConfig config_;
  NetworkParams<T> first_;   // momentum / adam first moment
  NetworkParams<T> second_;  // adam second moment
  std::size_t steps_ = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm over the epoch's batches
};

/// One JSON object per line.
std::string to_json_line(const EpochMetrics& metrics);

struct EvalReport {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t frames = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [label][predicted]
};

/// Infer-mode evaluation over unmasked frames. Sequences are split across
/// `threads` workers; totals are reduced in sequence order, so the result does
/// not depend on the thread count.
template <typename T>
EvalReport evaluate(const NetworkTopology& topology, const NetworkParams<T>& params,
                    const Dataset& data, std::size_t threads = 1);

struct TrainResult {
  std::vector<EpochMetrics> history;
};

/// Minimizes masked frame cross-entropy with full-sequence BPTT. Batch order is
/// shuffled from `seed`; everything runs on the calling thread in a fixed order.
/// Throws NumericError on a non-finite loss or gradient.
template <typename T>
TrainResult train(const NetworkTopology& topology, NetworkParams<T>& params, const Dataset& train_set,
                  const Dataset& eval_set, const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Loss and gradients for one batch of sequences.
template <typename T>
struct BatchGradients {
  LossResult<T> loss;
  NetworkParams<T> grads;
  ForwardCache<T> cache;
};

template <typename T>
BatchGradients<T> compute_gradients(const NetworkTopology& topology, const NetworkParams<T>& params,
                                    std::span<const Tensor<T>> frames,
                                    std::span<const std::vector<int>> labels, BnMode mode);

}  // namespace mgruip
