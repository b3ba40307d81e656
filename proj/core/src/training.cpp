#include "mgruip/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

namespace mgruip {

std::string_view to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name) noexcept {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ValidationError("training: learning_rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("training: momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("training: adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ValidationError("training: adam_epsilon must be positive");
  if (batch_size == 0) throw ValidationError("training: batch_size must be positive");
  if (!bptt_full) throw ValidationError("training: only full-sequence BPTT is supported");
  if (!(grad_clip_norm >= 0.0)) throw ValidationError("training: grad_clip_norm must be non-negative");
  if (!(eval_split_fraction > 0.0 && eval_split_fraction < 1.0)) {
    throw ValidationError("training: eval_split_fraction must lie in (0, 1)");
  }
}

template <typename T>
double global_norm(const NetworkParams<T>& grads) {
  double sq = 0.0;
  grads.for_each_param([&](const std::string&, const Tensor<T>& t) {
    for (T v : t.values()) sq += static_cast<double>(v) * static_cast<double>(v);
  });
  return std::sqrt(sq);
}

template <typename T>
double clip_global_norm(NetworkParams<T>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    grads.for_each_param([&](const std::string&, Tensor<T>& t) { t *= scale; });
  }
  return norm;
}

template <typename T>
Optimizer<T>::Optimizer(const TrainConfig& config, const NetworkParams<T>& like)
    : config_(config), first_(like), second_(like) {
  first_.for_each_param([](const std::string&, Tensor<T>& t) { t.set_zero(); });
  second_.for_each_param([](const std::string&, Tensor<T>& t) { t.set_zero(); });
}

template <typename T>
void Optimizer<T>::step(NetworkParams<T>& params, const NetworkParams<T>& grads) {
  ++steps_;
  auto p = param_tensors(params);
  auto g = param_tensors(grads);
  auto m = param_tensors(first_);
  auto v = param_tensors(second_);
  if (p.size() != g.size() || p.size() != m.size()) {
    throw ContractError("optimizer: gradient layout differs from parameters");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p[i]->same_shape(*g[i]) || !p[i]->same_shape(*m[i])) {
      throw ContractError("optimizer: gradient layout differs from parameters");
    }
  }
  const T lr = static_cast<T>(config_.learning_rate);

  if (config_.optimizer == OptimizerKind::sgd) {
    const T mu = static_cast<T>(config_.momentum);
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < p[i]->size(); ++j) {
        T update = (*g[i])[j];
        if (mu > T{0}) {
          (*m[i])[j] = mu * (*m[i])[j] + update;
          update = (*m[i])[j];
        }
        (*p[i])[j] -= lr * update;
      }
    }
    return;
  }

  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T eps = static_cast<T>(config_.adam_epsilon);
  const T c1 = T{1} - static_cast<T>(std::pow(config_.beta1, static_cast<double>(steps_)));
  const T c2 = T{1} - static_cast<T>(std::pow(config_.beta2, static_cast<double>(steps_)));
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p[i]->size(); ++j) {
      const T gj = (*g[i])[j];
      T& mj = (*m[i])[j];
      T& vj = (*v[i])[j];
      mj = b1 * mj + (T{1} - b1) * gj;
      vj = b2 * vj + (T{1} - b2) * gj * gj;
      (*p[i])[j] -= lr * (mj / c1) / (std::sqrt(vj / c2) + eps);
    }
  }
}

std::string to_json_line(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["train_accuracy"] = m.train_accuracy;
  j["eval_loss"] = m.eval_loss;
  j["eval_accuracy"] = m.eval_accuracy;
  j["grad_norm"] = m.grad_norm;
  return j.dump();
}

namespace {

template <typename T>
Tensor<T> frames_as(const Tensor<float>& f) {
  if constexpr (std::is_same_v<T, float>) {
    return f;
  } else {
    return tensor_cast<T>(f);
  }
}

bool has_batch_norm(const NetworkTopology& topology) {
  return std::any_of(topology.layers.begin(), topology.layers.end(),
                     [](const LayerSpec& l) { return l.cell != CellType::gru; });
}

struct SequenceEval {
  double loss_sum = 0.0;
  std::size_t counted = 0;
  std::vector<std::pair<int, int>> pairs;  // (label, predicted)
};

template <typename T>
void evaluate_range(const NetworkTopology& topology, const NetworkParams<T>& params, const Dataset& data,
                    std::size_t begin, std::size_t end, std::vector<SequenceEval>& out) {
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = begin; start < end;) {
    const std::size_t frames = data[start].frames.rows();
    std::size_t stop = start;
    std::vector<Tensor<T>> batch;
    while (stop < end && stop - start < kChunk && data[stop].frames.rows() == frames) {
      batch.push_back(frames_as<T>(data[stop].frames));
      ++stop;
    }
    ForwardResult<T> r = forward_batch<T>(topology, params, batch, BnMode::infer);
    for (std::size_t k = 0; k < r.logits.size(); ++k) {
      const std::ptrdiff_t tf = target_frame(topology, k);
      if (tf < 0) continue;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        SequenceEval& se = out[start + b];
        const int label = data[start + b].labels[static_cast<std::size_t>(tf)];
        auto row = r.logits[k].row_span(b);
        const T mx = *std::max_element(row.begin(), row.end());
        double denom = 0.0;
        for (T v : row) denom += std::exp(static_cast<double>(v - mx));
        se.loss_sum += -(static_cast<double>(row[static_cast<std::size_t>(label)] - mx) - std::log(denom));
        ++se.counted;
        const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        se.pairs.emplace_back(label, pred);
      }
    }
    start = stop;
  }
}

}  // namespace

template <typename T>
EvalReport evaluate(const NetworkTopology& topology, const NetworkParams<T>& params, const Dataset& data,
                    std::size_t threads) {
  std::vector<SequenceEval> per_seq(data.size());
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, data.size()));
  if (threads == 1) {
    evaluate_range(topology, params, data, 0, data.size(), per_seq);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (data.size() + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(data.size(), b + chunk);
      if (b >= e) break;
      pool.emplace_back([&, b, e] { evaluate_range(topology, params, data, b, e, per_seq); });
    }
    for (auto& t : pool) t.join();
  }

  EvalReport report;
  report.confusion.assign(topology.output_dim, std::vector<std::size_t>(topology.output_dim, 0));
  double loss = 0.0;
  std::size_t correct = 0;
  for (const SequenceEval& se : per_seq) {
    loss += se.loss_sum;
    report.frames += se.counted;
    for (auto [label, pred] : se.pairs) {
      ++report.confusion[static_cast<std::size_t>(label)][static_cast<std::size_t>(pred)];
      if (label == pred) ++correct;
    }
  }
  if (report.frames > 0) {
    report.loss = loss / static_cast<double>(report.frames);
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.frames);
  }
  return report;
}

template <typename T>
BatchGradients<T> compute_gradients(const NetworkTopology& topology, const NetworkParams<T>& params,
                                    std::span<const Tensor<T>> frames,
                                    std::span<const std::vector<int>> labels, BnMode mode) {
  BatchGradients<T> out;
  ForwardResult<T> fwd = forward_batch(topology, params, frames, mode);
  out.loss = masked_cross_entropy<T>(topology, fwd.logits, labels);
  out.grads = backward_batch<T>(topology, params, fwd.cache, out.loss.grad_logits);
  out.cache = std::move(fwd.cache);
  return out;
}

template <typename T>
TrainResult train(const NetworkTopology& topology, NetworkParams<T>& params, const Dataset& train_set,
                  const Dataset& eval_set, const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  topology.validate();
  if (train_set.empty()) throw ValidationError("training: empty training set");
  const bool needs_pairs = has_batch_norm(topology);
  if (needs_pairs && (config.batch_size < 2 || train_set.size() < 2)) {
    throw ValidationError("training: batch-normalized layers need batches of at least 2 sequences");
  }

  std::mt19937_64 rng(seed);
  Optimizer<T> optimizer(config, params);
  std::vector<std::size_t> order(train_set.size());
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    double norm_sum = 0.0;
    std::size_t counted = 0, correct = 0, batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      if (needs_pairs && stop - start < 2) break;
      std::vector<Tensor<T>> frames;
      std::vector<std::vector<int>> labels;
      for (std::size_t i = start; i < stop; ++i) {
        frames.push_back(frames_as<T>(train_set[order[i]].frames));
        labels.push_back(train_set[order[i]].labels);
      }
      BatchGradients<T> bg = compute_gradients<T>(topology, params, frames, labels, BnMode::train);
      if (!std::isfinite(bg.loss.loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      const double norm = clip_global_norm(bg.grads, config.grad_clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("training diverged: non-finite gradient at epoch " + std::to_string(epoch));
      }
      optimizer.step(params, bg.grads);
      apply_running_stats(params, bg.cache);

      loss_sum += bg.loss.loss * static_cast<double>(bg.loss.counted);
      counted += bg.loss.counted;
      correct += bg.loss.correct;
      norm_sum += norm;
      ++batches;
    }

    EpochMetrics m;
    m.epoch = epoch;
    if (counted > 0) {
      m.train_loss = loss_sum / static_cast<double>(counted);
      m.train_accuracy = static_cast<double>(correct) / static_cast<double>(counted);
    }
    if (batches > 0) m.grad_norm = norm_sum / static_cast<double>(batches);
    if (!eval_set.empty()) {
      const EvalReport ev = evaluate(topology, params, eval_set, 1);
      m.eval_loss = ev.loss;
      m.eval_accuracy = ev.accuracy;
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

#define MGRUIP_INSTANTIATE_TRAINING(T)                                                                 \
  template double global_norm<T>(const NetworkParams<T>&);                                             \
  template double clip_global_norm<T>(NetworkParams<T>&, double);                                      \
  template class Optimizer<T>;                                                                         \
  template EvalReport evaluate<T>(const NetworkTopology&, const NetworkParams<T>&, const Dataset&,     \
                                  std::size_t);                                                        \
  template BatchGradients<T> compute_gradients<T>(const NetworkTopology&, const NetworkParams<T>&,     \
                                                  std::span<const Tensor<T>>,                          \
                                                  std::span<const std::vector<int>>, BnMode);          \
  template TrainResult train<T>(const NetworkTopology&, NetworkParams<T>&, const Dataset&,             \
                                const Dataset&, const TrainConfig&, std::uint64_t,                     \
                                const std::function<void(const EpochMetrics&)>&);

MGRUIP_INSTANTIATE_TRAINING(float)
MGRUIP_INSTANTIATE_TRAINING(double)

}  // namespace mgruip
