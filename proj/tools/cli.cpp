#include "cli.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgruip/accounting.hpp"
#include "mgruip/config.hpp"
#include "mgruip/errors.hpp"
#include "mgruip/frames_io.hpp"
#include "mgruip/grad_check.hpp"
#include "mgruip/model_io.hpp"
#include "mgruip/streaming.hpp"
#include "mgruip/training.hpp"

namespace mgruip::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string strprintf(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string strprintf(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[512];
  const int n = std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return std::string(buf, static_cast<std::size_t>(std::max(0, std::min<int>(n, sizeof buf - 1))));
}

/// "170" for whole milliseconds, "12.5" otherwise.
std::string ms_text(double ms) {
  if (ms == std::floor(ms)) return strprintf("%.0f", ms);
  return strprintf("%.1f", ms);
}

struct Options {
  std::vector<std::string> configs;
  std::string model;
  std::string frames;
  std::string out;
  std::string metrics;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string precision = "f32";
};

std::uint64_t effective_seed(const ExperimentConfig& config, const Options& opt) {
  return opt.seed ? *opt.seed : config.seed;
}

const std::string& single_config(const Options& opt, const char* command) {
  if (opt.configs.size() != 1) throw UsageError(std::string(command) + " takes exactly one --config");
  return opt.configs.front();
}

std::string context_text(const ContextSpec& c) {
  switch (c.kind) {
    case ContextKind::none: return "-";
    case ContextKind::encoding:
      return strprintf("encd K=%zu s=%zu %s", c.order, c.stride, std::string(to_string(c.transform)).c_str());
    case ContextKind::convolution: return strprintf("conv K=%zu s=%zu", c.order, c.stride);
  }
  return "?";
}

int cmd_analyze(const Options& opt, std::ostream& out) {
  const ExperimentConfig config = load_config(single_config(opt, "analyze"));
  const NetworkTopology& top = config.topology;
  const ParameterReport params = count_parameters(top);

  out << strprintf("input: %zu x %zu spliced (%zu past, %zu future), output: %zu, bottleneck: %zu\n",
                   top.input_dim, top.splice_past + 1 + top.splice_future, top.splice_past, top.splice_future,
                   top.output_dim, top.bottleneck_dim);
  out << strprintf("%-5s %-6s %6s %6s %5s %6s %-22s %10s %9s %7s %10s\n", "layer", "cell", "n_i", "n_c", "n_p",
                   "period", "context", "weights", "context", "biases", "with_bias");
  std::size_t ip_weights = 0, ip_mgru = 0;
  for (std::size_t l = 0; l < top.layers.size(); ++l) {
    const LayerSpec& spec = top.layers[l];
    const LayerParameterCount& c = params.layers[l];
    out << strprintf("%-5zu %-6s %6zu %6zu %5s %6zu %-22s %10zu %9zu %7zu %10zu\n", l + 1,
                     std::string(to_string(spec.cell)).c_str(), c.inputs, spec.units,
                     spec.projection > 0 ? std::to_string(spec.projection).c_str() : "-", spec.frame_period,
                     context_text(spec.context).c_str(), c.weights, c.context, c.biases, c.with_bias());
    if (spec.cell == CellType::mgruip && c.inputs == spec.units) {
      ip_weights += c.weights;
      ip_mgru += c.mgru_equivalent;
    }
  }
  out << strprintf("output layers (with bias): %zu\n", params.output_layers);
  out << strprintf("total parameters (bias-free): %zu\n", params.total_bias_free);
  out << strprintf("total parameters (with bias): %zu\n", params.total_with_bias);
  if (ip_mgru > 0) {
    out << strprintf("mgruip/mgru ratio (layers with n_i == n_c): %.4f\n",
                     static_cast<double>(ip_weights) / static_cast<double>(ip_mgru));
  } else {
    out << "mgruip/mgru ratio (layers with n_i == n_c): n/a\n";
  }

  const LatencyReport lat = compute_latency(top);
  out << "latency:\n";
  out << strprintf("  splice future        %3zu frames %5s ms\n", lat.splice_frames, ms_text(lat.splice_ms).c_str());
  for (std::size_t l = 0; l < lat.context_frames.size(); ++l) {
    if (lat.context_frames[l] == 0) continue;
    out << strprintf("  layer %zu context      %3zu frames %5s ms\n", l + 1, lat.context_frames[l],
                     ms_text(lat.context_ms[l]).c_str());
  }
  out << strprintf("  output delay         %3zu frames %5s ms\n", lat.output_delay_frames,
                   ms_text(lat.output_delay_ms).c_str());
  out << strprintf("lookahead frames: %zu\n", lat.lookahead_frames);
  out << "total latency: " << ms_text(lat.total_ms) << " ms\n";
  return kOk;
}

Dataset task_data(const ExperimentConfig& config, std::uint64_t seed, SeedStream stream) {
  if (!config.task) throw ValidationError("config has no task section");
  return generate_task(config.toy_task(derive_seed(seed, stream)), config.task->sequences);
}

int cmd_train(const Options& opt, std::ostream& out) {
  const ExperimentConfig config = load_config(single_config(opt, "train"));
  if (opt.model.empty()) throw UsageError("train requires --model");
  if (!config.training) throw ValidationError("config has no training section");
  const std::uint64_t seed = effective_seed(config, opt);
  const TrainConfig& tc = *config.training;

  DatasetSplit split = split_dataset(task_data(config, seed, SeedStream::task), tc.eval_split_fraction);
  Model model;
  model.topology = config.topology;
  model.params = NetworkParams<float>::init(config.topology, derive_seed(seed, SeedStream::init));

  const std::string metrics_path = opt.metrics.empty() ? opt.model + ".metrics.jsonl" : opt.metrics;
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw ValidationError("cannot write metrics file '" + metrics_path + "'");
  const TrainResult result =
      train<float>(config.topology, model.params, split.train, split.eval, tc, derive_seed(seed, SeedStream::shuffle),
                   [&](const EpochMetrics& m) {
                     const std::string line = to_json_line(m);
                     out << line << '\n';
                     metrics << line << '\n';
                   });
  out.flush();

  const EvalReport final_eval = evaluate<float>(config.topology, model.params, split.eval, opt.threads);
  model.metadata.seed = seed;
  model.metadata.task = std::string(to_string(config.task->kind));
  model.metadata.epochs = result.history.size();
  model.metadata.final_train_loss = result.history.empty() ? 0.0 : result.history.back().train_loss;
  model.metadata.final_eval_accuracy = final_eval.accuracy;
  save_model(opt.model, model);

  out << strprintf("final eval accuracy: %.4f (%zu frames)\n", final_eval.accuracy, final_eval.frames);
  out << strprintf("model checksum: %08x\n", crc32_of(read_file_bytes(opt.model)));
  return kOk;
}

void print_eval(std::ostream& out, const char* label, std::uint64_t seed, const EvalReport& r) {
  out << strprintf("%s (seed %llu): accuracy %.4f, loss %.4f, frames %zu\n", label,
                   static_cast<unsigned long long>(seed), r.accuracy, r.loss, r.frames);
  out << "  confusion [label][predicted]:\n";
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << "   ";
    for (std::size_t c : r.confusion[i]) out << ' ' << c;
    out << '\n';
  }
}

int cmd_eval(const Options& opt, std::ostream& out) {
  if (opt.model.empty()) throw UsageError("eval requires --model");
  const Model model = load_model(opt.model);

  if (!opt.frames.empty()) {
    if (opt.out.empty()) throw UsageError("eval --frames requires --out");
    const Tensor<float> frames = read_frames(opt.frames);
    if (frames.cols() != model.topology.input_dim) {
      throw DimensionError(strprintf("frames have %zu values each, model expects %zu", frames.cols(),
                                     model.topology.input_dim));
    }
    const Tensor<float> logits = forward_sequence<float>(model.topology, model.params, frames);
    write_frames(opt.out, logits);
    out << strprintf("offline outputs: %zu x %zu written to %s\n", logits.rows(), logits.cols(), opt.out.c_str());
    return kOk;
  }

  const ExperimentConfig config = load_config(single_config(opt, "eval"));
  if (!(config.topology == model.topology)) {
    throw DimensionError("config topology does not match the model's topology");
  }
  const std::uint64_t seed = effective_seed(config, opt);
  const double eval_split = config.training ? config.training->eval_split_fraction : 0.2;
  const DatasetSplit split = split_dataset(task_data(config, seed, SeedStream::task), eval_split);
  const Dataset held_out = task_data(config, seed, SeedStream::held_out);
  print_eval(out, "training-seed eval split", seed, evaluate<float>(model.topology, model.params, split.eval,
                                                                    opt.threads));
  print_eval(out, "held-out", seed, evaluate<float>(model.topology, model.params, held_out, opt.threads));
  return kOk;
}

int cmd_stream(const Options& opt, std::ostream& out) {
  if (opt.model.empty() || opt.frames.empty()) throw UsageError("stream requires --model and --frames");
  const Model model = load_model(opt.model);
  const Tensor<float> frames = read_frames(opt.frames);
  if (frames.cols() != model.topology.input_dim) {
    throw DimensionError(strprintf("frames have %zu values each, model expects %zu", frames.cols(),
                                   model.topology.input_dim));
  }

  StreamState<float> stream(model.topology, model.params);
  std::vector<StreamOutput<float>> outputs;
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    for (auto& o : stream.push(frames.row_span(t))) outputs.push_back(std::move(o));
  }
  for (auto& o : stream.flush()) outputs.push_back(std::move(o));
  Tensor<float> logits(outputs.size(), model.topology.output_dim);
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    std::copy(outputs[k].logits.values().begin(), outputs[k].logits.values().end(), logits.row_span(k).begin());
  }
  if (!opt.out.empty()) write_frames(opt.out, logits);
  out << strprintf("frames: %zu, outputs: %zu\n", frames.rows(), outputs.size());

  const LatencyReport analytic = compute_latency(model.topology);
  const LatencyMeasurement measured = measure_latency<float>(model.topology, model.params, frames);
  if (measured.max_delay_frames != analytic.lookahead_frames) {
    if (frames.rows() <= analytic.lookahead_frames) {
      throw ValidationError(strprintf("stream of %zu frames is too short to observe the %zu-frame lookahead",
                                      frames.rows(), analytic.lookahead_frames));
    }
    throw ContractError(strprintf("empirical lookahead %zu frames differs from analytical %zu frames",
                                  measured.max_delay_frames, analytic.lookahead_frames));
  }
  out << "empirical latency: " << ms_text(measured.empirical_ms) << " ms ("
      << measured.max_delay_frames << " lookahead frames + " << ms_text(analytic.output_delay_ms)
      << " ms output delay)\n";
  out << "analytical latency: " << ms_text(analytic.total_ms) << " ms\n";
  return kOk;
}

template <typename T>
GradCheckReport gradcheck_one(const ExperimentConfig& config, std::uint64_t seed) {
  const GradCheckConfig gc = config.gradcheck.value_or(GradCheckConfig{});
  const NetworkTopology& top = config.topology;
  const NetworkParams<T> params = NetworkParams<T>::init(top, derive_seed(seed, SeedStream::init));

  std::vector<Tensor<T>> frames;
  std::vector<std::vector<int>> labels;
  if (config.task) {
    ToyTask task = config.toy_task(derive_seed(seed, SeedStream::gradcheck));
    task.seq_len = gc.seq_len;
    for (const Sequence& s : generate_task(task, gc.batch)) {
      frames.push_back(tensor_cast<T>(s.frames));
      labels.push_back(s.labels);
    }
  } else {
    std::mt19937_64 rng(derive_seed(seed, SeedStream::gradcheck));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, static_cast<int>(top.output_dim) - 1);
    for (std::size_t b = 0; b < gc.batch; ++b) {
      Tensor<T> f(gc.seq_len, top.input_dim);
      for (T& v : f.values()) v = static_cast<T>(noise(rng));
      std::vector<int> l(gc.seq_len);
      for (int& v : l) v = label(rng);
      frames.push_back(std::move(f));
      labels.push_back(std::move(l));
    }
  }
  return grad_check<T>(top, params, frames, labels, default_grad_check_options<T>(), gradient_fault<T>());
}

std::string topology_summary(const NetworkTopology& top) {
  std::string s;
  for (const LayerSpec& l : top.layers) {
    if (!s.empty()) s += " / ";
    s += std::string(to_string(l.cell));
    if (l.context.kind != ContextKind::none) s += "+" + std::string(to_string(l.context.kind));
  }
  return s;
}

int cmd_gradcheck(const Options& opt, std::ostream& out) {
  if (opt.configs.empty()) throw UsageError("gradcheck requires at least one --config");
  const bool wide = opt.precision == "f64-check";
  const GradCheckOptions tol = wide ? default_grad_check_options<double>() : default_grad_check_options<float>();
  std::size_t failures = 0;
  for (const std::string& path : opt.configs) {
    const ExperimentConfig config = load_config(path);
    const std::uint64_t seed = effective_seed(config, opt);
    const GradCheckReport r = wide ? gradcheck_one<double>(config, seed) : gradcheck_one<float>(config, seed);
    out << strprintf("%s [%s] %s: %zu parameters, %zu perturbed passes crossed a ReLU kink, "
                     "max rel error %.3e, mean %.3e, worst %s (analytic %.6e, numeric %.6e), tolerance %.0e\n",
                     r.passed ? "PASS" : "FAIL", opt.precision.c_str(), path.c_str(), r.checked, r.kink_crossings, r.max_rel_error,
                     r.mean_rel_error, r.worst_parameter.c_str(), r.worst_analytic, r.worst_numeric, tol.tolerance);
    out << "  layers: " << topology_summary(config.topology) << '\n';
    if (!r.passed) ++failures;
  }
  if (failures > 0) {
    throw NumericError(strprintf("gradient check failed for %zu of %zu configs", failures, opt.configs.size()));
  }
  out << strprintf("gradcheck: all %zu configs passed\n", opt.configs.size());
  return kOk;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) noexcept {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent acoustic-model cells with bounded future context"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub, bool many_configs) {
    if (many_configs) {
      sub->add_option("--config", opt.configs, "Config file (repeatable)");
    } else {
      sub->add_option("--config", opt.configs, "Config file")->expected(1);
    }
    sub->add_option("--seed", opt.seed, "Override the config seed");
    sub->add_option("--threads", opt.threads, "Worker threads for evaluation")->check(CLI::PositiveNumber);
    sub->add_option("--precision", opt.precision, "f32 or f64-check (gradcheck only)")
        ->check(CLI::IsMember({"f32", "f64-check"}));
  };
  CLI::App* analyze = app.add_subcommand("analyze", "Parameter and latency report");
  common(analyze, false);
  CLI::App* train_cmd = app.add_subcommand("train", "Train on the config's toy task and save a model");
  common(train_cmd, false);
  train_cmd->add_option("--model", opt.model, "Output model file");
  train_cmd->add_option("--metrics", opt.metrics, "Metrics file (default: <model>.metrics.jsonl)");
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a model, or write offline outputs for --frames");
  common(eval_cmd, false);
  eval_cmd->add_option("--model", opt.model, "Model file");
  eval_cmd->add_option("--frames", opt.frames, "Frames file for offline outputs");
  eval_cmd->add_option("--out", opt.out, "Offline outputs file");
  CLI::App* stream_cmd = app.add_subcommand("stream", "Frame-by-frame inference with latency report");
  common(stream_cmd, false);
  stream_cmd->add_option("--model", opt.model, "Model file");
  stream_cmd->add_option("--frames", opt.frames, "Frames file");
  stream_cmd->add_option("--out", opt.out, "Outputs file");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  common(gradcheck, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (opt.precision == "f64-check" && !gradcheck->parsed()) {
      throw UsageError("--precision f64-check is only valid for gradcheck");
    }
    if (analyze->parsed()) return cmd_analyze(opt, out);
    if (train_cmd->parsed()) return cmd_train(opt, out);
    if (eval_cmd->parsed()) return cmd_eval(opt, out);
    if (stream_cmd->parsed()) return cmd_stream(opt, out);
    return cmd_gradcheck(opt, out);
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    err << "error: validation: " << e.what() << '\n';
    return kValidation;
  } catch (const DimensionError& e) {
    err << "error: dimension: " << e.what() << '\n';
    return kValidation;
  } catch (const DegenerateBatchError& e) {
    err << "error: degenerate-batch: " << e.what() << '\n';
    return kValidation;
  } catch (const ContractError& e) {
    err << "error: contract: " << e.what() << '\n';
    return kValidation;
  } catch (const NumericError& e) {
    err << "error: numeric: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kValidation;
  }
}

}  // namespace mgruip::cli
