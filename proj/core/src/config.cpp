#include "mgruip/config.hpp"

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mgruip/errors.hpp"

namespace mgruip {
namespace {

std::size_t line_of(const YAML::Node& node) { return static_cast<std::size_t>(node.Mark().line) + 1; }

[[noreturn]] void fail(const YAML::Node& node, const std::string& message) {
  const std::size_t line = line_of(node);
  throw ValidationError("line " + std::to_string(line) + ": " + message, line);
}

void expect_map(const YAML::Node& node, const std::string& what) {
  if (!node.IsMap()) fail(node, what + " must be a mapping");
}

void reject_unknown(const YAML::Node& node, const std::string& section,
                    std::initializer_list<std::string_view> known) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool found = false;
    for (auto k : known) found = found || k == key;
    if (!found) fail(kv.first, "unknown key '" + key + "' in " + section);
  }
}

template <typename V>
V scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail(node, "'" + key + "' must be a scalar");
  try {
    return node.as<V>();
  } catch (const YAML::Exception&) {
    fail(node, "'" + key + "' has an invalid value '" + node.Scalar() + "'");
  }
}

std::size_t count(const YAML::Node& node, const std::string& key) {
  if (node.IsScalar() && !node.Scalar().empty() && node.Scalar()[0] == '-') {
    fail(node, "'" + key + "' must be non-negative");
  }
  return static_cast<std::size_t>(scalar<std::uint64_t>(node, key));
}

template <typename V, typename Read>
void optional_field(const YAML::Node& map, const char* key, V& out, Read read) {
  if (const YAML::Node n = map[key]) out = read(n, key);
}

void read_count(const YAML::Node& map, const char* key, std::size_t& out) {
  optional_field(map, key, out, [](const YAML::Node& n, const char* k) { return count(n, k); });
}

void read_real(const YAML::Node& map, const char* key, double& out) {
  optional_field(map, key, out, [](const YAML::Node& n, const char* k) { return scalar<double>(n, k); });
}

ContextSpec parse_context(const YAML::Node& node) {
  expect_map(node, "context");
  reject_unknown(node, "context", {"kind", "order", "stride", "transform"});
  ContextSpec spec;
  if (const YAML::Node n = node["kind"]) {
    const auto name = scalar<std::string>(n, "kind");
    if (name == "none") spec.kind = ContextKind::none;
    else if (name == "encoding") spec.kind = ContextKind::encoding;
    else if (name == "convolution") spec.kind = ContextKind::convolution;
    else fail(n, "unknown context kind '" + name + "' (none | encoding | convolution)");
  } else {
    fail(node, "context requires 'kind'");
  }
  read_count(node, "order", spec.order);
  read_count(node, "stride", spec.stride);
  if (const YAML::Node n = node["transform"]) {
    const auto name = scalar<std::string>(n, "transform");
    if (name == "identity") spec.transform = EncodingTransform::identity;
    else if (name == "scale") spec.transform = EncodingTransform::scale;
    else if (name == "affine") spec.transform = EncodingTransform::affine;
    else fail(n, "unknown transform '" + name + "' (identity | scale | affine)");
  }
  return spec;
}

LayerSpec parse_layer(const YAML::Node& node) {
  expect_map(node, "layer");
  reject_unknown(node, "layer", {"cell", "units", "projection", "frame_period", "context"});
  LayerSpec layer;
  if (const YAML::Node n = node["cell"]) {
    const auto name = scalar<std::string>(n, "cell");
    if (name == "gru") layer.cell = CellType::gru;
    else if (name == "mgru") layer.cell = CellType::mgru;
    else if (name == "mgruip") layer.cell = CellType::mgruip;
    else fail(n, "unknown cell '" + name + "' (gru | mgru | mgruip)");
  } else {
    fail(node, "layer requires 'cell'");
  }
  if (!node["units"]) fail(node, "layer requires 'units'");
  read_count(node, "units", layer.units);
  read_count(node, "projection", layer.projection);
  read_count(node, "frame_period", layer.frame_period);
  if (const YAML::Node n = node["context"]) layer.context = parse_context(n);
  return layer;
}

NetworkTopology parse_topology_node(const YAML::Node& node) {
  expect_map(node, "topology");
  reject_unknown(node, "topology", {"input_dim", "output_dim", "splice", "bottleneck_dim",
                                    "output_delay_frames", "frame_period_ms", "layers"});
  NetworkTopology top;
  if (!node["input_dim"]) fail(node, "topology requires 'input_dim'");
  if (!node["output_dim"]) fail(node, "topology requires 'output_dim'");
  read_count(node, "input_dim", top.input_dim);
  read_count(node, "output_dim", top.output_dim);
  if (const YAML::Node s = node["splice"]) {
    expect_map(s, "splice");
    reject_unknown(s, "splice", {"past", "future"});
    read_count(s, "past", top.splice_past);
    read_count(s, "future", top.splice_future);
  }
  read_count(node, "bottleneck_dim", top.bottleneck_dim);
  read_count(node, "output_delay_frames", top.output_delay_frames);
  read_real(node, "frame_period_ms", top.base_frame_period_ms);
  const YAML::Node layers = node["layers"];
  if (!layers) fail(node, "topology requires 'layers'");
  if (!layers.IsSequence()) fail(layers, "'layers' must be a list");
  for (const auto& l : layers) top.layers.push_back(parse_layer(l));
  try {
    top.validate();
  } catch (const ValidationError& e) {
    fail(layers.size() > 0 ? layers : node, e.what());
  }
  return top;
}

TaskConfig parse_task(const YAML::Node& node) {
  expect_map(node, "task");
  reject_unknown(node, "task", {"name", "seq_len", "lookahead_span", "positive_rate", "sequences"});
  TaskConfig task;
  if (const YAML::Node n = node["name"]) {
    const auto name = scalar<std::string>(n, "name");
    const auto kind = parse_task_kind(name);
    if (!kind) fail(n, "unknown task '" + name + "' (lookahead-parity | delayed-copy | context-window-class)");
    task.kind = *kind;
  } else {
    fail(node, "task requires 'name'");
  }
  read_count(node, "seq_len", task.seq_len);
  read_count(node, "lookahead_span", task.lookahead_span);
  read_real(node, "positive_rate", task.positive_rate);
  read_count(node, "sequences", task.sequences);
  if (task.sequences < 2) fail(node, "task needs at least 2 sequences");
  return task;
}

TrainConfig parse_training(const YAML::Node& node) {
  expect_map(node, "training");
  reject_unknown(node, "training", {"optimizer", "learning_rate", "momentum", "beta1", "beta2", "epsilon",
                                    "batch_size", "epochs", "bptt_full", "grad_clip_norm", "eval_split"});
  TrainConfig c;
  if (const YAML::Node n = node["optimizer"]) {
    const auto name = scalar<std::string>(n, "optimizer");
    const auto kind = parse_optimizer_kind(name);
    if (!kind) fail(n, "unknown optimizer '" + name + "' (sgd | adam)");
    c.optimizer = *kind;
  }
  read_real(node, "learning_rate", c.learning_rate);
  read_real(node, "momentum", c.momentum);
  read_real(node, "beta1", c.beta1);
  read_real(node, "beta2", c.beta2);
  read_real(node, "epsilon", c.adam_epsilon);
  read_count(node, "batch_size", c.batch_size);
  read_count(node, "epochs", c.epochs);
  optional_field(node, "bptt_full", c.bptt_full,
                 [](const YAML::Node& n, const char* k) { return scalar<bool>(n, k); });
  read_real(node, "grad_clip_norm", c.grad_clip_norm);
  read_real(node, "eval_split", c.eval_split_fraction);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    fail(node, e.what());
  }
  return c;
}

GradCheckConfig parse_gradcheck(const YAML::Node& node) {
  expect_map(node, "gradcheck");
  reject_unknown(node, "gradcheck", {"batch", "seq_len"});
  GradCheckConfig g;
  read_count(node, "batch", g.batch);
  read_count(node, "seq_len", g.seq_len);
  if (g.batch < 1 || g.seq_len < 1) fail(node, "gradcheck batch and seq_len must be positive");
  return g;
}

YAML::Node load_yaml(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    const auto line = static_cast<std::size_t>(e.mark.line) + 1;
    throw ValidationError("line " + std::to_string(line) + ": " + e.msg, line);
  }
}

/// Shortest text that reads back to the same double.
std::string real_text(double value) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

void emit_topology(YAML::Emitter& out, const NetworkTopology& top) {
  out << YAML::BeginMap;
  out << YAML::Key << "input_dim" << YAML::Value << top.input_dim;
  out << YAML::Key << "output_dim" << YAML::Value << top.output_dim;
  out << YAML::Key << "splice" << YAML::Value << YAML::Flow << YAML::BeginMap
      << YAML::Key << "past" << YAML::Value << top.splice_past
      << YAML::Key << "future" << YAML::Value << top.splice_future << YAML::EndMap;
  out << YAML::Key << "bottleneck_dim" << YAML::Value << top.bottleneck_dim;
  out << YAML::Key << "output_delay_frames" << YAML::Value << top.output_delay_frames;
  out << YAML::Key << "frame_period_ms" << YAML::Value << real_text(top.base_frame_period_ms);
  out << YAML::Key << "layers" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : top.layers) {
    out << YAML::BeginMap;
    out << YAML::Key << "cell" << YAML::Value << std::string(to_string(l.cell));
    out << YAML::Key << "units" << YAML::Value << l.units;
    if (l.projection > 0) out << YAML::Key << "projection" << YAML::Value << l.projection;
    out << YAML::Key << "frame_period" << YAML::Value << l.frame_period;
    if (l.context.kind != ContextKind::none) {
      out << YAML::Key << "context" << YAML::Value << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "kind" << YAML::Value << std::string(to_string(l.context.kind));
      out << YAML::Key << "order" << YAML::Value << l.context.order;
      out << YAML::Key << "stride" << YAML::Value << l.context.stride;
      if (l.context.kind == ContextKind::encoding) {
        out << YAML::Key << "transform" << YAML::Value << std::string(to_string(l.context.transform));
      }
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
}

}  // namespace

ToyTask ExperimentConfig::toy_task(std::uint64_t task_seed) const {
  if (!task) throw ValidationError("config has no task section");
  ToyTask t;
  t.kind = task->kind;
  t.input_dim = topology.input_dim;
  t.num_classes = topology.output_dim;
  t.seq_len = task->seq_len;
  t.lookahead_span = task->lookahead_span;
  t.seed = task_seed;
  t.positive_rate = task->positive_rate;
  return t;
}

ExperimentConfig parse_config(std::string_view text) {
  const YAML::Node root = load_yaml(text);
  if (!root.IsDefined() || root.IsNull()) throw ValidationError("line 1: config is empty", 1);
  expect_map(root, "config");
  reject_unknown(root, "config", {"seed", "topology", "task", "training", "gradcheck"});
  ExperimentConfig c;
  if (const YAML::Node n = root["seed"]) c.seed = scalar<std::uint64_t>(n, "seed");
  const YAML::Node top = root["topology"];
  if (!top) throw ValidationError("line 1: config requires 'topology'", 1);
  c.topology = parse_topology_node(top);
  if (const YAML::Node n = root["task"]) {
    c.task = parse_task(n);
    try {
      c.toy_task(c.seed).validate();
    } catch (const ValidationError& e) {
      fail(n, e.what());
    }
  }
  if (const YAML::Node n = root["training"]) c.training = parse_training(n);
  if (const YAML::Node n = root["gradcheck"]) c.gradcheck = parse_gradcheck(n);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ":" + e.what(), e.line());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "topology" << YAML::Value;
  emit_topology(out, c.topology);
  if (c.task) {
    const TaskConfig& t = *c.task;
    out << YAML::Key << "task" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << std::string(to_string(t.kind));
    out << YAML::Key << "seq_len" << YAML::Value << t.seq_len;
    out << YAML::Key << "lookahead_span" << YAML::Value << t.lookahead_span;
    out << YAML::Key << "positive_rate" << YAML::Value << real_text(t.positive_rate);
    out << YAML::Key << "sequences" << YAML::Value << t.sequences;
    out << YAML::EndMap;
  }
  if (c.training) {
    const TrainConfig& t = *c.training;
    out << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "optimizer" << YAML::Value << std::string(to_string(t.optimizer));
    out << YAML::Key << "learning_rate" << YAML::Value << real_text(t.learning_rate);
    out << YAML::Key << "momentum" << YAML::Value << real_text(t.momentum);
    out << YAML::Key << "beta1" << YAML::Value << real_text(t.beta1);
    out << YAML::Key << "beta2" << YAML::Value << real_text(t.beta2);
    out << YAML::Key << "epsilon" << YAML::Value << real_text(t.adam_epsilon);
    out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
    out << YAML::Key << "epochs" << YAML::Value << t.epochs;
    out << YAML::Key << "bptt_full" << YAML::Value << t.bptt_full;
    out << YAML::Key << "grad_clip_norm" << YAML::Value << real_text(t.grad_clip_norm);
    out << YAML::Key << "eval_split" << YAML::Value << real_text(t.eval_split_fraction);
    out << YAML::EndMap;
  }
  if (c.gradcheck) {
    out << YAML::Key << "gradcheck" << YAML::Value << YAML::Flow << YAML::BeginMap
        << YAML::Key << "batch" << YAML::Value << c.gradcheck->batch
        << YAML::Key << "seq_len" << YAML::Value << c.gradcheck->seq_len << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

NetworkTopology parse_topology(std::string_view text) { return parse_topology_node(load_yaml(text)); }

std::string serialize_topology(const NetworkTopology& topology) {
  YAML::Emitter out;
  emit_topology(out, topology);
  return std::string(out.c_str()) + "\n";
}

}  // namespace mgruip
