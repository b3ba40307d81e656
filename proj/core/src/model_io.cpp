#include "mgruip/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "mgruip/config.hpp"
#include "mgruip/errors.hpp"

namespace mgruip {
namespace {

static_assert(std::endian::native == std::endian::little, "model IO assumes a little-endian host");
static_assert(sizeof(float) == 4);

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void raw(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ValidationError("model file truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string metadata_json(const ModelMetadata& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["task"] = m.task;
  j["epochs"] = m.epochs;
  j["final_train_loss"] = m.final_train_loss;
  j["final_eval_accuracy"] = m.final_eval_accuracy;
  return j.dump();
}

ModelMetadata parse_metadata(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelMetadata m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.task = j.at("task").get<std::string>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.final_train_loss = j.at("final_train_loss").get<double>();
    m.final_eval_accuracy = j.at("final_eval_accuracy").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model metadata is malformed: ") + e.what());
  }
}

template <class Params, class F>
void for_each_stored(Params& params, F&& f) {
  params.for_each_param(f);
  params.for_each_buffer(f);
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_model(const Model& model) {
  Writer payload;
  payload.str(serialize_topology(model.topology));
  payload.str(metadata_json(model.metadata));
  std::uint32_t count = 0;
  for_each_stored(model.params, [&](const std::string&, const Tensor<float>&) { ++count; });
  payload.u32(count);
  for_each_stored(model.params, [&](const std::string& name, const Tensor<float>& t) {
    payload.str(name);
    payload.u32(static_cast<std::uint32_t>(t.rows()));
    payload.u32(static_cast<std::uint32_t>(t.cols()));
    payload.raw(t.values().data(), t.size() * sizeof(float));
  });

  Writer file;
  file.raw(kModelMagic, sizeof kModelMagic);
  file.u32(kModelFormatVersion);
  file.u32(static_cast<std::uint32_t>(payload.bytes.size()));
  file.raw(payload.bytes.data(), payload.bytes.size());
  file.u32(crc32_of(payload.bytes));
  return std::move(file.bytes);
}

Model decode_model(std::span<const std::uint8_t> bytes) {
  Reader file(bytes);
  char magic[sizeof kModelMagic];
  file.raw(magic, sizeof magic);
  if (std::memcmp(magic, kModelMagic, sizeof magic) != 0) throw ValidationError("not a model file (bad magic)");
  const std::uint32_t version = file.u32();
  if (version != kModelFormatVersion) {
    throw ValidationError("unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t size = file.u32();
  if (bytes.size() < 16 + static_cast<std::size_t>(size) + 4) throw ValidationError("model file truncated");
  const auto payload_bytes = bytes.subspan(16, size);
  Reader tail(bytes.subspan(16 + size));
  const std::uint32_t stored_crc = tail.u32();
  if (!tail.done()) throw ValidationError("model file has trailing bytes");
  if (stored_crc != crc32_of(payload_bytes)) throw ValidationError("model file checksum mismatch");

  Reader payload(payload_bytes);
  Model model;
  model.topology = parse_topology(payload.str());
  model.metadata = parse_metadata(payload.str());
  model.params = NetworkParams<float>::zeros(model.topology);

  std::uint32_t expected = 0;
  for_each_stored(model.params, [&](const std::string&, const Tensor<float>&) { ++expected; });
  const std::uint32_t count = payload.u32();
  if (count != expected) {
    throw ValidationError("model holds " + std::to_string(count) + " tensors, topology needs " +
                          std::to_string(expected));
  }
  for_each_stored(model.params, [&](const std::string& name, Tensor<float>& t) {
    const std::string stored = payload.str();
    if (stored != name) throw ValidationError("model tensor '" + stored + "' where '" + name + "' expected");
    const std::uint32_t rows = payload.u32();
    const std::uint32_t cols = payload.u32();
    if (rows != t.rows() || cols != t.cols()) {
      throw ValidationError("model tensor '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", topology needs " + shape_of(t));
    }
    payload.raw(t.values().data(), t.size() * sizeof(float));
  });
  if (!payload.done()) throw ValidationError("model payload has trailing bytes");
  return model;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void save_model(const std::filesystem::path& path, const Model& model) {
  const auto bytes = encode_model(model);
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Model load_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file_bytes(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace mgruip
