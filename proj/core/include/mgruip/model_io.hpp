#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mgruip/network.hpp"

namespace mgruip {

/// Provenance of a trained model. No clocks or hostnames, so identical runs
/// produce identical files.
struct ModelMetadata {
  std::uint64_t seed = 0;
  std::string task;  // empty for untrained models
  std::size_t epochs = 0;
  double final_train_loss = 0.0;
  double final_eval_accuracy = 0.0;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

struct Model {
  NetworkTopology topology;
  NetworkParams<float> params;
  ModelMetadata metadata;

  friend bool operator==(const Model&, const Model&) = default;
};

inline constexpr char kModelMagic[8] = {'M', 'G', 'R', 'U', 'I', 'P', 'M', 'D'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Layout, all integers little-endian:
///   magic[8] | u32 version | u32 payload bytes | payload | u32 crc32(payload)
/// payload:
///   str topology (YAML) | str metadata (JSON) | u32 tensor count |
///   per tensor: str name | u32 rows | u32 cols | rows*cols f32
/// where str is u32 length followed by bytes. Tensors are the trainable
/// parameters followed by batch-norm running statistics.
std::vector<std::uint8_t> encode_model(const Model& model);

/// Verifies magic, version and checksum, then checks every tensor name and
/// shape against the stored topology. Throws ValidationError.
Model decode_model(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file so a failed write never leaves a partial
/// model behind.
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

/// CRC-32 of a byte range (zlib polynomial).
std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace mgruip
