#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "mgruip/tensor.hpp"

namespace mgruip {

inline constexpr char kFramesMagic[8] = {'M', 'G', 'R', 'U', 'I', 'P', 'F', 'R'};

/// Binary: magic[8] | u32 dims | u32 count | count*dims little-endian f32.
/// Text: one frame per line, values separated by whitespace; blank lines and
/// lines starting with '#' are skipped. Readers detect the format from the
/// magic.
Tensor<float> parse_frames(std::string_view bytes);
Tensor<float> read_frames(const std::filesystem::path& path);

/// Binary unless the path ends in ".txt".
void write_frames(const std::filesystem::path& path, const Tensor<float>& frames);
std::string frames_to_text(const Tensor<float>& frames);
std::string frames_to_binary(const Tensor<float>& frames);

}  // namespace mgruip
