#include "mgruip/frames_io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "mgruip/errors.hpp"

namespace mgruip {
namespace {

std::uint32_t read_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + at, sizeof v);
  return v;
}

Tensor<float> parse_binary(std::string_view bytes) {
  if (bytes.size() < 16) throw ValidationError("frames file truncated header");
  const std::size_t dims = read_u32(bytes, 8);
  const std::size_t count = read_u32(bytes, 12);
  if (bytes.size() != 16 + dims * count * sizeof(float)) {
    throw ValidationError("frames file holds " + std::to_string(bytes.size() - 16) + " payload bytes, header says " +
                          std::to_string(dims * count * sizeof(float)));
  }
  Tensor<float> frames(count, dims);
  std::memcpy(frames.values().data(), bytes.data() + 16, dims * count * sizeof(float));
  return frames;
}

Tensor<float> parse_text(std::string_view text) {
  std::vector<float> values;
  std::size_t dims = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string field;
    std::size_t n = 0;
    while (fields >> field) {
      float v = 0.0f;
      const auto r = std::from_chars(field.data(), field.data() + field.size(), v);
      if (r.ec != std::errc() || r.ptr != field.data() + field.size()) {
        throw ValidationError("line " + std::to_string(line_no) + ": '" + field + "' is not a number", line_no);
      }
      values.push_back(v);
      ++n;
    }
    if (rows == 0) dims = n;
    if (n != dims) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + std::to_string(n) + " values, expected " +
                                std::to_string(dims),
                            line_no);
    }
    ++rows;
  }
  return Tensor<float>(rows, dims, std::move(values));
}

}  // namespace

Tensor<float> parse_frames(std::string_view bytes) {
  if (bytes.size() >= sizeof kFramesMagic && std::memcmp(bytes.data(), kFramesMagic, sizeof kFramesMagic) == 0) {
    return parse_binary(bytes);
  }
  return parse_text(bytes);
}

Tensor<float> read_frames(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read frames file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_frames(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), e.line());
  }
}

std::string frames_to_binary(const Tensor<float>& frames) {
  std::string out(kFramesMagic, sizeof kFramesMagic);
  const auto dims = static_cast<std::uint32_t>(frames.cols());
  const auto count = static_cast<std::uint32_t>(frames.rows());
  out.append(reinterpret_cast<const char*>(&dims), sizeof dims);
  out.append(reinterpret_cast<const char*>(&count), sizeof count);
  out.append(reinterpret_cast<const char*>(frames.values().data()), frames.size() * sizeof(float));
  return out;
}

std::string frames_to_text(const Tensor<float>& frames) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    for (std::size_t c = 0; c < frames.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, frames(r, c));
      if (c > 0) out += ' ';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void write_frames(const std::filesystem::path& path, const Tensor<float>& frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  const std::string bytes = path.extension() == ".txt" ? frames_to_text(frames) : frames_to_binary(frames);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace mgruip
