#include <gtest/gtest.h>
#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mgruip/config.hpp"
#include "mgruip/frames_io.hpp"
#include "mgruip/model_io.hpp"
#include "support.hpp"

namespace mgruip {
namespace {

namespace fs = std::filesystem;
using test::gaussian;

std::vector<fs::path> shipped_configs() {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(test::source_dir() / "configs"))
    if (e.path().extension() == ".yaml") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Config, ShippedConfigsRoundTrip) {
  const auto paths = shipped_configs();
  ASSERT_GE(paths.size(), 18u);
  for (const fs::path& p : paths) {
    const ExperimentConfig c = load_config(p);
    EXPECT_NO_THROW(c.topology.validate()) << p;
    EXPECT_EQ(parse_config(serialize_config(c)), c) << p;
  }
}

TEST(Config, DefaultsApply) {
  const ExperimentConfig c = parse_config(
      "topology:\n"
      "  input_dim: 4\n"
      "  output_dim: 2\n"
      "  layers:\n"
      "    - {cell: mgru, units: 8}\n");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.topology.splice_past, 2u);
  EXPECT_EQ(c.topology.splice_future, 2u);
  EXPECT_EQ(c.topology.bottleneck_dim, 512u);
  EXPECT_EQ(c.topology.output_delay_frames, 5u);
  EXPECT_EQ(c.topology.layers.at(0).frame_period, 1u);
  EXPECT_FALSE(c.task.has_value());
  EXPECT_FALSE(c.training.has_value());
}

std::size_t error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(e.line())), std::string::npos) << e.what();
    return e.line();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return 0;
}

TEST(Config, ErrorsCarryLineNumbers) {
  const std::string head = "seed: 3\ntopology:\n  input_dim: 4\n  output_dim: 2\n  layers:\n";
  EXPECT_EQ(error_line(head + "    - {cell: mgru, units: 8}\n  colour: red\n"), 7u);
  EXPECT_EQ(error_line(head + "    - {cell: lstm, units: 8}\n"), 6u);
  EXPECT_EQ(error_line(head + "    - cell: mgruip\n      units: 8\n      projection: 30\n"), 6u);
  EXPECT_EQ(error_line(head + "    - {cell: mgru, units: -3}\n"), 6u);
  EXPECT_EQ(error_line(head + "    - {cell: mgru, units: 8}\ntraining: {learning_rate: fast}\n"), 7u);
  EXPECT_EQ(error_line(head + "    - {cell: mgru, units: 8\n"), 7u);
  EXPECT_EQ(error_line(""), 1u);
}

TEST(Config, TopologySectionRoundTrips) {
  const ExperimentConfig c = load_config(test::source_dir() / "configs/toy/parity-encd.yaml");
  EXPECT_EQ(parse_topology(serialize_topology(c.topology)), c.topology);
}

TEST(Config, ToyTaskTakesDimsFromTopology) {
  const ExperimentConfig c = load_config(test::source_dir() / "configs/toy/parity-conv.yaml");
  const ToyTask t = c.toy_task(99);
  EXPECT_EQ(t.input_dim, c.topology.input_dim);
  EXPECT_EQ(t.num_classes, c.topology.output_dim);
  EXPECT_EQ(t.seed, 99u);
  EXPECT_EQ(t.lookahead_span, 10u);
}

Model toy_model() {
  const ExperimentConfig c = load_config(test::source_dir() / "configs/toy/parity-conv.yaml");
  Model m;
  m.topology = c.topology;
  m.params = NetworkParams<float>::init(c.topology, 3);
  std::mt19937_64 rng(4);
  m.params.for_each_buffer([&](const std::string&, Tensor<float>& t) { t = gaussian<float>(1, t.cols(), rng); });
  m.metadata = {7, "lookahead-parity", 30, 0.125, 0.975};
  return m;
}

TEST(ModelFile, SaveLoadIsBitExact) {
  const Model m = toy_model();
  const fs::path dir = test::scratch_dir("model_io");
  save_model(dir / "m.bin", m);
  const Model back = load_model(dir / "m.bin");
  EXPECT_EQ(back, m);
  EXPECT_EQ(encode_model(back), read_file_bytes(dir / "m.bin"));
  EXPECT_FALSE(fs::exists(dir / "m.bin.tmp"));
}

TEST(ModelFile, ChecksumIsZlibCrc32) {
  const std::vector<std::uint8_t> bytes = encode_model(toy_model());
  const std::uint32_t stored = static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
                               static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8 |
                               static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24;
  const uLong want = crc32(0L, bytes.data() + 16, static_cast<uInt>(bytes.size() - 20));
  EXPECT_EQ(stored, static_cast<std::uint32_t>(want));
  const std::string check = "123456789";
  EXPECT_EQ(crc32_of({reinterpret_cast<const std::uint8_t*>(check.data()), check.size()}), 0xCBF43926u);
}

TEST(ModelFile, AnyFlippedByteIsRejected) {
  const std::vector<std::uint8_t> good = encode_model(toy_model());
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pos(0, good.size() - 1);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> bad = good;
    bad[pos(rng)] ^= 0x10;
    EXPECT_THROW(decode_model(bad), ValidationError);
  }
  std::vector<std::uint8_t> cut(good.begin(), good.end() - 7);
  EXPECT_THROW(decode_model(cut), ValidationError);
  std::vector<std::uint8_t> longer = good;
  longer.push_back(0);
  EXPECT_THROW(decode_model(longer), ValidationError);
}

TEST(ModelFile, MissingFileIsValidationError) {
  EXPECT_THROW(load_model(test::scratch_dir("missing") / "none.bin"), ValidationError);
}

TEST(ModelFile, IdenticalModelsEncodeIdentically) {
  EXPECT_EQ(encode_model(toy_model()), encode_model(toy_model()));
}

TEST(Frames, BinaryAndTextRoundTrip) {
  std::mt19937_64 rng(6);
  const Tensor<float> f = gaussian<float>(13, 4, rng);
  const fs::path dir = test::scratch_dir("frames_io");
  write_frames(dir / "f.bin", f);
  write_frames(dir / "f.txt", f);
  EXPECT_EQ(read_frames(dir / "f.bin"), f);
  EXPECT_EQ(read_frames(dir / "f.txt"), f);
  EXPECT_EQ(parse_frames(frames_to_binary(f)), f);
}

TEST(Frames, TextSkipsCommentsAndBlankLines) {
  const Tensor<float> f = parse_frames("# header\n1 2\n\n  3\t4\n");
  EXPECT_EQ(f, Tensor<float>(2, 2, {1, 2, 3, 4}));
}

TEST(Frames, MalformedInputIsRejected) {
  try {
    parse_frames("1 2\n3 x\n");
    ADD_FAILURE();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_frames("1 2\n3\n"), ValidationError);
  std::string bin = frames_to_binary(Tensor<float>(2, 2, 1.0f));
  bin.pop_back();
  EXPECT_THROW(parse_frames(bin), ValidationError);
}

}  // namespace
}  // namespace mgruip
