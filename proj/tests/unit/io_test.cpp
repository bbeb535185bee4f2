#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "nlos/common/error.hpp"
#include "nlos/io/config.hpp"
#include "nlos/io/container.hpp"
#include "nlos/io/dataset.hpp"
#include "nlos/io/image.hpp"
#include "support/oracles.hpp"

using namespace nlos;
using namespace nlos::io;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("nlos_io_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ParamSet sample_set() {
  ParamSet p;
  p.add("a", Tensor({2, 3}, {1.5, -0.0, 3.25, 1e-300, -7.0, 42.0}));
  p.add("nested/b", Tensor({1}, 0.1));
  return p;
}

RunConfig small_config() {
  RunConfig c;
  c.geometry.n_x = c.geometry.n_y = 8;
  c.geometry.n_t = 32;
  c.geometry.n_z = 4;
  c.network.depth_bins = 4;
  return c;
}

}  // namespace

TEST(Container, RoundTripIsBitExact) {
  const ParamSet p = sample_set();
  const std::vector<std::uint8_t> bytes = encode(p);
  const ParamSet back = decode(bytes);
  EXPECT_TRUE(back == p);
  EXPECT_EQ(back.name(0), "a");
  EXPECT_TRUE(std::signbit(back.get("a")[1]));
  EXPECT_EQ(encode(back), bytes);
}

TEST(Container, LayoutIsLittleEndian) {
  ParamSet p;
  p.add("x", Tensor({1}, 1.0));
  const std::vector<std::uint8_t> b = encode(p);
  ASSERT_EQ(b.size(), 4u + 8u + 4u + 1u + 1u + 4u + 8u + 8u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "NLT1");
  EXPECT_EQ(b[4], 1);   // record count
  EXPECT_EQ(b[12], 1);  // name length
  EXPECT_EQ(b[16], 'x');
  EXPECT_EQ(b[17], kDtypeF64);
  EXPECT_EQ(b[18], 1);  // rank
  EXPECT_EQ(b[22], 1);  // extent
  EXPECT_EQ(b[37], 0x3F);
  EXPECT_EQ(b[36], 0xF0);
}

TEST(Container, RejectsCorruptInput) {
  std::vector<std::uint8_t> b = encode(sample_set());
  auto bad_magic = b;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode(bad_magic), FormatError);
  EXPECT_THROW(decode(std::vector<std::uint8_t>(b.begin(), b.end() - 3)), FormatError);
  auto trailing = b;
  trailing.push_back(0);
  EXPECT_THROW(decode(trailing), FormatError);
  auto dtype = b;
  dtype[4 + 8 + 4 + 1] = 2;  // first record: name "a"
  EXPECT_THROW(decode(dtype), FormatError);

  ParamSet one;
  one.add("a", Tensor({1}, 1.0));
  std::vector<std::uint8_t> dup = encode(one);
  const std::vector<std::uint8_t> rec(dup.begin() + 12, dup.end());
  dup.insert(dup.end(), rec.begin(), rec.end());
  dup[4] = 2;
  EXPECT_THROW(decode(dup), FormatError);
}

TEST(Container, ThousandRandomTensorsKeepChecksums) {
  Rng rng(110);
  for (int i = 0; i < 1000; ++i) {
    ParamSet p;
    const std::size_t rank = 1 + rng() % 3;
    Shape s;
    for (std::size_t r = 0; r < rank; ++r) s.push_back(1 + rng() % 5);
    p.add("t" + std::to_string(i), oracle::random(s, rng(), -1e6, 1e6));
    const std::vector<std::uint8_t> bytes = encode(p);
    const ParamSet back = decode(bytes);
    ASSERT_EQ(checksum(encode(back)), checksum(bytes));
    ASSERT_TRUE(back == p);
  }
}

TEST(Container, FileRoundTripAndMissingFile) {
  TempDir dir;
  const fs::path f = dir.path() / "sub" / "x.nlt";
  write_container(f, sample_set());
  EXPECT_TRUE(read_container(f) == sample_set());
  EXPECT_THROW(read_container(dir.path() / "missing.nlt"), IoError);
}

TEST(Config, ParsesKeysCommentsAndScene) {
  const RunConfig c = parse_config(
      "# desk run\n"
      "n_x = 8\nn_y = 8\nn_t = 32\nn_z = 4\n"
      "variant = gin   # trailing comment\n"
      "split_ratio = 1:2:1\n"
      "loss_type = l1+mse\n"
      "strategy = depth-first\n"
      "noise = true\n"
      "dark_count_rate = 0.5\n"
      "primitive = box 0 0 0.06 0.1 0.1 0.02 0.8\n"
      "primitive = letter T 0.1 0.1 0.06 0.2 0.2 0.03 1\n");
  EXPECT_EQ(c.geometry.n_x, 8u);
  EXPECT_EQ(c.network.depth_bins, 4u);
  EXPECT_EQ(c.network.block.variant, graph::Aggregation::kGin);
  EXPECT_EQ(c.network.block.split_ratio, (std::array<std::size_t, 3>{1, 2, 1}));
  EXPECT_EQ(c.train.loss_type, training::LossType::kL1Mse);
  EXPECT_EQ(c.train.strategy, training::Strategy::kDepthFirst);
  EXPECT_TRUE(c.noise);
  EXPECT_EQ(c.noise_model.dark_count_rate, 0.5);
  ASSERT_EQ(c.scene.primitives.size(), 2u);
  EXPECT_EQ(c.scene.primitives[1].kind, physics::PrimitiveKind::kLetter);
  EXPECT_EQ(c.scene.primitives[1].glyph, 'T');
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse_config("n_x = 8\nbogus = 1\n");
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_config("n_x = eight\n"), ConfigError);
  EXPECT_THROW(parse_config("n_x 8\n"), ConfigError);
  EXPECT_THROW(parse_config("n_t = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("primitive = box 0 0 0.1 0.9 0.1 0.05 1\n"), ConfigError);
}

TEST(Config, TextRoundTrip) {
  RunConfig c = small_config();
  c.train.lr_init = 2e-3;
  c.train.loss_scales = 2;
  c.network.block.variant = graph::Aggregation::kMaxRelative;
  c.scene.primitives.push_back(physics::Primitive{physics::PrimitiveKind::kBlob, 0.01, -0.1, 0.06,
                                                  0.1, 0.2, 0.05, 0.3, 'L'});
  const std::string text = to_text(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(to_text(back), text);
  EXPECT_EQ(back.train.lr_init, 2e-3);
  EXPECT_EQ(back.scene.primitives[0].cy, -0.1);
}

TEST(Dataset, SameSeedSameBytes) {
  TempDir a, b;
  const RunConfig c = small_config();
  const auto fa = generate_dataset(c, a.path(), 3, 7);
  const auto fb = generate_dataset(c, b.path(), 3, 7);
  ASSERT_EQ(fa.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(fa[i].filename(), sample_file_name(i));
    EXPECT_EQ(read_bytes(fa[i]), read_bytes(fb[i]));
  }
  EXPECT_NE(read_bytes(fa[0]), read_bytes(fa[1]));
}

TEST(Dataset, ZeroSamplesWritesNothing) {
  TempDir d;
  EXPECT_TRUE(generate_dataset(small_config(), d.path() / "empty", 0, 1).empty());
  EXPECT_TRUE(load_dataset(d.path() / "empty").empty());
}

TEST(Dataset, DepthTargetsAreBinMultiples) {
  TempDir d;
  const RunConfig c = small_config();
  generate_dataset(c, d.path(), 4, 11);
  const std::vector<training::TrainSample> data = load_dataset(d.path());
  ASSERT_EQ(data.size(), 4u);
  const double z = c.geometry.z_res();
  for (const training::TrainSample& s : data) {
    for (double v : s.depth[0].data()) {
      bool member = false;
      for (std::size_t m = 0; m < c.geometry.n_z; ++m) member |= v == static_cast<double>(m) * z;
      EXPECT_TRUE(member) << v;
    }
    EXPECT_EQ(s.measurement.geometry, c.geometry);
  }
}

TEST(Dataset, NoiseIsSeededPerSample) {
  RunConfig c = small_config();
  c.noise = true;
  c.noise_model.dark_count_rate = 2.0;
  const physics::SceneSpec empty;
  const Tensor a = simulate(c, empty, 0).get("measurement");
  EXPECT_EQ(a, simulate(c, empty, 0).get("measurement"));
  EXPECT_NE(a, simulate(c, empty, 1).get("measurement"));
  EXPECT_GT(a.sum(), 0.0);
}

TEST(Dataset, RecordsRoundTrip) {
  const RunConfig c = small_config();
  const ParamSet rec = generate_sample(c, 3, 0);
  const training::TrainSample s = sample_from_records(decode(encode(rec)));
  EXPECT_EQ(s.measurement.histogram, rec.get("measurement"));
  EXPECT_EQ(s.albedo[2], rec.get("albedo_s3"));
  EXPECT_EQ(geometry_from_record(geometry_record(c.geometry)), c.geometry);
  ParamSet missing;
  missing.add("geometry", geometry_record(c.geometry));
  EXPECT_THROW(measurement_from_records(missing), FormatError);
}

TEST(Pgm, EndpointsAndConstant) {
  const GrayImage img = decode_pgm(encode_pgm(Tensor({2, 2}, {0, 1, 1, 0})));
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{0, 255, 255, 0}));
  const GrayImage flat = decode_pgm(encode_pgm(Tensor({3, 2}, 4.2)));
  EXPECT_EQ(flat.height, 3u);
  EXPECT_EQ(flat.pixels, std::vector<std::uint8_t>(6, 128));
  EXPECT_THROW(encode_pgm(Tensor({2, 2, 2})), DimensionError);
}

TEST(Pgm, QuantisationBound) {
  const Tensor x = oracle::random({9, 13}, 111, -3.0, 5.0);
  const GrayImage img = decode_pgm(encode_pgm(x));
  const double lo = x.min(), range = x.max() - lo;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double back = lo + range * img.pixels[i] / 255.0;
    EXPECT_LE(std::abs(back - x[i]), range / 510.0 + 1e-12);
  }
}

TEST(LossHistory, CsvFormat) {
  const std::vector<training::LossRecord> h{{1, "albedo", 0, 0.5, 8e-4}, {2, "depth", 1, 0.25, 1e-6}};
  EXPECT_EQ(loss_history_csv(h),
            "stage,branch,epoch,loss,lr\n1,albedo,0,0.5,8e-04\n2,depth,1,0.25,1e-06\n");
  // Shortest round-trip text: every value parses back exactly.
  const training::LossRecord odd{1, "joint", 3, 0.1 + 0.2, 1.0 / 3.0};
  const std::string row = loss_history_csv({odd}).substr(27);
  EXPECT_EQ(std::stod(row.substr(10, row.find(',', 10) - 10)), odd.loss);
  EXPECT_EQ(std::stod(row.substr(row.rfind(',') + 1)), odd.lr);
}
