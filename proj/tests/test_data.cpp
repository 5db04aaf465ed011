#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lpca/core/rng.hpp"
#include "lpca/data/checkpoint.hpp"
#include "lpca/data/netpbm.hpp"
#include "lpca/data/sample.hpp"
#include "lpca/data/synth.hpp"
#include "lpca/model/lpcanet.hpp"

namespace lpca {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("lpca_test_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

Image random_image(std::size_t w, std::size_t h, std::size_t c, Rng& rng) {
  Image img(w, h, c);
  for (auto& v : img.bytes) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

// ---------------------------------------------------------------- netpbm

TEST(Netpbm, SingleWhitePixel) {
  auto b = bytes_of("P6\n1 1\n255\n");
  b.insert(b.end(), {0xFF, 0xFF, 0xFF});
  const Image img = decode_pnm(b);
  EXPECT_EQ(img.width, 1U);
  EXPECT_EQ(img.height, 1U);
  EXPECT_EQ(img.channels, 3U);
  EXPECT_EQ(img.at(0, 0, 0), 255);
  EXPECT_EQ(img.at(0, 0, 1), 255);
  EXPECT_EQ(img.at(0, 0, 2), 255);
}

TEST(Netpbm, HeaderCommentsTolerated) {
  auto b = bytes_of("P5\n# made by hand\n2 # width\n1\n255\n");
  b.insert(b.end(), {7, 9});
  const Image img = decode_pnm(b);
  EXPECT_EQ(img.width, 2U);
  EXPECT_EQ(img.at(1, 0), 9);
}

TEST(Netpbm, RoundTripIsByteIdentical) {
  TempDir dir;
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const std::size_t w = static_cast<std::size_t>(rng.uniform_int(1, 40));
    const std::size_t h = static_cast<std::size_t>(rng.uniform_int(1, 40));
    const Image rgb = random_image(w, h, 3, rng), gray = random_image(w, h, 1, rng);
    write_ppm(rgb, dir.path() / "a.ppm");
    write_pgm(gray, dir.path() / "a.pgm");
    EXPECT_EQ(read_ppm(dir.path() / "a.ppm"), rgb);
    EXPECT_EQ(read_pgm(dir.path() / "a.pgm"), gray);
    EXPECT_EQ(encode_pnm(decode_pnm(encode_pnm(rgb))), encode_pnm(rgb));
  }
}

TEST(Netpbm, RejectsSixteenBitMaxval) {
  auto b = bytes_of("P5\n1 1\n65535\n");
  b.insert(b.end(), {0, 0});
  const std::string msg = error_of([&] { decode_pnm(b); });
  EXPECT_NE(msg.find("maxval"), std::string::npos) << msg;
  EXPECT_NE(msg.find("byte"), std::string::npos) << msg;
}

TEST(Netpbm, RejectsBadMagic) {
  auto b = bytes_of("P3\n1 1\n255\n1 2 3\n");
  const std::string msg = error_of([&] { decode_pnm(b); });
  EXPECT_NE(msg.find("byte 0"), std::string::npos) << msg;
}

TEST(Netpbm, RejectsTruncatedPayloadWithOffset) {
  auto b = bytes_of("P6\n2 1\n255\n");
  b.insert(b.end(), {1, 2, 3, 4});
  const std::string msg = error_of([&] { decode_pnm(b); });
  EXPECT_NE(msg.find("from byte 11"), std::string::npos) << msg;
}

TEST(Netpbm, ReadPpmRejectsGray) {
  TempDir dir;
  write_pgm(Image(2, 2, 1), dir.path() / "g.pgm");
  EXPECT_THROW(read_ppm(dir.path() / "g.pgm"), DataError);
}

// ---------------------------------------------------------------- manifest

struct Files {
  fs::path dir;
  void add(const std::string& id, const Image& rgb, const Image& depth, const Image& mask) {
    write_ppm(rgb, dir / (id + "_rgb.ppm"));
    write_pgm(depth, dir / (id + "_depth.pgm"));
    write_pgm(mask, dir / (id + "_mask.pgm"));
  }
  static std::string line(const std::string& id, const std::string& split = "") {
    std::string s = id + "\t" + id + "_rgb.ppm\t" + id + "_depth.pgm\t" + id + "_mask.pgm";
    return split.empty() ? s + "\n" : s + "\t" + split + "\n";
  }
};

TEST(Manifest, EmptyManifestGivesEmptyDataset) {
  TempDir dir;
  write_text(dir.path() / "m.tsv", "");
  const Dataset d = load_dataset(dir.path() / "m.tsv");
  EXPECT_TRUE(d.samples.empty());
  EXPECT_THROW(load_dataset(dir.path() / "missing.tsv"), DataError);
}

TEST(Manifest, OneRecord) {
  TempDir dir;
  Rng rng(1);
  Files f{dir.path()};
  Image mask(4, 3, 1);
  mask.at(1, 1) = 255;
  f.add("a", random_image(4, 3, 3, rng), random_image(4, 3, 1, rng), mask);
  write_text(dir.path() / "m.tsv", "# header\n\n" + Files::line("a"));
  const Dataset d = load_dataset(dir.path() / "m.tsv");
  ASSERT_EQ(d.samples.size(), 1U);
  EXPECT_EQ(d.samples[0].id, "a");
  EXPECT_EQ(d.samples[0].mask, mask);
  EXPECT_EQ(d.binarized_pixels, 0U);
}

TEST(Manifest, NonBilevelMaskIsBinarizedAndCounted) {
  TempDir dir;
  Rng rng(2);
  Files f{dir.path()};
  Image mask(2, 2, 1);
  mask.at(0, 0) = 17;
  mask.at(1, 0) = 128;
  mask.at(0, 1) = 255;
  f.add("a", random_image(2, 2, 3, rng), random_image(2, 2, 1, rng), mask);
  write_text(dir.path() / "m.tsv", Files::line("a"));
  const Dataset d = load_dataset(dir.path() / "m.tsv");
  EXPECT_EQ(d.binarized_pixels, 2U);
  EXPECT_EQ(d.samples[0].mask.bytes, (std::vector<std::uint8_t>{0, 255, 255, 0}));
}

TEST(Manifest, MissingFileNamesRecord) {
  TempDir dir;
  write_text(dir.path() / "m.tsv", Files::line("rail_042"));
  const std::string msg = error_of([&] { load_dataset(dir.path() / "m.tsv"); });
  EXPECT_NE(msg.find("rail_042"), std::string::npos) << msg;
}

TEST(Manifest, ShapeMismatchNamesRecord) {
  TempDir dir;
  Rng rng(4);
  Files f{dir.path()};
  f.add("odd", random_image(4, 4, 3, rng), random_image(4, 3, 1, rng), Image(4, 4, 1));
  write_text(dir.path() / "m.tsv", Files::line("odd"));
  const std::string msg = error_of([&] { load_dataset(dir.path() / "m.tsv"); });
  EXPECT_NE(msg.find("odd"), std::string::npos) << msg;
}

TEST(Manifest, DuplicateIdsAndBadLinesRejected) {
  TempDir dir;
  write_text(dir.path() / "dup.tsv", Files::line("a") + Files::line("a"));
  EXPECT_THROW(load_manifest(dir.path() / "dup.tsv"), DataError);
  write_text(dir.path() / "bad.tsv", "a\tb\n");
  EXPECT_THROW(load_manifest(dir.path() / "bad.tsv"), DataError);
}

TEST(Manifest, SplitColumnFilters) {
  TempDir dir;
  write_text(dir.path() / "m.tsv", Files::line("a") + Files::line("b", "test") + Files::line("c", "train"));
  EXPECT_EQ(load_manifest(dir.path() / "m.tsv").size(), 3U);
  const auto test = load_manifest(dir.path() / "m.tsv", "test");
  ASSERT_EQ(test.size(), 1U);
  EXPECT_EQ(test[0].id, "b");
  EXPECT_EQ(test[0].rgb, dir.path() / "b_rgb.ppm");
}

TEST(Sample, FloatConversionAndBatch) {
  Sample s{"x", Image(2, 1, 3), Image(2, 1, 1), Image(2, 1, 1)};
  s.rgb.bytes = {255, 0, 51, 0, 255, 0};
  s.depth.bytes = {0, 255};
  s.mask.bytes = {255, 0};
  const FloatSample f = to_float(s);
  EXPECT_EQ(f.rgb, (std::vector<float>{1.0F, 0.0F, 0.0F, 1.0F, 0.2F, 0.0F}));
  EXPECT_EQ(f.depth, (std::vector<float>{0.0F, 1.0F}));
  EXPECT_EQ(f.mask, (std::vector<float>{1.0F, 0.0F}));
  const auto b = make_batch<float>({f, f}, {1, 0});
  EXPECT_EQ(b.rgb.shape(), (Shape{2, 3, 1, 2}));
  EXPECT_EQ(b.mask.data()[2], 1.0F);
}

// ---------------------------------------------------------------- synth

TEST(Synth, ZeroDefectsGivesEmptyMask) {
  SynthSpec spec;
  spec.min_defects = spec.max_defects = 0;
  for (const auto& s : synth_generate(spec, 5)) {
    EXPECT_TRUE(s.defects.empty());
    for (auto v : s.sample.mask.bytes) ASSERT_EQ(v, 0);
  }
}

TEST(Synth, SameSeedIsByteIdentical) {
  SynthSpec spec;
  spec.seed = 99;
  const auto a = synth_generate(spec, 8), b = synth_generate(spec, 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(encode_pnm(a[i].sample.rgb), encode_pnm(b[i].sample.rgb));
    EXPECT_EQ(a[i].sample.depth, b[i].sample.depth);
    EXPECT_EQ(a[i].sample.mask, b[i].sample.mask);
  }
  spec.seed = 100;
  EXPECT_NE(synth_generate(spec, 1)[0].sample.rgb, a[0].sample.rgb);
}

TEST(Synth, SampleDependsOnlyOnIndex) {
  SynthSpec spec;
  EXPECT_EQ(synth_sample(spec, 5).sample.rgb, synth_generate(spec, 6)[5].sample.rgb);
}

TEST(Synth, MeanDefectCountNearTwo) {
  SynthSpec spec;
  spec.height = spec.width = 32;
  spec.seed = 7;
  double total = 0;
  for (std::size_t i = 0; i < 1000; ++i) total += static_cast<double>(synth_sample(spec, i).defects.size());
  const double mean = total / 1000.0;
  EXPECT_GE(mean, 1.8);
  EXPECT_LE(mean, 2.2);
}

TEST(Synth, MaskIsUnionOfSupports) {
  SynthSpec spec;
  spec.seed = 5;
  spec.max_defects = 4;
  bool all_kinds[4] = {};
  for (const auto& s : synth_generate(spec, 60)) {
    validate(s.sample);
    std::vector<std::uint8_t> uni(s.sample.mask.bytes.size(), 0);
    for (const auto& d : s.defects) {
      all_kinds[static_cast<int>(d.kind)] = true;
      for (std::size_t i = 0; i < uni.size(); ++i) uni[i] |= d.support[i];
    }
    for (std::size_t i = 0; i < uni.size(); ++i) ASSERT_EQ(s.sample.mask.bytes[i] == 255, uni[i] != 0);
  }
  for (bool k : all_kinds) EXPECT_TRUE(k);
}

TEST(Synth, DefectsChangeDepth) {
  SynthSpec spec;
  spec.seed = 11;
  spec.min_defects = 1;
  for (const auto& s : synth_generate(spec, 20)) {
    double inside = 0, outside = 0;
    std::size_t ni = 0, no = 0;
    for (std::size_t i = 0; i < s.sample.mask.bytes.size(); ++i) {
      const double d = s.sample.depth.bytes[i];
      if (s.sample.mask.bytes[i]) inside += d, ++ni;
      else outside += d, ++no;
    }
    if (ni == 0) continue;
    EXPECT_GT(std::abs(inside / ni - outside / no), 2.0) << s.sample.id;
  }
}

TEST(Synth, RejectsBadSpec) {
  SynthSpec spec;
  spec.min_defects = 3;
  spec.max_defects = 1;
  EXPECT_THROW(synth_sample(spec, 0), ConfigError);
}

// ---------------------------------------------------------------- checkpoint

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  Rng rng(8);
  std::vector<CheckpointEntry> entries;
  for (int k = 0; k < 6; ++k) {
    CheckpointEntry e;
    e.name = "t" + std::to_string(k);
    e.dtype = k % 2 ? DType::kF64 : DType::kF32;
    const auto nd = rng.uniform_int(0, 4);
    std::size_t numel = 1;
    for (std::int64_t d = 0; d < nd; ++d) {
      e.dims.push_back(static_cast<std::uint32_t>(rng.uniform_int(1, 5)));
      numel *= e.dims.back();
    }
    e.payload.resize(numel * dtype_size(e.dtype));
    for (auto& b : e.payload) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    entries.push_back(e);
  }
  const auto bytes = encode_checkpoint(entries);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LPCA");
  EXPECT_EQ(decode_checkpoint(bytes), entries);
}

TEST(Checkpoint, ByteLayout) {
  CheckpointEntry e{"w", DType::kF32, {1}, {0, 0, 0x80, 0x3F}};  // 1.0f
  const auto b = encode_checkpoint({e});
  const std::vector<std::uint8_t> head{'L', 'P', 'C', 'A', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 'w', 0, 1, 1, 0, 0, 0,
                                       0, 0, 0x80, 0x3F};
  ASSERT_EQ(b.size(), head.size() + 4);
  EXPECT_TRUE(std::equal(head.begin(), head.end(), b.begin()));
  const std::uint32_t crc = static_cast<std::uint32_t>(::crc32(0L, b.data(), static_cast<uInt>(head.size())));
  EXPECT_EQ(b[head.size()] | (b[head.size() + 1] << 8) | (b[head.size() + 2] << 16) |
                (static_cast<std::uint32_t>(b[head.size() + 3]) << 24),
            crc);
}

TEST(Checkpoint, CorruptionRejected) {
  CheckpointEntry e{"w", DType::kF64, {2}, std::vector<std::uint8_t>(16, 7)};
  auto b = encode_checkpoint({e});
  auto truncated = b;
  truncated.pop_back();
  EXPECT_NE(error_of([&] { decode_checkpoint(truncated); }).find("CRC"), std::string::npos);
  auto flipped = b;
  flipped[20] ^= 1;
  EXPECT_NE(error_of([&] { decode_checkpoint(flipped); }).find("CRC"), std::string::npos);
}

TEST(Checkpoint, VersionMismatchRejected) {
  auto b = encode_checkpoint({});
  b[4] = 2;
  b.resize(b.size() - 4);
  detail::put_u32(b, detail::crc32_of(b.data(), b.size()));
  EXPECT_NE(error_of([&] { decode_checkpoint(b); }).find("version"), std::string::npos);
}

TEST(Checkpoint, ModelRoundTripForwardBitIdentical) {
  TempDir dir;
  LPCANet<float> a(tiny_config(), 1);
  const auto rgb = Tensor<float>(Shape{1, 3, 64, 64}, std::vector<float>(3 * 64 * 64, 0.3F));
  const auto depth = Tensor<float>(Shape{1, 1, 64, 64}, std::vector<float>(64 * 64, 0.6F));
  {  // move the BN running stats off their init values
    NoGradScope<float> ng;
    Rng rng(4);
    std::vector<float> r(2 * 3 * 64 * 64), d(2 * 64 * 64);
    for (auto& v : r) v = static_cast<float>(rng.uniform());
    for (auto& v : d) v = static_cast<float>(rng.uniform());
    a.forward(Tensor<float>(Shape{2, 3, 64, 64}, r), Tensor<float>(Shape{2, 1, 64, 64}, d), Mode::kTrain);
  }
  save_module(a, dir.path() / "a.ckpt");
  LPCANet<float> b(tiny_config(), 2);
  load_module(b, dir.path() / "a.ckpt");
  const auto ya = a.forward(rgb, depth, Mode::kEval), yb = b.forward(rgb, depth, Mode::kEval);
  ASSERT_EQ(ya.numel(), yb.numel());
  for (std::size_t i = 0; i < ya.numel(); ++i) ASSERT_EQ(ya.data()[i], yb.data()[i]);
  EXPECT_EQ(checkpoint_entries(a), checkpoint_entries(b));
}

TEST(Checkpoint, TruncatedFileRejected) {
  TempDir dir;
  LPCANet<float> a(tiny_config(), 1);
  save_module(a, dir.path() / "a.ckpt");
  auto b = detail::read_file(dir.path() / "a.ckpt");
  b.pop_back();
  write_bytes(dir.path() / "a.ckpt", b);
  EXPECT_THROW(load_module(a, dir.path() / "a.ckpt"), DataError);
}

TEST(Checkpoint, WrongPresetRejectedWithDiff) {
  TempDir dir;
  LPCANet<float> tiny(tiny_config(), 1);
  save_module(tiny, dir.path() / "t.ckpt");
  LPCANet<float> paper(paper_config(), 1);
  const auto before = checkpoint_entries(paper);
  const std::string msg = error_of([&] { load_module(paper, dir.path() / "t.ckpt"); });
  EXPECT_NE(msg.find("does not match"), std::string::npos);
  EXPECT_NE(msg.find("shape"), std::string::npos) << msg.substr(0, 300);
  EXPECT_TRUE(checkpoint_entries(paper) == before);
}

TEST(Checkpoint, NameSetDiffListed) {
  LPCANet<double> m(tiny_config(), 1);
  auto entries = checkpoint_entries(m);
  const std::string dropped = entries.back().name;
  entries.pop_back();
  entries.push_back({"bogus.weight", DType::kF64, {1}, std::vector<std::uint8_t>(8, 0)});
  const std::string msg = error_of([&] { load_into(m, entries); });
  EXPECT_NE(msg.find("-" + dropped), std::string::npos) << msg;
  EXPECT_NE(msg.find("+bogus.weight"), std::string::npos) << msg;
}

TEST(Checkpoint, DtypeMismatchRejected) {
  LPCANet<float> f(tiny_config(), 1);
  LPCANet<double> d(tiny_config(), 1);
  EXPECT_THROW(load_into(d, checkpoint_entries(f)), DataError);
}

}  // namespace
}  // namespace lpca
