#include <gtest/gtest.h>

#include <cstring>

#include "support.hpp"
#include "vsret/features.hpp"
#include "vsret/fileio.hpp"

namespace vsret {
namespace {

FeatureSequence ramp(std::size_t t, std::size_t d, float fps = 3.0F) {
  FeatureSequence s;
  s.video_id = "v";
  s.fps = fps;
  s.frames = Tensor({t, d});
  for (std::size_t i = 0; i < t * d; ++i) s.frames[i] = static_cast<float>(i);
  return s;
}

TEST(FeatureFile, WriteThenReadIsLossless) {
  test::TempDir dir("features");
  FeatureSequence s;
  s.frames = Tensor::matrix(2, 3, {0.1F, -2.5F, 3e-8F, 7.0F, 1e20F, -0.0F});
  s.fps = 3.0F;
  s.t0 = 1.25F;
  write_features(s, dir.path() / "clip_7.vsf");
  const FeatureSequence r = read_features(dir.path() / "clip_7.vsf");
  EXPECT_EQ(r.video_id, "clip_7");
  EXPECT_EQ(r.frames, s.frames);
  EXPECT_EQ(r.fps, s.fps);
  EXPECT_EQ(r.t0, s.t0);
}

TEST(FeatureFile, RandomRoundTripsAreBitExact) {
  Rng rng(21);
  for (int trial = 0; trial < 10000; ++trial) {
    FeatureSequence s;
    s.frames = test::random_tensor(1 + rng.below(5), 1 + rng.below(6), rng, 10.0);
    s.fps = static_cast<float>(1.0 + rng.below(30));
    s.t0 = static_cast<float>(rng.uniform());
    const std::string bytes = encode_features(s);
    const FeatureSequence r = decode_features(bytes, "x");
    ASSERT_EQ(std::memcmp(r.frames.data(), s.frames.data(), s.frames.size() * sizeof(float)), 0);
    ASSERT_EQ(r.frames.shape(), s.frames.shape());
    ASSERT_EQ(encode_features(r), bytes);
  }
}

TEST(FeatureFile, TruncatedPayloadReportsOffset) {
  const std::string bytes = encode_features(ramp(4, 3));
  try {
    decode_features(std::string_view(bytes).substr(0, bytes.size() - 5), "v");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos);
  }
}

TEST(FeatureFile, BadMagicAndVersion) {
  std::string bytes = encode_features(ramp(2, 2));
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_features(bad, "v"), FormatError);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(decode_features(bad, "v"), FormatError);
}

TEST(FeatureFile, DimensionMismatchAgainstDataset) {
  const std::string bytes = encode_features(ramp(2, 3));
  EXPECT_THROW(decode_features(bytes, "v", 4), DimensionError);
  EXPECT_NO_THROW(decode_features(bytes, "v", 3));
}

TEST(FeatureFile, MissingFileIsIoError) {
  EXPECT_THROW(read_features("/nonexistent/dir/none.vsf"), IoError);
}

TEST(AveragePool, Examples) {
  EXPECT_EQ(average_pool(Tensor::matrix(2, 2, {1, 3, 3, 5})), (std::vector<float>{2, 4}));
  EXPECT_EQ(average_pool(Tensor::matrix(1, 3, {7, 8, 9})), (std::vector<float>{7, 8, 9}));
  EXPECT_EQ(average_pool(Tensor::matrix(3, 2, {4, -1, 4, -1, 4, -1})), (std::vector<float>{4, -1}));
}

TEST(AveragePool, ComposesOverEqualLengthSlices) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t half = 1 + rng.below(6);
    const std::size_t d = 1 + rng.below(5);
    const Tensor all = test::random_tensor(2 * half, d, rng);
    const Tensor a({half, d}, std::vector<float>(all.values().begin(), all.values().begin() + half * d));
    const Tensor b({half, d}, std::vector<float>(all.values().begin() + half * d, all.values().end()));
    const auto pa = average_pool(a);
    const auto pb = average_pool(b);
    const auto pall = average_pool(all);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(pall[j], 0.5F * (pa[j] + pb[j]), 1e-6);
  }
}

TEST(SliceInterval, Examples) {
  const FeatureSequence s = ramp(12, 2);
  const FeatureSequence first = slice_interval(s, 0.0, 2.0);
  EXPECT_EQ(first.length(), 6U);
  EXPECT_EQ(first.frames[0], 0.0F);
  EXPECT_EQ(slice_interval(s, 0.0, 4.0).frames, s.frames);
  EXPECT_THROW(slice_interval(s, 5.0, 9.0), DegenerateInputError);
  EXPECT_THROW(slice_interval(s, 2.0, 2.0), DegenerateInputError);
}

TEST(SliceInterval, KeepsTimeOffset) {
  const FeatureSequence s = ramp(12, 1);
  const FeatureSequence mid = slice_interval(s, 1.0, 2.0);
  EXPECT_EQ(mid.length(), 3U);
  EXPECT_FLOAT_EQ(mid.t0, 1.0F);
  EXPECT_EQ(mid.frames[0], 3.0F);
}

TEST(CapFrames, UniformSubsample) {
  const FeatureSequence s = ramp(10, 1);
  const FeatureSequence c = cap_frames(s, 5);
  EXPECT_EQ(c.frames.values(), (std::vector<float>{0, 2, 4, 6, 8}));
  EXPECT_EQ(cap_frames(s, 0).frames, s.frames);
  EXPECT_EQ(cap_frames(s, 20).frames, s.frames);
}

TEST(SemanticBankFile, RoundTrip) {
  SemanticBankFile f;
  f.names = {"Archery", "Playing piano"};
  f.vectors = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const SemanticBankFile r = decode_semantic_bank(encode_semantic_bank(f), "bank");
  EXPECT_EQ(r.names, f.names);
  EXPECT_EQ(r.vectors, f.vectors);
  std::string bad = encode_semantic_bank(f);
  bad.resize(bad.size() - 1);
  EXPECT_THROW(decode_semantic_bank(bad, "bank"), FormatError);
}

}  // namespace
}  // namespace vsret
