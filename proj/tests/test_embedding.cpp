#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"
#include "vsret/embedding.hpp"
#include "vsret/features.hpp"
#include "vsret/numerics.hpp"

namespace vsret {
namespace {

using test::random_tensor;

template <typename T>
Mlp<T> linear_head(const BasicTensor<T>& w) {
  Linear<T> l{BasicParameter<T>("w", w), BasicParameter<T>("b", BasicTensor<T>::vector(std::vector<T>(w.rows(), T{0})))};
  return Mlp<T>({l});
}

TEST(EmbedVideo, IdentityHeadAveragesFrames) {
  const Mlp<float> head = linear_head(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  EXPECT_EQ(embed_video(Tensor::matrix(2, 2, {1, 3, 3, 5}), head), (std::vector<float>{2, 4}));
}

TEST(EmbedVideo, SingleFrameIsHeadOutput) {
  Rng rng(1);
  const auto head = Mlp<float>::create("h", {4, 6, 3}, rng);
  const Tensor frame = random_tensor(1, 4, rng);
  const Tensor out = head.forward(frame);
  EXPECT_EQ(embed_video(frame, head), out.values());
}

TEST(EmbedVideo, PermutationInvariant) {
  Rng rng(2);
  const auto head = Mlp<float>::create("h", {5, 8, 4}, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 2 + rng.below(8);
    const Tensor frames = random_tensor(t, 5, rng);
    std::vector<std::size_t> order(t);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = t; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    Tensor shuffled({t, 5});
    for (std::size_t i = 0; i < t; ++i) std::copy(frames.row(order[i]).begin(), frames.row(order[i]).end(), shuffled.row(i).begin());
    const auto a = embed_video(frames, head);
    const auto b = embed_video(shuffled, head);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-6);
  }
}

TEST(EmbedVideo, LinearHeadCommutesWithPooling) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto head = linear_head(random_tensor(3, 6, rng));
    const Tensor frames = random_tensor(1 + rng.below(9), 6, rng);
    const auto embed_then_pool = embed_video(frames, head);
    const auto pooled = average_pool(frames);
    const auto pool_then_embed = head.forward(Tensor({1, 6}, pooled)).values();
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(embed_then_pool[j], pool_then_embed[j], 1e-6);
  }
}

TEST(EmbedVideo, BatchMatchesPerVideo) {
  Rng rng(4);
  const auto head = Mlp<float>::create("h", {5, 7, 4}, rng);
  FrameBatch<float> batch;
  std::vector<Tensor> videos;
  for (std::size_t t : {3, 1, 6}) {
    videos.push_back(random_tensor(t, 5, rng));
    batch.append(videos.back());
  }
  const Tensor z = embed_batch(batch, head);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const auto single = embed_video(videos[i], head);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(z(i, j), single[j], 1e-6);
  }
}

TEST(EmbedVideo, HeadGradientMatchesFiniteDifferences) {
  Rng rng(5);
  auto head = Mlp<double>::create("h", {4, 5, 3}, rng);
  FrameBatch<double> batch;
  batch.append(random_tensor(3, 4, rng));
  batch.append(random_tensor(2, 4, rng));
  const auto w = random_tensor<double>(2, 3, rng);
  auto loss = [&]() {
    typename Mlp<double>::Cache cache;
    const auto rows = head.forward(batch.frames, &cache);
    const auto z = segment_mean(rows, batch.offsets);
    double l = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) l += z[i] * w[i];
    head.backward(cache, segment_mean_backward(w, batch.offsets), false);
    return l;
  };
  EXPECT_LT(grad_check<double>(loss, head.parameters(), 1e-5).max_rel_error, 1e-4);
}

TEST(Mlp, InputGradientMatchesFiniteDifferences) {
  Rng rng(6);
  auto head = Mlp<double>::create("h", {3, 4, 4, 2}, rng);
  BasicParameter<double> x("x", random_tensor<double>(2, 3, rng));
  const auto w = random_tensor<double>(2, 2, rng);
  auto loss = [&]() {
    typename Mlp<double>::Cache cache;
    const auto y = head.forward(x.value, &cache);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += y[i] * w[i];
    const auto gx = head.backward(cache, w, true);
    for (std::size_t i = 0; i < gx.size(); ++i) x.grad[i] += gx[i];
    return l;
  };
  auto params = head.parameters();
  params.push_back(&x);
  EXPECT_LT(grad_check<double>(loss, params, 1e-5).max_rel_error, 1e-4);
}

TEST(HeadWidths, Layers) {
  EXPECT_EQ(head_widths(64, 32, 2), (std::vector<std::size_t>{64, 32, 32}));
  EXPECT_EQ(head_widths(64, 32, 3), (std::vector<std::size_t>{64, 32, 32, 32}));
}

TEST(Classify, ZeroWeightsGiveUniform) {
  Classifier<float> c{Parameter("c", Tensor::zeros(4, 3))};
  const std::vector<float> z{1, -2, 3};
  for (float p : classify<float>(z, c)) EXPECT_FLOAT_EQ(p, 0.25F);
}

TEST(Classify, StrongLogitWins) {
  Classifier<float> c{Parameter("c", Tensor::matrix(2, 2, {10, 0, 0, 0}))};
  const std::vector<float> z{1, 0};
  EXPECT_GT(classify<float>(z, c)[0], 0.99F);
}

TEST(Classify, ValidDistributionAndTemperatureKeepsArgmax) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Classifier<float> c{Parameter("c", random_tensor(5, 4, rng, 3.0))};
    const auto z = test::random_vector(4, rng, 5.0);
    const auto p = classify<float>(z, c, 1.0);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
    const auto best = std::max_element(p.begin(), p.end()) - p.begin();
    for (double tau : {0.05, 0.5, 4.0}) {
      const auto q = classify<float>(z, c, tau);
      EXPECT_EQ(std::max_element(q.begin(), q.end()) - q.begin(), best);
    }
  }
}

}  // namespace
}  // namespace vsret
