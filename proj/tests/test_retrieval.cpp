#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "vsret/numerics.hpp"
#include "vsret/retrieval.hpp"

namespace vsret {
namespace {

using test::random_tensor;
using test::random_vector;

std::vector<std::string> ids_for(std::size_t n, const std::string& prefix = "g") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(1000 + i));
  return ids;
}

// Independent oracle: normalize in double, score every item, sort by
// (distance, id).
std::vector<std::string> oracle_order(const Tensor& rows, const std::vector<std::string>& ids, std::span<const float> q,
                                      const std::string& skip) {
  auto unit = [](std::span<const float> v) {
    double n = 0.0;
    for (float x : v) n += static_cast<double>(x) * x;
    std::vector<double> out;
    for (float x : v) out.push_back(x / std::sqrt(n));
    return out;
  };
  const auto uq = unit(q);
  std::vector<std::pair<double, std::string>> scored;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == skip) continue;
    const auto r = unit(rows.row(i));
    double d = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) d += (r[j] - uq[j]) * (r[j] - uq[j]);
    scored.emplace_back(std::sqrt(d), ids[i]);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (auto& s : scored) out.push_back(s.second);
  return out;
}

TEST(BuildIndex, NormalizesRows) {
  const Tensor rows = Tensor::matrix(3, 2, {3, 4, 0, 2, 6, 8});
  const GalleryIndex idx = build_index({"a", "b", "c"}, rows, IndexKind::Video);
  EXPECT_EQ(idx.size(), 3U);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(l2_norm<float>(idx.embeddings.row(i)), 1.0, 1e-6);
  EXPECT_TRUE(std::equal(idx.embeddings.row(0).begin(), idx.embeddings.row(0).end(), idx.embeddings.row(2).begin()));
  EXPECT_EQ(idx.owners, idx.ids);
}

TEST(BuildIndex, Errors) {
  EXPECT_THROW(build_index({"a", "a"}, Tensor::matrix(2, 1, {1, 2}), IndexKind::Video), ValidationError);
  EXPECT_THROW(build_index({"a", "b"}, Tensor::matrix(2, 1, {1, 0}), IndexKind::Video), DegenerateInputError);
  EXPECT_THROW(build_index({"a"}, Tensor::matrix(2, 1, {1, 2}), IndexKind::Video), DimensionError);
}

TEST(Search, ExactMatchFirst) {
  Rng rng(1);
  const Tensor rows = random_tensor(10, 4, rng);
  const GalleryIndex idx = build_index(ids_for(10), rows, IndexKind::Video);
  const std::vector<float> q(rows.row(6).begin(), rows.row(6).end());
  const RankedList r = search(idx, q, 3, "query");
  EXPECT_EQ(r.items.front().id, "g1006");
  EXPECT_NEAR(r.items.front().distance, 0.0, 1e-6);
  EXPECT_EQ(r.items.size(), 3U);
}

TEST(Search, TiesBreakById) {
  const Tensor rows = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, -1, 0, 0});
  const GalleryIndex idx = build_index({"c", "a", "b"}, rows, IndexKind::Video);
  const std::vector<float> q{0, 0, 2};
  const RankedList r = search(idx, q, kAllItems, "q");
  ASSERT_EQ(r.items.size(), 3U);
  EXPECT_EQ(r.items[0].id, "a");
  EXPECT_EQ(r.items[1].id, "b");
  EXPECT_EQ(r.items[2].id, "c");
  for (const auto& it : r.items) EXPECT_NEAR(it.distance, std::sqrt(2.0), 1e-6);
}

TEST(Search, MatchesBruteForce) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor rows = random_tensor(50, 8, rng);
    const auto ids = ids_for(50);
    const GalleryIndex idx = build_index(ids, rows, IndexKind::Video);
    const auto q = random_vector(8, rng);
    const RankedList r = search(idx, q, kAllItems, "g1003");
    const auto expect = oracle_order(rows, ids, q, "g1003");
    ASSERT_EQ(r.items.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_EQ(r.items[i].id, expect[i]);
  }
}

TEST(Search, OwnerExclusionAndLimits) {
  const Tensor rows = Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1});
  const GalleryIndex idx = build_index({"v1@0", "v1@1", "v2@0"}, rows, IndexKind::Clip, {"v1", "v1", "v2"});
  const std::vector<float> q{1, 0};
  const RankedList r = search(idx, q, kAllItems, "v1", {"v1"});
  ASSERT_EQ(r.items.size(), 1U);
  EXPECT_EQ(r.items[0].id, "v2@0");
  EXPECT_THROW(search(idx, q, 2, "v1", {"v1"}), ParameterError);
  EXPECT_THROW(search(idx, q, 0, "x"), ParameterError);
  const std::vector<float> zero{0, 0};
  EXPECT_THROW(search(idx, zero, 1, "x"), DegenerateInputError);
  const std::vector<float> wide{1, 0, 0};
  EXPECT_THROW(search(idx, wide, 1, "x"), DimensionError);
}

TEST(MultiQuery, DegenerateAndDuplicateCases) {
  Rng rng(3);
  const Tensor rows = random_tensor(20, 5, rng);
  const GalleryIndex idx = build_index(ids_for(20), rows, IndexKind::Video);
  const auto q = random_vector(5, rng);
  const RankedList single = search(idx, q, kAllItems, "q");
  const RankedList one = multi_query(idx, {q}, kAllItems, {"q"});
  const RankedList five = multi_query(idx, {q, q, q, q, q}, kAllItems, {"q", "q", "q", "q", "q"});
  ASSERT_EQ(one.items.size(), single.items.size());
  for (std::size_t i = 0; i < single.items.size(); ++i) {
    EXPECT_EQ(one.items[i].id, single.items[i].id);
    EXPECT_EQ(five.items[i].id, single.items[i].id);
  }
  std::vector<float> neg(q);
  for (auto& v : neg) v = -v;
  EXPECT_THROW(multi_query(idx, {q, neg}, kAllItems, {"a", "b"}), DegenerateInputError);
}

TEST(MultiQuery, ExcludesEveryGroupMember) {
  Rng rng(4);
  const Tensor rows = random_tensor(6, 3, rng);
  const GalleryIndex idx = build_index(ids_for(6), rows, IndexKind::Video);
  const RankedList r = multi_query(idx, {random_vector(3, rng), random_vector(3, rng)}, kAllItems, {"g1000", "g1004"});
  EXPECT_EQ(r.query_id, "g1000");
  EXPECT_EQ(r.items.size(), 4U);
  for (const auto& it : r.items) {
    EXPECT_NE(it.id, "g1000");
    EXPECT_NE(it.id, "g1004");
  }
}

VideoRecord record(double duration, double start, double end, const std::string& id = "v") {
  VideoRecord v;
  v.id = id;
  v.class_id = 0;
  v.duration_s = duration;
  v.start_s = start;
  v.end_s = end;
  return v;
}

TEST(SegmentClips, Examples) {
  EXPECT_EQ(segment_clips(record(13, 0, 13), 4).size(), 3U);
  const auto clips = segment_clips(record(12, 4, 12), 4);
  ASSERT_EQ(clips.size(), 3U);
  EXPECT_FALSE(clips[0].positive);
  EXPECT_TRUE(clips[1].positive);
  EXPECT_TRUE(clips[2].positive);
  EXPECT_DOUBLE_EQ(clips[1].span.start, 4.0);
  EXPECT_DOUBLE_EQ(clips[1].span.end, 8.0);
  EXPECT_TRUE(segment_clips(record(3, 0, 3), 4).empty());
  VideoRecord d = record(12, 0, 12);
  d.class_id = kDistractor;
  for (const auto& c : segment_clips(d, 4)) EXPECT_FALSE(c.positive);
  EXPECT_THROW(segment_clips(record(12, 0, 12), 0), ParameterError);
}

TEST(Proposals, Counts) {
  EXPECT_EQ(generate_proposals(6, 26).size(), 21U);
  EXPECT_EQ(generate_proposals(6, 2).size(), 11U);
  EXPECT_EQ(generate_proposals(1, 26).size(), 1U);
  EXPECT_TRUE(generate_proposals(0, 26).empty());
  EXPECT_EQ(proposal_count(6, 2), 11U);
}

TEST(Proposals, OrderedByStartThenLength) {
  const auto p = generate_proposals(3, 2);
  const std::vector<std::pair<std::size_t, std::size_t>> expect{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}};
  ASSERT_EQ(p.size(), expect.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(p[i].start_clip, expect[i].first);
    EXPECT_EQ(p[i].end_clip, expect[i].second);
  }
}

TEST(Proposals, VideoProposalsCarryTimes) {
  const auto p = video_proposals(record(13, 0, 13, "vid"), 4, 2);
  ASSERT_EQ(p.size(), 5U);
  EXPECT_EQ(proposal_id(p[1]), "vid#0-1");
  EXPECT_DOUBLE_EQ(p[1].start_s, 0.0);
  EXPECT_DOUBLE_EQ(p[1].end_s, 8.0);
}

TEST(Tiou, Examples) {
  EXPECT_EQ(tiou({1, 5}, {1, 5}), 1.0);
  EXPECT_EQ(tiou({0, 1}, {2, 3}), 0.0);
  EXPECT_NEAR(tiou({0, 4}, {2, 6}), 1.0 / 3.0, 1e-12);
  EXPECT_THROW(tiou({2, 2}, {0, 3}), DegenerateInputError);
}

TEST(Tiou, SymmetricAndMonotoneInGap) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const double a0 = 10 * rng.uniform();
    const Interval a{a0, a0 + 0.1 + 5 * rng.uniform()};
    const double len = 0.1 + 5 * rng.uniform();
    const double b0 = a.end + 2 * rng.uniform();
    const Interval b{b0, b0 + len};
    EXPECT_EQ(tiou(a, b), tiou(b, a));
    EXPECT_DOUBLE_EQ(tiou(a, a), 1.0);
    const double shift = (b0 - a.start) * rng.uniform();
    const Interval closer{b0 - shift, b0 - shift + len};
    if (closer.start >= a.start) EXPECT_GE(tiou(a, closer) + 1e-12, tiou(a, b));
  }
}

TEST(MomentSearch, SelfExclusionAndExactMatch) {
  const Tensor rows = Tensor::matrix(4, 2, {1, 0, 0, 1, 1, 0.1F, 0.5F, 0.5F});
  const GalleryIndex idx =
      build_index({"q#0-0", "q#1-1", "o#0-0", "o#0-1"}, rows, IndexKind::Moment, {"q", "q", "o", "o"});
  const std::vector<float> query{1, 0.1F};
  const RankedList r = moment_search(idx, query, kAllItems, "q");
  ASSERT_EQ(r.items.size(), 2U);
  EXPECT_EQ(r.items[0].id, "o#0-0");
  EXPECT_NEAR(r.items[0].distance, 0.0, 1e-6);
}

TEST(MomentSearch, MatchesBruteForce) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.below(90);
    const Tensor rows = random_tensor(n, 6, rng);
    std::vector<std::string> ids;
    std::vector<std::string> owners;
    for (std::size_t i = 0; i < n; ++i) {
      owners.push_back("v" + std::to_string(i % 7));
      ids.push_back(owners.back() + "#" + std::to_string(i));
    }
    const GalleryIndex idx = build_index(ids, rows, IndexKind::Moment, owners);
    const auto q = random_vector(6, rng);
    const RankedList r = moment_search(idx, q, kAllItems, "v3");
    std::vector<std::string> kept_ids;
    std::vector<float> kept_rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (owners[i] == "v3") continue;
      kept_ids.push_back(ids[i]);
      kept_rows.insert(kept_rows.end(), rows.row(i).begin(), rows.row(i).end());
    }
    const auto expect = oracle_order(Tensor({kept_ids.size(), 6}, kept_rows), kept_ids, q, "");
    ASSERT_EQ(r.items.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_EQ(r.items[i].id, expect[i]);
  }
}

TEST(RankedCsv, Format) {
  RankedList l;
  l.query_id = "q1";
  l.items = {{"a", 0.5, true}, {"b", 1.25, false}};
  EXPECT_EQ(ranked_lists_csv({l}), "query_id,rank,gallery_id,distance,relevant\nq1,1,a,0.5,1\nq1,2,b,1.25,0\n");
}

}  // namespace
}  // namespace vsret
