#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "vsret/evaluation.hpp"

namespace vsret {
namespace {

std::optional<double> ap(std::initializer_list<std::uint8_t> rel, std::size_t total) {
  const std::vector<std::uint8_t> v(rel);
  return average_precision(v, total);
}

QueryRun query(const std::string& id, int cls, Tier tier, const std::vector<int>& item_classes, double duration = 10.0) {
  QueryRun q;
  q.query_id = id;
  q.class_id = cls;
  q.tier = tier;
  q.duration_s = duration;
  q.list.query_id = id;
  for (std::size_t i = 0; i < item_classes.size(); ++i) {
    q.list.items.push_back({"g" + std::to_string(i), static_cast<double>(i), item_classes[i] == cls});
  }
  q.item_classes = item_classes;
  return q;
}

// Random run over `k` classes (first half base), gallery of shuffled labels.
vsret::Run random_run(Rng& rng, std::size_t k, std::size_t gallery, std::size_t queries) {
  vsret::Run run;
  for (std::size_t qi = 0; qi < queries; ++qi) {
    std::vector<int> items(gallery);
    for (auto& c : items) c = rng.below(8) == 0 ? kDistractor : static_cast<int>(rng.below(k));
    const int cls = static_cast<int>(rng.below(k));
    run.queries.push_back(query("q" + std::to_string(qi), cls, cls < static_cast<int>(k / 2) ? Tier::Base : Tier::Novel,
                                items, 5.0 + 60.0 * rng.uniform()));
  }
  return run;
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(*ap({1, 1, 0}, 2), 1.0);
  EXPECT_NEAR(*ap({1, 0, 1}, 2), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(*ap({1, 0, 1}, 2), 0.8333, 1e-4);
  EXPECT_NEAR(*ap({0, 0, 1}, 1), 1.0 / 3.0, 1e-15);
  EXPECT_FALSE(ap({0, 0}, 0).has_value());
  EXPECT_NEAR(*ap({1, 0}, 4), 0.25, 1e-15);
}

TEST(AveragePrecision, MatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<std::uint8_t> rel(n);
    std::vector<int> as_int(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      rel[i] = rng.below(3) == 0 ? 1 : 0;
      as_int[i] = rel[i];
      total += rel[i];
    }
    const auto got = average_precision(rel, total);
    if (total == 0) {
      EXPECT_FALSE(got.has_value());
      continue;
    }
    EXPECT_NEAR(*got, test::brute_ap(as_int, total), 1e-12);
  }
}

TEST(AveragePrecision, DistractorAboveHitLowersAp) {
  const vsret::Run clean{{query("q", 1, Tier::Base, {1, 1, 2})}};
  const vsret::Run noisy{{query("q", 1, Tier::Base, {kDistractor, 1, 1, 2})}};
  EXPECT_EQ(noisy.queries[0].relevant_total(), 2U);
  EXPECT_LT(query_aps(noisy)[0].ap, query_aps(clean)[0].ap);
}

TEST(AveragePrecision, AtKIsPrefix) {
  const std::vector<std::uint8_t> rel{0, 1, 0, 1, 1};
  EXPECT_NEAR(*average_precision_at(rel, 3, 2), 0.5 / 3.0, 1e-15);
  EXPECT_NEAR(*average_precision_at(rel, 3, 5), *average_precision(rel, 3), 1e-15);
}

TEST(MeanAp, Examples) {
  std::vector<QueryAp> ones{{"a", 0, Tier::Base, 1.0}, {"b", 1, Tier::Novel, 1.0}};
  const MapSummary s = mean_ap(ones);
  EXPECT_EQ(*s.map_overall, 1.0);
  EXPECT_EQ(*s.harmonic, 1.0);
  std::vector<QueryAp> two{{"a", 0, Tier::Base, 0.2}, {"b", 0, Tier::Base, 0.8}};
  const MapSummary t = mean_ap(two);
  EXPECT_NEAR(*t.map_base, 0.5, 1e-15);
  EXPECT_FALSE(t.map_novel.has_value());
  EXPECT_FALSE(t.harmonic.has_value());
}

TEST(MeanAp, ClassMeanAveragesClassesFirst) {
  std::vector<QueryAp> aps{{"a", 0, Tier::Base, 0.0}, {"b", 0, Tier::Base, 0.0}, {"c", 1, Tier::Base, 0.9}};
  EXPECT_NEAR(*mean_ap(aps, false).map_base, 0.3, 1e-15);
  EXPECT_NEAR(*mean_ap(aps, true).map_base, 0.45, 1e-15);
}

TEST(MeanAp, SkipsQueriesWithoutRelevantItems) {
  const vsret::Run run{{query("q1", 1, Tier::Base, {1, 2}), query("q2", 3, Tier::Novel, {1, 2})}};
  const MetricsReport r = make_report(run, "{}");
  EXPECT_EQ(r.summary.skipped, 1U);
  EXPECT_FALSE(r.summary.map_novel.has_value());
  EXPECT_FALSE(r.summary.warnings.empty());
}

TEST(Harmonic, ReferenceValues) {
  EXPECT_NEAR(harmonic(25.76, 16.28), 19.95, 0.01);
  EXPECT_NEAR(harmonic(32.42, 19.26), 24.16, 0.01);
  EXPECT_NEAR(harmonic(9.18, 13.02), 10.76, 0.01);
  EXPECT_NEAR(harmonic(8.44, 7.03), 7.67, 0.01);
  EXPECT_DOUBLE_EQ(harmonic(0.37, 0.37), 0.37);
  EXPECT_THROW(harmonic(0.0, 1.0), ParameterError);
  EXPECT_THROW(harmonic(1.0, -1.0), ParameterError);
}

TEST(Harmonic, Bounds) {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const double b = 1e-3 + rng.uniform();
    const double n = 1e-3 + rng.uniform();
    const double h = harmonic(b, n);
    EXPECT_LE(h, 0.5 * (b + n) + 1e-15);
    EXPECT_LE(h, 2.0 * std::min(b, n) + 1e-15);
  }
}

Manifest taxonomy_manifest(std::size_t k, int parents, int grandparents) {
  Manifest m;
  for (std::size_t c = 0; c < k; ++c) {
    const int p = static_cast<int>(c) % parents;
    m.classes.push_back({static_cast<int>(c), "c" + std::to_string(c), c < k / 2 ? Tier::Base : Tier::Novel, p,
                         p % grandparents});
  }
  return m;
}

double class_map(const vsret::Run& run) { return *mean_ap(query_aps(run)).map_overall; }

TEST(Taxonomy, SingleGrandparentIsPerfect) {
  Rng rng(3);
  vsret::Run run = random_run(rng, 6, 20, 10);
  for (auto& q : run.queries) {
    for (std::size_t i = 0; i < q.item_classes.size(); ++i) {
      if (q.item_classes[i] != kDistractor) continue;
      q.item_classes[i] = 0;
      q.list.items[i].relevant = q.class_id == 0;
    }
  }
  EXPECT_DOUBLE_EQ(taxonomy_map(run, taxonomy_manifest(6, 3, 1), 1), 1.0);
}

TEST(Taxonomy, MatchesBruteForceOracle) {
  Rng rng(4);
  const Manifest m = taxonomy_manifest(9, 3, 2);
  for (int trial = 0; trial < 50; ++trial) {
    const vsret::Run run = random_run(rng, 9, 25, 8);
    for (int level : {1, 2}) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& q : run.queries) {
        auto node = [&](int c) {
          if (c < 0) return -1;
          return level == 2 ? *m.class_info(c).parent : *m.class_info(c).grandparent;
        };
        std::vector<int> rel;
        std::size_t total = 0;
        for (int c : q.item_classes) {
          rel.push_back(node(c) == node(q.class_id) ? 1 : 0);
          total += rel.back();
        }
        if (total == 0) continue;
        sum += test::brute_ap(rel, total);
        ++n;
      }
      EXPECT_NEAR(taxonomy_map(run, m, level), sum / static_cast<double>(n), 1e-12);
    }
  }
}

TEST(Taxonomy, WideningRelevanceCanLowerAp) {
  // Class 0 (parent 0) ranks its only same-class item first and a sibling
  // class last: class AP 1.0, parent-level AP (1 + 2/5)/2 = 0.7.
  Manifest m = taxonomy_manifest(4, 2, 1);
  const vsret::Run run{{query("q", 0, Tier::Base, {0, 1, 1, 3, 2})}};
  EXPECT_DOUBLE_EQ(class_map(run), 1.0);
  EXPECT_NEAR(taxonomy_map(run, m, 2), 0.7, 1e-12);
  EXPECT_THROW(taxonomy_map(run, Manifest{}, 2), ValidationError);
}

TEST(Confusion, SaturatedTopKCountsClassSizes) {
  const std::vector<int> gallery{0, 0, 1, 2, 2, 2, kDistractor};
  const vsret::Run run{{query("a", 0, Tier::Base, gallery), query("b", 2, Tier::Base, gallery)}};
  const auto m = confusion_matrix(run, 100, {0, 1, 2});
  EXPECT_EQ(m[0], (std::vector<std::int64_t>{2, 1, 3}));
  EXPECT_EQ(m[1], (std::vector<std::int64_t>{0, 0, 0}));
  EXPECT_EQ(m[2], (std::vector<std::int64_t>{2, 1, 3}));
  const auto top2 = confusion_matrix(run, 2, {0, 2});
  EXPECT_EQ(top2[0], (std::vector<std::int64_t>{2, 0}));
  const auto norm = row_normalize(m);
  EXPECT_NEAR(norm[0][2], 0.5, 1e-15);
  EXPECT_EQ(norm[1][0], 0.0);
}

TEST(Confusion, NonNegativeOnRandomRuns) {
  Rng rng(5);
  const vsret::Run run = random_run(rng, 5, 30, 20);
  for (const auto& row : confusion_matrix(run, 10, {0, 1, 2, 3, 4}))
    for (auto v : row) EXPECT_GE(v, 0);
}

TEST(Duration, SingleBucketAndPartition) {
  Rng rng(6);
  const vsret::Run run = random_run(rng, 6, 20, 40);
  const double overall = class_map(run);
  const auto one = duration_analysis(run, {0.0, 1e9});
  ASSERT_EQ(one.size(), 1U);
  EXPECT_NEAR(one[0].map, overall, 1e-12);

  const auto parts = duration_analysis(run, {0.0, 20.0, 40.0, 1e9});
  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& b : parts) {
    weighted += b.map * static_cast<double>(b.queries);
    n += b.queries;
  }
  EXPECT_NEAR(weighted / static_cast<double>(n), overall, 1e-12);

  for (const auto& b : parts) {
    double sum = 0.0;
    std::size_t cnt = 0;
    for (const auto& q : run.queries) {
      if (q.duration_s < b.lo || q.duration_s >= b.hi) continue;
      std::vector<int> rel;
      for (const auto& it : q.list.items) rel.push_back(it.relevant ? 1 : 0);
      const std::size_t total = q.relevant_total();
      if (total == 0) continue;
      sum += test::brute_ap(rel, total);
      ++cnt;
    }
    EXPECT_EQ(cnt, b.queries);
    EXPECT_NEAR(b.map, sum / static_cast<double>(cnt), 1e-12);
  }
}

TEST(ClassGain, IdentitySwapAndLinearity) {
  Rng rng(7);
  vsret::Run a = random_run(rng, 5, 25, 30);
  vsret::Run b = a;
  for (auto& q : b.queries) std::reverse(q.list.items.begin(), q.list.items.end()), std::reverse(q.item_classes.begin(), q.item_classes.end());
  for (const auto& g : per_class_gain(a, a)) EXPECT_EQ(g.delta, 0.0);

  const auto ab = per_class_gain(a, b);
  const auto ba = per_class_gain(b, a);
  for (const auto& g : ab) {
    const auto it = std::find_if(ba.begin(), ba.end(), [&](const ClassGain& x) { return x.class_id == g.class_id; });
    ASSERT_NE(it, ba.end());
    EXPECT_DOUBLE_EQ(it->delta, -g.delta);
  }
  for (std::size_t i = 1; i < ab.size(); ++i) EXPECT_GE(ab[i - 1].delta, ab[i].delta);

  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& g : ab) {
    weighted += g.delta * static_cast<double>(g.queries);
    n += g.queries;
  }
  EXPECT_NEAR(weighted / static_cast<double>(n), class_map(a) - class_map(b), 1e-12);

  vsret::Run fewer = a;
  fewer.queries.pop_back();
  EXPECT_THROW(per_class_gain(a, fewer), ValidationError);
}

TEST(MapCurve, EndsAtFullMap) {
  Rng rng(8);
  const vsret::Run run = random_run(rng, 4, 15, 12);
  const auto curve = map_curve(run, 15);
  ASSERT_EQ(curve.size(), 15U);
  for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_GE(curve[k], curve[k - 1]);
  EXPECT_NEAR(curve.back(), class_map(run), 1e-12);
}

TEST(MapInvariance, MonotoneDistanceTransformKeepsMap) {
  Rng rng(9);
  vsret::Run run = random_run(rng, 4, 20, 10);
  const double before = class_map(run);
  for (auto& q : run.queries)
    for (auto& it : q.list.items) it.distance = std::exp(3.0 * it.distance) + 7.0;
  EXPECT_EQ(class_map(run), before);
}

TEST(ProposalRecall, FullCoverageAndMonotoneInM) {
  Manifest m;
  m.classes = {{0, "c", Tier::Base, {}, {}}};
  Rng rng(10);
  for (int i = 0; i < 10; ++i) {
    VideoRecord v;
    v.id = "v" + std::to_string(i);
    v.class_id = 0;
    v.split = Split::Test;
    v.duration_s = 8.0 + 40.0 * rng.uniform();
    v.start_s = v.duration_s * 0.4 * rng.uniform();
    v.end_s = v.start_s + (v.duration_s - v.start_s) * (0.2 + 0.8 * rng.uniform());
    m.videos.push_back(v);
  }
  VideoRecord full;
  full.id = "full";
  full.class_id = 0;
  full.duration_s = 16.0;
  full.end_s = 16.0;
  m.videos.push_back(full);
  const auto one = proposal_recall_sweep(m, {10}, {4.0}, {4});
  EXPECT_EQ(one[0].hits, 1U);

  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  const std::vector<std::size_t> ms{1, 2, 4, 8, 26};
  const auto grid = proposal_recall_sweep(m, all, {4.0, 6.0, 8.0}, ms);
  ASSERT_EQ(grid.size(), 15U);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i].clip_len_s == grid[i - 1].clip_len_s) EXPECT_GE(grid[i].hits, grid[i - 1].hits);
  }
}

TEST(Report, JsonAndCsv) {
  const vsret::Run run{{query("q1", 0, Tier::Base, {0, 1, 0}), query("q2", 1, Tier::Novel, {0, 1})}};
  const MetricsReport r = make_report(run, R"({"seed":3})");
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_DOUBLE_EQ(j["map_base"].get<double>(), percent2(*r.summary.map_base));
  EXPECT_DOUBLE_EQ(j["map_novel"].get<double>(), 50.0);
  EXPECT_EQ(j["config"]["seed"], 3);
  EXPECT_EQ(percent2(0.123456), 12.35);
  std::istringstream csv(r.per_query_csv());
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "query_id,class_id,tier,ap");
}

}  // namespace
}  // namespace vsret
