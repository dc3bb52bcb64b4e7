#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vsret/dataset.hpp"
#include "vsret/retrieval.hpp"

namespace vsret {

/// Mean over relevant hits of precision-at-hit, divided by
/// `n_relevant_total`. nullopt when nothing in the universe is relevant.
std::optional<double> average_precision(std::span<const std::uint8_t> relevance, std::size_t n_relevant_total);

/// AP restricted to the first `k` ranks, with the same denominator.
std::optional<double> average_precision_at(std::span<const std::uint8_t> relevance, std::size_t n_relevant_total,
                                           std::size_t k);

/// 2bn/(b+n). Throws ParameterError unless both are positive.
double harmonic(double base, double novel);

/// One query's ranked gallery with the class of every ranked item
/// (kDistractor for distractors and negative clips).
struct QueryRun {
  std::string query_id;
  int class_id = 0;
  Tier tier = Tier::Base;
  double duration_s = 0.0;
  RankedList list;
  std::vector<int> item_classes;  // parallel to list.items

  [[nodiscard]] std::vector<std::uint8_t> relevance() const;
  [[nodiscard]] std::size_t relevant_total() const;
};

struct Run {
  std::vector<QueryRun> queries;
};

struct QueryAp {
  std::string query_id;
  int class_id = 0;
  Tier tier = Tier::Base;
  double ap = 0.0;
};

/// Fractions in [0, 1]; a tier with no scored queries is absent.
struct MapSummary {
  std::optional<double> map_base;
  std::optional<double> map_novel;
  std::optional<double> map_overall;
  std::optional<double> harmonic;
  std::size_t skipped = 0;  // queries with no relevant gallery item
  std::vector<std::string> warnings;
};

std::vector<QueryAp> query_aps(const Run& run, std::size_t* skipped = nullptr);

/// Query-mean per tier; `class_mean` averages per-class means instead.
MapSummary mean_ap(const std::vector<QueryAp>& aps, bool class_mean = false);

/// Class-level mAP with relevance widened to a shared parent (level 2) or a
/// shared grandparent (level 1).
double taxonomy_map(const Run& run, const Manifest& manifest, int level);

/// counts[g][p]: items of class subset[p] in the top-k of queries of class
/// subset[g]. Items outside the subset are ignored.
std::vector<std::vector<std::int64_t>> confusion_matrix(const Run& run, std::size_t top_k,
                                                        const std::vector<int>& class_subset);
std::vector<std::vector<double>> row_normalize(const std::vector<std::vector<std::int64_t>>& counts);

struct DurationBucket {
  double lo = 0.0;
  double hi = 0.0;  // bucket is [lo, hi)
  std::size_t queries = 0;
  double map = 0.0;
};

/// Mean AP of queries bucketed by duration; empty buckets are omitted.
std::vector<DurationBucket> duration_analysis(const Run& run, const std::vector<double>& edges);

struct ClassGain {
  int class_id = 0;
  Tier tier = Tier::Base;
  std::size_t queries = 0;
  double ap_a = 0.0;
  double ap_b = 0.0;
  double delta = 0.0;  // ap_a - ap_b
};

/// Per-class mean-AP difference sorted by descending delta, ties by class id.
std::vector<ClassGain> per_class_gain(const Run& run_a, const Run& run_b);

/// mAP@k for k = 1..max_k over all scored queries.
std::vector<double> map_curve(const Run& run, std::size_t max_k);

struct RecallCell {
  double clip_len_s = 0.0;
  std::size_t max_len = 0;
  std::size_t videos = 0;
  std::size_t hits = 0;
  [[nodiscard]] double recall() const { return videos == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(videos); }
};

inline constexpr double kTiouHit = 0.5;

/// Fraction of activity intervals among `videos` covered by at least one
/// proposal with tIoU > 0.5, for every (N, M) pair. Videos too short for a
/// single clip count as misses.
std::vector<RecallCell> proposal_recall_sweep(const Manifest& manifest, const std::vector<std::size_t>& videos,
                                              const std::vector<double>& clip_lens,
                                              const std::vector<std::size_t>& max_lens);

struct MetricsReport {
  MapSummary summary;
  std::map<int, double> per_class_ap;  // class-mean of query APs
  std::vector<QueryAp> per_query_ap;
  std::string config_json;  // echo of the producing configuration

  /// Percentages rounded to two decimals.
  [[nodiscard]] std::string to_json() const;
  /// `query_id,class_id,tier,ap` with AP as a percentage.
  [[nodiscard]] std::string per_query_csv() const;
};

MetricsReport make_report(const Run& run, const std::string& config_json, bool class_mean = false);

/// Percentage rounded to two decimals.
double percent2(double fraction);

}  // namespace vsret
