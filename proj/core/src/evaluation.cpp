#include "vsret/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace vsret {

using nlohmann::ordered_json;

std::optional<double> average_precision(std::span<const std::uint8_t> relevance, std::size_t n_relevant_total) {
  return average_precision_at(relevance, n_relevant_total, relevance.size());
}

std::optional<double> average_precision_at(std::span<const std::uint8_t> relevance, std::size_t n_relevant_total,
                                           std::size_t k) {
  if (n_relevant_total == 0) return std::nullopt;
  const std::size_t n = std::min(k, relevance.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!relevance[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits > n_relevant_total) throw ParameterError("ranked list holds more relevant items than the stated total");
  return sum / static_cast<double>(n_relevant_total);
}

double harmonic(double base, double novel) {
  if (!(base > 0.0) || !(novel > 0.0)) throw ParameterError("harmonic mean needs two positive values");
  return 2.0 * base * novel / (base + novel);
}

std::vector<std::uint8_t> QueryRun::relevance() const {
  std::vector<std::uint8_t> rel(list.items.size());
  for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = list.items[i].relevant ? 1 : 0;
  return rel;
}

std::size_t QueryRun::relevant_total() const {
  return static_cast<std::size_t>(
      std::count_if(list.items.begin(), list.items.end(), [](const RankedItem& it) { return it.relevant; }));
}

std::vector<QueryAp> query_aps(const Run& run, std::size_t* skipped) {
  std::vector<QueryAp> out;
  std::size_t missing = 0;
  for (const auto& q : run.queries) {
    const auto rel = q.relevance();
    const auto ap = average_precision(rel, q.relevant_total());
    if (!ap) {
      ++missing;
      continue;
    }
    out.push_back({q.query_id, q.class_id, q.tier, *ap});
  }
  if (skipped) *skipped = missing;
  return out;
}

namespace {

std::optional<double> tier_mean(const std::vector<QueryAp>& aps, std::optional<Tier> tier, bool class_mean) {
  if (!class_mean) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& a : aps) {
      if (tier && a.tier != *tier) continue;
      sum += a.ap;
      ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
  std::map<int, std::pair<double, std::size_t>> per_class;
  for (const auto& a : aps) {
    if (tier && a.tier != *tier) continue;
    auto& [s, n] = per_class[a.class_id];
    s += a.ap;
    ++n;
  }
  if (per_class.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [c, sn] : per_class) sum += sn.first / static_cast<double>(sn.second);
  return sum / static_cast<double>(per_class.size());
}

}  // namespace

MapSummary mean_ap(const std::vector<QueryAp>& aps, bool class_mean) {
  MapSummary s;
  s.map_base = tier_mean(aps, Tier::Base, class_mean);
  s.map_novel = tier_mean(aps, Tier::Novel, class_mean);
  s.map_overall = tier_mean(aps, std::nullopt, class_mean);
  if (!s.map_base) s.warnings.emplace_back("no scored base-class queries; base mAP omitted");
  if (!s.map_novel) s.warnings.emplace_back("no scored novel-class queries; novel mAP omitted");
  if (s.map_base && s.map_novel && *s.map_base > 0.0 && *s.map_novel > 0.0) {
    s.harmonic = harmonic(*s.map_base, *s.map_novel);
  } else if (s.map_base && s.map_novel) {
    s.harmonic = 0.0;
  }
  return s;
}

double taxonomy_map(const Run& run, const Manifest& manifest, int level) {
  if (level != 1 && level != 2) throw ParameterError("taxonomy level must be 1 or 2");
  if (!manifest.has_taxonomy()) throw ValidationError("manifest carries no taxonomy fields");
  auto node = [&](int cls) -> int {
    if (cls < 0) return -1;
    const ClassInfo& c = manifest.class_info(cls);
    return level == 2 ? c.parent.value_or(-1) : c.grandparent.value_or(-1);
  };
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& q : run.queries) {
    const int target = node(q.class_id);
    std::vector<std::uint8_t> rel(q.item_classes.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
      rel[i] = (target >= 0 && node(q.item_classes[i]) == target) ? 1 : 0;
      total += rel[i];
    }
    const auto ap = average_precision(rel, total);
    if (!ap) continue;
    sum += *ap;
    ++n;
  }
  if (n == 0) throw ValidationError("no query has a relevant item at taxonomy level " + std::to_string(level));
  return sum / static_cast<double>(n);
}

std::vector<std::vector<std::int64_t>> confusion_matrix(const Run& run, std::size_t top_k,
                                                        const std::vector<int>& class_subset) {
  if (top_k < 1) throw ParameterError("confusion matrix needs top_k >= 1");
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < class_subset.size(); ++i) slot.emplace(class_subset[i], i);
  std::vector<std::vector<std::int64_t>> counts(class_subset.size(), std::vector<std::int64_t>(class_subset.size(), 0));
  for (const auto& q : run.queries) {
    const auto g = slot.find(q.class_id);
    if (g == slot.end()) continue;
    const std::size_t n = std::min(top_k, q.item_classes.size());
    for (std::size_t r = 0; r < n; ++r) {
      const auto p = slot.find(q.item_classes[r]);
      if (p != slot.end()) ++counts[g->second][p->second];
    }
  }
  return counts;
}

std::vector<std::vector<double>> row_normalize(const std::vector<std::vector<std::int64_t>>& counts) {
  std::vector<std::vector<double>> out;
  for (const auto& row : counts) {
    std::int64_t total = 0;
    for (auto v : row) total += v;
    std::vector<double> r(row.size(), 0.0);
    if (total > 0) {
      for (std::size_t j = 0; j < row.size(); ++j) r[j] = static_cast<double>(row[j]) / static_cast<double>(total);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DurationBucket> duration_analysis(const Run& run, const std::vector<double>& edges) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw ParameterError("duration buckets need at least two strictly increasing edges");
  }
  std::vector<DurationBucket> buckets;
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) buckets.push_back({edges[b], edges[b + 1], 0, 0.0});
  for (const auto& q : run.queries) {
    const auto ap = average_precision(q.relevance(), q.relevant_total());
    if (!ap) continue;
    for (auto& bucket : buckets) {
      if (q.duration_s >= bucket.lo && q.duration_s < bucket.hi) {
        bucket.map += *ap;
        ++bucket.queries;
        break;
      }
    }
  }
  std::vector<DurationBucket> out;
  for (auto& b : buckets) {
    if (b.queries == 0) continue;
    b.map /= static_cast<double>(b.queries);
    out.push_back(b);
  }
  return out;
}

std::vector<ClassGain> per_class_gain(const Run& run_a, const Run& run_b) {
  auto key = [](const Run& run) {
    std::vector<std::pair<std::string, int>> k;
    for (const auto& q : run.queries) k.emplace_back(q.query_id, q.class_id);
    std::sort(k.begin(), k.end());
    return k;
  };
  if (key(run_a) != key(run_b)) throw ValidationError("per_class_gain needs runs over identical query sets");
  std::map<int, ClassGain> gains;
  auto add = [&](const Run& run, bool first) {
    for (const auto& ap : query_aps(run)) {
      ClassGain& g = gains[ap.class_id];
      g.class_id = ap.class_id;
      g.tier = ap.tier;
      (first ? g.ap_a : g.ap_b) += ap.ap;
      if (first) ++g.queries;
    }
  };
  add(run_a, true);
  add(run_b, false);
  std::vector<ClassGain> out;
  for (auto& [c, g] : gains) {
    g.ap_a /= static_cast<double>(g.queries);
    g.ap_b /= static_cast<double>(g.queries);
    g.delta = g.ap_a - g.ap_b;
    out.push_back(g);
  }
  std::stable_sort(out.begin(), out.end(), [](const ClassGain& x, const ClassGain& y) { return x.delta > y.delta; });
  return out;
}

std::vector<double> map_curve(const Run& run, std::size_t max_k) {
  std::vector<double> curve(max_k, 0.0);
  std::size_t n = 0;
  for (const auto& q : run.queries) {
    const auto rel = q.relevance();
    const std::size_t total = q.relevant_total();
    if (total == 0) continue;
    ++n;
    for (std::size_t k = 1; k <= max_k; ++k) curve[k - 1] += *average_precision_at(rel, total, k);
  }
  if (n > 0) {
    for (auto& v : curve) v /= static_cast<double>(n);
  }
  return curve;
}

std::vector<RecallCell> proposal_recall_sweep(const Manifest& manifest, const std::vector<std::size_t>& videos,
                                              const std::vector<double>& clip_lens,
                                              const std::vector<std::size_t>& max_lens) {
  std::vector<RecallCell> grid;
  for (double n : clip_lens) {
    for (std::size_t m : max_lens) {
      RecallCell cell{n, m, 0, 0};
      for (std::size_t vi : videos) {
        const VideoRecord& v = manifest.videos.at(vi);
        if (v.is_distractor()) continue;
        ++cell.videos;
        const Interval truth{v.start_s, v.end_s};
        for (const auto& p : video_proposals(v, n, m)) {
          if (tiou({p.start_s, p.end_s}, truth) > kTiouHit) {
            ++cell.hits;
            break;
          }
        }
      }
      grid.push_back(cell);
    }
  }
  return grid;
}

double percent2(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

MetricsReport make_report(const Run& run, const std::string& config_json, bool class_mean) {
  MetricsReport r;
  r.per_query_ap = query_aps(run, &r.summary.skipped);
  const std::size_t skipped = r.summary.skipped;
  r.summary = mean_ap(r.per_query_ap, class_mean);
  r.summary.skipped = skipped;
  if (skipped > 0) r.summary.warnings.push_back(std::to_string(skipped) + " queries had no relevant gallery item and were skipped");
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& q : r.per_query_ap) {
    acc[q.class_id].first += q.ap;
    ++acc[q.class_id].second;
  }
  for (const auto& [c, sn] : acc) r.per_class_ap[c] = sn.first / static_cast<double>(sn.second);
  r.config_json = config_json;
  return r;
}

std::string MetricsReport::to_json() const {
  ordered_json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? ordered_json(percent2(*v)) : ordered_json(nullptr);
  };
  put("map_base", summary.map_base);
  put("map_novel", summary.map_novel);
  put("map_overall", summary.map_overall);
  put("harmonic", summary.harmonic);
  j["queries_scored"] = per_query_ap.size();
  j["queries_skipped"] = summary.skipped;
  j["warnings"] = summary.warnings;
  ordered_json classes = ordered_json::object();
  for (const auto& [c, ap] : per_class_ap) classes[std::to_string(c)] = percent2(ap);
  j["per_class_ap"] = classes;
  ordered_json queries = ordered_json::object();
  for (const auto& q : per_query_ap) queries[q.query_id] = percent2(q.ap);
  j["per_query_ap"] = queries;
  j["config"] = config_json.empty() ? ordered_json(nullptr) : ordered_json::parse(config_json);
  return j.dump(2) + "\n";
}

std::string MetricsReport::per_query_csv() const {
  std::ostringstream out;
  out << "query_id,class_id,tier,ap\n";
  for (const auto& q : per_query_ap) {
    out << q.query_id << ',' << q.class_id << ',' << to_string(q.tier) << ',' << percent2(q.ap) << '\n';
  }
  return out.str();
}

}  // namespace vsret
