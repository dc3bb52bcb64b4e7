#include "vsret/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "vsret/numerics.hpp"

namespace vsret {

std::string_view to_string(IndexKind kind) {
  switch (kind) {
    case IndexKind::Video:
      return "video";
    case IndexKind::Clip:
      return "clip";
    case IndexKind::Moment:
      return "moment";
  }
  return "video";
}

IndexKind parse_index_kind(std::string_view name) {
  if (name == "video") return IndexKind::Video;
  if (name == "clip") return IndexKind::Clip;
  if (name == "moment") return IndexKind::Moment;
  throw ParameterError("unknown retrieval mode \"" + std::string(name) + "\" (expected video, clip or moment)");
}

GalleryIndex build_index(std::vector<std::string> ids, const Tensor& embeddings, IndexKind kind,
                         std::vector<std::string> owners) {
  if (ids.empty()) throw ParameterError("cannot build an empty gallery");
  if (embeddings.rank() != 2 || embeddings.rows() != ids.size()) {
    throw DimensionError("gallery has " + std::to_string(ids.size()) + " ids but embeddings of shape " +
                         shape_to_string(embeddings.shape()));
  }
  if (!owners.empty() && owners.size() != ids.size()) throw DimensionError("gallery owners do not match ids");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate gallery id '" + id + "'");
  }
  GalleryIndex index;
  index.kind = kind;
  index.embeddings = embeddings;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!(l2_norm<float>(embeddings.row(i)) > kNormEpsilon)) {
      throw DegenerateInputError("gallery item '" + ids[i] + "' has a zero embedding");
    }
    const auto unit = l2_normalize<float>(embeddings.row(i));
    std::copy(unit.begin(), unit.end(), index.embeddings.row(i).begin());
  }
  index.owners = owners.empty() ? ids : std::move(owners);
  index.ids = std::move(ids);
  return index;
}

RankedList search(const GalleryIndex& index, std::span<const float> query, std::size_t k, const std::string& query_id,
                  const std::vector<std::string>& exclude_owners) {
  if (query.size() != index.dim()) {
    throw DimensionError("query width " + std::to_string(query.size()) + " does not match gallery width " +
                         std::to_string(index.dim()));
  }
  if (k == 0) throw ParameterError("k must be positive");
  if (!(l2_norm<float>(query) > kNormEpsilon)) throw DegenerateInputError("query '" + query_id + "' has a zero embedding");
  const std::vector<float> q = l2_normalize<float>(query);

  struct Hit {
    double distance;
    std::size_t row;
  };
  std::vector<Hit> hits;
  hits.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index.ids[i] == query_id) continue;
    if (std::find(exclude_owners.begin(), exclude_owners.end(), index.owners[i]) != exclude_owners.end()) continue;
    hits.push_back({euclidean<float>(q, index.embeddings.row(i)), i});
  }
  const std::size_t want = k == kAllItems ? hits.size() : k;
  if (want > hits.size()) {
    throw ParameterError("k = " + std::to_string(k) + " exceeds the " + std::to_string(hits.size()) +
                         " gallery items available to query '" + query_id + "'");
  }
  auto before = [&](const Hit& a, const Hit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return index.ids[a.row] < index.ids[b.row];
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(want), hits.end(), before);
  RankedList out;
  out.query_id = query_id;
  out.items.reserve(want);
  for (std::size_t i = 0; i < want; ++i) out.items.push_back({index.ids[hits[i].row], hits[i].distance, false});
  return out;
}

RankedList multi_query(const GalleryIndex& index, const std::vector<std::vector<float>>& queries, std::size_t k,
                       const std::vector<std::string>& query_ids) {
  if (queries.empty() || queries.size() != query_ids.size()) {
    throw ParameterError("multi_query needs one id per query and at least one query");
  }
  std::vector<double> acc(queries.front().size(), 0.0);
  for (const auto& q : queries) {
    if (q.size() != acc.size()) throw DimensionError("multi_query: queries differ in width");
    for (std::size_t j = 0; j < q.size(); ++j) acc[j] += q[j];
  }
  std::vector<float> mean(acc.size());
  for (std::size_t j = 0; j < acc.size(); ++j) mean[j] = static_cast<float>(acc[j] / static_cast<double>(queries.size()));
  if (!(l2_norm<float>(mean) > kNormEpsilon)) {
    throw DegenerateInputError("mean of the queries led by '" + query_ids.front() + "' is a zero vector");
  }
  return search(index, mean, k, query_ids.front(), query_ids);
}

double tiou(Interval a, Interval b) {
  if (!(a.end > a.start) || !(b.end > b.start)) throw DegenerateInputError("tiou of a zero-length interval");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

std::vector<Clip> segment_clips(const VideoRecord& record, double clip_len_s) {
  if (!(clip_len_s > 0.0)) throw ParameterError("clip length must be positive");
  const auto n = static_cast<std::size_t>(std::floor(record.duration_s / clip_len_s + 1e-9));
  std::vector<Clip> clips;
  clips.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Clip c;
    c.span = {static_cast<double>(i) * clip_len_s, static_cast<double>(i + 1) * clip_len_s};
    c.positive = !record.is_distractor() && c.span.start >= record.start_s - 1e-9 && c.span.end <= record.end_s + 1e-9;
    clips.push_back(c);
  }
  return clips;
}

std::size_t proposal_count(std::size_t n_clips, std::size_t max_len) {
  const std::size_t top = std::min(n_clips, max_len);
  std::size_t total = 0;
  for (std::size_t l = 1; l <= top; ++l) total += n_clips - l + 1;
  return total;
}

std::vector<TemporalProposal> generate_proposals(std::size_t n_clips, std::size_t max_len) {
  std::vector<TemporalProposal> out;
  out.reserve(proposal_count(n_clips, max_len));
  for (std::size_t s = 0; s < n_clips; ++s) {
    for (std::size_t l = 1; l <= max_len && s + l <= n_clips; ++l) {
      TemporalProposal p;
      p.start_clip = s;
      p.end_clip = s + l - 1;
      out.push_back(p);
    }
  }
  return out;
}

std::vector<TemporalProposal> video_proposals(const VideoRecord& record, double clip_len_s, std::size_t max_len) {
  const std::vector<Clip> clips = segment_clips(record, clip_len_s);
  std::vector<TemporalProposal> out = generate_proposals(clips.size(), max_len);
  for (auto& p : out) {
    p.video_id = record.id;
    p.start_s = clips[p.start_clip].span.start;
    p.end_s = clips[p.end_clip].span.end;
  }
  return out;
}

std::string proposal_id(const TemporalProposal& p) {
  return p.video_id + "#" + std::to_string(p.start_clip) + "-" + std::to_string(p.end_clip);
}

RankedList moment_search(const GalleryIndex& proposals, std::span<const float> query, std::size_t k,
                         const std::string& query_id) {
  return search(proposals, query, k, query_id, {query_id});
}

std::string ranked_lists_csv(const std::vector<RankedList>& lists) {
  std::ostringstream out;
  out.precision(9);
  out << "query_id,rank,gallery_id,distance,relevant\n";
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.items.size(); ++r) {
      const auto& item = list.items[r];
      out << list.query_id << ',' << (r + 1) << ',' << item.id << ',' << item.distance << ',' << (item.relevant ? 1 : 0)
          << '\n';
    }
  }
  return out.str();
}

}  // namespace vsret
