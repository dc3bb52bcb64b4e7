#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vsret/dataset.hpp"
#include "vsret/tensor.hpp"

namespace vsret {

enum class IndexKind { Video, Clip, Moment };

std::string_view to_string(IndexKind kind);
IndexKind parse_index_kind(std::string_view name);

/// Exact search structure over L2-normalized rows.
struct GalleryIndex {
  std::vector<std::string> ids;
  /// Source video of each item. Searching on behalf of a video skips every
  /// item it owns; for video galleries the owner is the item itself.
  std::vector<std::string> owners;
  Tensor embeddings;  // N x C, unit rows
  IndexKind kind = IndexKind::Video;

  [[nodiscard]] std::size_t size() const { return ids.size(); }
  [[nodiscard]] std::size_t dim() const { return embeddings.cols(); }
};

/// Normalizes and stores `embeddings` (N x C). `owners` may be empty, in
/// which case each item owns itself. Throws ValidationError on duplicate ids
/// and DegenerateInputError on a zero row.
GalleryIndex build_index(std::vector<std::string> ids, const Tensor& embeddings, IndexKind kind,
                         std::vector<std::string> owners = {});

struct RankedItem {
  std::string id;
  double distance = 0.0;
  bool relevant = false;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedItem> items;  // ascending distance, ties by ascending id
};

inline constexpr std::size_t kAllItems = std::numeric_limits<std::size_t>::max();

/// Exact k nearest items to the normalized query. Items owned by any of
/// `exclude_owners` are skipped; the query id is always skipped. k =
/// kAllItems ranks the whole remaining gallery. Throws ParameterError if k
/// exceeds what is left after exclusion.
RankedList search(const GalleryIndex& index, std::span<const float> query, std::size_t k, const std::string& query_id,
                  const std::vector<std::string>& exclude_owners = {});

/// Searches with the element-wise mean of `queries`, excluding every id in
/// `query_ids`. The list is labelled with the first id.
RankedList multi_query(const GalleryIndex& index, const std::vector<std::vector<float>>& queries, std::size_t k,
                       const std::vector<std::string>& query_ids);

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

/// intersection / union. Throws DegenerateInputError for zero-length input.
double tiou(Interval a, Interval b);

struct Clip {
  Interval span;
  bool positive = false;  // entirely inside the activity interval
};

/// Back-to-back windows [iL, (i+1)L); the trailing remainder is dropped.
std::vector<Clip> segment_clips(const VideoRecord& record, double clip_len_s);

struct TemporalProposal {
  std::string video_id;
  std::size_t start_clip = 0;  // inclusive
  std::size_t end_clip = 0;    // inclusive
  double start_s = 0.0;
  double end_s = 0.0;

  [[nodiscard]] std::size_t length() const { return end_clip - start_clip + 1; }
};

/// Every run of 1..min(M, n) consecutive clips, ordered by start then length.
/// Only the clip ranges are filled in.
std::vector<TemporalProposal> generate_proposals(std::size_t n_clips, std::size_t max_len);

/// sum_{l=1..min(M,n)} (n - l + 1)
std::size_t proposal_count(std::size_t n_clips, std::size_t max_len);

/// Proposals of one video with ids and times filled from its clips.
std::vector<TemporalProposal> video_proposals(const VideoRecord& record, double clip_len_s, std::size_t max_len);

std::string proposal_id(const TemporalProposal& p);

/// Ranks proposals of every video but the query's own.
RankedList moment_search(const GalleryIndex& proposals, std::span<const float> query, std::size_t k,
                         const std::string& query_id);

/// CSV rows `query_id,rank,gallery_id,distance,relevant`, rank from 1.
std::string ranked_lists_csv(const std::vector<RankedList>& lists);

}  // namespace vsret
