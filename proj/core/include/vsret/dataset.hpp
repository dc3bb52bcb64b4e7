#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsret/features.hpp"

namespace vsret {

enum class Tier { Base, Novel };
enum class Split { Train, Validation, Test };

/// class_id of gallery-only distractor videos.
inline constexpr int kDistractor = -1;
inline constexpr std::string_view kDistractorName = "__distractor__";

std::string_view to_string(Tier tier);
std::string_view to_string(Split split);

struct ClassInfo {
  int id = 0;
  std::string name;
  Tier tier = Tier::Base;
  std::optional<int> parent;       // level-2 taxonomy node
  std::optional<int> grandparent;  // level-1 taxonomy node

  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

struct VideoRecord {
  std::string id;
  int class_id = kDistractor;
  Split split = Split::Train;
  double duration_s = 0.0;
  double start_s = 0.0;  // activity interval
  double end_s = 0.0;
  std::string feature_file;  // relative to the manifest directory

  [[nodiscard]] bool is_distractor() const { return class_id == kDistractor; }

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct Manifest {
  int version = 1;
  std::vector<ClassInfo> classes;  // indexed by class id after validation
  std::vector<VideoRecord> videos;
  /// Directory feature_file paths resolve against. Not serialized.
  std::filesystem::path base_dir;

  [[nodiscard]] std::size_t num_classes() const { return classes.size(); }
  [[nodiscard]] const ClassInfo& class_info(int id) const { return classes.at(static_cast<std::size_t>(id)); }
  [[nodiscard]] std::filesystem::path feature_path(const VideoRecord& v) const { return base_dir / v.feature_file; }
  [[nodiscard]] std::optional<std::size_t> find_video(std::string_view id) const;
  [[nodiscard]] std::vector<std::size_t> videos_in(Split split) const;
  [[nodiscard]] std::vector<int> class_ids(Tier tier) const;
  [[nodiscard]] bool has_taxonomy() const;
};

/// Parses and validates a manifest document. With `require_videos` false a
/// class-list-only document (such as the shipped label split) is accepted.
Manifest parse_manifest(std::string_view text, const std::string& context, bool require_videos = true);
Manifest load_manifest(const std::filesystem::path& path);
/// Label split without videos: {version, classes[]}.
Manifest load_class_list(const std::filesystem::path& path);

/// Throws ValidationError naming the offending field and record.
void validate_manifest(const Manifest& manifest, bool require_videos = true);

/// Deterministic text form; parse_manifest(serialize_manifest(m)) == m.
std::string serialize_manifest(const Manifest& manifest);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Indices into manifest.videos of the few-shot training subset: every base
/// training video plus exactly `shots` videos per novel class. Each novel
/// class is shuffled by its own seeded stream, so the subsets are nested as
/// `shots` grows. Distractors never appear.
std::vector<std::size_t> sample_novel_train(const Manifest& manifest, std::size_t shots, std::uint64_t seed);

struct ClassSplit {
  std::vector<int> base;  // ascending
  std::vector<int> novel;
};

ClassSplit split_classes(std::size_t num_classes, std::size_t n_base, std::uint64_t seed);

/// Copy of `manifest` with tiers reassigned from `split`.
Manifest with_class_split(const Manifest& manifest, const ClassSplit& split);

struct SyntheticSpec {
  std::size_t n_base = 20;
  std::size_t n_novel = 20;
  std::size_t dim = 64;
  std::size_t base_train_per_class = 60;
  std::size_t novel_train_per_class = 5;
  std::size_t val_per_class = 0;
  std::size_t test_per_class = 10;
  std::size_t distractors = 20;
  /// Standard deviation of the per-video offset and per-frame noise, as a
  /// norm (per-coordinate std is spread / sqrt(dim)).
  double spread = 0.8;
  /// Class centers closer than this angle are rejected and redrawn.
  double min_center_angle_deg = 30.0;
  double min_duration_s = 8.0;
  double max_duration_s = 30.0;
  double min_activity_fraction = 0.5;
  float fps = 3.0F;
  /// Norm scale of the background (non-activity and distractor) frames.
  double background_scale = 1.0;
  /// Width of the synthetic word-embedding bank; 0 disables it.
  std::size_t semantic_dim = 32;
  double semantic_noise = 0.1;
  std::size_t n_parents = 8;
  /// Fraction of a class center's energy shared with its taxonomy
  /// ancestors (split evenly between parent and grandparent).
  double taxonomy_share = 0.5;
  /// Width of the latent attribute space the class centers are drawn in
  /// before embedding into D dimensions; 0 draws them directly in D.
  std::size_t latent_dim = 0;
  std::size_t n_grandparents = 3;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Manifest manifest;
  std::vector<FeatureSequence> features;  // parallel to manifest.videos
  SemanticBankFile semantic_bank;         // empty when semantic_dim == 0
  Tensor class_centers;                   // K x D, for diagnostics
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// The standard imbalanced benchmark: 20 base classes x 60 training videos,
/// 20 novel classes x 5, D=64, attribute-structured centers.
SyntheticSpec synthetic_benchmark_spec(std::uint64_t seed);

/// Writes manifest.json, features/<id>.vsf and (if present)
/// semantic_bank.vsb under `dir`.
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace vsret
