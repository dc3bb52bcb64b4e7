#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsret/dataset.hpp"
#include "vsret/evaluation.hpp"
#include "vsret/features.hpp"
#include "vsret/retrieval.hpp"
#include "vsret/semantic_alignment.hpp"
#include "vsret/training.hpp"

namespace vsret {

/// A manifest with every feature file loaded, plus the optional word bank.
struct Dataset {
  Manifest manifest;
  std::vector<FeatureSequence> features;  // parallel to manifest.videos
  SemanticBank semantic;
};

/// `features_dir` overrides the manifest directory as the base of
/// feature_file paths. An empty `semantic_path` leaves the bank empty.
Dataset load_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& features_dir = {},
                     const std::filesystem::path& semantic_path = {});

Dataset dataset_from_synthetic(const SyntheticDataset& synthetic);

/// Activity-interval frames of a video; distractors keep the whole video.
FeatureSequence activity_frames(const Dataset& data, std::size_t video);

/// Training subset: all training videos, or the few-shot subset when
/// `shots` is given.
std::vector<std::size_t> training_indices(const Manifest& manifest, std::optional<std::size_t> shots,
                                          std::uint64_t seed);

TrainingSet make_training_set(const Dataset& data, const std::vector<std::size_t>& indices);

struct RetrievalConfig {
  IndexKind mode = IndexKind::Video;
  double clip_len_s = 4.0;
  std::size_t max_moment = 26;
  std::size_t queries_per_retrieval = 1;
  std::uint64_t seed = 0;
  bool class_mean = false;
};

/// Test-split gallery with the class each item is relevant to
/// (kDistractor when it is relevant to nothing).
struct Gallery {
  GalleryIndex index;
  std::vector<int> labels;
};

Gallery build_gallery(const Dataset& data, const EmbeddingHead<float>& head, const RetrievalConfig& config);

// VSGI layout: magic, u32 version, u32 kind, u32 N, u32 C, then per item
// length-prefixed id, length-prefixed owner, i32 label, then N*C f32.
std::string encode_gallery(const Gallery& gallery);
Gallery decode_gallery(std::string_view bytes, const std::string& context);
void save_gallery(const Gallery& gallery, const std::filesystem::path& path);
Gallery load_gallery(const std::filesystem::path& path);

struct QueryGroup {
  std::vector<std::size_t> videos;  // first entry leads the group
};

/// One group per test video of a known class. Companions are drawn from the
/// same class without replacement; classes with fewer test videos give
/// smaller groups.
std::vector<QueryGroup> query_groups(const Manifest& manifest, std::size_t per_retrieval, std::uint64_t seed);

/// Embeds the queries, ranks the whole gallery for each group and marks
/// relevance.
Run run_retrieval(const Dataset& data, const EmbeddingHead<float>& head, const Gallery& gallery,
                  const RetrievalConfig& config);

struct ExperimentResult {
  TrainResult training;
  Run run;
  MetricsReport report;
};

/// Train on the training split (few-shot when `shots` is set) then evaluate
/// on the test split.
ExperimentResult run_experiment(const Dataset& data, const TrainConfig& train_config,
                                const RetrievalConfig& retrieval_config, std::optional<std::size_t> shots);

std::string retrieval_config_json(const RetrievalConfig& config);

}  // namespace vsret
