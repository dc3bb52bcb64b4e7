#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vsret/embedding.hpp"
#include "vsret/numerics.hpp"
#include "vsret/semantic_alignment.hpp"
#include "vsret/visual_alignment.hpp"

namespace vsret {

enum class Objective { Full, Baseline, Triplet, Margin };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view name);

struct TrainConfig {
  Objective objective = Objective::Full;
  double lambda_v = 1.0;
  double lambda_s = 1.0;
  double alpha = 0.9;
  double tau = 0.1;      // visual and semantic softmax temperature
  double tau_cls = 1.0;  // classifier softmax temperature
  std::size_t batch_size = 16;
  std::size_t total_iters = 2000;
  double lr = 1e-4;
  double lr_drop_factor = 0.1;
  double lr_drop_fraction = 0.5;  // lr *= drop_factor from iteration fraction * total_iters
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  std::size_t embed_dim = 512;
  std::size_t head_layers = 2;
  std::size_t attn_dim = 0;  // 0: embed_dim / 2
  std::vector<std::size_t> semantic_hidden = kSemanticHiddenWidths;
  bool normalize_semantic = true;
  double triplet_margin = 0.2;
  double margin = 0.2;
  double margin_beta_init = 1.2;
  std::size_t max_frames = 0;  // per-video frame cap, 0 = all

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Schedule used for ActivityNet-scale runs: 16k iterations, lr 1e-4 dropped
/// to 1e-5 after 8k.
TrainConfig long_schedule_config();

/// Desk-scale configuration used by the synthetic benchmark.
TrainConfig synthetic_benchmark_config();

std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(std::string_view text);

/// Learning rate in effect at `iteration` (0-based).
double learning_rate_at(const TrainConfig& config, std::size_t iteration);

struct ModelShape {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t semantic_dim = 0;  // 0 when no semantic bank is used
};

/// Every trainable tensor plus the EMA bank and the frozen semantic rows.
template <typename T>
struct Model {
  EmbeddingHead<T> head;
  Classifier<T> classifier;
  GlobalAlignment<T> ga;
  Mlp<T> semantic_mlp;  // empty when semantic_dim == 0
  VisualBank<T> bank;
  BasicParameter<T> margin_beta;
  BasicTensor<T> semantic_rows;  // K x W, constant

  [[nodiscard]] std::size_t embed_dim() const { return head.out_dim(); }
  [[nodiscard]] std::size_t num_classes() const { return classifier.num_classes(); }
  ParameterRefs<T> parameters();
};

/// Builds a model from `seed`. Initialization never depends on the objective
/// or loss weights, so runs that differ only in those start identically.
template <typename T>
Model<T> init_model(const ModelShape& shape, const TrainConfig& config, std::uint64_t seed);

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double visual = 0.0;
  double semantic = 0.0;
  bool visual_active = false;
};

/// Labelled videos of one batch.
template <typename T>
struct VideoBatch {
  FrameBatch<T> frames;
  std::vector<int> labels;
};

/// Mean over the batch of -log p_A - lambda_V log p_V - lambda_S log p_S,
/// accumulating gradients into every trainable parameter when `with_grad`.
/// The visual term is skipped while any bank row is still zero.
template <typename T>
LossBreakdown total_loss(const VideoBatch<T>& batch, Model<T>& model, const TrainConfig& config, bool with_grad = true);

/// max(0, |a-p|^2 - |a-n|^2 + margin).
template <typename T>
double triplet_loss(std::span<const T> anchor, std::span<const T> positive, std::span<const T> negative, double margin);

/// max(0, margin + y (d - beta)), y = +1 for a positive pair, -1 otherwise.
double margin_loss(double distance, bool positive, double margin, double beta);

/// Batch loss for the triplet baseline. `batch` holds consecutive
/// (anchor, positive, negative) videos; embeddings are L2-normalized.
template <typename T>
double triplet_objective(const VideoBatch<T>& batch, Model<T>& model, const TrainConfig& config, bool with_grad = true);

/// Batch loss for the margin baseline over all pairs of the batch, on
/// L2-normalized embeddings with learnable boundary beta.
template <typename T>
double margin_objective(const VideoBatch<T>& batch, Model<T>& model, const TrainConfig& config, bool with_grad = true);

/// Training clips with their labels (already sliced to activity intervals).
struct TrainingSet {
  std::vector<Tensor> videos;
  std::vector<int> labels;
  std::size_t num_classes = 0;
};

struct LossRow {
  std::size_t iteration = 0;
  LossBreakdown loss;
};

struct TrainResult {
  Model<float> model;
  std::vector<LossRow> curve;
  std::size_t iterations = 0;
};

/// Runs the optimization loop. Deterministic for a fixed config.seed.
/// `semantic` may be empty unless the objective uses lambda_S > 0.
TrainResult train(const TrainingSet& data, const SemanticBank& semantic, const TrainConfig& config);

/// CSV with header iter,total,cls,visual,semantic.
std::string loss_curve_csv(const std::vector<LossRow>& curve);

/// Named tensor sections plus the config and iteration they were trained with.
struct Checkpoint {
  TrainConfig config;
  std::uint64_t iteration = 0;
  std::vector<std::pair<std::string, Tensor>> sections;

  [[nodiscard]] const Tensor& section(std::string_view name) const;
  [[nodiscard]] bool has_section(std::string_view name) const;
};

Checkpoint make_checkpoint(Model<float>& model, const TrainConfig& config, std::uint64_t iteration);
Model<float> model_from_checkpoint(const Checkpoint& checkpoint);

// VSCK layout: magic, u32 version, length-prefixed config JSON, u32 section
// count, then per section: length-prefixed name, u32 rank, rank x u32 dims,
// f32 payload.
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& context);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vsret
