#include "vsret/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "vsret/binary_io.hpp"
#include "vsret/fileio.hpp"

namespace vsret {

using nlohmann::json;

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::Full:
      return "full";
    case Objective::Baseline:
      return "baseline";
    case Objective::Triplet:
      return "triplet";
    case Objective::Margin:
      return "margin";
  }
  return "full";
}

Objective parse_objective(std::string_view name) {
  if (name == "full") return Objective::Full;
  if (name == "baseline") return Objective::Baseline;
  if (name == "triplet") return Objective::Triplet;
  if (name == "margin") return Objective::Margin;
  throw ParameterError("unknown objective \"" + std::string(name) + "\" (expected full, baseline, triplet or margin)");
}

TrainConfig long_schedule_config() {
  TrainConfig c;
  c.total_iters = 16000;
  c.lr = 1e-4;
  c.lr_drop_factor = 0.1;
  c.lr_drop_fraction = 0.5;
  return c;
}

TrainConfig synthetic_benchmark_config() {
  TrainConfig c;
  c.total_iters = 2000;
  c.lr = 1e-4;
  c.max_frames = 16;
  c.embed_dim = 64;
  c.semantic_hidden = {128, 160, 192, 224};
  return c;
}

std::string config_to_json(const TrainConfig& c) {
  json j;
  j["objective"] = std::string(to_string(c.objective));
  j["lambda_v"] = c.lambda_v;
  j["lambda_s"] = c.lambda_s;
  j["alpha"] = c.alpha;
  j["tau"] = c.tau;
  j["tau_cls"] = c.tau_cls;
  j["batch_size"] = c.batch_size;
  j["total_iters"] = c.total_iters;
  j["lr"] = c.lr;
  j["lr_drop_factor"] = c.lr_drop_factor;
  j["lr_drop_fraction"] = c.lr_drop_fraction;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["embed_dim"] = c.embed_dim;
  j["head_layers"] = c.head_layers;
  j["attn_dim"] = c.attn_dim;
  j["semantic_hidden"] = c.semantic_hidden;
  j["normalize_semantic"] = c.normalize_semantic;
  j["triplet_margin"] = c.triplet_margin;
  j["margin"] = c.margin;
  j["margin_beta_init"] = c.margin_beta_init;
  j["max_frames"] = c.max_frames;
  return j.dump();
}

TrainConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("training config is not valid JSON: ") + e.what());
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& out) {
    if (j.contains(key)) {
      try {
        j.at(key).get_to(out);
      } catch (const json::exception&) {
        throw FormatError(std::string("training config field '") + key + "' has the wrong type");
      }
    }
  };
  std::string objective = std::string(to_string(c.objective));
  get("objective", objective);
  c.objective = parse_objective(objective);
  get("lambda_v", c.lambda_v);
  get("lambda_s", c.lambda_s);
  get("alpha", c.alpha);
  get("tau", c.tau);
  get("tau_cls", c.tau_cls);
  get("batch_size", c.batch_size);
  get("total_iters", c.total_iters);
  get("lr", c.lr);
  get("lr_drop_factor", c.lr_drop_factor);
  get("lr_drop_fraction", c.lr_drop_fraction);
  get("weight_decay", c.weight_decay);
  get("seed", c.seed);
  get("embed_dim", c.embed_dim);
  get("head_layers", c.head_layers);
  get("attn_dim", c.attn_dim);
  get("semantic_hidden", c.semantic_hidden);
  get("normalize_semantic", c.normalize_semantic);
  get("triplet_margin", c.triplet_margin);
  get("margin", c.margin);
  get("margin_beta_init", c.margin_beta_init);
  get("max_frames", c.max_frames);
  return c;
}

double learning_rate_at(const TrainConfig& config, std::size_t iteration) {
  const auto drop_at = static_cast<std::size_t>(config.lr_drop_fraction * static_cast<double>(config.total_iters));
  return iteration < drop_at ? config.lr : config.lr * config.lr_drop_factor;
}

template <typename T>
ParameterRefs<T> Model<T>::parameters() {
  ParameterRefs<T> out = head.parameters();
  out.push_back(&classifier.weight);
  for (auto* p : ga.parameters()) out.push_back(p);
  if (!semantic_mlp.empty()) {
    for (auto* p : semantic_mlp.parameters()) out.push_back(p);
  }
  out.push_back(&margin_beta);
  return out;
}

namespace {

void validate_config(const TrainConfig& c) {
  if (c.lambda_v < 0.0 || c.lambda_s < 0.0) throw ParameterError("loss weights must be non-negative");
  if (!(c.tau > 0.0) || !(c.tau_cls > 0.0)) throw ParameterError("softmax temperatures must be positive");
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw ParameterError("bank alpha must lie in (0, 1]");
  if (c.batch_size < 1) throw ParameterError("batch_size must be positive");
  if (!(c.lr > 0.0) || c.weight_decay < 0.0) throw ParameterError("learning rate must be positive and weight decay non-negative");
  if (c.embed_dim < 1 || c.head_layers < 1) throw ParameterError("embedding head must have positive width and depth");
}

}  // namespace

template <typename T>
Model<T> init_model(const ModelShape& shape, const TrainConfig& config, std::uint64_t seed) {
  validate_config(config);
  if (shape.input_dim == 0 || shape.num_classes == 0) throw ParameterError("model needs input width and class count");
  const Rng root = Rng(seed).split(0x1d);
  Model<T> m;
  Rng head_rng = root.split(1);
  m.head = EmbeddingHead<T>::create("embedding", head_widths(shape.input_dim, config.embed_dim, config.head_layers),
                                    head_rng);
  Rng cls_rng = root.split(2);
  m.classifier = make_classifier<T>(shape.num_classes, config.embed_dim, cls_rng);
  Rng ga_rng = root.split(3);
  m.ga = make_global_alignment<T>(config.embed_dim, config.attn_dim, ga_rng);
  if (shape.semantic_dim > 0) {
    Rng sem_rng = root.split(4);
    m.semantic_mlp = make_semantic_mlp<T>(config.embed_dim, shape.semantic_dim, config.semantic_hidden, sem_rng);
  }
  m.bank = VisualBank<T>(shape.num_classes, config.embed_dim, config.alpha);
  m.margin_beta = BasicParameter<T>("margin.beta", BasicTensor<T>::vector({static_cast<T>(config.margin_beta_init)}));
  return m;
}

namespace {

/// Sum over rows of -log softmax(-|x_i - P_k| / tau)[y_i]. Adds
/// scale * dloss/dx into grad_x when given.
template <typename T>
double distance_nll_rows(const BasicTensor<T>& x, const BasicTensor<T>& protos, const std::vector<int>& labels,
                         double tau, double scale, BasicTensor<T>* grad_x) {
  const std::size_t b = x.rows();
  const std::size_t k = protos.rows();
  const std::size_t e = x.cols();
  std::vector<T> dists(k);
  std::vector<T> logits(k);
  std::vector<T> probs(k);
  std::vector<T> glogits(k);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    auto xi = x.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      dists[c] = static_cast<T>(euclidean<T>(xi, protos.row(c)));
      logits[c] = static_cast<T>(-dists[c] / tau);
    }
    std::fill(glogits.begin(), glogits.end(), T{0});
    const SoftmaxNll r = softmax_nll<T>(logits, static_cast<std::size_t>(labels[i]), probs,
                                        grad_x ? std::span<T>(glogits) : std::span<T>{}, 1.0);
    total += r.loss;
    if (!grad_x || r.clamped) continue;
    auto gx = grad_x->row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (!(dists[c] > T{0})) continue;
      // d logit / d dist = -1/tau ; d dist / d x = (x - P_c) / dist
      const double coef = -scale * static_cast<double>(glogits[c]) / tau / static_cast<double>(dists[c]);
      auto pc = protos.row(c);
      for (std::size_t j = 0; j < e; ++j) gx[j] += static_cast<T>(coef * (xi[j] - pc[j]));
    }
  }
  return total;
}

void check_labels(const std::vector<int>& labels, std::size_t num_classes, std::size_t videos) {
  if (labels.size() != videos || videos == 0) throw DimensionError("batch needs one label per video and at least one video");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ParameterError("label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace

template <typename T>
LossBreakdown total_loss(const VideoBatch<T>& batch, Model<T>& model, const TrainConfig& config, bool with_grad) {
  const std::size_t b = batch.frames.videos();
  const std::size_t k = model.num_classes();
  const std::size_t c = model.embed_dim();
  check_labels(batch.labels, k, b);
  const double inv_b = 1.0 / static_cast<double>(b);

  typename Mlp<T>::Cache head_cache;
  const BasicTensor<T> frames_out = model.head.forward(batch.frames.frames, with_grad ? &head_cache : nullptr);
  const BasicTensor<T> z = segment_mean(frames_out, batch.frames.offsets);
  BasicTensor<T> grad_z = BasicTensor<T>::zeros(b, c);

  LossBreakdown out;
  // Classification: p_A = softmax(W z / tau_cls).
  {
    BasicTensor<T> logits = BasicTensor<T>::zeros(b, k);
    gemm_nt(b, k, c, z.data(), model.classifier.weight.value.data(), logits.data(), false);
    for (auto& v : logits.values()) v = static_cast<T>(v / config.tau_cls);
    BasicTensor<T> glogits = BasicTensor<T>::zeros(b, k);
    std::vector<T> probs(k);
    for (std::size_t i = 0; i < b; ++i) {
      const SoftmaxNll r = softmax_nll<T>(logits.row(i), static_cast<std::size_t>(batch.labels[i]), probs,
                                          with_grad ? glogits.row(i) : std::span<T>{}, inv_b);
      out.cls += r.loss;
    }
    out.cls *= inv_b;
    if (with_grad) {
      for (auto& v : glogits.values()) v = static_cast<T>(v / config.tau_cls);
      gemm_tn(k, c, b, glogits.data(), z.data(), model.classifier.weight.grad.data(), true);
      gemm_nn(b, c, k, glogits.data(), model.classifier.weight.value.data(), grad_z.data(), true);
    }
  }

  // Visual alignment against the EMA prototypes, skipped during warm-up.
  if (config.lambda_v > 0.0 && model.bank.warm()) {
    typename GlobalAlignment<T>::Cache ga_cache;
    const BasicTensor<T>& protos = model.bank.rows();
    const BasicTensor<T> z_star = model.ga.forward(z, protos, with_grad ? &ga_cache : nullptr);
    BasicTensor<T> grad_star = BasicTensor<T>::zeros(b, c);
    out.visual = distance_nll_rows(z_star, protos, batch.labels, config.tau, config.lambda_v * inv_b,
                                   with_grad ? &grad_star : nullptr) * inv_b;
    out.visual_active = true;
    if (with_grad) {
      const BasicTensor<T> g = model.ga.backward(ga_cache, grad_star);
      for (std::size_t i = 0; i < grad_z.size(); ++i) grad_z[i] += g[i];
    }
  }

  // Semantic alignment against the frozen word-embedding bank.
  if (config.lambda_s > 0.0) {
    if (model.semantic_mlp.empty() || model.semantic_rows.empty()) {
      throw ParameterError("lambda_s > 0 requires a semantic bank");
    }
    typename Mlp<T>::Cache sem_cache;
    const BasicTensor<T> gz = model.semantic_mlp.forward(z, with_grad ? &sem_cache : nullptr);
    BasicTensor<T> grad_gz = BasicTensor<T>::zeros(b, gz.cols());
    out.semantic = distance_nll_rows(gz, model.semantic_rows, batch.labels, config.tau, config.lambda_s * inv_b,
                                     with_grad ? &grad_gz : nullptr) * inv_b;
    if (with_grad) {
      const BasicTensor<T> g = model.semantic_mlp.backward(sem_cache, grad_gz, true);
      for (std::size_t i = 0; i < grad_z.size(); ++i) grad_z[i] += g[i];
    }
  }

  out.total = out.cls + config.lambda_v * out.visual + config.lambda_s * out.semantic;
  if (with_grad) {
    const BasicTensor<T> grad_frames = segment_mean_backward(grad_z, batch.frames.offsets);
    model.head.backward(head_cache, grad_frames, false);
  }
  return out;
}

template <typename T>
double triplet_loss(std::span<const T> anchor, std::span<const T> positive, std::span<const T> negative, double margin) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw DimensionError("triplet_loss: embedding widths differ");
  }
  const double dp = euclidean(anchor, positive);
  const double dn = euclidean(anchor, negative);
  return std::max(0.0, dp * dp - dn * dn + margin);
}

double margin_loss(double distance, bool positive, double margin, double beta) {
  const double y = positive ? 1.0 : -1.0;
  return std::max(0.0, margin + y * (distance - beta));
}

namespace {

/// Row-wise L2 normalization with a cache for the backward pass.
template <typename T>
BasicTensor<T> normalize_rows(const BasicTensor<T>& z) {
  BasicTensor<T> out = z;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto unit = l2_normalize<T>(z.row(i));
    std::copy(unit.begin(), unit.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
BasicTensor<T> normalize_rows_backward(const BasicTensor<T>& z, const BasicTensor<T>& grad_unit) {
  BasicTensor<T> out = BasicTensor<T>::zeros(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto g = l2_normalize_backward<T>(z.row(i), grad_unit.row(i));
    std::copy(g.begin(), g.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
void backprop_embeddings(Model<T>& model, const typename Mlp<T>::Cache& cache, const VideoBatch<T>& batch,
                         const BasicTensor<T>& z, const BasicTensor<T>& grad_unit) {
  const BasicTensor<T> grad_z = normalize_rows_backward(z, grad_unit);
  model.head.backward(cache, segment_mean_backward(grad_z, batch.frames.offsets), false);
}

}  // namespace

template <typename T>
double triplet_objective(const VideoBatch<T>& batch, Model<T>& model, const TrainConfig& config, bool with_grad) {
  const std::size_t n = batch.frames.videos();
  if (n == 0 || n % 3 != 0) throw DimensionError("triplet batch must hold (anchor, positive, negative) groups");
  typename Mlp<T>::Cache cache;
  const BasicTensor<T> z = segment_mean(model.head.forward(batch.frames.frames, with_grad ? &cache : nullptr),
                                        batch.frames.offsets);
  const BasicTensor<T> u = normalize_rows(z);
  BasicTensor<T> grad_u = BasicTensor<T>::zeros(u.rows(), u.cols());
  const std::size_t triplets = n / 3;
  const double scale = 1.0 / static_cast<double>(triplets);
  double total = 0.0;
  for (std::size_t t = 0; t < triplets; ++t) {
    auto a = u.row(3 * t);
    auto p = u.row(3 * t + 1);
    auto q = u.row(3 * t + 2);
    const double loss = triplet_loss<T>(a, p, q, config.triplet_margin);
    total += loss;
    if (!with_grad || !(loss > 0.0)) continue;
    auto ga = grad_u.row(3 * t);
    auto gp = grad_u.row(3 * t + 1);
    auto gq = grad_u.row(3 * t + 2);
    for (std::size_t j = 0; j < a.size(); ++j) {
      // d/da (|a-p|^2 - |a-n|^2) = 2(n - p)
      ga[j] += static_cast<T>(scale * 2.0 * (q[j] - p[j]));
      gp[j] += static_cast<T>(scale * -2.0 * (a[j] - p[j]));
      gq[j] += static_cast<T>(scale * 2.0 * (a[j] - q[j]));
    }
  }
  if (with_grad) backprop_embeddings(model, cache, batch, z, grad_u);
  return total * scale;
}

template <typename T>
double margin_objective(const VideoBatch<T>& batch, Model<T>& model, const TrainConfig& config, bool with_grad) {
  const std::size_t n = batch.frames.videos();
  check_labels(batch.labels, model.num_classes(), n);
  if (n < 2) throw DimensionError("margin objective needs at least two videos");
  typename Mlp<T>::Cache cache;
  const BasicTensor<T> z = segment_mean(model.head.forward(batch.frames.frames, with_grad ? &cache : nullptr),
                                        batch.frames.offsets);
  const BasicTensor<T> u = normalize_rows(z);
  BasicTensor<T> grad_u = BasicTensor<T>::zeros(u.rows(), u.cols());
  const double beta = model.margin_beta.value[0];
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  const double scale = 1.0 / pairs;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool positive = batch.labels[i] == batch.labels[j];
      const double d = euclidean<T>(u.row(i), u.row(j));
      const double loss = margin_loss(d, positive, config.margin, beta);
      total += loss;
      if (!with_grad || !(loss > 0.0)) continue;
      const double y = positive ? 1.0 : -1.0;
      model.margin_beta.grad[0] += static_cast<T>(-y * scale);
      if (!(d > 0.0)) continue;
      auto ui = u.row(i);
      auto uj = u.row(j);
      auto gi = grad_u.row(i);
      auto gj = grad_u.row(j);
      for (std::size_t c = 0; c < ui.size(); ++c) {
        const double g = scale * y * (ui[c] - uj[c]) / d;
        gi[c] += static_cast<T>(g);
        gj[c] -= static_cast<T>(g);
      }
    }
  }
  if (with_grad) backprop_embeddings(model, cache, batch, z, grad_u);
  return total * scale;
}

namespace {

/// Draws the video indices of one batch for the configured objective.
class BatchSampler {
 public:
  BatchSampler(const TrainingSet& data, const TrainConfig& config) : data_(data), config_(config), rng_(Rng(config.seed).split(0xba7c)) {
    by_class_.resize(data.num_classes);
    for (std::size_t i = 0; i < data.labels.size(); ++i) by_class_[static_cast<std::size_t>(data.labels[i])].push_back(i);
    for (std::size_t c = 0; c < by_class_.size(); ++c) {
      if (!by_class_[c].empty()) present_.push_back(c);
      if (by_class_[c].size() >= 2) pairable_.push_back(c);
    }
    if ((config.objective == Objective::Triplet || config.objective == Objective::Margin) &&
        (pairable_.empty() || present_.size() < 2)) {
      throw SamplingError("metric-learning objectives need two classes and one class with two training videos");
    }
  }

  std::vector<std::size_t> next() {
    switch (config_.objective) {
      case Objective::Triplet:
        return triplets();
      case Objective::Margin:
        return class_pairs();
      default:
        return uniform();
    }
  }

 private:
  std::vector<std::size_t> uniform() {
    std::vector<std::size_t> out(config_.batch_size);
    for (auto& i : out) i = rng_.below(data_.labels.size());
    return out;
  }

  std::size_t pick(const std::vector<std::size_t>& pool) { return pool[rng_.below(pool.size())]; }

  std::vector<std::size_t> triplets() {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < config_.batch_size; ++t) {
      const std::size_t pos_class = pick(pairable_);
      std::size_t neg_class = pos_class;
      while (neg_class == pos_class) neg_class = pick(present_);
      const auto& pool = by_class_[pos_class];
      const std::size_t a = rng_.below(pool.size());
      std::size_t p = rng_.below(pool.size() - 1);
      if (p >= a) ++p;
      out.push_back(pool[a]);
      out.push_back(pool[p]);
      out.push_back(pick(by_class_[neg_class]));
    }
    return out;
  }

  std::vector<std::size_t> class_pairs() {
    const std::size_t groups = std::min(pairable_.size(), std::max<std::size_t>(2, config_.batch_size / 2));
    std::vector<std::size_t> classes = pairable_;
    for (std::size_t i = 0; i < groups; ++i) std::swap(classes[i], classes[i + rng_.below(classes.size() - i)]);
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < groups; ++g) {
      const auto& pool = by_class_[classes[g]];
      const std::size_t a = rng_.below(pool.size());
      std::size_t b = rng_.below(pool.size() - 1);
      if (b >= a) ++b;
      out.push_back(pool[a]);
      out.push_back(pool[b]);
    }
    if (groups < 2) out.push_back(pick(by_class_[pick(present_)]));
    return out;
  }

  const TrainingSet& data_;
  const TrainConfig& config_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> by_class_;
  std::vector<std::size_t> present_;
  std::vector<std::size_t> pairable_;
};

}  // namespace

TrainResult train(const TrainingSet& data, const SemanticBank& semantic, const TrainConfig& config) {
  validate_config(config);
  if (data.videos.empty() || data.videos.size() != data.labels.size()) {
    throw ParameterError("training set is empty or labels do not match videos");
  }
  check_labels(data.labels, data.num_classes, data.labels.size());
  const bool wants_semantic = (config.objective == Objective::Full && config.lambda_s > 0.0);
  if (wants_semantic && semantic.empty()) throw ParameterError("lambda_s > 0 requires a semantic bank");
  if (!semantic.empty() && semantic.num_classes() != data.num_classes) {
    throw DimensionError("semantic bank has " + std::to_string(semantic.num_classes()) + " rows for " +
                         std::to_string(data.num_classes) + " classes");
  }

  ModelShape shape;
  shape.input_dim = data.videos.front().cols();
  shape.num_classes = data.num_classes;
  shape.semantic_dim = semantic.empty() ? 0 : semantic.dim();
  TrainResult result;
  result.model = init_model<float>(shape, config, config.seed);
  Model<float>& model = result.model;
  if (!semantic.empty()) model.semantic_rows = semantic.vectors();

  TrainConfig loss_config = config;
  if (config.objective == Objective::Baseline) {
    loss_config.lambda_v = 0.0;
    loss_config.lambda_s = 0.0;
  }

  std::vector<Tensor> capped;
  const std::vector<Tensor>* videos = &data.videos;
  if (config.max_frames > 0) {
    for (const auto& v : data.videos) {
      FeatureSequence tmp;
      tmp.frames = v;
      capped.push_back(cap_frames(tmp, config.max_frames).frames);
    }
    videos = &capped;
  }

  AdamState<float> adam;
  adam.config.lr = config.lr;
  adam.config.weight_decay = config.weight_decay;
  const ParameterRefs<float> params = model.parameters();
  BatchSampler sampler(data, config);

  for (std::size_t it = 0; it < config.total_iters; ++it) {
    const std::vector<std::size_t> picks = sampler.next();
    VideoBatch<float> batch;
    for (std::size_t i : picks) {
      batch.frames.append((*videos)[i]);
      batch.labels.push_back(data.labels[i]);
    }
    for (auto* p : params) p->zero_grad();

    LossBreakdown loss;
    switch (config.objective) {
      case Objective::Full:
      case Objective::Baseline:
        loss = total_loss(batch, model, loss_config, true);
        break;
      case Objective::Triplet:
        loss.total = triplet_objective(batch, model, config, true);
        break;
      case Objective::Margin:
        loss.total = margin_objective(batch, model, config, true);
        break;
    }
    if (!std::isfinite(loss.total)) {
      throw TrainingError("non-finite loss at iteration " + std::to_string(it));
    }
    try {
      adam_step(params, adam, learning_rate_at(config, it));
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " at iteration " + std::to_string(it));
    }

    // Bank refresh with the post-step embeddings of this batch.
    const Tensor z = embed_batch(batch.frames, model.head);
    for (std::size_t i = 0; i < batch.labels.size(); ++i) model.bank.update(batch.labels[i], z.row(i));

    result.curve.push_back({it, loss});
  }
  result.iterations = config.total_iters;
  return result;
}

std::string loss_curve_csv(const std::vector<LossRow>& curve) {
  std::ostringstream out;
  out.precision(9);
  out << "iter,total,cls,visual,semantic\n";
  for (const auto& row : curve) {
    out << row.iteration << ',' << row.loss.total << ',' << row.loss.cls << ',' << row.loss.visual << ','
        << row.loss.semantic << '\n';
  }
  return out.str();
}

const Tensor& Checkpoint::section(std::string_view name) const {
  for (const auto& [n, t] : sections) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint has no section '" + std::string(name) + "'");
}

bool Checkpoint::has_section(std::string_view name) const {
  return std::any_of(sections.begin(), sections.end(), [&](const auto& s) { return s.first == name; });
}

Checkpoint make_checkpoint(Model<float>& model, const TrainConfig& config, std::uint64_t iteration) {
  Checkpoint ck;
  ck.config = config;
  ck.iteration = iteration;
  for (auto* p : model.parameters()) ck.sections.emplace_back(p->name, p->value);
  ck.sections.emplace_back("visual_bank", model.bank.rows());
  return ck;
}

namespace {

Mlp<float> mlp_from_sections(const Checkpoint& ck, const std::string& prefix) {
  std::vector<Linear<float>> layers;
  for (std::size_t i = 0;; ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    if (!ck.has_section(base + ".weight")) break;
    Linear<float> l;
    l.weight = Parameter(base + ".weight", ck.section(base + ".weight"));
    l.bias = Parameter(base + ".bias", ck.section(base + ".bias"));
    if (l.weight.value.rank() != 2 || l.bias.value.size() != l.weight.value.rows()) {
      throw FormatError("checkpoint layer '" + base + "' has inconsistent shapes");
    }
    layers.push_back(std::move(l));
  }
  return Mlp<float>(std::move(layers));
}

}  // namespace

Model<float> model_from_checkpoint(const Checkpoint& ck) {
  Model<float> m;
  m.head = mlp_from_sections(ck, "embedding");
  if (m.head.empty()) throw FormatError("checkpoint has no embedding section");
  m.classifier.weight = Parameter("classifier.weight", ck.section("classifier.weight"));
  m.ga.wq = Parameter("ga_params.wq", ck.section("ga_params.wq"));
  m.ga.wk = Parameter("ga_params.wk", ck.section("ga_params.wk"));
  m.ga.wv = Parameter("ga_params.wv", ck.section("ga_params.wv"));
  m.ga.wo = Parameter("ga_params.wo", ck.section("ga_params.wo"));
  m.semantic_mlp = mlp_from_sections(ck, "semantic_mlp");
  m.margin_beta = Parameter("margin.beta", ck.section("margin.beta"));
  m.bank = VisualBank<float>(ck.section("visual_bank"), ck.config.alpha);
  if (m.classifier.weight.value.cols() != m.head.out_dim() || m.bank.dim() != m.head.out_dim()) {
    throw FormatError("checkpoint sections disagree on the embedding width");
  }
  return m;
}

std::string encode_checkpoint(const Checkpoint& ck) {
  io::Writer w;
  w.bytes("VSCK");
  w.u32(1);
  json meta;
  meta["train_config"] = json::parse(config_to_json(ck.config));
  meta["iteration"] = ck.iteration;
  w.str(meta.dump());
  w.u32(static_cast<std::uint32_t>(ck.sections.size()));
  for (const auto& [name, t] : ck.sections) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(t.data(), t.size());
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& context) {
  io::Reader r(bytes, "checkpoint '" + context + "'");
  r.expect_magic("VSCK");
  std::size_t at = r.offset();
  if (r.u32() != 1) r.fail(at, "unsupported version");
  Checkpoint ck;
  at = r.offset();
  const std::string meta_text = r.str();
  try {
    const json meta = json::parse(meta_text);
    ck.config = config_from_json(meta.at("train_config").dump());
    ck.iteration = meta.at("iteration").get<std::uint64_t>();
  } catch (const json::exception& e) {
    r.fail(at, std::string("malformed config block: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t s = 0; s < count; ++s) {
    std::string name = r.str();
    at = r.offset();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) r.fail(at, "section '" + name + "' has invalid rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      at = r.offset();
      const std::uint32_t d = r.u32();
      if (d == 0) r.fail(at, "section '" + name + "' has a zero dimension");
      shape.push_back(d);
    }
    std::vector<float> values(shape_size(shape));
    r.f32s(values.data(), values.size());
    ck.sections.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) r.fail(r.offset(), "trailing bytes after last section");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) { write_file(path, encode_checkpoint(ck)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path), path.string()); }

#define VSRET_INSTANTIATE_TRAINING(T)                                                                          \
  template struct Model<T>;                                                                                    \
  template Model<T> init_model<T>(const ModelShape&, const TrainConfig&, std::uint64_t);                      \
  template LossBreakdown total_loss(const VideoBatch<T>&, Model<T>&, const TrainConfig&, bool);               \
  template double triplet_loss(std::span<const T>, std::span<const T>, std::span<const T>, double);           \
  template double triplet_objective(const VideoBatch<T>&, Model<T>&, const TrainConfig&, bool);               \
  template double margin_objective(const VideoBatch<T>&, Model<T>&, const TrainConfig&, bool);

VSRET_INSTANTIATE_TRAINING(float)
VSRET_INSTANTIATE_TRAINING(double)

#undef VSRET_INSTANTIATE_TRAINING

}  // namespace vsret
