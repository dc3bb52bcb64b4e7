#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vsret/features.hpp"
#include "vsret/rng.hpp"
#include "vsret/tensor.hpp"

namespace vsret {

/// Fully connected layer y = x W^T + b over a batch of rows.
template <typename T>
struct Linear {
  BasicParameter<T> weight;  // out x in
  BasicParameter<T> bias;    // out

  [[nodiscard]] std::size_t in_dim() const { return weight.value.cols(); }
  [[nodiscard]] std::size_t out_dim() const { return weight.value.rows(); }

  [[nodiscard]] BasicTensor<T> forward(const BasicTensor<T>& x) const;
  /// Accumulates weight/bias gradients. Writes dL/dx into `grad_x` if given.
  void backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_y, BasicTensor<T>* grad_x);
};

/// Weights drawn from U(-1/sqrt(in), 1/sqrt(in)); biases start at zero.
template <typename T>
Linear<T> make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

/// Stack of Linear layers with rectifiers between them (none after the last).
template <typename T>
class Mlp {
 public:
  struct Cache {
    std::vector<BasicTensor<T>> inputs;  // input of each layer (post-rectifier)
  };

  Mlp() = default;
  explicit Mlp(std::vector<Linear<T>> layers);

  /// `widths` = {in, hidden..., out}.
  static Mlp create(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng);

  [[nodiscard]] BasicTensor<T> forward(const BasicTensor<T>& x, Cache* cache = nullptr) const;
  /// Accumulates parameter gradients; returns dL/dx when `want_input_grad`.
  BasicTensor<T> backward(const Cache& cache, const BasicTensor<T>& grad_out, bool want_input_grad);

  [[nodiscard]] std::size_t in_dim() const { return layers_.front().in_dim(); }
  [[nodiscard]] std::size_t out_dim() const { return layers_.back().out_dim(); }
  [[nodiscard]] std::vector<std::size_t> widths() const;
  [[nodiscard]] bool empty() const { return layers_.empty(); }

  std::vector<Linear<T>>& layers() { return layers_; }
  const std::vector<Linear<T>>& layers() const { return layers_; }
  ParameterRefs<T> parameters();

 private:
  std::vector<Linear<T>> layers_;
};

/// Frame-level embedding function f(.) applied before temporal pooling.
template <typename T>
using EmbeddingHead = Mlp<T>;

/// Bias-free linear classifier over pooled embeddings.
template <typename T>
struct Classifier {
  BasicParameter<T> weight;  // K x C

  [[nodiscard]] std::size_t num_classes() const { return weight.value.rows(); }
  [[nodiscard]] std::size_t dim() const { return weight.value.cols(); }
};

template <typename T>
Classifier<T> make_classifier(std::size_t num_classes, std::size_t dim, Rng& rng);

/// Default head widths: D -> C -> C (one hidden rectifier), or deeper when
/// `layers` > 2 (all hidden widths C).
std::vector<std::size_t> head_widths(std::size_t input_dim, std::size_t embed_dim, std::size_t layers);

/// Frames of several videos stacked into one matrix; video i owns rows
/// [offsets[i], offsets[i+1]).
template <typename T>
struct FrameBatch {
  BasicTensor<T> frames;
  std::vector<std::size_t> offsets{0};

  [[nodiscard]] std::size_t videos() const { return offsets.size() - 1; }
  void append(const Tensor& video_frames);
};

/// Mean of each video's rows: (sum T_i) x C -> B x C.
template <typename T>
BasicTensor<T> segment_mean(const BasicTensor<T>& rows, const std::vector<std::size_t>& offsets);

/// Broadcasts dL/dz_i / T_i back to every frame of video i.
template <typename T>
BasicTensor<T> segment_mean_backward(const BasicTensor<T>& grad_pooled, const std::vector<std::size_t>& offsets);

/// z = mean_t f(x_t): the head runs per frame, then frames are averaged.
template <typename T>
std::vector<T> embed_video(const BasicTensor<T>& frames, const EmbeddingHead<T>& head);

std::vector<float> embed_video(const FeatureSequence& seq, const EmbeddingHead<float>& head);

/// Embeds every video of a batch in one pass: B x C.
template <typename T>
BasicTensor<T> embed_batch(const FrameBatch<T>& batch, const EmbeddingHead<T>& head);

/// Per-frame embeddings f(x_t) for one video: T x C.
BasicTensor<float> embed_frames(const Tensor& frames, const EmbeddingHead<float>& head);

/// p_A = softmax(W z / tau_cls).
template <typename T>
std::vector<T> classify(std::span<const T> z, const Classifier<T>& classifier, double tau_cls = 1.0);

}  // namespace vsret
