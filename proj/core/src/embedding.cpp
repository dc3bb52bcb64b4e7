#include "vsret/embedding.hpp"

#include <cmath>

#include "vsret/numerics.hpp"

namespace vsret {

template <typename T>
BasicTensor<T> Linear<T>::forward(const BasicTensor<T>& x) const {
  if (x.rank() != 2 || x.cols() != in_dim()) {
    throw DimensionError("linear layer '" + weight.name + "' expects input width " + std::to_string(in_dim()) +
                         ", got " + shape_to_string(x.shape()));
  }
  const std::size_t n = x.rows();
  std::vector<T> wt(in_dim() * out_dim());
  for (std::size_t o = 0; o < out_dim(); ++o) {
    for (std::size_t i = 0; i < in_dim(); ++i) wt[i * out_dim() + o] = weight.value[o * in_dim() + i];
  }
  BasicTensor<T> y = BasicTensor<T>::zeros(n, out_dim());
  gemm_nn(n, out_dim(), in_dim(), x.data(), wt.data(), y.data(), false);
  for (std::size_t i = 0; i < n; ++i) {
    T* row = y.data() + i * out_dim();
    for (std::size_t j = 0; j < out_dim(); ++j) row[j] += bias.value[j];
  }
  return y;
}

template <typename T>
void Linear<T>::backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_y, BasicTensor<T>* grad_x) {
  const std::size_t n = x.rows();
  // dW += dY^T X ; db += colsum(dY) ; dX = dY W
  gemm_tn(out_dim(), in_dim(), n, grad_y.data(), x.data(), weight.grad.data(), true);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = grad_y.data() + i * out_dim();
    for (std::size_t j = 0; j < out_dim(); ++j) bias.grad[j] += row[j];
  }
  if (grad_x) {
    *grad_x = BasicTensor<T>::zeros(n, in_dim());
    gemm_nn(n, in_dim(), out_dim(), grad_y.data(), weight.value.data(), grad_x->data(), false);
  }
}

template <typename T>
Linear<T> make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<T> w(in * out);
  for (auto& v : w) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  Linear<T> layer;
  layer.weight = BasicParameter<T>(name + ".weight", BasicTensor<T>({out, in}, std::move(w)));
  layer.bias = BasicParameter<T>(name + ".bias", BasicTensor<T>({out}));
  return layer;
}

template <typename T>
Mlp<T>::Mlp(std::vector<Linear<T>> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in_dim() != layers_[i - 1].out_dim()) throw DimensionError("MLP layer widths do not chain");
  }
}

template <typename T>
Mlp<T> Mlp<T>::create(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng) {
  if (widths.size() < 2) throw ParameterError("MLP needs at least an input and an output width");
  std::vector<Linear<T>> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.push_back(make_linear<T>(name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return Mlp(std::move(layers));
}

template <typename T>
BasicTensor<T> Mlp<T>::forward(const BasicTensor<T>& x, Cache* cache) const {
  if (layers_.empty()) throw DimensionError("forward through an empty MLP");
  if (cache) cache->inputs.clear();
  BasicTensor<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (cache) cache->inputs.push_back(h);
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) {
      for (auto& v : h.values()) v = v > T{0} ? v : T{0};
    }
  }
  return h;
}

template <typename T>
BasicTensor<T> Mlp<T>::backward(const Cache& cache, const BasicTensor<T>& grad_out, bool want_input_grad) {
  if (cache.inputs.size() != layers_.size()) throw DimensionError("MLP backward without a matching forward cache");
  BasicTensor<T> grad = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need = i > 0 || want_input_grad;
    BasicTensor<T> grad_in;
    layers_[i].backward(cache.inputs[i], grad, need ? &grad_in : nullptr);
    if (i > 0) {
      // The cached input of layer i is the rectified output of layer i-1.
      const auto& act = cache.inputs[i].values();
      auto& g = grad_in.values();
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (!(act[j] > T{0})) g[j] = T{0};
      }
    }
    grad = std::move(grad_in);
  }
  return want_input_grad ? grad : BasicTensor<T>{};
}

template <typename T>
std::vector<std::size_t> Mlp<T>::widths() const {
  std::vector<std::size_t> w;
  if (layers_.empty()) return w;
  w.push_back(layers_.front().in_dim());
  for (const auto& l : layers_) w.push_back(l.out_dim());
  return w;
}

template <typename T>
ParameterRefs<T> Mlp<T>::parameters() {
  ParameterRefs<T> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

template <typename T>
Classifier<T> make_classifier(std::size_t num_classes, std::size_t dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<T> w(num_classes * dim);
  for (auto& v : w) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  Classifier<T> c;
  c.weight = BasicParameter<T>("classifier.weight", BasicTensor<T>({num_classes, dim}, std::move(w)));
  return c;
}

std::vector<std::size_t> head_widths(std::size_t input_dim, std::size_t embed_dim, std::size_t layers) {
  if (layers < 1) throw ParameterError("embedding head needs at least one layer");
  std::vector<std::size_t> widths{input_dim};
  for (std::size_t i = 0; i < layers; ++i) widths.push_back(embed_dim);
  return widths;
}

template <typename T>
void FrameBatch<T>::append(const Tensor& video_frames) {
  if (video_frames.rank() != 2) throw DimensionError("video frames must be a T x D matrix");
  const std::size_t d = video_frames.cols();
  const std::size_t prior = offsets.back();
  if (prior > 0 && frames.cols() != d) throw DimensionError("frame width differs within a batch");
  std::vector<T> values = frames.empty() ? std::vector<T>{} : std::move(frames.values());
  values.insert(values.end(), video_frames.values().begin(), video_frames.values().end());
  const std::size_t rows = prior + video_frames.rows();
  frames = BasicTensor<T>({rows, d}, std::move(values));
  offsets.push_back(rows);
}

template <typename T>
BasicTensor<T> segment_mean(const BasicTensor<T>& rows, const std::vector<std::size_t>& offsets) {
  const std::size_t b = offsets.size() - 1;
  const std::size_t c = rows.cols();
  BasicTensor<T> out = BasicTensor<T>::zeros(b, c);
  std::vector<double> acc(c);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t n = offsets[i + 1] - offsets[i];
    if (n == 0) throw DegenerateInputError("video with zero frames in batch");
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = offsets[i]; t < offsets[i + 1]; ++t) {
      const T* r = rows.data() + t * c;
      for (std::size_t j = 0; j < c; ++j) acc[j] += r[j];
    }
    for (std::size_t j = 0; j < c; ++j) out(i, j) = static_cast<T>(acc[j] / static_cast<double>(n));
  }
  return out;
}

template <typename T>
BasicTensor<T> segment_mean_backward(const BasicTensor<T>& grad_pooled, const std::vector<std::size_t>& offsets) {
  const std::size_t c = grad_pooled.cols();
  BasicTensor<T> out = BasicTensor<T>::zeros(offsets.back(), c);
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
    const T scale = static_cast<T>(1.0 / static_cast<double>(offsets[i + 1] - offsets[i]));
    for (std::size_t t = offsets[i]; t < offsets[i + 1]; ++t) {
      for (std::size_t j = 0; j < c; ++j) out(t, j) = grad_pooled(i, j) * scale;
    }
  }
  return out;
}

template <typename T>
std::vector<T> embed_video(const BasicTensor<T>& frames, const EmbeddingHead<T>& head) {
  if (frames.rank() != 2 || frames.rows() == 0) throw DegenerateInputError("embed_video needs at least one frame");
  if (frames.cols() != head.in_dim()) {
    throw DimensionError("video frames have width " + std::to_string(frames.cols()) + ", head expects " +
                         std::to_string(head.in_dim()));
  }
  const BasicTensor<T> per_frame = head.forward(frames);
  const BasicTensor<T> pooled = segment_mean(per_frame, {0, frames.rows()});
  return pooled.values();
}

std::vector<float> embed_video(const FeatureSequence& seq, const EmbeddingHead<float>& head) {
  return embed_video(seq.frames, head);
}

template <typename T>
BasicTensor<T> embed_batch(const FrameBatch<T>& batch, const EmbeddingHead<T>& head) {
  return segment_mean(head.forward(batch.frames), batch.offsets);
}

BasicTensor<float> embed_frames(const Tensor& frames, const EmbeddingHead<float>& head) {
  if (frames.cols() != head.in_dim()) throw DimensionError("frame width does not match the embedding head");
  return head.forward(frames);
}

template <typename T>
std::vector<T> classify(std::span<const T> z, const Classifier<T>& classifier, double tau_cls) {
  if (z.size() != classifier.dim()) throw DimensionError("classifier width does not match embedding");
  if (!(tau_cls > 0.0)) throw ParameterError("classifier temperature must be positive");
  const std::size_t k = classifier.num_classes();
  std::vector<T> logits(k);
  gemm_nt(1, k, z.size(), z.data(), classifier.weight.value.data(), logits.data(), false);
  for (auto& l : logits) l = static_cast<T>(l / tau_cls);
  std::vector<T> probs(k);
  softmax_nll<T>(logits, 0, probs, {}, 0.0);
  return probs;
}

#define VSRET_INSTANTIATE_EMBEDDING(T)                                                                \
  template struct Linear<T>;                                                                          \
  template Linear<T> make_linear<T>(const std::string&, std::size_t, std::size_t, Rng&);             \
  template class Mlp<T>;                                                                              \
  template Classifier<T> make_classifier<T>(std::size_t, std::size_t, Rng&);                         \
  template struct FrameBatch<T>;                                                                      \
  template BasicTensor<T> segment_mean(const BasicTensor<T>&, const std::vector<std::size_t>&);      \
  template BasicTensor<T> segment_mean_backward(const BasicTensor<T>&, const std::vector<std::size_t>&); \
  template std::vector<T> embed_video(const BasicTensor<T>&, const EmbeddingHead<T>&);               \
  template BasicTensor<T> embed_batch(const FrameBatch<T>&, const EmbeddingHead<T>&);                \
  template std::vector<T> classify(std::span<const T>, const Classifier<T>&, double);

VSRET_INSTANTIATE_EMBEDDING(float)
VSRET_INSTANTIATE_EMBEDDING(double)

#undef VSRET_INSTANTIATE_EMBEDDING

}  // namespace vsret
