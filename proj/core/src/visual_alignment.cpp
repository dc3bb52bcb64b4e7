#include "vsret/visual_alignment.hpp"

#include <algorithm>
#include <cmath>

#include "vsret/numerics.hpp"

namespace vsret {

template <typename T>
VisualBank<T>::VisualBank(std::size_t num_classes, std::size_t dim, double alpha)
    : rows_(BasicTensor<T>::zeros(num_classes, dim)), updated_(num_classes, false), alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("bank alpha must lie in (0, 1], got " + std::to_string(alpha));
}

template <typename T>
VisualBank<T>::VisualBank(BasicTensor<T> rows, double alpha)
    : rows_(std::move(rows)), updated_(rows_.rows(), false), alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("bank alpha must lie in (0, 1], got " + std::to_string(alpha));
  for (std::size_t k = 0; k < rows_.rows(); ++k) {
    auto r = rows_.row(k);
    updated_[k] = std::any_of(r.begin(), r.end(), [](T v) { return v != T{0}; });
  }
}

template <typename T>
void VisualBank<T>::update(int label, std::span<const T> z) {
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes()) {
    throw ParameterError("bank update for invalid class " + std::to_string(label));
  }
  if (z.size() != dim()) throw DimensionError("bank update: embedding width does not match bank");
  const std::vector<T> unit = l2_normalize(z);
  auto row = rows_.row(static_cast<std::size_t>(label));
  std::vector<T> mixed(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    mixed[j] = static_cast<T>(alpha_ * unit[j] + (1.0 - alpha_) * row[j]);
  }
  // Antipodal updates can cancel; keep the previous prototype in that case.
  if (!(l2_norm<T>(mixed) > kNormEpsilon)) return;
  const std::vector<T> renorm = l2_normalize<T>(mixed);
  std::copy(renorm.begin(), renorm.end(), row.begin());
  updated_[static_cast<std::size_t>(label)] = true;
}

template <typename T>
bool VisualBank<T>::warm() const {
  return !updated_.empty() && std::all_of(updated_.begin(), updated_.end(), [](bool b) { return b; });
}

template <typename T>
BasicTensor<T> GlobalAlignment<T>::forward(const BasicTensor<T>& z, const BasicTensor<T>& bank, Cache* cache) const {
  const std::size_t c = dim();
  const std::size_t a = attn_dim();
  if (z.rank() != 2 || z.cols() != c) throw DimensionError("global_align: embedding width does not match projections");
  if (bank.rank() != 2 || bank.cols() != c) throw DimensionError("global_align: bank width does not match projections");
  const std::size_t b = z.rows();
  const std::size_t k = bank.rows();

  BasicTensor<T> q = BasicTensor<T>::zeros(b, a);
  BasicTensor<T> keys = BasicTensor<T>::zeros(k, a);
  BasicTensor<T> vals = BasicTensor<T>::zeros(k, a);
  gemm_nn(b, a, c, z.data(), wq.value.data(), q.data(), false);
  gemm_nn(k, a, c, bank.data(), wk.value.data(), keys.data(), false);
  gemm_nn(k, a, c, bank.data(), wv.value.data(), vals.data(), false);

  BasicTensor<T> attn = BasicTensor<T>::zeros(b, k);
  gemm_nt(b, k, a, q.data(), keys.data(), attn.data(), false);
  const double scale = 1.0 / std::sqrt(static_cast<double>(a));
  for (std::size_t i = 0; i < b; ++i) {
    auto r = attn.row(i);
    double hi = -INFINITY;
    for (auto& v : r) {
      v = static_cast<T>(v * scale);
      hi = std::max(hi, static_cast<double>(v));
    }
    double sum = 0.0;
    for (auto& v : r) {
      v = static_cast<T>(std::exp(v - hi));
      sum += v;
    }
    for (auto& v : r) v = static_cast<T>(v / sum);
  }

  BasicTensor<T> ctx = BasicTensor<T>::zeros(b, a);
  gemm_nn(b, a, k, attn.data(), vals.data(), ctx.data(), false);
  BasicTensor<T> out = z;
  gemm_nn(b, c, a, ctx.data(), wo.value.data(), out.data(), true);

  if (cache) {
    cache->z = z;
    cache->queries = std::move(q);
    cache->keys = std::move(keys);
    cache->values = std::move(vals);
    cache->attn = std::move(attn);
    cache->context = std::move(ctx);
    cache->bank = &bank;
  }
  return out;
}

template <typename T>
BasicTensor<T> GlobalAlignment<T>::backward(const Cache& cache, const BasicTensor<T>& grad_zstar) {
  const std::size_t c = dim();
  const std::size_t a = attn_dim();
  const std::size_t b = cache.z.rows();
  const std::size_t k = cache.bank->rows();
  const BasicTensor<T>& bank = *cache.bank;

  // z* = z + ctx Wo
  BasicTensor<T> grad_z = grad_zstar;
  gemm_tn(a, c, b, cache.context.data(), grad_zstar.data(), wo.grad.data(), true);
  BasicTensor<T> grad_ctx = BasicTensor<T>::zeros(b, a);
  gemm_nt(b, a, c, grad_zstar.data(), wo.value.data(), grad_ctx.data(), false);

  // ctx = A Vals
  BasicTensor<T> grad_attn = BasicTensor<T>::zeros(b, k);
  gemm_nt(b, k, a, grad_ctx.data(), cache.values.data(), grad_attn.data(), false);
  BasicTensor<T> grad_vals = BasicTensor<T>::zeros(k, a);
  gemm_tn(k, a, b, cache.attn.data(), grad_ctx.data(), grad_vals.data(), false);
  gemm_tn(c, a, k, bank.data(), grad_vals.data(), wv.grad.data(), true);

  // A = softmax(S), S = q keys^T * scale
  const double scale = 1.0 / std::sqrt(static_cast<double>(a));
  BasicTensor<T> grad_scores = BasicTensor<T>::zeros(b, k);
  for (std::size_t i = 0; i < b; ++i) {
    auto p = cache.attn.row(i);
    auto g = grad_attn.row(i);
    double inner = 0.0;
    for (std::size_t j = 0; j < k; ++j) inner += static_cast<double>(p[j]) * g[j];
    for (std::size_t j = 0; j < k; ++j) grad_scores(i, j) = static_cast<T>(p[j] * (g[j] - inner) * scale);
  }
  BasicTensor<T> grad_q = BasicTensor<T>::zeros(b, a);
  gemm_nn(b, a, k, grad_scores.data(), cache.keys.data(), grad_q.data(), false);
  BasicTensor<T> grad_keys = BasicTensor<T>::zeros(k, a);
  gemm_tn(k, a, b, grad_scores.data(), cache.queries.data(), grad_keys.data(), false);
  gemm_tn(c, a, k, bank.data(), grad_keys.data(), wk.grad.data(), true);

  // q = z Wq
  gemm_tn(c, a, b, cache.z.data(), grad_q.data(), wq.grad.data(), true);
  gemm_nt(b, c, a, grad_q.data(), wq.value.data(), grad_z.data(), true);
  return grad_z;
}

template <typename T>
GlobalAlignment<T> make_global_alignment(std::size_t dim, std::size_t attn_dim, Rng& rng) {
  if (dim == 0) throw ParameterError("global alignment needs a positive width");
  const std::size_t a = attn_dim == 0 ? std::max<std::size_t>(1, dim / 2) : attn_dim;
  auto uniform = [&](std::size_t rows, std::size_t cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::vector<T> w(rows * cols);
    for (auto& v : w) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    return BasicTensor<T>({rows, cols}, std::move(w));
  };
  GlobalAlignment<T> ga;
  ga.wq = BasicParameter<T>("ga_params.wq", uniform(dim, a));
  ga.wk = BasicParameter<T>("ga_params.wk", uniform(dim, a));
  ga.wv = BasicParameter<T>("ga_params.wv", uniform(dim, a));
  ga.wo = BasicParameter<T>("ga_params.wo", BasicTensor<T>({a, dim}));
  return ga;
}

template <typename T>
std::vector<T> global_align(std::span<const T> z, const BasicTensor<T>& bank, const GlobalAlignment<T>& params) {
  BasicTensor<T> row({1, z.size()}, std::vector<T>(z.begin(), z.end()));
  return params.forward(row, bank).values();
}

template <typename T>
std::vector<T> visual_probs(std::span<const T> z_star, const BasicTensor<T>& bank, double tau) {
  if (bank.rank() != 2 || bank.cols() != z_star.size()) throw DimensionError("visual_probs: width mismatch");
  std::vector<T> dists(bank.rows());
  for (std::size_t k = 0; k < bank.rows(); ++k) dists[k] = static_cast<T>(euclidean<T>(z_star, bank.row(k)));
  return distance_softmax<T>(dists, tau);
}

double scatteredness(const VisualBank<float>& bank, const std::vector<int>& class_ids) {
  if (class_ids.size() < 2) throw ParameterError("scatteredness needs at least two classes");
  for (int id : class_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= bank.num_classes()) {
      throw ParameterError("scatteredness: invalid class " + std::to_string(id));
    }
    if (!bank.updated(static_cast<std::size_t>(id))) {
      throw ValidationError("scatteredness: prototype of class " + std::to_string(id) + " was never updated");
    }
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    for (std::size_t j = i + 1; j < class_ids.size(); ++j) {
      total += euclidean<float>(bank.row(static_cast<std::size_t>(class_ids[i])),
                                bank.row(static_cast<std::size_t>(class_ids[j])));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

#define VSRET_INSTANTIATE_VISUAL(T)                                                                   \
  template class VisualBank<T>;                                                                       \
  template struct GlobalAlignment<T>;                                                                 \
  template GlobalAlignment<T> make_global_alignment<T>(std::size_t, std::size_t, Rng&);              \
  template std::vector<T> global_align(std::span<const T>, const BasicTensor<T>&, const GlobalAlignment<T>&); \
  template std::vector<T> visual_probs(std::span<const T>, const BasicTensor<T>&, double);

VSRET_INSTANTIATE_VISUAL(float)
VSRET_INSTANTIATE_VISUAL(double)

#undef VSRET_INSTANTIATE_VISUAL

}  // namespace vsret
