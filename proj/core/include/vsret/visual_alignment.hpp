#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vsret/rng.hpp"
#include "vsret/tensor.hpp"

namespace vsret {

/// One unit-norm prototype per class, maintained as an exponential moving
/// average of normalized embeddings. Rows start at zero and stay exactly zero
/// until their class is first seen. Never receives gradients.
template <typename T>
class VisualBank {
 public:
  VisualBank() = default;
  VisualBank(std::size_t num_classes, std::size_t dim, double alpha);
  /// Restores a bank from stored rows; zero rows count as never updated.
  VisualBank(BasicTensor<T> rows, double alpha);

  /// V_y <- alpha * z/|z| + (1 - alpha) * V_y, then V_y <- V_y/|V_y|.
  /// Throws DegenerateInputError if |z| <= kNormEpsilon and ParameterError
  /// for an invalid class.
  void update(int label, std::span<const T> z);

  [[nodiscard]] const BasicTensor<T>& rows() const { return rows_; }
  [[nodiscard]] std::span<const T> row(std::size_t k) const { return rows_.row(k); }
  [[nodiscard]] bool updated(std::size_t k) const { return updated_[k]; }
  /// True once every row has been updated at least once.
  [[nodiscard]] bool warm() const;
  [[nodiscard]] std::size_t num_classes() const { return rows_.rows(); }
  [[nodiscard]] std::size_t dim() const { return rows_.cols(); }
  [[nodiscard]] double alpha() const { return alpha_; }

 private:
  BasicTensor<T> rows_;
  std::vector<bool> updated_;
  double alpha_ = 0.9;
};

/// Global alignment: single-head scaled dot-product attention from an
/// embedding onto the bank's prototypes, added back residually.
///   A  = softmax((z Wq)(V Wk)^T / sqrt(C'))
///   z* = z + (A (V Wv)) Wo
/// Wo starts at zero, so the operator is the identity at initialization.
/// Bank rows are constants for differentiation.
template <typename T>
struct GlobalAlignment {
  BasicParameter<T> wq;  // C x C'
  BasicParameter<T> wk;  // C x C'
  BasicParameter<T> wv;  // C x C'
  BasicParameter<T> wo;  // C' x C

  struct Cache {
    BasicTensor<T> z;        // B x C
    BasicTensor<T> queries;  // B x C'
    BasicTensor<T> keys;     // K x C'
    BasicTensor<T> values;   // K x C'
    BasicTensor<T> attn;     // B x K
    BasicTensor<T> context;  // B x C'
    const BasicTensor<T>* bank = nullptr;
  };

  [[nodiscard]] std::size_t dim() const { return wq.value.rows(); }
  [[nodiscard]] std::size_t attn_dim() const { return wq.value.cols(); }

  /// B x C -> B x C.
  [[nodiscard]] BasicTensor<T> forward(const BasicTensor<T>& z, const BasicTensor<T>& bank, Cache* cache = nullptr) const;
  /// Accumulates projection gradients and returns dL/dz given dL/dz*.
  BasicTensor<T> backward(const Cache& cache, const BasicTensor<T>& grad_zstar);

  ParameterRefs<T> parameters() { return {&wq, &wk, &wv, &wo}; }
};

/// Projections drawn fan-in uniform; Wo zero. attn_dim 0 means C / 2.
template <typename T>
GlobalAlignment<T> make_global_alignment(std::size_t dim, std::size_t attn_dim, Rng& rng);

/// Single-vector form of GlobalAlignment::forward.
template <typename T>
std::vector<T> global_align(std::span<const T> z, const BasicTensor<T>& bank, const GlobalAlignment<T>& params);

/// p_V(c) = softmax_c(-|z* - V_c| / tau).
template <typename T>
std::vector<T> visual_probs(std::span<const T> z_star, const BasicTensor<T>& bank, double tau);

/// Mean pairwise Euclidean distance between the prototypes of `class_ids`.
/// Throws ValidationError if any listed row was never updated.
double scatteredness(const VisualBank<float>& bank, const std::vector<int>& class_ids);

}  // namespace vsret
