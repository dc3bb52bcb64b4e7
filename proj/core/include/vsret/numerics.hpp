#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vsret/tensor.hpp"

namespace vsret {

/// Vectors with a smaller Euclidean norm are treated as degenerate.
inline constexpr double kNormEpsilon = 1e-12;
/// Lower clamp on the probability inside negative log-likelihoods.
inline constexpr double kProbFloor = 1e-12;

// Row-major GEMM kernels on raw spans. `accumulate` adds into `c` instead of
// overwriting it. Loop orders keep the innermost loop contiguous so the
// compiler vectorizes it; reduction order is fixed, so results never depend
// on scheduling.

/// c[m x n] (+)= a[m x k] * b[k x n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T{0});
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T{0}) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// c[m x n] (+)= a[m x k] * b[n x k]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      // Eight interleaved partial sums: fixed order, but vectorizable.
      T lane[8] = {};
      std::size_t p = 0;
      for (; p + 8 <= k; p += 8) {
        for (std::size_t l = 0; l < 8; ++l) lane[l] += arow[p + l] * brow[p + l];
      }
      T acc = ((lane[0] + lane[4]) + (lane[1] + lane[5])) + ((lane[2] + lane[6]) + (lane[3] + lane[7]));
      for (; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

/// c[m x n] (+)= a[k x m]^T * b[k x n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T{0});
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T{0}) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Accumulates dL/da and dL/db given dL/d(a*b). Either output may be null.
template <typename T>
void matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b, const BasicTensor<T>& grad_out,
                     BasicTensor<T>* grad_a, BasicTensor<T>* grad_b);

template <typename T>
double l2_norm(std::span<const T> v);

/// Throws DegenerateInputError when the norm is at or below kNormEpsilon.
template <typename T>
std::vector<T> l2_normalize(std::span<const T> v);

/// Gradient of y = v / |v| with respect to v, given dL/dy.
template <typename T>
std::vector<T> l2_normalize_backward(std::span<const T> v, std::span<const T> grad_out);

/// softmax(-d / tau), evaluated with max-subtraction.
template <typename T>
std::vector<T> distance_softmax(std::span<const T> dists, double tau);

/// Exact Jacobian-vector product of distance_softmax: returns dL/dd given the
/// forward output `probs` and dL/dprobs.
template <typename T>
std::vector<T> distance_softmax_backward(std::span<const T> probs, std::span<const T> grad_probs, double tau);

template <typename T>
double euclidean(std::span<const T> a, std::span<const T> b);

/// d|a-b|/da; the gradient with respect to b is its negation. Zero at a == b.
template <typename T>
std::vector<T> euclidean_backward(std::span<const T> a, std::span<const T> b);

/// -log(probs[label]), clamped at -log(kProbFloor).
template <typename T>
double nll_from_probs(std::span<const T> probs, std::size_t label);

/// Result of a fused softmax + NLL on one row of logits.
struct SoftmaxNll {
  double loss = 0.0;
  bool clamped = false;  // probability fell below kProbFloor; gradient is zero
};

/// loss = -log softmax(logits)[label] computed via log-sum-exp. Writes the
/// softmax into `probs` and, when `grad_logits` is non-empty, adds
/// scale * dloss/dlogits into it.
template <typename T>
SoftmaxNll softmax_nll(std::span<const T> logits, std::size_t label, std::span<T> probs, std::span<T> grad_logits,
                       double scale);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
  std::uint64_t t = 0;
};

/// One Adam update with bias correction and decoupled weight decay
/// (value *= 1 - lr * wd before the Adam delta). `lr` overrides config.lr so
/// schedules can be applied by the caller. Throws TrainingError naming the
/// parameter if any gradient is non-finite; nothing is modified in that case.
template <typename T>
void adam_step(const ParameterRefs<T>& params, AdamState<T>& state, double lr);

template <typename T>
void adam_step(const ParameterRefs<T>& params, AdamState<T>& state) {
  adam_step(params, state, state.config.lr);
}

struct GradCheckEntry {
  std::string parameter;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> per_parameter;
};

/// Compares analytic gradients against central differences.
///
/// `loss_fn` must evaluate the loss at the current parameter values and
/// accumulate its gradient into each parameter's grad buffer. Gradients are
/// zeroed before the analytic pass and left holding the analytic values on
/// return. The relative error of one entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor). Near-zero
/// entries are dominated by rounding in the loss; raise `floor` to compare
/// them on an absolute scale instead.
/// Throws DeterminismError if two evaluations at the same point differ and
/// ParameterError if epsilon is outside [1e-6, 1e-3].
template <typename T>
GradCheckResult grad_check(const std::function<double()>& loss_fn, const ParameterRefs<T>& params,
                           double epsilon, double floor = 1e-8);

}  // namespace vsret
