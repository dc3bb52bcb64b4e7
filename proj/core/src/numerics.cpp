#include "vsret/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vsret {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

template <typename T>
void require_matrix(const BasicTensor<T>& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + " must be a matrix, got " + shape_to_string(t.shape()));
}

template <typename T>
void require_same_size(std::span<const T> a, std::span<const T> b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
}

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("softmax temperature must be positive, got " + std::to_string(tau));
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  BasicTensor<T> out = BasicTensor<T>::zeros(a.rows(), b.cols());
  gemm_nn(a.rows(), b.cols(), a.cols(), a.data(), b.data(), out.data(), false);
  return out;
}

template <typename T>
void matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b, const BasicTensor<T>& grad_out,
                     BasicTensor<T>* grad_a, BasicTensor<T>* grad_b) {
  require_matrix(grad_out, "matmul grad");
  if (grad_out.rows() != a.rows() || grad_out.cols() != b.cols()) {
    throw DimensionError("matmul grad shape " + shape_to_string(grad_out.shape()) + " does not match output");
  }
  if (grad_a) {
    if (grad_a->shape() != a.shape()) throw DimensionError("matmul grad_a shape mismatch");
    gemm_nt(a.rows(), a.cols(), b.cols(), grad_out.data(), b.data(), grad_a->data(), true);
  }
  if (grad_b) {
    if (grad_b->shape() != b.shape()) throw DimensionError("matmul grad_b shape mismatch");
    gemm_tn(b.rows(), b.cols(), a.rows(), a.data(), grad_out.data(), grad_b->data(), true);
  }
}

template <typename T>
double l2_norm(std::span<const T> v) {
  double sq = 0.0;
  for (T x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sq);
}

template <typename T>
std::vector<T> l2_normalize(std::span<const T> v) {
  const double norm = l2_norm(v);
  if (!(norm > kNormEpsilon)) {
    throw DegenerateInputError("cannot normalize a vector with norm " + std::to_string(norm));
  }
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i] / norm);
  return out;
}

template <typename T>
std::vector<T> l2_normalize_backward(std::span<const T> v, std::span<const T> grad_out) {
  require_same_size(v, grad_out, "l2_normalize_backward");
  const double norm = l2_norm(v);
  if (!(norm > kNormEpsilon)) throw DegenerateInputError("l2_normalize_backward on a degenerate vector");
  // dy/dv = (I - y y^T) / |v|
  double dot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += (v[i] / norm) * grad_out[i];
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>((grad_out[i] - (v[i] / norm) * dot) / norm);
  return out;
}

template <typename T>
std::vector<T> distance_softmax(std::span<const T> dists, double tau) {
  require_tau(tau);
  if (dists.empty()) throw DimensionError("distance_softmax on an empty vector");
  double lo = dists[0];
  for (T d : dists) {
    if (!std::isfinite(d)) throw DegenerateInputError("distance_softmax on a non-finite distance");
    lo = std::min(lo, static_cast<double>(d));
  }
  std::vector<double> e(dists.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    e[i] = std::exp(-(dists[i] - lo) / tau);
    sum += e[i];
  }
  std::vector<T> out(dists.size());
  for (std::size_t i = 0; i < dists.size(); ++i) out[i] = static_cast<T>(e[i] / sum);
  return out;
}

template <typename T>
std::vector<T> distance_softmax_backward(std::span<const T> probs, std::span<const T> grad_probs, double tau) {
  require_tau(tau);
  require_same_size(probs, grad_probs, "distance_softmax_backward");
  // p = softmax(-d/tau):  dL/dd_j = -(1/tau) p_j (g_j - sum_i g_i p_i)
  double inner = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) inner += static_cast<double>(grad_probs[i]) * probs[i];
  std::vector<T> out(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    out[j] = static_cast<T>(-(probs[j] * (grad_probs[j] - inner)) / tau);
  }
  return out;
}

template <typename T>
double euclidean(std::span<const T> a, std::span<const T> b) {
  require_same_size(a, b, "euclidean");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sq += d * d;
  }
  return std::sqrt(sq);
}

template <typename T>
std::vector<T> euclidean_backward(std::span<const T> a, std::span<const T> b) {
  const double d = euclidean(a, b);
  std::vector<T> out(a.size(), T{0});
  if (!(d > 0.0)) return out;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<T>((a[i] - b[i]) / d);
  return out;
}

template <typename T>
double nll_from_probs(std::span<const T> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw ParameterError("label " + std::to_string(label) + " out of range for " + std::to_string(probs.size()) +
                         " classes");
  }
  return -std::log(std::max(static_cast<double>(probs[label]), kProbFloor));
}

template <typename T>
SoftmaxNll softmax_nll(std::span<const T> logits, std::size_t label, std::span<T> probs, std::span<T> grad_logits,
                       double scale) {
  const std::size_t k = logits.size();
  if (label >= k) {
    throw ParameterError("label " + std::to_string(label) + " out of range for " + std::to_string(k) + " classes");
  }
  if (probs.size() != k) throw DimensionError("softmax_nll: probs buffer has wrong length");
  double hi = logits[0];
  for (T x : logits) hi = std::max(hi, static_cast<double>(x));
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::exp(logits[i] - hi);
  const double log_z = hi + std::log(sum);
  for (std::size_t i = 0; i < k; ++i) probs[i] = static_cast<T>(std::exp(logits[i] - log_z));

  SoftmaxNll result;
  result.loss = log_z - static_cast<double>(logits[label]);
  const double cap = -std::log(kProbFloor);
  if (result.loss > cap) {
    result.loss = cap;
    result.clamped = true;
    return result;
  }
  if (!grad_logits.empty()) {
    if (grad_logits.size() != k) throw DimensionError("softmax_nll: gradient buffer has wrong length");
    for (std::size_t i = 0; i < k; ++i) {
      const double target = i == label ? 1.0 : 0.0;
      grad_logits[i] += static_cast<T>(scale * (static_cast<double>(probs[i]) - target));
    }
  }
  return result;
}

template <typename T>
void adam_step(const ParameterRefs<T>& params, AdamState<T>& state, double lr) {
  for (const auto* p : params) {
    if (!p->grad.all_finite()) throw TrainingError("non-finite gradient in parameter '" + p->name + "'");
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  state.t += 1;
  const AdamConfig& c = state.config;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  const double decay = 1.0 - lr * c.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.shape() != p.value.shape()) throw DimensionError("Adam moment shape mismatch for '" + p.name + "'");
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      const double mj = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      const double vj = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / bias1;
      const double v_hat = vj / bias2;
      double w = static_cast<double>(p.value[j]);
      if (c.weight_decay != 0.0) w *= decay;
      w -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
      p.value[j] = static_cast<T>(w);
    }
  }
}

template <typename T>
GradCheckResult grad_check(const std::function<double()>& loss_fn, const ParameterRefs<T>& params,
                           double epsilon, double floor) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw ParameterError("grad_check epsilon must lie in [1e-6, 1e-3], got " + std::to_string(epsilon));
  }
  for (auto* p : params) p->zero_grad();
  const double base = loss_fn();
  std::vector<BasicTensor<T>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);
  const double again = loss_fn();
  if (base != again) {
    throw DeterminismError("loss function is not deterministic: " + std::to_string(base) + " vs " +
                           std::to_string(again));
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    GradCheckEntry entry;
    entry.parameter = p.name;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const T original = p.value[j];
      // Use the perturbation that is actually representable in T.
      p.value[j] = static_cast<T>(original + epsilon);
      const double up = static_cast<double>(p.value[j]) - static_cast<double>(original);
      const double f_plus = loss_fn();
      p.value[j] = static_cast<T>(original - epsilon);
      const double down = static_cast<double>(original) - static_cast<double>(p.value[j]);
      const double f_minus = loss_fn();
      p.value[j] = original;

      const double numeric = (f_plus - f_minus) / (up + down);
      const double exact = analytic[pi][j];
      const double denom = std::max({std::abs(exact), std::abs(numeric), floor});
      const double rel = std::abs(exact - numeric) / denom;
      if (j == 0 || rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = j;
        entry.analytic = exact;
        entry.numeric = numeric;
      }
    }
    result.max_rel_error = std::max(result.max_rel_error, entry.max_rel_error);
    result.per_parameter.push_back(entry);
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi]->grad = analytic[pi];
  return result;
}

#define VSRET_INSTANTIATE_NUMERICS(T)                                                                         \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                               \
  template void matmul_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,          \
                                BasicTensor<T>*, BasicTensor<T>*);                                            \
  template double l2_norm(std::span<const T>);                                                                \
  template std::vector<T> l2_normalize(std::span<const T>);                                                   \
  template std::vector<T> l2_normalize_backward(std::span<const T>, std::span<const T>);                      \
  template std::vector<T> distance_softmax(std::span<const T>, double);                                       \
  template std::vector<T> distance_softmax_backward(std::span<const T>, std::span<const T>, double);          \
  template double euclidean(std::span<const T>, std::span<const T>);                                          \
  template std::vector<T> euclidean_backward(std::span<const T>, std::span<const T>);                         \
  template double nll_from_probs(std::span<const T>, std::size_t);                                            \
  template SoftmaxNll softmax_nll(std::span<const T>, std::size_t, std::span<T>, std::span<T>, double);       \
  template void adam_step(const ParameterRefs<T>&, AdamState<T>&, double);                                    \
  template GradCheckResult grad_check(const std::function<double()>&, const ParameterRefs<T>&, double, double);

VSRET_INSTANTIATE_NUMERICS(float)
VSRET_INSTANTIATE_NUMERICS(double)

#undef VSRET_INSTANTIATE_NUMERICS

}  // namespace vsret
