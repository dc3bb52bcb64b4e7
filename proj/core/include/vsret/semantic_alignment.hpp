#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vsret/dataset.hpp"
#include "vsret/embedding.hpp"
#include "vsret/tensor.hpp"

namespace vsret {

/// Frozen K x W matrix of class-name word embeddings, rows in class-id order.
class SemanticBank {
 public:
  SemanticBank() = default;
  SemanticBank(std::vector<std::string> names, Tensor vectors);

  [[nodiscard]] const Tensor& vectors() const { return vectors_; }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  [[nodiscard]] std::size_t num_classes() const { return vectors_.rows(); }
  [[nodiscard]] std::size_t dim() const { return vectors_.cols(); }
  [[nodiscard]] bool empty() const { return vectors_.empty(); }

 private:
  std::vector<std::string> names_;
  Tensor vectors_;
};

/// Hidden widths of g(.) between the video embedding and the word space.
inline const std::vector<std::size_t> kSemanticHiddenWidths{512, 640, 768, 896};

/// Reorders rows of `file` to the manifest's class ids. Throws
/// ValidationError listing every missing or unexpected class name. When
/// `normalize` is set each row is scaled to unit norm.
SemanticBank align_semantic_bank(const SemanticBankFile& file, const Manifest& manifest, bool normalize = true);

SemanticBank load_semantic_bank(const std::filesystem::path& path, const Manifest& manifest, bool normalize = true);

/// g(.): FC(h1)-ReLU-...-FC(W) from the embedding width. Biases start at zero.
template <typename T>
Mlp<T> make_semantic_mlp(std::size_t embed_dim, std::size_t word_dim, const std::vector<std::size_t>& hidden,
                         Rng& rng);

template <typename T>
std::vector<T> semantic_map(std::span<const T> z, const Mlp<T>& mlp);

/// p_S(c) = softmax_c(-|g(z) - S_c| / tau), normalized over every class k.
template <typename T>
std::vector<T> semantic_probs(std::span<const T> gz, const BasicTensor<T>& bank, double tau);

}  // namespace vsret
