#include "vsret/semantic_alignment.hpp"

#include <map>

#include "vsret/numerics.hpp"

namespace vsret {

SemanticBank::SemanticBank(std::vector<std::string> names, Tensor vectors)
    : names_(std::move(names)), vectors_(std::move(vectors)) {
  if (vectors_.rank() != 2 || vectors_.rows() != names_.size()) {
    throw DimensionError("semantic bank needs one row per class name");
  }
}

SemanticBank align_semantic_bank(const SemanticBankFile& file, const Manifest& manifest, bool normalize) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < file.names.size(); ++i) {
    if (!row_of.emplace(file.names[i], i).second) {
      throw ValidationError("semantic bank lists class \"" + file.names[i] + "\" twice");
    }
  }
  std::string missing;
  std::vector<std::size_t> order;
  for (const auto& c : manifest.classes) {
    auto it = row_of.find(c.name);
    if (it == row_of.end()) {
      missing += (missing.empty() ? "" : ", ") + ("\"" + c.name + "\"");
      continue;
    }
    order.push_back(it->second);
    row_of.erase(it);
  }
  if (!missing.empty()) throw ValidationError("semantic bank is missing classes: " + missing);
  if (!row_of.empty()) {
    std::string extra;
    for (const auto& [name, row] : row_of) extra += (extra.empty() ? "" : ", ") + ("\"" + name + "\"");
    throw ValidationError("semantic bank has classes not in the manifest: " + extra);
  }
  const std::size_t w = file.vectors.cols();
  std::vector<float> values;
  values.reserve(order.size() * w);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto src = file.vectors.row(order[k]);
    if (normalize) {
      auto unit = l2_normalize<float>(src);
      values.insert(values.end(), unit.begin(), unit.end());
    } else {
      values.insert(values.end(), src.begin(), src.end());
    }
    names.push_back(file.names[order[k]]);
  }
  return SemanticBank(std::move(names), Tensor({order.size(), w}, std::move(values)));
}

SemanticBank load_semantic_bank(const std::filesystem::path& path, const Manifest& manifest, bool normalize) {
  return align_semantic_bank(read_semantic_bank_file(path), manifest, normalize);
}

template <typename T>
Mlp<T> make_semantic_mlp(std::size_t embed_dim, std::size_t word_dim, const std::vector<std::size_t>& hidden,
                         Rng& rng) {
  std::vector<std::size_t> widths{embed_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(word_dim);
  return Mlp<T>::create("semantic_mlp", widths, rng);
}

template <typename T>
std::vector<T> semantic_map(std::span<const T> z, const Mlp<T>& mlp) {
  if (z.size() != mlp.in_dim()) throw DimensionError("semantic_map: embedding width does not match g(.)");
  BasicTensor<T> row({1, z.size()}, std::vector<T>(z.begin(), z.end()));
  return mlp.forward(row).values();
}

template <typename T>
std::vector<T> semantic_probs(std::span<const T> gz, const BasicTensor<T>& bank, double tau) {
  if (bank.rank() != 2 || bank.cols() != gz.size()) throw DimensionError("semantic_probs: width mismatch");
  std::vector<T> dists(bank.rows());
  for (std::size_t k = 0; k < bank.rows(); ++k) dists[k] = static_cast<T>(euclidean<T>(gz, bank.row(k)));
  return distance_softmax<T>(dists, tau);
}

template Mlp<float> make_semantic_mlp<float>(std::size_t, std::size_t, const std::vector<std::size_t>&, Rng&);
template Mlp<double> make_semantic_mlp<double>(std::size_t, std::size_t, const std::vector<std::size_t>&, Rng&);
template std::vector<float> semantic_map(std::span<const float>, const Mlp<float>&);
template std::vector<double> semantic_map(std::span<const double>, const Mlp<double>&);
template std::vector<float> semantic_probs(std::span<const float>, const BasicTensor<float>&, double);
template std::vector<double> semantic_probs(std::span<const double>, const BasicTensor<double>&, double);

}  // namespace vsret
