#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "vsret/rng.hpp"
#include "vsret/tensor.hpp"

namespace vsret::test {

template <typename T = float>
BasicTensor<T> random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  BasicTensor<T> t({rows, cols});
  for (auto& v : t.values()) v = static_cast<T>(scale * rng.normal());
  return t;
}

template <typename T = float>
std::vector<T> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(scale * rng.normal());
  return v;
}

// Textbook AP written independently of the engine: (1/R) sum_k P(k) rel(k),
// with P(k) recounted from scratch at every rank.
inline double brute_ap(const std::vector<int>& rel, std::size_t total_relevant) {
  double sum = 0.0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    std::size_t hits = 0;
    for (std::size_t j = 0; j <= k; ++j) hits += rel[j] ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(total_relevant);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vsret-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vsret::test
