#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsret/tensor.hpp"

namespace vsret {

/// Frozen per-frame backbone features of one video. Frame i is stamped at
/// t0 + i / fps seconds; timestamps are never stored.
struct FeatureSequence {
  std::string video_id;
  Tensor frames;  // T x D
  float fps = 3.0F;
  float t0 = 0.0F;

  [[nodiscard]] std::size_t length() const { return frames.rows(); }
  [[nodiscard]] std::size_t dim() const { return frames.cols(); }
  [[nodiscard]] double timestamp(std::size_t i) const {
    return static_cast<double>(t0) + static_cast<double>(i) / static_cast<double>(fps);
  }
};

inline constexpr std::string_view kFeatureMagic = "VSF1";
inline constexpr std::string_view kSemanticBankMagic = "VSB1";
inline constexpr std::uint32_t kFeatureVersion = 1;

// VSF1 layout (little-endian): magic, u32 version, u32 D, u32 T, f32 fps,
// f32 t0, then T*D f32 row-major.
std::string encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::string_view bytes, std::string video_id,
                                std::optional<std::size_t> expected_dim = std::nullopt);

/// The video id is taken from the file stem. `expected_dim` enforces the
/// dataset-wide feature width.
FeatureSequence read_features(const std::filesystem::path& path,
                              std::optional<std::size_t> expected_dim = std::nullopt);
void write_features(const FeatureSequence& seq, const std::filesystem::path& path);

/// Mean over the time axis of a T x D matrix.
template <typename T>
std::vector<T> average_pool(const BasicTensor<T>& frames);

/// Frames whose timestamp lies in [start_s, end_s).
FeatureSequence slice_interval(const FeatureSequence& seq, double start_s, double end_s);

/// Uniformly spaced subsample of at most `max_frames` frames (0 keeps all).
FeatureSequence cap_frames(const FeatureSequence& seq, std::size_t max_frames);

/// Raw contents of a VSB1 file: class names and a K x W matrix in file order.
struct SemanticBankFile {
  std::vector<std::string> names;
  Tensor vectors;
};

// VSB1 layout: magic, u32 version, u32 K, u32 W, K length-prefixed UTF-8
// names, then K*W f32.
std::string encode_semantic_bank(const SemanticBankFile& bank);
SemanticBankFile decode_semantic_bank(std::string_view bytes, const std::string& context);
SemanticBankFile read_semantic_bank_file(const std::filesystem::path& path);
void write_semantic_bank_file(const SemanticBankFile& bank, const std::filesystem::path& path);

}  // namespace vsret
