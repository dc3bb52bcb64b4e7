#include "vsret/features.hpp"

#include <cmath>

#include "vsret/binary_io.hpp"
#include "vsret/fileio.hpp"

namespace vsret {

std::string encode_features(const FeatureSequence& seq) {
  if (seq.frames.rank() != 2) throw DimensionError("feature sequence must be a T x D matrix");
  io::Writer w;
  w.bytes(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(seq.dim()));
  w.u32(static_cast<std::uint32_t>(seq.length()));
  w.f32(seq.fps);
  w.f32(seq.t0);
  w.f32s(seq.frames.data(), seq.frames.size());
  return w.take();
}

FeatureSequence decode_features(std::string_view bytes, std::string video_id,
                                std::optional<std::size_t> expected_dim) {
  io::Reader r(bytes, "feature file '" + video_id + "'");
  r.expect_magic(kFeatureMagic);
  std::size_t at = r.offset();
  if (r.u32() != kFeatureVersion) r.fail(at, "unsupported version");
  at = r.offset();
  const std::uint32_t d = r.u32();
  if (d == 0) r.fail(at, "feature dimension is zero");
  if (expected_dim && d != *expected_dim) {
    throw DimensionError("feature file '" + video_id + "' has D=" + std::to_string(d) + ", dataset expects D=" +
                         std::to_string(*expected_dim));
  }
  at = r.offset();
  const std::uint32_t t = r.u32();
  if (t == 0) r.fail(at, "sequence has no frames");
  at = r.offset();
  const float fps = r.f32();
  if (!(fps > 0.0F) || !std::isfinite(fps)) r.fail(at, "fps must be positive");
  at = r.offset();
  const float t0 = r.f32();
  if (!std::isfinite(t0)) r.fail(at, "t0 is not finite");
  at = r.offset();
  std::vector<float> values(static_cast<std::size_t>(t) * d);
  r.f32s(values.data(), values.size());
  if (r.remaining() != 0) r.fail(r.offset(), "trailing bytes after payload");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) r.fail(at + i * sizeof(float), "non-finite feature value");
  }
  FeatureSequence seq;
  seq.video_id = std::move(video_id);
  seq.frames = Tensor({t, d}, std::move(values));
  seq.fps = fps;
  seq.t0 = t0;
  return seq;
}

FeatureSequence read_features(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  return decode_features(read_file(path), path.stem().string(), expected_dim);
}

void write_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  write_file(path, encode_features(seq));
}

template <typename T>
std::vector<T> average_pool(const BasicTensor<T>& frames) {
  if (frames.rank() != 2) throw DimensionError("average_pool expects a T x D matrix");
  const std::size_t t = frames.rows();
  const std::size_t d = frames.cols();
  std::vector<double> acc(d, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    auto row = frames.row(i);
    for (std::size_t j = 0; j < d; ++j) acc[j] += row[j];
  }
  std::vector<T> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<T>(acc[j] / static_cast<double>(t));
  return out;
}

template std::vector<float> average_pool(const BasicTensor<float>&);
template std::vector<double> average_pool(const BasicTensor<double>&);

FeatureSequence slice_interval(const FeatureSequence& seq, double start_s, double end_s) {
  if (!(start_s >= 0.0) || !(end_s > start_s)) {
    throw DegenerateInputError("invalid slice [" + std::to_string(start_s) + ", " + std::to_string(end_s) + ")");
  }
  std::size_t first = seq.length();
  std::size_t last = 0;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    const double ts = seq.timestamp(i);
    if (ts >= start_s && ts < end_s) {
      first = std::min(first, i);
      last = i + 1;
    }
  }
  if (first >= last) {
    throw DegenerateInputError("slice [" + std::to_string(start_s) + ", " + std::to_string(end_s) + ") of '" +
                               seq.video_id + "' contains no frames");
  }
  const std::size_t d = seq.dim();
  std::vector<float> values(seq.frames.values().begin() + static_cast<std::ptrdiff_t>(first * d),
                            seq.frames.values().begin() + static_cast<std::ptrdiff_t>(last * d));
  FeatureSequence out;
  out.video_id = seq.video_id;
  out.frames = Tensor({last - first, d}, std::move(values));
  out.fps = seq.fps;
  out.t0 = static_cast<float>(seq.timestamp(first));
  return out;
}

FeatureSequence cap_frames(const FeatureSequence& seq, std::size_t max_frames) {
  if (max_frames == 0 || seq.length() <= max_frames) return seq;
  const std::size_t d = seq.dim();
  std::vector<float> values;
  values.reserve(max_frames * d);
  for (std::size_t i = 0; i < max_frames; ++i) {
    const std::size_t src = i * seq.length() / max_frames;
    auto row = seq.frames.row(src);
    values.insert(values.end(), row.begin(), row.end());
  }
  FeatureSequence out = seq;
  out.frames = Tensor({max_frames, d}, std::move(values));
  return out;
}

std::string encode_semantic_bank(const SemanticBankFile& bank) {
  if (bank.vectors.rank() != 2 || bank.vectors.rows() != bank.names.size()) {
    throw DimensionError("semantic bank needs one row per class name");
  }
  io::Writer w;
  w.bytes(kSemanticBankMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(bank.vectors.rows()));
  w.u32(static_cast<std::uint32_t>(bank.vectors.cols()));
  for (const auto& name : bank.names) w.str(name);
  w.f32s(bank.vectors.data(), bank.vectors.size());
  return w.take();
}

SemanticBankFile decode_semantic_bank(std::string_view bytes, const std::string& context) {
  io::Reader r(bytes, "semantic bank '" + context + "'");
  r.expect_magic(kSemanticBankMagic);
  std::size_t at = r.offset();
  if (r.u32() != kFeatureVersion) r.fail(at, "unsupported version");
  at = r.offset();
  const std::uint32_t k = r.u32();
  if (k == 0) r.fail(at, "class count is zero");
  at = r.offset();
  const std::uint32_t w = r.u32();
  if (w == 0) r.fail(at, "embedding width is zero");
  SemanticBankFile bank;
  bank.names.reserve(k);
  for (std::uint32_t i = 0; i < k; ++i) bank.names.push_back(r.str());
  at = r.offset();
  std::vector<float> values(static_cast<std::size_t>(k) * w);
  r.f32s(values.data(), values.size());
  if (r.remaining() != 0) r.fail(r.offset(), "trailing bytes after payload");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) r.fail(at + i * sizeof(float), "non-finite embedding value");
  }
  bank.vectors = Tensor({k, w}, std::move(values));
  return bank;
}

SemanticBankFile read_semantic_bank_file(const std::filesystem::path& path) {
  return decode_semantic_bank(read_file(path), path.string());
}

void write_semantic_bank_file(const SemanticBankFile& bank, const std::filesystem::path& path) {
  write_file(path, encode_semantic_bank(bank));
}

}  // namespace vsret
