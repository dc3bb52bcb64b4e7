#include "vsret/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "vsret/fileio.hpp"
#include "vsret/numerics.hpp"
#include "vsret/rng.hpp"

namespace vsret {

using nlohmann::json;

std::string_view to_string(Tier tier) { return tier == Tier::Base ? "base" : "novel"; }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "validation";
    case Split::Test:
      return "test";
  }
  return "train";
}

std::optional<std::size_t> Manifest::find_video(std::string_view id) const {
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> Manifest::videos_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].split == split) out.push_back(i);
  }
  return out;
}

std::vector<int> Manifest::class_ids(Tier tier) const {
  std::vector<int> out;
  for (const auto& c : classes) {
    if (c.tier == tier) out.push_back(c.id);
  }
  return out;
}

bool Manifest::has_taxonomy() const {
  return !classes.empty() && std::all_of(classes.begin(), classes.end(), [](const ClassInfo& c) {
    return c.parent.has_value() && c.grandparent.has_value();
  });
}

namespace {

[[noreturn]] void invalid(const std::string& context, const std::string& what) {
  throw ValidationError(context + ": " + what);
}

template <typename V>
V field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) invalid(where, std::string("missing field '") + key + "'");
  try {
    return obj.at(key).get<V>();
  } catch (const json::exception&) {
    invalid(where, std::string("field '") + key + "' has the wrong type");
  }
}

Tier parse_tier(const std::string& s, const std::string& where) {
  if (s == "base") return Tier::Base;
  if (s == "novel") return Tier::Novel;
  invalid(where, "field 'tier' must be \"base\" or \"novel\", got \"" + s + "\"");
}

Split parse_split(const std::string& s, const std::string& where) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  invalid(where, "field 'split' must be train, validation or test, got \"" + s + "\"");
}

}  // namespace

void validate_manifest(const Manifest& m, bool require_videos) {
  const std::string ctx = "manifest";
  if (m.version != 1) invalid(ctx, "unsupported version " + std::to_string(m.version));
  if (m.classes.empty()) invalid(ctx, "field 'classes' is empty");
  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    const auto& c = m.classes[i];
    const std::string where = "classes[" + std::to_string(i) + "]";
    if (c.id != static_cast<int>(i)) invalid(where, "field 'id' must be dense and unique (expected " + std::to_string(i) + ")");
    if (c.name.empty()) invalid(where, "field 'name' is empty");
    if (c.name == kDistractorName) invalid(where, "field 'name' uses the reserved distractor sentinel");
    if (!names.insert(c.name).second) invalid(where, "duplicate class name \"" + c.name + "\"");
    if (c.parent && *c.parent < 0) invalid(where, "field 'parent' is negative");
    if (c.grandparent && *c.grandparent < 0) invalid(where, "field 'grandparent' is negative");
  }
  std::unordered_set<std::string> ids;
  bool has_train = false;
  bool has_test = false;
  for (std::size_t i = 0; i < m.videos.size(); ++i) {
    const auto& v = m.videos[i];
    const std::string where = "videos[" + std::to_string(i) + "] (id \"" + v.id + "\")";
    if (v.id.empty()) invalid(where, "field 'id' is empty");
    if (!ids.insert(v.id).second) invalid(where, "duplicate video id");
    if (!v.is_distractor() && (v.class_id < 0 || v.class_id >= static_cast<int>(m.classes.size()))) {
      invalid(where, "field 'class' does not resolve to a class");
    }
    if (!(v.duration_s > 0.0) || !std::isfinite(v.duration_s)) invalid(where, "field 'duration_s' must be positive");
    if (!(v.start_s >= 0.0) || !(v.start_s < v.end_s)) invalid(where, "field 'activity' must satisfy 0 <= start < end");
    if (v.end_s > v.duration_s) invalid(where, "field 'activity' ends after duration_s");
    if (v.feature_file.empty()) invalid(where, "field 'feature_file' is empty");
    if (v.is_distractor() && v.split != Split::Test) invalid(where, "distractors are gallery-only and must be in the test split");
    has_train = has_train || v.split == Split::Train;
    has_test = has_test || v.split == Split::Test;
  }
  if (require_videos) {
    if (!has_train) invalid(ctx, "no videos in the train split");
    if (!has_test) invalid(ctx, "no videos in the test split");
  }
}

Manifest parse_manifest(std::string_view text, const std::string& context, bool require_videos) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(context + ": not valid JSON: " + e.what());
  }
  if (!doc.is_object()) invalid(context, "top level must be an object");
  Manifest m;
  m.version = field<int>(doc, "version", context);
  if (!doc.contains("classes") || !doc["classes"].is_array()) invalid(context, "missing array field 'classes'");

  std::vector<ClassInfo> classes;
  for (std::size_t i = 0; i < doc["classes"].size(); ++i) {
    const json& jc = doc["classes"][i];
    const std::string where = context + ": classes[" + std::to_string(i) + "]";
    ClassInfo c;
    c.id = field<int>(jc, "id", where);
    c.name = field<std::string>(jc, "name", where);
    c.tier = parse_tier(field<std::string>(jc, "tier", where), where);
    if (jc.contains("parent") && !jc["parent"].is_null()) c.parent = field<int>(jc, "parent", where);
    if (jc.contains("grandparent") && !jc["grandparent"].is_null()) c.grandparent = field<int>(jc, "grandparent", where);
    classes.push_back(std::move(c));
  }
  std::stable_sort(classes.begin(), classes.end(), [](const ClassInfo& a, const ClassInfo& b) { return a.id < b.id; });
  m.classes = std::move(classes);

  if (doc.contains("videos")) {
    if (!doc["videos"].is_array()) invalid(context, "field 'videos' must be an array");
    for (std::size_t i = 0; i < doc["videos"].size(); ++i) {
      const json& jv = doc["videos"][i];
      const std::string where = context + ": videos[" + std::to_string(i) + "]";
      VideoRecord v;
      v.id = field<std::string>(jv, "id", where);
      if (!jv.contains("class")) invalid(where, "missing field 'class'");
      const json& cls = jv["class"];
      if (cls.is_number_integer()) {
        v.class_id = cls.get<int>();
        if (v.class_id < 0) invalid(where, "field 'class' is negative");
      } else if (cls.is_string()) {
        const auto name = cls.get<std::string>();
        if (name == kDistractorName) {
          v.class_id = kDistractor;
        } else {
          auto it = std::find_if(m.classes.begin(), m.classes.end(), [&](const ClassInfo& c) { return c.name == name; });
          if (it == m.classes.end()) invalid(where, "field 'class' names unknown class \"" + name + "\"");
          v.class_id = it->id;
        }
      } else {
        invalid(where, "field 'class' must be a class id or name");
      }
      v.split = parse_split(field<std::string>(jv, "split", where), where);
      v.duration_s = field<double>(jv, "duration_s", where);
      if (!jv.contains("activity") || !jv["activity"].is_array() || jv["activity"].size() != 2) {
        invalid(where, "field 'activity' must be [start, end]");
      }
      v.start_s = field<double>(json{{"start", jv["activity"][0]}}, "start", where);
      v.end_s = field<double>(json{{"end", jv["activity"][1]}}, "end", where);
      v.feature_file = field<std::string>(jv, "feature_file", where);
      m.videos.push_back(std::move(v));
    }
  }
  try {
    validate_manifest(m, require_videos);
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  Manifest m = parse_manifest(read_file(path), path.string(), true);
  m.base_dir = path.parent_path();
  return m;
}

Manifest load_class_list(const std::filesystem::path& path) {
  Manifest m = parse_manifest(read_file(path), path.string(), false);
  m.base_dir = path.parent_path();
  return m;
}

std::string serialize_manifest(const Manifest& m) {
  json doc;
  doc["version"] = m.version;
  json classes = json::array();
  for (const auto& c : m.classes) {
    json jc;
    jc["id"] = c.id;
    jc["name"] = c.name;
    jc["tier"] = std::string(to_string(c.tier));
    if (c.parent) jc["parent"] = *c.parent;
    if (c.grandparent) jc["grandparent"] = *c.grandparent;
    classes.push_back(std::move(jc));
  }
  doc["classes"] = std::move(classes);
  json videos = json::array();
  for (const auto& v : m.videos) {
    json jv;
    jv["id"] = v.id;
    if (v.is_distractor()) {
      jv["class"] = std::string(kDistractorName);
    } else {
      jv["class"] = v.class_id;
    }
    jv["split"] = std::string(to_string(v.split));
    jv["duration_s"] = v.duration_s;
    jv["activity"] = json::array({v.start_s, v.end_s});
    jv["feature_file"] = v.feature_file;
    videos.push_back(std::move(jv));
  }
  doc["videos"] = std::move(videos);
  return doc.dump(1) + "\n";
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) { write_file(path, serialize_manifest(m)); }

std::vector<std::size_t> sample_novel_train(const Manifest& m, std::size_t shots, std::uint64_t seed) {
  const Rng root = Rng(seed).split(0x5a3b'0001);
  std::vector<std::vector<std::size_t>> per_class(m.num_classes());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.videos.size(); ++i) {
    const auto& v = m.videos[i];
    if (v.split != Split::Train || v.is_distractor()) continue;
    if (m.class_info(v.class_id).tier == Tier::Base) {
      out.push_back(i);
    } else {
      per_class[static_cast<std::size_t>(v.class_id)].push_back(i);
    }
  }
  for (const auto& c : m.classes) {
    if (c.tier != Tier::Novel) continue;
    auto& pool = per_class[static_cast<std::size_t>(c.id)];
    if (pool.size() < shots) {
      throw SamplingError("novel class \"" + c.name + "\" has " + std::to_string(pool.size()) +
                          " training videos, fewer than shots=" + std::to_string(shots));
    }
    Rng rng = root.split(static_cast<std::uint64_t>(c.id));
    // Fisher-Yates with the class's own stream.
    for (std::size_t i = pool.size(); i > 1; --i) {
      std::swap(pool[i - 1], pool[rng.below(i)]);
    }
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(shots));
  }
  std::sort(out.begin(), out.end());
  return out;
}

ClassSplit split_classes(std::size_t num_classes, std::size_t n_base, std::uint64_t seed) {
  if (n_base == 0 || n_base >= num_classes) {
    throw ParameterError("n_base must satisfy 0 < n_base < K (got n_base=" + std::to_string(n_base) +
                         ", K=" + std::to_string(num_classes) + ")");
  }
  std::vector<int> ids(num_classes);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = Rng(seed).split(0x5a3b'0002);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
  ClassSplit split;
  split.base.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_base));
  split.novel.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_base), ids.end());
  std::sort(split.base.begin(), split.base.end());
  std::sort(split.novel.begin(), split.novel.end());
  return split;
}

Manifest with_class_split(const Manifest& manifest, const ClassSplit& split) {
  if (split.base.size() + split.novel.size() != manifest.num_classes()) {
    throw ValidationError("class split does not cover the manifest's classes");
  }
  Manifest out = manifest;
  std::vector<int> seen(manifest.num_classes(), 0);
  for (int id : split.base) {
    out.classes.at(static_cast<std::size_t>(id)).tier = Tier::Base;
    ++seen[static_cast<std::size_t>(id)];
  }
  for (int id : split.novel) {
    out.classes.at(static_cast<std::size_t>(id)).tier = Tier::Novel;
    ++seen[static_cast<std::size_t>(id)];
  }
  if (std::any_of(seen.begin(), seen.end(), [](int n) { return n != 1; })) {
    throw ValidationError("class split is not a partition");
  }
  return out;
}

namespace {

std::vector<float> gaussian_vector(Rng& rng, std::size_t dim, double scale) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  return v;
}

std::vector<float> random_unit(Rng& rng, std::size_t dim) {
  for (;;) {
    auto v = gaussian_vector(rng, dim, 1.0);
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    const double n = std::sqrt(sq);
    if (n < 1e-6) continue;
    for (auto& x : v) x = static_cast<float>(x / n);
    return v;
  }
}

std::string padded(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.dim < 2) throw ParameterError("synthetic feature dimension must be at least 2");
  if (spec.n_base + spec.n_novel < 1) throw ParameterError("synthetic dataset needs at least one class");
  if (spec.base_train_per_class < 1 || (spec.n_novel > 0 && spec.novel_train_per_class < 1) ||
      spec.test_per_class < 1) {
    throw ParameterError("synthetic per-class counts must be at least 1");
  }
  if (!(spec.taxonomy_share >= 0.0 && spec.taxonomy_share < 1.0)) {
    throw ParameterError("taxonomy_share must lie in [0, 1)");
  }
  if (!(spec.spread >= 0.0) || !(spec.min_duration_s > 0.0) || spec.max_duration_s < spec.min_duration_s ||
      !(spec.fps > 0.0F) || !(spec.min_activity_fraction > 0.0 && spec.min_activity_fraction <= 1.0)) {
    throw ParameterError("invalid synthetic spread, duration, fps or activity fraction");
  }
  const std::size_t k = spec.n_base + spec.n_novel;
  const std::size_t d = spec.dim;
  const Rng root(spec.seed);

  SyntheticDataset data;
  Manifest& m = data.manifest;
  Rng taxonomy_rng = root.split(2);
  const std::size_t n_parents = std::max<std::size_t>(1, spec.n_parents);
  const std::size_t n_grand = std::max<std::size_t>(1, spec.n_grandparents);
  for (std::size_t c = 0; c < k; ++c) {
    ClassInfo info;
    info.id = static_cast<int>(c);
    info.name = "class_" + padded(c, 3);
    info.tier = c < spec.n_base ? Tier::Base : Tier::Novel;
    const auto parent = static_cast<int>(taxonomy_rng.below(n_parents));
    info.parent = parent;
    info.grandparent = static_cast<int>(static_cast<std::size_t>(parent) % n_grand);
    m.classes.push_back(std::move(info));
  }

  // Class centers on the unit sphere: a mix of grandparent, parent and
  // class-specific directions, rejecting near neighbours.
  Rng center_rng = root.split(1);
  std::vector<std::vector<float>> grand_dirs;
  std::vector<std::vector<float>> parent_dirs;
  const std::size_t r = spec.latent_dim == 0 ? d : spec.latent_dim;
  for (std::size_t i = 0; i < n_grand; ++i) grand_dirs.push_back(random_unit(center_rng, r));
  for (std::size_t i = 0; i < n_parents; ++i) parent_dirs.push_back(random_unit(center_rng, r));
  const double shared = std::sqrt(spec.taxonomy_share / 2.0);
  const double own = std::sqrt(1.0 - spec.taxonomy_share);
  const double max_cos = std::cos(spec.min_center_angle_deg * std::numbers::pi / 180.0);
  std::vector<std::vector<float>> centers;
  std::size_t attempts = 0;
  while (centers.size() < k) {
    const ClassInfo& info = m.classes[centers.size()];
    const auto& g = grand_dirs[static_cast<std::size_t>(*info.grandparent)];
    const auto& p = parent_dirs[static_cast<std::size_t>(*info.parent)];
    auto c = random_unit(center_rng, r);
    for (std::size_t j = 0; j < r; ++j) c[j] = static_cast<float>(shared * (g[j] + p[j]) + own * c[j]);
    c = l2_normalize<float>(c);
    bool ok = true;
    for (const auto& other : centers) {
      double dot = 0.0;
      for (std::size_t j = 0; j < r; ++j) dot += static_cast<double>(c[j]) * other[j];
      if (dot > max_cos) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(std::move(c));
    if (++attempts > 100000 * k) {
      throw ParameterError("cannot place " + std::to_string(k) + " class centers " +
                           std::to_string(spec.min_center_angle_deg) + " degrees apart in D=" + std::to_string(d));
    }
  }

  // Latent attribute vectors enter feature space through an orthonormal
  // D x r basis, which keeps norms and angles.
  std::vector<std::vector<float>> latent = centers;
  if (r != d) {
    std::vector<std::vector<float>> basis;
    while (basis.size() < r) {
      auto b = gaussian_vector(center_rng, d, 1.0);
      for (const auto& q : basis) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(b[j]) * q[j];
        for (std::size_t j = 0; j < d; ++j) b[j] = static_cast<float>(b[j] - dot * q[j]);
      }
      basis.push_back(l2_normalize<float>(b));
    }
    for (auto& c : centers) {
      std::vector<float> full(d, 0.0F);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < d; ++j) full[j] = static_cast<float>(full[j] + static_cast<double>(c[i]) * basis[i][j]);
      }
      c = std::move(full);
    }
  }

  const double coord_scale = spec.spread / std::sqrt(static_cast<double>(d));
  const double background_coord = spec.background_scale / std::sqrt(static_cast<double>(d));
  std::size_t counter = 0;
  auto make_video = [&](int class_id, Split split) {
    const std::size_t index = counter++;
    Rng rng = root.split(1000 + index);
    VideoRecord v;
    v.id = "v" + padded(index, 5);
    v.class_id = class_id;
    v.split = split;
    v.duration_s = spec.min_duration_s + rng.uniform() * (spec.max_duration_s - spec.min_duration_s);
    if (class_id == kDistractor) {
      v.start_s = 0.0;
      v.end_s = v.duration_s;
    } else {
      const double frac = spec.min_activity_fraction + rng.uniform() * (1.0 - spec.min_activity_fraction);
      const double len = frac * v.duration_s;
      v.start_s = rng.uniform() * (v.duration_s - len);
      v.end_s = std::min(v.duration_s, v.start_s + len);
    }
    v.feature_file = "features/" + v.id + ".vsf";

    const auto n_frames = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(v.duration_s * spec.fps)));
    std::vector<float> mean(d, 0.0F);
    if (class_id != kDistractor) {
      const auto& center = centers[static_cast<std::size_t>(class_id)];
      auto offset = gaussian_vector(rng, d, coord_scale);
      for (std::size_t j = 0; j < d; ++j) mean[j] = center[j] + offset[j];
    }
    // Background: a per-video random mean shared by all non-activity frames.
    auto background = gaussian_vector(rng, d, background_coord);
    std::vector<float> values;
    values.reserve(n_frames * d);
    for (std::size_t t = 0; t < n_frames; ++t) {
      const double ts = static_cast<double>(t) / static_cast<double>(spec.fps);
      const bool active = class_id != kDistractor && ts >= v.start_s && ts < v.end_s;
      if (active) {
        auto noise = gaussian_vector(rng, d, coord_scale);
        for (std::size_t j = 0; j < d; ++j) values.push_back(mean[j] + noise[j]);
      } else {
        auto noise = gaussian_vector(rng, d, background_coord);
        for (std::size_t j = 0; j < d; ++j) values.push_back(background[j] + noise[j]);
      }
    }
    FeatureSequence seq;
    seq.video_id = v.id;
    seq.frames = Tensor({n_frames, d}, std::move(values));
    seq.fps = spec.fps;
    seq.t0 = 0.0F;
    data.features.push_back(std::move(seq));
    m.videos.push_back(std::move(v));
  };

  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t n_train = c < spec.n_base ? spec.base_train_per_class : spec.novel_train_per_class;
    for (std::size_t i = 0; i < n_train; ++i) make_video(static_cast<int>(c), Split::Train);
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < spec.val_per_class; ++i) make_video(static_cast<int>(c), Split::Validation);
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < spec.test_per_class; ++i) make_video(static_cast<int>(c), Split::Test);
  }
  for (std::size_t i = 0; i < spec.distractors; ++i) make_video(kDistractor, Split::Test);

  if (spec.semantic_dim > 0) {
    // Word vectors: a fixed random projection of the class center plus noise,
    // so semantic neighbours mirror visual neighbours imperfectly.
    Rng sem_rng = root.split(3);
    const std::size_t w = spec.semantic_dim;
    auto projection = gaussian_vector(sem_rng, w * r, 1.0 / std::sqrt(static_cast<double>(r)));
    std::vector<float> rows;
    rows.reserve(k * w);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < w; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < r; ++j) acc += static_cast<double>(projection[i * r + j]) * latent[c][j];
        acc += sem_rng.normal() * spec.semantic_noise / std::sqrt(static_cast<double>(w));
        rows.push_back(static_cast<float>(acc));
      }
      data.semantic_bank.names.push_back(m.classes[c].name);
    }
    data.semantic_bank.vectors = Tensor({k, w}, std::move(rows));
  }

  std::vector<float> flat;
  flat.reserve(k * d);
  for (const auto& c : centers) flat.insert(flat.end(), c.begin(), c.end());
  data.class_centers = Tensor({k, d}, std::move(flat));
  validate_manifest(m, true);
  return data;
}

SyntheticSpec synthetic_benchmark_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.spread = 1.2;
  spec.latent_dim = 16;
  spec.seed = seed;
  return spec;
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
  save_manifest(data.manifest, dir / "manifest.json");
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    write_features(data.features[i], dir / data.manifest.videos[i].feature_file);
  }
  if (!data.semantic_bank.names.empty()) write_semantic_bank_file(data.semantic_bank, dir / "semantic_bank.vsb");
}

}  // namespace vsret
