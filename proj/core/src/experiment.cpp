#include "vsret/experiment.hpp"

#include <algorithm>
#include <unordered_map>

#include <json.hpp>

#include "vsret/binary_io.hpp"
#include "vsret/fileio.hpp"

namespace vsret {

Dataset load_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& features_dir,
                     const std::filesystem::path& semantic_path) {
  Dataset data;
  data.manifest = load_manifest(manifest_path);
  std::optional<std::size_t> dim;
  data.features.reserve(data.manifest.videos.size());
  for (const auto& v : data.manifest.videos) {
    const std::filesystem::path path = features_dir.empty()
                                           ? data.manifest.feature_path(v)
                                           : features_dir / std::filesystem::path(v.feature_file).filename();
    FeatureSequence seq = read_features(path, dim);
    dim = seq.dim();
    seq.video_id = v.id;
    data.features.push_back(std::move(seq));
  }
  if (!semantic_path.empty()) data.semantic = load_semantic_bank(semantic_path, data.manifest);
  return data;
}

Dataset dataset_from_synthetic(const SyntheticDataset& synthetic) {
  Dataset data;
  data.manifest = synthetic.manifest;
  data.features = synthetic.features;
  if (!synthetic.semantic_bank.names.empty()) {
    data.semantic = align_semantic_bank(synthetic.semantic_bank, synthetic.manifest);
  }
  return data;
}

FeatureSequence activity_frames(const Dataset& data, std::size_t video) {
  const VideoRecord& v = data.manifest.videos.at(video);
  if (v.is_distractor()) return data.features.at(video);
  return slice_interval(data.features.at(video), v.start_s, v.end_s);
}

std::vector<std::size_t> training_indices(const Manifest& manifest, std::optional<std::size_t> shots,
                                          std::uint64_t seed) {
  if (shots) return sample_novel_train(manifest, *shots, seed);
  std::vector<std::size_t> out;
  for (std::size_t i : manifest.videos_in(Split::Train)) {
    if (!manifest.videos[i].is_distractor()) out.push_back(i);
  }
  return out;
}

TrainingSet make_training_set(const Dataset& data, const std::vector<std::size_t>& indices) {
  TrainingSet set;
  set.num_classes = data.manifest.num_classes();
  for (std::size_t i : indices) {
    const VideoRecord& v = data.manifest.videos.at(i);
    if (v.is_distractor()) throw ParameterError("distractor '" + v.id + "' cannot be a training video");
    set.videos.push_back(activity_frames(data, i).frames);
    set.labels.push_back(v.class_id);
  }
  return set;
}

namespace {

std::vector<float> pooled_clip(const FeatureSequence& seq, const Interval& span) {
  return average_pool(slice_interval(seq, span.start, span.end).frames);
}

std::string clip_id(const std::string& video, std::size_t i) { return video + "@" + std::to_string(i); }

}  // namespace

Gallery build_gallery(const Dataset& data, const EmbeddingHead<float>& head, const RetrievalConfig& config) {
  const Manifest& m = data.manifest;
  std::vector<std::string> ids;
  std::vector<std::string> owners;
  std::vector<int> labels;
  std::vector<float> rows;
  auto add = [&](std::string id, const std::string& owner, int label, const std::vector<float>& z) {
    ids.push_back(std::move(id));
    owners.push_back(owner);
    labels.push_back(label);
    rows.insert(rows.end(), z.begin(), z.end());
  };

  for (std::size_t vi : m.videos_in(Split::Test)) {
    const VideoRecord& v = m.videos[vi];
    const FeatureSequence& seq = data.features[vi];
    switch (config.mode) {
      case IndexKind::Video:
        add(v.id, v.id, v.class_id, embed_video(activity_frames(data, vi), head));
        break;
      case IndexKind::Clip: {
        const auto clips = segment_clips(v, config.clip_len_s);
        for (std::size_t c = 0; c < clips.size(); ++c) {
          const FeatureSequence part = slice_interval(seq, clips[c].span.start, clips[c].span.end);
          add(clip_id(v.id, c), v.id, clips[c].positive ? v.class_id : kDistractor, embed_video(part, head));
        }
        break;
      }
      case IndexKind::Moment: {
        const auto clips = segment_clips(v, config.clip_len_s);
        std::vector<std::vector<float>> pooled;
        for (const auto& c : clips) pooled.push_back(pooled_clip(seq, c.span));
        for (const auto& p : video_proposals(v, config.clip_len_s, config.max_moment)) {
          std::vector<double> acc(seq.dim(), 0.0);
          for (std::size_t c = p.start_clip; c <= p.end_clip; ++c) {
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += pooled[c][j];
          }
          std::vector<float> mean(acc.size());
          for (std::size_t j = 0; j < acc.size(); ++j) mean[j] = static_cast<float>(acc[j] / static_cast<double>(p.length()));
          const bool hit = !v.is_distractor() && tiou({p.start_s, p.end_s}, {v.start_s, v.end_s}) > kTiouHit;
          const std::size_t width = mean.size();
          add(proposal_id(p), v.id, hit ? v.class_id : kDistractor, embed_video(Tensor({1, width}, std::move(mean)), head));
        }
        break;
      }
    }
  }
  if (ids.empty()) throw ValidationError("test split yields no gallery items in " + std::string(to_string(config.mode)) + " mode");
  Gallery g;
  const std::size_t n = ids.size();
  g.index = build_index(std::move(ids), Tensor({n, head.out_dim()}, std::move(rows)), config.mode, std::move(owners));
  g.labels = std::move(labels);
  return g;
}

std::string encode_gallery(const Gallery& g) {
  io::Writer w;
  w.bytes("VSGI");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(g.index.kind));
  w.u32(static_cast<std::uint32_t>(g.index.size()));
  w.u32(static_cast<std::uint32_t>(g.index.dim()));
  for (std::size_t i = 0; i < g.index.size(); ++i) {
    w.str(g.index.ids[i]);
    w.str(g.index.owners[i]);
    w.u32(static_cast<std::uint32_t>(g.labels[i]));
  }
  w.f32s(g.index.embeddings.data(), g.index.embeddings.size());
  return w.take();
}

Gallery decode_gallery(std::string_view bytes, const std::string& context) {
  io::Reader r(bytes, "gallery '" + context + "'");
  r.expect_magic("VSGI");
  std::size_t at = r.offset();
  if (r.u32() != 1) r.fail(at, "unsupported version");
  at = r.offset();
  const std::uint32_t kind = r.u32();
  if (kind > static_cast<std::uint32_t>(IndexKind::Moment)) r.fail(at, "unknown gallery kind");
  at = r.offset();
  const std::uint32_t n = r.u32();
  const std::uint32_t c = r.u32();
  if (n == 0 || c == 0) r.fail(at, "empty gallery");
  std::vector<std::string> ids(n);
  std::vector<std::string> owners(n);
  Gallery g;
  g.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ids[i] = r.str();
    owners[i] = r.str();
    g.labels[i] = static_cast<int>(r.u32());
  }
  std::vector<float> values(static_cast<std::size_t>(n) * c);
  r.f32s(values.data(), values.size());
  if (r.remaining() != 0) r.fail(r.offset(), "trailing bytes after embeddings");
  g.index.ids = std::move(ids);
  g.index.owners = std::move(owners);
  g.index.embeddings = Tensor({n, c}, std::move(values));
  g.index.kind = static_cast<IndexKind>(kind);
  return g;
}

void save_gallery(const Gallery& gallery, const std::filesystem::path& path) { write_file(path, encode_gallery(gallery)); }

Gallery load_gallery(const std::filesystem::path& path) { return decode_gallery(read_file(path), path.string()); }

std::vector<QueryGroup> query_groups(const Manifest& manifest, std::size_t per_retrieval, std::uint64_t seed) {
  if (per_retrieval < 1) throw ParameterError("queries per retrieval must be at least 1");
  std::vector<std::vector<std::size_t>> by_class(manifest.num_classes());
  const std::vector<std::size_t> test = manifest.videos_in(Split::Test);
  for (std::size_t vi : test) {
    const auto& v = manifest.videos[vi];
    if (!v.is_distractor()) by_class[static_cast<std::size_t>(v.class_id)].push_back(vi);
  }
  const Rng root = Rng(seed).split(0x9a0e);
  std::vector<QueryGroup> groups;
  for (std::size_t vi : test) {
    const auto& v = manifest.videos[vi];
    if (v.is_distractor()) continue;
    QueryGroup g;
    g.videos.push_back(vi);
    std::vector<std::size_t> pool;
    for (std::size_t other : by_class[static_cast<std::size_t>(v.class_id)]) {
      if (other != vi) pool.push_back(other);
    }
    Rng rng = root.split(vi);
    const std::size_t take = std::min(per_retrieval - 1, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      g.videos.push_back(pool[i]);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

Run run_retrieval(const Dataset& data, const EmbeddingHead<float>& head, const Gallery& gallery,
                  const RetrievalConfig& config) {
  const Manifest& m = data.manifest;
  if (gallery.index.kind != config.mode) {
    throw ValidationError("gallery was built for " + std::string(to_string(gallery.index.kind)) +
                          " retrieval, not " + std::string(to_string(config.mode)));
  }
  if (gallery.index.dim() != head.out_dim()) throw DimensionError("gallery width does not match the embedding head");
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < gallery.index.size(); ++i) row_of.emplace(gallery.index.ids[i], i);

  Run run;
  for (const QueryGroup& group : query_groups(m, config.queries_per_retrieval, config.seed)) {
    std::vector<std::vector<float>> zs;
    std::vector<std::string> ids;
    for (std::size_t vi : group.videos) {
      zs.push_back(embed_video(activity_frames(data, vi), head));
      ids.push_back(m.videos[vi].id);
    }
    const VideoRecord& lead = m.videos[group.videos.front()];
    QueryRun q;
    q.query_id = lead.id;
    q.class_id = lead.class_id;
    q.tier = m.class_info(lead.class_id).tier;
    q.duration_s = lead.duration_s;
    q.list = multi_query(gallery.index, zs, kAllItems, ids);
    q.item_classes.reserve(q.list.items.size());
    for (auto& item : q.list.items) {
      const int label = gallery.labels[row_of.at(item.id)];
      item.relevant = label == q.class_id;
      q.item_classes.push_back(label);
    }
    run.queries.push_back(std::move(q));
  }
  return run;
}

std::string retrieval_config_json(const RetrievalConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(c.mode));
  j["clip_len_s"] = c.clip_len_s;
  j["max_moment"] = c.max_moment;
  j["queries_per_retrieval"] = c.queries_per_retrieval;
  j["seed"] = c.seed;
  j["class_mean"] = c.class_mean;
  return j.dump();
}

ExperimentResult run_experiment(const Dataset& data, const TrainConfig& train_config,
                                const RetrievalConfig& retrieval_config, std::optional<std::size_t> shots) {
  ExperimentResult out;
  const TrainingSet set = make_training_set(data, training_indices(data.manifest, shots, train_config.seed));
  out.training = train(set, data.semantic, train_config);
  const Gallery gallery = build_gallery(data, out.training.model.head, retrieval_config);
  out.run = run_retrieval(data, out.training.model.head, gallery, retrieval_config);
  nlohmann::ordered_json echo;
  echo["train"] = nlohmann::ordered_json::parse(config_to_json(train_config));
  echo["retrieval"] = nlohmann::ordered_json::parse(retrieval_config_json(retrieval_config));
  echo["shots"] = shots ? nlohmann::ordered_json(*shots) : nlohmann::ordered_json(nullptr);
  out.report = make_report(out.run, echo.dump(), retrieval_config.class_mean);
  return out;
}

}  // namespace vsret
