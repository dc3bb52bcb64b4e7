#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vsret/experiment.hpp"
#include "vsret/fileio.hpp"

namespace vsret::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string short_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 8);
}

namespace {

struct Options {
  std::string manifest;
  std::string features;
  std::string semantic_bank;
  std::string out;
  std::string checkpoint;
  std::string baseline_checkpoint;
  std::string gallery;
  std::uint64_t seed = 0;

  std::string preset = "default";
  std::string objective = "full";
  std::optional<double> tau;
  std::optional<double> lambda_v;
  std::optional<double> lambda_s;
  std::optional<double> alpha;
  std::optional<std::size_t> iters;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> embed_dim;
  std::optional<std::size_t> max_frames;
  std::optional<std::size_t> shots;

  std::string mode = "video";
  double clip_len = 4.0;
  std::size_t max_moment = 26;
  std::size_t queries = 1;
  bool class_mean = false;

  // synth
  std::size_t base_classes = 20;
  std::size_t novel_classes = 20;
  std::size_t dim = 64;

  // sweep
  std::string sweep = "shots";
  std::vector<std::size_t> values;
  std::vector<std::uint64_t> seeds;

  // plot
  std::string input;
  std::string x_column = "iter";
  std::vector<std::string> y_columns;
  std::string title;
};

void add_data_flags(CLI::App* app, Options& o, bool need_semantic = true) {
  app->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--features", o.features, "Directory holding the VSF1 feature files (default: next to the manifest)")
      ->check(CLI::ExistingDirectory);
  if (need_semantic) {
    app->add_option("--semantic-bank", o.semantic_bank, "VSB1 word-embedding bank")->check(CLI::ExistingFile);
  }
}

void add_train_flags(CLI::App* app, Options& o) {
  app->add_option("--seed", o.seed, "Seed for every random choice")->capture_default_str();
  app->add_option("--preset", o.preset, "Base configuration before overrides")
      ->check(CLI::IsMember({"default", "long", "synthetic"}))
      ->capture_default_str();
  app->add_option("--objective", o.objective, "Training objective")
      ->check(CLI::IsMember({"full", "baseline", "triplet", "margin"}))
      ->capture_default_str();
  app->add_option("--tau", o.tau, "Softmax temperature of the alignment probabilities")->check(CLI::PositiveNumber);
  app->add_option("--lambda-v", o.lambda_v, "Weight of the visual alignment term")->check(CLI::NonNegativeNumber);
  app->add_option("--lambda-s", o.lambda_s, "Weight of the semantic alignment term")->check(CLI::NonNegativeNumber);
  app->add_option("--alpha", o.alpha, "Visual bank update rate in (0, 1]")->check(CLI::Range(0.0, 1.0));
  app->add_option("--iters", o.iters, "Training iterations");
  app->add_option("--lr", o.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  app->add_option("--batch-size", o.batch_size, "Videos per batch")->check(CLI::PositiveNumber);
  app->add_option("--embed-dim", o.embed_dim, "Embedding width C")->check(CLI::PositiveNumber);
  app->add_option("--max-frames", o.max_frames, "Per-video frame cap during training (0 keeps all)");
  app->add_option("--shots", o.shots, "Training videos kept per novel class (default: all)")->check(CLI::PositiveNumber);
}

void add_retrieval_flags(CLI::App* app, Options& o) {
  app->add_option("--mode", o.mode, "Retrieval granularity")
      ->check(CLI::IsMember({"video", "clip", "moment"}))
      ->capture_default_str();
  app->add_option("--clip-len", o.clip_len, "Clip length in seconds")
      ->check(CLI::IsMember({"4", "6", "8"}))
      ->capture_default_str();
  app->add_option("--max-moment", o.max_moment, "Longest moment proposal, in clips")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--queries-per-retrieval", o.queries, "Same-class queries averaged per retrieval")
      ->check(CLI::Range(1, 5))
      ->capture_default_str();
}

TrainConfig train_config(const Options& o) {
  TrainConfig c;
  if (o.preset == "long") c = long_schedule_config();
  if (o.preset == "synthetic") c = synthetic_benchmark_config();
  c.objective = parse_objective(o.objective);
  c.seed = o.seed;
  if (o.tau) c.tau = *o.tau;
  if (o.lambda_v) c.lambda_v = *o.lambda_v;
  if (o.lambda_s) c.lambda_s = *o.lambda_s;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.iters) c.total_iters = *o.iters;
  if (o.lr) c.lr = *o.lr;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.embed_dim) c.embed_dim = *o.embed_dim;
  if (o.max_frames) c.max_frames = *o.max_frames;
  return c;
}

RetrievalConfig retrieval_config(const Options& o) {
  RetrievalConfig r;
  r.mode = parse_index_kind(o.mode);
  r.clip_len_s = o.clip_len;
  r.max_moment = o.max_moment;
  r.queries_per_retrieval = o.queries;
  r.seed = o.seed;
  r.class_mean = o.class_mean;
  return r;
}

Dataset load(const Options& o) {
  Dataset data = load_dataset(o.manifest, o.features, o.semantic_bank);
  return data;
}

Model<float> load_model(const std::string& path) { return model_from_checkpoint(load_checkpoint(path)); }

void write_text(const fs::path& path, const std::string& text, std::ostream& out) {
  write_file(path, text);
  out << path.string() << '\n';
}

int cmd_synth(const Options& o, std::ostream& out) {
  SyntheticSpec spec = synthetic_benchmark_spec(o.seed);
  spec.n_base = o.base_classes;
  spec.n_novel = o.novel_classes;
  spec.dim = o.dim;
  const SyntheticDataset data = generate_synthetic(spec);
  write_synthetic(data, o.out);
  out << fs::path(o.out).string() << '\n';
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const TrainConfig config = train_config(o);
  const Dataset data = load(o);
  ordered_json echo;
  echo["train"] = ordered_json::parse(config_to_json(config));
  echo["shots"] = o.shots ? ordered_json(*o.shots) : ordered_json(nullptr);
  echo["manifest"] = fs::path(o.manifest).filename().string();
  const std::string echo_text = echo.dump(2) + "\n";
  const fs::path dir = fs::path(o.out) / ("run-" + short_hash(echo_text) + "-s" + std::to_string(o.seed));

  const TrainingSet set = make_training_set(data, training_indices(data.manifest, o.shots, config.seed));
  TrainResult result = train(set, data.semantic, config);
  save_checkpoint(make_checkpoint(result.model, config, result.iterations), dir / "checkpoint.vsck");
  write_file(dir / "loss.csv", loss_curve_csv(result.curve));
  write_file(dir / "config.json", echo_text);
  out << dir.string() << '\n';
  return 0;
}

int cmd_index(const Options& o, std::ostream& out) {
  const Dataset data = load(o);
  const Model<float> model = load_model(o.checkpoint);
  const RetrievalConfig rc = retrieval_config(o);
  const Gallery gallery = build_gallery(data, model.head, rc);
  const fs::path path = fs::path(o.out) / ("gallery-" + o.mode + ".vsgi");
  save_gallery(gallery, path);
  out << path.string() << '\n';
  return 0;
}

int cmd_retrieve(const Options& o, std::ostream& out) {
  const Dataset data = load(o);
  const Model<float> model = load_model(o.checkpoint);
  const RetrievalConfig rc = retrieval_config(o);
  const Gallery gallery = o.gallery.empty() ? build_gallery(data, model.head, rc) : load_gallery(o.gallery);
  const Run run = run_retrieval(data, model.head, gallery, rc);
  std::vector<RankedList> lists;
  for (const auto& q : run.queries) lists.push_back(q.list);
  write_text(fs::path(o.out) / ("ranked-" + o.mode + ".csv"), ranked_lists_csv(lists), out);
  return 0;
}

std::string matrix_csv(const std::vector<int>& classes, const std::vector<std::vector<std::int64_t>>& m) {
  std::ostringstream s;
  s << "gt";
  for (int c : classes) s << ',' << c;
  s << '\n';
  for (std::size_t i = 0; i < classes.size(); ++i) {
    s << classes[i];
    for (auto v : m[i]) s << ',' << v;
    s << '\n';
  }
  return s.str();
}

int cmd_eval(const Options& o, std::ostream& out) {
  const Dataset data = load(o);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Model<float> model = model_from_checkpoint(ck);
  const RetrievalConfig rc = retrieval_config(o);
  const Gallery gallery = build_gallery(data, model.head, rc);
  const Run run = run_retrieval(data, model.head, gallery, rc);

  ordered_json echo;
  echo["train"] = ordered_json::parse(config_to_json(ck.config));
  echo["retrieval"] = ordered_json::parse(retrieval_config_json(rc));
  const MetricsReport report = make_report(run, echo.dump(), rc.class_mean);
  const fs::path dir(o.out);
  write_text(dir / "report.json", report.to_json(), out);
  write_text(dir / "per_query.csv", report.per_query_csv(), out);

  std::vector<RankedList> lists;
  for (const auto& q : run.queries) lists.push_back(q.list);
  write_text(dir / "ranked.csv", ranked_lists_csv(lists), out);

  std::ostringstream curve;
  curve << "k,map\n";
  const std::size_t max_k = run.queries.empty() ? 0 : run.queries.front().list.items.size();
  const auto values = map_curve(run, max_k);
  for (std::size_t k = 0; k < values.size(); ++k) curve << (k + 1) << ',' << percent2(values[k]) << '\n';
  write_text(dir / "map_curve.csv", curve.str(), out);

  std::ostringstream dur;
  dur << "lo,hi,queries,map\n";
  for (const auto& b : duration_analysis(run, {0.0, 10.0, 20.0, 30.0, 60.0, 120.0, 1e9})) {
    dur << b.lo << ',' << b.hi << ',' << b.queries << ',' << percent2(b.map) << '\n';
  }
  write_text(dir / "duration.csv", dur.str(), out);

  std::vector<int> classes(data.manifest.num_classes());
  for (std::size_t i = 0; i < classes.size(); ++i) classes[i] = static_cast<int>(i);
  write_text(dir / "confusion.csv", matrix_csv(classes, confusion_matrix(run, 100, classes)), out);

  ordered_json extra;
  if (data.manifest.has_taxonomy()) {
    extra["taxonomy_level1_map"] = percent2(taxonomy_map(run, data.manifest, 1));
    extra["taxonomy_level2_map"] = percent2(taxonomy_map(run, data.manifest, 2));
  }
  if (!o.baseline_checkpoint.empty()) {
    const Model<float> other = load_model(o.baseline_checkpoint);
    const Gallery g2 = build_gallery(data, other.head, rc);
    const Run run_b = run_retrieval(data, other.head, g2, rc);
    std::ostringstream gains;
    gains << "class_id,tier,queries,ap_a,ap_b,delta\n";
    for (const auto& g : per_class_gain(run, run_b)) {
      gains << g.class_id << ',' << to_string(g.tier) << ',' << g.queries << ',' << percent2(g.ap_a) << ','
            << percent2(g.ap_b) << ',' << percent2(g.delta) << '\n';
    }
    write_text(dir / "class_gain.csv", gains.str(), out);
  }
  if (!extra.empty()) write_text(dir / "analysis.json", extra.dump(2) + "\n", out);
  return 0;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << percent2(*v);
  return s.str();
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const Dataset base_data = load(o);
  std::vector<std::size_t> values = o.values;
  if (values.empty() && o.sweep == "splits") {
    const std::size_t k = base_data.manifest.num_classes();
    values = {k / 2, k * 3 / 5, k * 2 / 5};
  }
  if (values.empty()) values = {1, 2, 3, 4, 5};
  std::vector<std::uint64_t> seeds = o.seeds;
  if (seeds.empty()) seeds = {o.seed};

  std::ostringstream rows;
  rows << "sweep,value,seed,map_base,map_novel,map_overall,harmonic\n";
  std::ostringstream means;
  means << "sweep,value,harmonic_mean\n";
  const fs::path dir(o.out);
  for (std::size_t value : values) {
    double h_sum = 0.0;
    for (std::uint64_t seed : seeds) {
      Options run = o;
      run.seed = seed;
      TrainConfig tc = train_config(run);
      RetrievalConfig rc = retrieval_config(run);
      std::optional<std::size_t> shots = o.shots;
      Dataset data = base_data;
      if (o.sweep == "shots") {
        shots = value;
      } else if (o.sweep == "queries") {
        rc.queries_per_retrieval = value;
      } else {
        data.manifest = with_class_split(base_data.manifest, split_classes(base_data.manifest.num_classes(), value, seed));
        if (!shots) shots = 5;
      }
      const ExperimentResult r = run_experiment(data, tc, rc, shots);
      const fs::path report = dir / (o.sweep + "-" + std::to_string(value) + "-s" + std::to_string(seed) + ".json");
      write_file(report, r.report.to_json());
      const MapSummary& s = r.report.summary;
      rows << o.sweep << ',' << value << ',' << seed << ',' << fmt(s.map_base) << ',' << fmt(s.map_novel) << ','
           << fmt(s.map_overall) << ',' << fmt(s.harmonic) << '\n';
      h_sum += s.harmonic.value_or(0.0);
    }
    means << o.sweep << ',' << value << ',' << fmt(h_sum / static_cast<double>(seeds.size())) << '\n';
  }
  write_text(dir / (o.sweep + ".csv"), rows.str(), out);
  write_text(dir / (o.sweep + "_mean.csv"), means.str(), out);
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int cmd_plot(const Options& o, std::ostream& out) {
  const std::string csv = read_file(o.input);
  std::vector<std::string> ys = o.y_columns;
  if (ys.empty()) {
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    for (const auto& col : split_csv_line(header)) {
      if (col != o.x_column) ys.push_back(col);
    }
  }
  const std::string title = o.title.empty() ? fs::path(o.input).stem().string() : o.title;
  write_text(o.out, render_svg(csv, o.x_column, ys, title), out);
  return 0;
}

}  // namespace

std::string render_svg(const std::string& csv, const std::string& x_column, const std::vector<std::string>& y_columns,
                       const std::string& title) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("plot input is empty");
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("plot input has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t xi = column(x_column);
  std::vector<std::size_t> yi;
  for (const auto& y : y_columns) yi.push_back(column(y));

  std::vector<double> xs;
  std::vector<std::vector<double>> series(yi.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    try {
      const double x = std::stod(cells.at(xi));
      std::vector<double> row;
      for (std::size_t c : yi) row.push_back(std::stod(cells.at(c)));
      xs.push_back(x);
      for (std::size_t s = 0; s < row.size(); ++s) series[s].push_back(row[s]);
    } catch (const std::exception&) {
      throw ValidationError("plot input row is not numeric: " + line);
    }
  }
  if (xs.empty()) throw ValidationError("plot input has no data rows");

  double x0 = *std::min_element(xs.begin(), xs.end());
  double x1 = *std::max_element(xs.begin(), xs.end());
  double y0 = INFINITY;
  double y1 = -INFINITY;
  for (const auto& s : series) {
    for (double v : s) {
      if (!std::isfinite(v)) continue;
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double w = 640;
  const double h = 400;
  const double left = 60;
  const double right = 20;
  const double top = 40;
  const double bottom = 40;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double y) { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\">" << title << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"" << h - 10 << "\" font-family=\"sans-serif\" font-size=\"11\">" << x0 << "</text>\n";
  svg << "<text x=\"" << w - right << "\" y=\"" << h - 10 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << x1 << "</text>\n";
  svg << "<text x=\"" << left - 4 << "\" y=\"" << h - bottom << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << y0 << "</text>\n";
  svg << "<text x=\"" << left - 4 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << y1 << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!std::isfinite(series[s][i])) continue;
      svg << px(xs[i]) << ',' << py(series[s][i]) << ' ';
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << w - right - 4 << "\" y=\"" << top + 14 * (s + 1) << "\" text-anchor=\"end\" fill=\"" << color
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << y_columns[s] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

// Fills options the command line left unset from a TOML/INI file. Keys are
// flag names without the leading dashes, at top level or under a section
// named after the subcommand.
void apply_config_file(CLI::App& sub, const std::string& path) {
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && item.parents != std::vector<std::string>{sub.get_name()}) {
      throw CLI::ConfigError::Extras(item.fullname());
    }
    CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr || opt == sub.get_config_ptr()) throw CLI::ConfigError::Extras(item.fullname());
    if (opt->count() > 0) continue;
    for (const auto& value : item.inputs) opt->add_result(value);
    opt->run_callback();
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visual-semantic embedding retrieval for imbalanced activity data", "vsret"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Write a synthetic imbalanced dataset");
  synth->set_config("--config");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  synth->add_option("--base-classes", o.base_classes, "Base classes")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--novel-classes", o.novel_classes, "Novel classes")->capture_default_str();
  synth->add_option("--dim", o.dim, "Feature width D")->check(CLI::Range(2, 1 << 16))->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train embedding heads and write a checkpoint and loss curve");
  train_cmd->set_config("--config");
  add_data_flags(train_cmd, o);
  add_train_flags(train_cmd, o);
  train_cmd->add_option("--out", o.out, "Parent directory of the run directory")->required();

  auto* index_cmd = app.add_subcommand("index", "Embed the test split into a gallery file");
  index_cmd->set_config("--config");
  add_data_flags(index_cmd, o, false);
  index_cmd->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  index_cmd->add_option("--out", o.out, "Output directory")->required();
  add_retrieval_flags(index_cmd, o);

  auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank the gallery for every test query");
  retrieve_cmd->set_config("--config");
  add_data_flags(retrieve_cmd, o, false);
  retrieve_cmd->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--gallery", o.gallery, "Gallery file from `index` (default: rebuild)")
      ->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--seed", o.seed, "Seed for multi-query grouping")->capture_default_str();
  retrieve_cmd->add_option("--out", o.out, "Output directory")->required();
  add_retrieval_flags(retrieve_cmd, o);

  auto* eval_cmd = app.add_subcommand("eval", "Retrieve and write the metrics report and analyses");
  eval_cmd->set_config("--config");
  add_data_flags(eval_cmd, o, false);
  eval_cmd->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--baseline-checkpoint", o.baseline_checkpoint, "Second checkpoint for per-class gains")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--seed", o.seed, "Seed for multi-query grouping")->capture_default_str();
  eval_cmd->add_flag("--class-mean", o.class_mean, "Average per class instead of per query");
  eval_cmd->add_option("--out", o.out, "Output directory")->required();
  add_retrieval_flags(eval_cmd, o);

  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over shots, query counts or class splits");
  sweep_cmd->set_config("--config");
  add_data_flags(sweep_cmd, o);
  add_train_flags(sweep_cmd, o);
  add_retrieval_flags(sweep_cmd, o);
  sweep_cmd->add_option("--sweep", o.sweep, "Swept quantity (splits: number of base classes)")
      ->check(CLI::IsMember({"shots", "queries", "splits"}))
      ->capture_default_str();
  sweep_cmd->add_option("--values", o.values, "Swept values (default 1..5; splits: K/2, 3K/5, 2K/5 base classes)")->delimiter(',');
  sweep_cmd->add_option("--seeds", o.seeds, "Seeds averaged per value (default: --seed)")->delimiter(',');
  sweep_cmd->add_option("--out", o.out, "Output directory")->required();

  auto* plot_cmd = app.add_subcommand("plot", "Render CSV columns as an SVG line chart");
  plot_cmd->set_config("--config");
  plot_cmd->add_option("--input", o.input, "CSV file")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", o.out, "SVG file to write")->required();
  plot_cmd->add_option("--x", o.x_column, "Column for the x axis")->capture_default_str();
  plot_cmd->add_option("--y", o.y_columns, "Columns to draw (default: all others)")->delimiter(',');
  plot_cmd->add_option("--title", o.title, "Chart title");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    for (CLI::App* sub : app.get_subcommands()) {
      const CLI::Option* config = sub->get_config_ptr();
      if (config != nullptr && config->count() > 0) apply_config_file(*sub, config->as<std::string>());
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "vsret: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*synth) return cmd_synth(o, out);
    if (*train_cmd) return cmd_train(o, out);
    if (*index_cmd) return cmd_index(o, out);
    if (*retrieve_cmd) return cmd_retrieve(o, out);
    if (*eval_cmd) return cmd_eval(o, out);
    if (*sweep_cmd) return cmd_sweep(o, out);
    if (*plot_cmd) return cmd_plot(o, out);
  } catch (const IoError& e) {
    err << "vsret: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "vsret: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "vsret: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace vsret::cli
