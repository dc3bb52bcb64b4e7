#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "support.hpp"
#include "vsret/fileio.hpp"

namespace vsret {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result vsret(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string last_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return last;
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new test::TempDir("cli");
    ASSERT_EQ(vsret({"synth", "--out", data().string(), "--seed", "1", "--base-classes", "4", "--novel-classes", "3",
                     "--dim", "16"})
                  .code,
              0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path root() { return dir_->path(); }
  static fs::path data() { return dir_->path() / "data"; }
  static std::vector<std::string> train_args(const fs::path& out) {
    return {"train", "--manifest", (data() / "manifest.json").string(), "--semantic-bank",
            (data() / "semantic_bank.vsb").string(), "--out", out.string(), "--iters", "15", "--embed-dim", "8",
            "--max-frames", "6", "--seed", "4", "--shots", "3"};
  }
  static test::TempDir* dir_;
};

test::TempDir* CliPipeline::dir_ = nullptr;

TEST_F(CliPipeline, FullPipeline) {
  const Result t = vsret(train_args(root() / "runs"));
  ASSERT_EQ(t.code, 0) << t.err;
  const fs::path run = last_line(t.out);
  EXPECT_EQ(run.parent_path(), root() / "runs");
  EXPECT_EQ(run.filename().string().rfind("run-", 0), 0U);
  EXPECT_EQ(run.filename().string().substr(run.filename().string().size() - 3), "-s4");
  EXPECT_TRUE(fs::exists(run / "checkpoint.vsck"));
  EXPECT_TRUE(fs::exists(run / "loss.csv"));
  const std::string ckpt = (run / "checkpoint.vsck").string();
  const std::string manifest = (data() / "manifest.json").string();

  const Result idx = vsret({"index", "--manifest", manifest, "--checkpoint", ckpt, "--out", (root() / "idx").string(),
                            "--mode", "moment", "--max-moment", "3"});
  ASSERT_EQ(idx.code, 0) << idx.err;
  const Result ret = vsret({"retrieve", "--manifest", manifest, "--checkpoint", ckpt, "--gallery", last_line(idx.out),
                            "--mode", "moment", "--max-moment", "3", "--out", (root() / "ret").string()});
  ASSERT_EQ(ret.code, 0) << ret.err;
  EXPECT_EQ(read_file(last_line(ret.out)).rfind("query_id,rank,gallery_id,distance,relevant\n", 0), 0U);

  const Result ev = vsret({"eval", "--manifest", manifest, "--checkpoint", ckpt, "--baseline-checkpoint", ckpt, "--out",
                           (root() / "eval").string(), "--queries-per-retrieval", "2"});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto report = nlohmann::json::parse(read_file(root() / "eval" / "report.json"));
  EXPECT_TRUE(report["map_base"].is_number());
  EXPECT_TRUE(report["map_novel"].is_number());
  EXPECT_TRUE(report["map_overall"].is_number());
  for (const char* f : {"per_query.csv", "ranked.csv", "map_curve.csv", "duration.csv", "confusion.csv",
                        "class_gain.csv", "analysis.json"}) {
    EXPECT_TRUE(fs::exists(root() / "eval" / f)) << f;
  }

  const Result plot = vsret({"plot", "--input", (run / "loss.csv").string(), "--out", (root() / "loss.svg").string()});
  ASSERT_EQ(plot.code, 0) << plot.err;
  EXPECT_EQ(read_file(root() / "loss.svg").rfind("<svg", 0), 0U);
}

TEST_F(CliPipeline, TrainIsIdempotent) {
  const Result a = vsret(train_args(root() / "a"));
  const Result b = vsret(train_args(root() / "b"));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const fs::path ra = last_line(a.out);
  const fs::path rb = last_line(b.out);
  EXPECT_EQ(ra.filename(), rb.filename());
  for (const char* f : {"checkpoint.vsck", "loss.csv", "config.json"}) EXPECT_EQ(read_file(ra / f), read_file(rb / f)) << f;
}

TEST_F(CliPipeline, ConfigFileWithFlagOverride) {
  const fs::path cfg = root() / "train.toml";
  std::ofstream(cfg) << "iters = 3\nseed = 9\nembed-dim = 8\nmax-frames = 4\n";
  const std::string manifest = (data() / "manifest.json").string();
  const std::string bank = (data() / "semantic_bank.vsb").string();
  const Result from_file =
      vsret({"train", "--config", cfg.string(), "--manifest", manifest, "--semantic-bank", bank, "--out", (root() / "cfg").string()});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_NE(last_line(from_file.out).find("-s9"), std::string::npos);
  const auto echo = nlohmann::json::parse(read_file(fs::path(last_line(from_file.out)) / "config.json"));
  EXPECT_EQ(echo["train"]["total_iters"], 3);

  const Result flag = vsret({"train", "--config", cfg.string(), "--seed", "2", "--manifest", manifest, "--semantic-bank",
                             bank, "--out", (root() / "cfg").string()});
  ASSERT_EQ(flag.code, 0) << flag.err;
  EXPECT_NE(last_line(flag.out).find("-s2"), std::string::npos);
}

TEST_F(CliPipeline, SweepWritesOneReportPerValue) {
  const std::string manifest = (data() / "manifest.json").string();
  const Result s = vsret({"sweep", "--manifest", manifest, "--semantic-bank", (data() / "semantic_bank.vsb").string(),
                          "--sweep", "queries", "--values", "1,3", "--iters", "5", "--embed-dim", "8", "--max-frames",
                          "4", "--out", (root() / "sweep").string()});
  ASSERT_EQ(s.code, 0) << s.err;
  const std::string csv = read_file(root() / "sweep" / "queries.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_TRUE(fs::exists(root() / "sweep" / "queries-1-s0.json"));
  EXPECT_TRUE(fs::exists(root() / "sweep" / "queries-3-s0.json"));
}

TEST_F(CliPipeline, ErrorsMapToExitCodes) {
  const std::string manifest = (data() / "manifest.json").string();
  const Result missing = vsret({"retrieve", "--manifest", manifest, "--checkpoint", (root() / "none.vsck").string(),
                                "--out", (root() / "x").string()});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(std::count(missing.err.begin(), missing.err.end(), '\n'), 1);

  const Result bogus = vsret({"eval", "--manifest", manifest, "--bogus"});
  EXPECT_EQ(bogus.code, 1);

  const Result bad_mode = vsret({"index", "--manifest", manifest, "--checkpoint", manifest, "--out", "x", "--mode", "frame"});
  EXPECT_EQ(bad_mode.code, 1);

  const Result bad_ckpt = vsret({"eval", "--manifest", manifest, "--checkpoint", manifest, "--out", (root() / "x").string()});
  EXPECT_EQ(bad_ckpt.code, 1);
  EXPECT_NE(bad_ckpt.err.find("VSCK"), std::string::npos);

  const fs::path blocker = root() / "blocker";
  std::ofstream(blocker) << "file";
  const Result io = vsret({"synth", "--out", (blocker / "sub").string(), "--base-classes", "2", "--novel-classes", "1"});
  EXPECT_EQ(io.code, 2) << io.err;
}

TEST(Cli, HelpDocumentsEveryFlag) {
  const Result top = vsret({"--help"});
  EXPECT_EQ(top.code, 0);
  for (const char* sub : {"synth", "train", "index", "retrieve", "eval", "sweep", "plot"}) {
    EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
  }
  const Result train = vsret({"train", "--help"});
  EXPECT_EQ(train.code, 0);
  for (const char* flag : {"--manifest", "--features", "--semantic-bank", "--out", "--seed", "--objective", "--tau",
                           "--lambda-v", "--lambda-s", "--alpha", "--shots", "--config"}) {
    EXPECT_NE(train.out.find(flag), std::string::npos) << flag;
  }
  const Result ev = vsret({"eval", "--help"});
  for (const char* flag : {"--mode", "--clip-len", "--max-moment", "--queries-per-retrieval"}) {
    EXPECT_NE(ev.out.find(flag), std::string::npos) << flag;
  }
  EXPECT_EQ(vsret({}).code, 1);
}

TEST(Cli, ShortHashAndSvg) {
  EXPECT_EQ(cli::short_hash(""), "cbf29ce4");
  EXPECT_EQ(cli::short_hash("abc").size(), 8U);
  const std::string svg = cli::render_svg("x,y\n0,1\n1,3\n", "x", {"y"}, "t");
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_THROW(cli::render_svg("x,y\n", "x", {"y"}, "t"), ValidationError);
  EXPECT_THROW(cli::render_svg("x,y\n0,1\n", "x", {"z"}, "t"), ValidationError);
}

}  // namespace
}  // namespace vsret
