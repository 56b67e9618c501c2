#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gps/error.hpp"
#include "gps/pipeline.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

gps::PipelineConfig small_config(const fs::path& dir, const std::string& out) {
  gps::PipelineConfig cfg;
  cfg.dataset_path = gps::testing::write_synthetic(dir, 60, 2, 21);
  cfg.markov.count = 200;
  cfg.dim = 64;
  cfg.output_dir = dir / out;
  return cfg;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  EXPECT_THROW(gps::parse_config(gps::default_config_json()), gps::ArgumentError);  // no dataset path
  const auto cfg = gps::parse_config(gps::default_config_json(), {"dataset.path=d.jsonl"});
  EXPECT_EQ(cfg.dataset_path, "d.jsonl");
  EXPECT_EQ(cfg.strategy, gps::Strategy::Gps);
  EXPECT_EQ(cfg.markov.order, 2);
  EXPECT_EQ(cfg.markov.max_len, 40u);
  EXPECT_EQ(cfg.dim, 256);
  EXPECT_FALSE(cfg.grouped);
  EXPECT_FALSE(cfg.exclude_gold);
}

TEST(Config, PartialFileAndOverrides) {
  const auto cfg = gps::parse_config(R"({"select": {"strategy": "s-tfidf"}, "split": {"seed": 9}})",
                                     {"train.learning_rate=0.25", "prune.skip=true", "dataset.path=x.jsonl"});
  EXPECT_EQ(cfg.strategy, gps::Strategy::STfidf);
  EXPECT_EQ(cfg.split_seed, 9u);
  EXPECT_EQ(cfg.train.learning_rate, 0.25);
  EXPECT_TRUE(cfg.skip_prune);
  EXPECT_EQ(cfg.dataset_path, "x.jsonl");
  EXPECT_EQ(cfg.train.max_epochs, 200);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(gps::parse_config(R"({"selct": {}})"), gps::ArgumentError);
  EXPECT_THROW(gps::parse_config("{}", {"dataset.path=d", "select.strategy=best"}), gps::ArgumentError);
  EXPECT_THROW(gps::parse_config("{}", {"dataset.path=d", "split.ratios=[0.5,0.5,0.5]"}), gps::ArgumentError);
  EXPECT_THROW(gps::parse_config("{}", {"noequals"}), gps::ArgumentError);
  EXPECT_THROW(gps::parse_config("{not json"), gps::Error);
}

TEST(Config, HashIgnoresOutputDirOnly) {
  auto a = gps::parse_config("{}", {"dataset.path=d.jsonl"});
  auto b = a;
  b.output_dir = "elsewhere";
  EXPECT_EQ(gps::config_hash(a), gps::config_hash(b));
  b.split_seed = 2;
  EXPECT_NE(gps::config_hash(a), gps::config_hash(b));
  EXPECT_EQ(gps::config_hash(a).size(), 64u);
}

TEST(Selected, RoundTripWithEscapes) {
  std::vector<gps::SelectedOutput> rows{{"h1", "T0000001", 0.5, "tab\there\nnewline \\ slash"},
                                        {"h2", "", std::nullopt, ""}};
  const auto back = gps::parse_selected(gps::render_selected(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].text, rows[0].text);
  EXPECT_EQ(back[0].score, 0.5);
  EXPECT_EQ(back[1].candidate_id, "");
  EXPECT_FALSE(back[1].score.has_value());
  EXPECT_THROW(gps::parse_selected("a\tb\n"), gps::ParseError);
}

TEST(Pipeline, RunWritesArtifactsAndManifest) {
  const auto dir = gps::testing::scratch_dir("pipeline-run");
  const auto cfg = small_config(dir, "out");
  const auto r = gps::run_pipeline(cfg);
  for (const char* f : {"config.json", "split.json", "pool.jsonl", "selection_pool.jsonl", "map.json", "selected.tsv",
                        "report.csv", "report.md", "report.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(cfg.output_dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(cfg.output_dir / "STALE"));
  EXPECT_EQ(r.report.strategy, "gps");
  EXPECT_EQ(r.report.config_hash, gps::config_hash(cfg));
  EXPECT_EQ(r.manifest.config_hash, gps::config_hash(cfg));
  EXPECT_EQ(r.report.pool_fingerprint, r.manifest.pool_fingerprint);
  EXPECT_EQ(r.sizes.generated, 200u);
  EXPECT_LE(r.sizes.combined, r.sizes.base + r.sizes.generated);
  EXPECT_LT(r.sizes.selection, r.sizes.combined);
  EXPECT_EQ(gps::manifest_from_json(slurp(cfg.output_dir / "manifest.json")), r.manifest);
  EXPECT_EQ(r.manifest.artifacts.count("selected.tsv"), 1u);
  EXPECT_EQ(gps::parse_selected(slurp(cfg.output_dir / "selected.tsv")).size(), r.report.instances);
}

TEST(Pipeline, RerunIsByteIdentical) {
  const auto dir = gps::testing::scratch_dir("pipeline-determinism");
  auto cfg = small_config(dir, "a");
  gps::run_pipeline(cfg);
  cfg.output_dir = dir / "b";
  gps::run_pipeline(cfg);
  for (const char* f : {"report.csv", "report.md", "report.json", "manifest.json", "selected.tsv", "map.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Pipeline, EveryStrategyRuns) {
  const auto dir = gps::testing::scratch_dir("pipeline-strategies");
  for (auto s : {gps::Strategy::SCos, gps::Strategy::STfidf, gps::Strategy::SNeg}) {
    auto cfg = small_config(dir, std::string(gps::to_string(s)));
    cfg.strategy = s;
    const auto r = gps::run_pipeline(cfg);
    EXPECT_EQ(r.report.strategy, gps::to_string(s));
    EXPECT_GE(r.report.instances, 2u);
  }
  EXPECT_TRUE(fs::exists(dir / "s-neg" / "classifier.json"));
  EXPECT_FALSE(fs::exists(dir / "s-cos" / "map.json"));
}

TEST(Pipeline, SkipPruneLabelsRowAndKeepsCombinedPool) {
  const auto dir = gps::testing::scratch_dir("pipeline-pno");
  auto cfg = small_config(dir, "out");
  cfg.skip_prune = true;
  const auto r = gps::run_pipeline(cfg);
  EXPECT_EQ(r.report.strategy, "gps+p-no");
  EXPECT_EQ(r.sizes.selection, r.sizes.combined);
}

TEST(Pipeline, ZeroEpochGpsMatchesCosineBaseline) {
  const auto dir = gps::testing::scratch_dir("pipeline-identity");
  auto cfg = small_config(dir, "gps");
  cfg.train.max_epochs = 0;
  gps::run_pipeline(cfg);
  cfg.strategy = gps::Strategy::SCos;
  cfg.output_dir = dir / "cos";
  gps::run_pipeline(cfg);
  EXPECT_EQ(slurp(dir / "gps" / "selected.tsv"), slurp(dir / "cos" / "selected.tsv"));
}

TEST(Pipeline, ExcludeGoldNeverPicksAReference) {
  const auto dir = gps::testing::scratch_dir("pipeline-exclude");
  auto cfg = small_config(dir, "out");
  cfg.exclude_gold = true;
  cfg.grouped = false;
  const auto r = gps::run_pipeline(cfg);
  // Gold = the references of the test pairs themselves.
  const auto pairs = gps::disaggregate(gps::load_dataset(cfg.dataset_path, cfg.dataset_format));
  const auto split = gps::load_split_manifest(cfg.output_dir / "split.json", pairs);
  std::map<std::string, std::set<std::string>> gold;
  for (const auto& p : split.test) gold[p.hate.id].insert(p.counter.text);
  for (const auto& row : gps::parse_selected(slurp(r.selected_outputs))) {
    EXPECT_EQ(gold.at(row.instance_id).count(row.text), 0u) << row.instance_id;
  }
}

TEST(Pipeline, FailureLeavesStaleMarker) {
  const auto dir = gps::testing::scratch_dir("pipeline-stale");
  auto cfg = small_config(dir, "out");
  cfg.dataset_path = dir / "missing.jsonl";
  try {
    gps::run_pipeline(cfg);
    FAIL();
  } catch (const gps::StageError& e) {
    EXPECT_EQ(e.stage(), "load");
  }
  EXPECT_TRUE(fs::exists(cfg.output_dir / "STALE"));
  EXPECT_FALSE(fs::exists(cfg.output_dir / "manifest.json"));
  EXPECT_NE(slurp(cfg.output_dir / "STALE").find("load"), std::string::npos);
}

TEST(Pipeline, TablesModeReadsExternalEmbeddings) {
  const auto dir = gps::testing::scratch_dir("pipeline-tables");
  auto cfg = small_config(dir, "first");
  cfg.save_tables = true;
  const auto first = gps::run_pipeline(cfg);
  auto second = cfg;
  second.embed = gps::EmbedSource::Tables;
  second.hate_table = cfg.output_dir / "hate_embeddings.tsv";
  second.candidate_table = cfg.output_dir / "candidate_embeddings.tsv";
  second.output_dir = dir / "second";
  const auto r = gps::run_pipeline(second);
  EXPECT_EQ(r.report.instances, first.report.instances);
  // Same vectors up to 9-digit rounding, so the same picks.
  const auto a = gps::parse_selected(slurp(first.selected_outputs));
  const auto b = gps::parse_selected(slurp(r.selected_outputs));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].candidate_id, b[i].candidate_id) << a[i].instance_id;
}

TEST(Sweep, OneRowPerCountWithBoundedPools) {
  const auto dir = gps::testing::scratch_dir("pipeline-sweep");
  const auto cfg = small_config(dir, "sweep");
  const auto rows = gps::pool_size_sweep(cfg, {50, 200, 400});
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& row : rows) {
    EXPECT_EQ(row.sizes.generated, row.count);
    EXPECT_LE(row.sizes.selection, row.count + row.sizes.base);
  }
  EXPECT_TRUE(fs::exists(cfg.output_dir / "sweep.csv"));
  const auto csv = slurp(cfg.output_dir / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_THROW(gps::pool_size_sweep(cfg, {200, 50}), gps::ArgumentError);
}
