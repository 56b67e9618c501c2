#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gps/corpus.hpp"
#include "gps/embed.hpp"
#include "gps/linear_map.hpp"
#include "gps/metrics.hpp"
#include "gps/pool.hpp"
#include "gps/prune.hpp"
#include "gps/report.hpp"
#include "gps/select.hpp"

namespace gps {

enum class Strategy { Gps, SCos, STfidf, SNeg };
enum class GeneratorSource { Markov, External, None };
enum class EmbedSource { Fallback, Tables };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct PipelineConfig {
  std::filesystem::path dataset_path;
  DatasetFormat dataset_format = DatasetFormat::PairsJsonl;

  SplitRatios ratios;
  std::uint64_t split_seed = 1;
  bool grouped = false;

  GeneratorSource generator = GeneratorSource::Markov;
  MarkovConfig markov{1000, 2, 40, 2};
  std::filesystem::path external_candidates;

  bool skip_prune = false;  // the P-no ablation
  std::string scorer = "ngram-lm";  // or "external-scores"
  int lm_order = 2;
  double lm_smoothing = 0.1;
  std::filesystem::path scores_path;
  PrunePolicy policy = KeepFractionPolicy{0.6};

  EmbedSource embed = EmbedSource::Fallback;
  Eigen::Index dim = 256;
  std::uint64_t embed_seed = 3;
  std::filesystem::path hate_table;
  std::filesystem::path candidate_table;
  bool save_tables = false;

  Strategy strategy = Strategy::Gps;
  bool exclude_gold = false;
  int neg_ratio = 4;

  TrainConfig train{0.5, 200, 10, 4, 1e-4};

  std::optional<std::size_t> selfbleu_sample;
  std::uint64_t selfbleu_seed = 5;
  double bm25_k1 = kBm25K1;
  double bm25_b = kBm25B;
  std::map<std::string, std::filesystem::path> external_metrics;

  std::filesystem::path output_dir = "gps-out";
};

/// Config files are JSON objects whose keys mirror the defaults printed by
/// default_config_json(); unknown keys are rejected. Each override is
/// "dotted.key=value", where value is parsed as JSON when possible and
/// taken as a string otherwise.
PipelineConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
std::string config_to_json(const PipelineConfig& cfg);
std::string default_config_json();
// SHA-256 of the resolved config, output directory excluded.
std::string config_hash(const PipelineConfig& cfg);

// One line per test instance: instance id, candidate id, score, text.
struct SelectedOutput {
  std::string instance_id;
  std::string candidate_id;  // empty when nothing was selectable
  std::optional<double> score;
  std::string text;
};
struct PoolSizes {
  std::size_t base = 0;
  std::size_t generated = 0;
  std::size_t combined = 0;   // base + generated after exact-text dedupe
  std::size_t selection = 0;  // entering selection (after pruning unless skipped)
};

struct RunResult {
  MetricReport report;
  RunManifest manifest;
  PoolSizes sizes;
  std::filesystem::path selected_outputs;
  std::size_t empty_tfidf_queries = 0;
};

/// load -> split -> pool -> generate -> prune (unless skipped) -> embed ->
/// train -> select -> eval. Every artifact is written under
/// cfg.output_dir: config.json, split.json, pool.jsonl, selection_pool.jsonl,
/// map.json or classifier.json, selected.tsv, report.{csv,md,json} and
/// manifest.json. Reruns of one config are byte-identical. A failing stage
/// raises StageError and leaves a STALE marker naming it.
RunResult run_pipeline(const PipelineConfig& cfg);

struct SweepRow {
  std::size_t count = 0;
  PoolSizes sizes;
  MetricReport report;
};

/// Reruns generation, pruning, selection and evaluation once per candidate
/// count, reusing the split, embedder and trained map. `counts` must be
/// non-decreasing. Writes sweep.csv under cfg.output_dir.
std::vector<SweepRow> pool_size_sweep(const PipelineConfig& cfg, const std::vector<std::size_t>& counts);

std::string render_sweep_csv(const std::vector<SweepRow>& rows);

std::string render_selected(const std::vector<SelectedOutput>& rows);
std::vector<SelectedOutput> parse_selected(std::string_view content);

// Embedding columns for (hate, counterspeech) pairs. e_x comes from
// `hate_table`; e_y from `candidate_table` via the pool candidate with the
// same text, else the table row keyed by the counterspeech id, else from
// `embedder` when one is given. Pairs without two rankable embeddings are
// skipped.
void pair_matrices(const std::vector<ConversationPair>& pairs, const CandidatePool& pool,
                   const EmbeddingTable& hate_table, const EmbeddingTable& candidate_table,
                   const FallbackEmbedder* embedder, Eigen::MatrixXd& X, Eigen::MatrixXd& Y);

struct SelectionModel {
  Strategy strategy = Strategy::Gps;
  LinearMapd map;                              // gps; identity for s-cos
  std::optional<NegSamplingClassifier> classifier;  // s-neg
};

struct SelectionStats {
  std::size_t empty_tfidf_queries = 0;
  std::size_t unrankable_queries = 0;
};

/// Picks one output per instance with the model's strategy. With
/// `exclude_gold`, candidates whose text equals one of the instance's
/// references are passed over. Instances with nothing selectable get an
/// empty row.
std::vector<SelectedOutput> select_outputs(const std::vector<EvalInstance>& instances, const CandidatePool& pool,
                                           const EmbeddingTable& hate_table, const EmbeddingTable& candidate_table,
                                           const SelectionModel& model, bool exclude_gold,
                                           SelectionStats* stats = nullptr);

// Embeds every id/text pair with the fallback embedder.
EmbeddingTable embed_all(const FallbackEmbedder& embedder,
                         const std::vector<std::pair<std::string, std::string>>& id_texts);

}  // namespace gps
