// gps: command-line front end for the generate / prune / select pipeline.
//
// Every verb runs standalone on persisted artifacts; `run` and `sweep`
// chain them from a JSON config.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gps/corpus.hpp"
#include "gps/embed.hpp"
#include "gps/error.hpp"
#include "gps/metrics.hpp"
#include "gps/pipeline.hpp"
#include "gps/pool.hpp"
#include "gps/prune.hpp"
#include "gps/report.hpp"
#include "gps/select.hpp"
#include "gps/text.hpp"

namespace fs = std::filesystem;

namespace {

struct DatasetArgs {
  std::string path;
  std::string format = "pairs-jsonl";
};

void add_dataset_opts(CLI::App* cmd, DatasetArgs& d) {
  cmd->add_option("--dataset", d.path, "Dataset file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--format", d.format, "pairs-jsonl | conan-json | reddit-gab-csv");
}

std::vector<gps::ConversationPair> load_pairs(const DatasetArgs& d) {
  return gps::disaggregate(gps::load_dataset(d.path, gps::parse_dataset_format(d.format)));
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw gps::IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw gps::IoError("cannot write " + p.string());
  out << s;
}

gps::CandidatePool training_only(const gps::CandidatePool& pool) {
  std::vector<gps::Candidate> out;
  for (const auto& c : pool.candidates()) {
    if (c.source == gps::CandidateSource::Training) out.push_back(c);
  }
  return gps::CandidatePool(std::move(out));
}

void print_report(const gps::MetricReport& r, const gps::RunManifest& manifest) {
  std::cout << gps::render_report({r}, manifest, gps::ReportFormat::Markdown);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate, prune and select counterspeech responses"};
  app.require_subcommand(1);

  // split
  DatasetArgs split_ds;
  std::vector<double> ratios{0.7, 0.15, 0.15};
  std::uint64_t split_seed = 1;
  bool grouped = false;
  std::string split_out = "split.json";
  auto* split_cmd = app.add_subcommand("split", "Dis-aggregate pairs and write a seeded split manifest");
  add_dataset_opts(split_cmd, split_ds);
  split_cmd->add_option("--ratios", ratios, "train validation test")->expected(3);
  split_cmd->add_option("--seed", split_seed);
  split_cmd->add_flag("--grouped", grouped, "Keep all pairs of one hate speech in one partition");
  split_cmd->add_option("-o,--out", split_out);

  // pool
  DatasetArgs pool_ds;
  std::string pool_split, pool_out = "pool.jsonl", external;
  gps::MarkovConfig markov;
  auto* pool_cmd = app.add_subcommand("pool", "Build the base pool from training data and enlarge it");
  add_dataset_opts(pool_cmd, pool_ds);
  pool_cmd->add_option("--split", pool_split, "Split manifest")->required()->check(CLI::ExistingFile);
  auto* mc = pool_cmd->add_option("--markov-count", markov.count, "Markov samples to add");
  pool_cmd->add_option("--order", markov.order, "Markov n-gram order");
  pool_cmd->add_option("--max-len", markov.max_len, "Max tokens per sample");
  pool_cmd->add_option("--seed", markov.seed, "Sampling seed");
  pool_cmd->add_option("--external", external, "Candidate file, one text per line")
      ->check(CLI::ExistingFile)
      ->excludes(mc);
  pool_cmd->add_option("-o,--out", pool_out);

  // prune
  std::string prune_in, prune_out = "pruned_pool.jsonl", scores_file, preset;
  int lm_order = 2;
  double smoothing = 0.1;
  double threshold = 0, fraction = 1.0;
  auto* prune_cmd = app.add_subcommand("prune", "Score candidate grammaticality and prune the pool");
  prune_cmd->add_option("--pool", prune_in)->required()->check(CLI::ExistingFile);
  prune_cmd->add_option("--scores", scores_file, "External id<TAB>score file")->check(CLI::ExistingFile);
  prune_cmd->add_option("--lm-order", lm_order);
  prune_cmd->add_option("--smoothing", smoothing);
  auto* th = prune_cmd->add_option("--threshold", threshold);
  auto* kf = prune_cmd->add_option("--keep-fraction", fraction);
  auto* ps = prune_cmd->add_option("--preset", preset, "conan | reddit | gab");
  th->excludes(kf)->excludes(ps);
  kf->excludes(ps);
  prune_cmd->add_option("-o,--out", prune_out);

  // embed
  DatasetArgs embed_ds;
  std::string embed_split, embed_pool, hate_out = "hate_embeddings.tsv", cand_out = "candidate_embeddings.tsv";
  long dim = 256;
  std::uint64_t embed_seed = 3;
  auto* embed_cmd = app.add_subcommand("embed", "Write fallback embedding tables for hate speech and candidates");
  add_dataset_opts(embed_cmd, embed_ds);
  embed_cmd->add_option("--split", embed_split)->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--pool", embed_pool)->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--dim", dim);
  embed_cmd->add_option("--seed", embed_seed);
  embed_cmd->add_option("--hate-out", hate_out);
  embed_cmd->add_option("--cand-out", cand_out);

  // train-map
  DatasetArgs train_ds;
  std::string train_split, train_pool, train_hate, train_cand, map_out = "map.json";
  gps::TrainConfig train_cfg{0.5, 200, 10, 4, 1e-4};
  auto* train_cmd = app.add_subcommand("train-map", "Learn the latent-space fusion map");
  add_dataset_opts(train_cmd, train_ds);
  train_cmd->add_option("--split", train_split)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--pool", train_pool)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--hate-table", train_hate)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--cand-table", train_cand)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--lr", train_cfg.learning_rate);
  train_cmd->add_option("--epochs", train_cfg.max_epochs);
  train_cmd->add_option("--patience", train_cfg.patience);
  train_cmd->add_option("--l2", train_cfg.l2_penalty);
  train_cmd->add_option("-o,--out", map_out);

  // select
  DatasetArgs sel_ds;
  std::string sel_split, sel_pool, sel_hate, sel_cand, sel_map, strategy = "gps", sel_out = "selected.tsv";
  int neg_ratio = 4;
  bool exclude_gold = false;
  gps::TrainConfig neg_cfg{0.5, 200, 10, 4, 1e-4};
  auto* sel_cmd = app.add_subcommand("select", "Select one response per test hate speech");
  add_dataset_opts(sel_cmd, sel_ds);
  sel_cmd->add_option("--split", sel_split)->required()->check(CLI::ExistingFile);
  sel_cmd->add_option("--pool", sel_pool)->required()->check(CLI::ExistingFile);
  sel_cmd->add_option("--strategy", strategy, "gps | s-cos | s-tfidf | s-neg");
  sel_cmd->add_option("--hate-table", sel_hate)->check(CLI::ExistingFile);
  sel_cmd->add_option("--cand-table", sel_cand)->check(CLI::ExistingFile);
  sel_cmd->add_option("--map", sel_map, "Trained map (gps)")->check(CLI::ExistingFile);
  sel_cmd->add_option("--neg-ratio", neg_ratio);
  sel_cmd->add_option("--seed", neg_cfg.seed, "Negative sampling seed (s-neg)");
  sel_cmd->add_flag("--exclude-gold", exclude_gold);
  sel_cmd->add_option("-o,--out", sel_out);

  // eval
  DatasetArgs eval_ds;
  std::string eval_split, eval_selected, eval_pool, eval_dir = "eval", eval_name = "gps";
  std::vector<std::string> eval_external;
  auto* eval_cmd = app.add_subcommand("eval", "Score selected outputs and write report.{csv,md,json}");
  add_dataset_opts(eval_cmd, eval_ds);
  eval_cmd->add_option("--split", eval_split)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--selected", eval_selected)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pool", eval_pool, "Pool the outputs were selected from")->check(CLI::ExistingFile);
  eval_cmd->add_option("--name", eval_name, "Row label");
  eval_cmd->add_option("--external", eval_external, "metric=path, metric in moverscore|bertscore|gruen");
  eval_cmd->add_option("--out-dir", eval_dir);

  // run / sweep
  std::string config_path, output_dir;
  std::vector<std::string> sets;
  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline from a JSON config");
  run_cmd->add_option("-c,--config", config_path)->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--set", sets, "Override, e.g. select.strategy=s-cos");
  run_cmd->add_option("--output-dir", output_dir);

  std::vector<std::size_t> counts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Pool-size sweep: rerun for several candidate counts");
  sweep_cmd->add_option("-c,--config", config_path)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--counts", counts, "Candidate counts, ascending")->required()->delimiter(',');
  sweep_cmd->add_option("--set", sets);
  sweep_cmd->add_option("--output-dir", output_dir);

  auto* config_cmd = app.add_subcommand("config", "Print the default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*split_cmd) {
      const auto pairs = load_pairs(split_ds);
      const auto s = gps::split(pairs, {ratios[0], ratios[1], ratios[2]}, split_seed, grouped);
      gps::save_split_manifest(s, split_out);
      std::cout << "pairs " << pairs.size() << ": train " << s.train.size() << ", validation " << s.validation.size()
                << ", test " << s.test.size() << "\n";
    } else if (*pool_cmd) {
      const auto pairs = load_pairs(pool_ds);
      const auto s = gps::load_split_manifest(pool_split, pairs);
      const auto base = gps::build_base_pool(s.train);
      std::vector<gps::Candidate> extra =
          external.empty() ? gps::generate_markov(base, markov) : gps::ingest_candidates(external);
      const auto pool = gps::merge(base, extra);
      gps::save_pool(pool, pool_out);
      std::cout << "base " << base.size() << " + generated " << extra.size() << " -> " << pool.size()
                << " candidates, fingerprint " << pool.fingerprint() << "\n";
    } else if (*prune_cmd) {
      const auto pool = gps::load_pool(prune_in);
      gps::GrammaticalityScorer scorer = [&]() -> gps::GrammaticalityScorer {
        if (!scores_file.empty()) return gps::ingest_scores(scores_file);
        std::vector<std::string> corpus;
        for (const auto& c : training_only(pool).candidates()) corpus.push_back(c.text);
        return gps::train_lm_scorer(corpus, lm_order, smoothing);
      }();
      gps::PrunePolicy policy = gps::KeepFractionPolicy{fraction};
      if (*th) policy = gps::ThresholdPolicy{threshold};
      if (*ps) policy = gps::keep_fraction_preset(preset);
      const auto pruned = gps::prune(pool, scorer, policy);
      gps::save_pool(pruned, prune_out);
      std::cout << pool.size() << " -> " << pruned.size() << " candidates\n";
    } else if (*embed_cmd) {
      const auto pairs = load_pairs(embed_ds);
      const auto s = gps::load_split_manifest(embed_split, pairs);
      const auto pool = gps::load_pool(embed_pool);
      // Fitted on the same texts as in `run`: training hate speech and the base pool.
      std::vector<std::string> corpus;
      for (const auto& inst : gps::group_instances(s.train)) corpus.push_back(inst.hate);
      for (const auto& c : gps::build_base_pool(s.train).candidates()) corpus.push_back(c.text);
      const auto embedder = gps::fit_fallback_embedder(corpus, dim, embed_seed);
      std::vector<std::pair<std::string, std::string>> hates, cands;
      for (const auto& p : pairs) hates.emplace_back(p.hate.id, p.hate.text);
      for (const auto& c : pool.candidates()) cands.emplace_back(c.id, c.text);
      for (const auto& p : pairs) cands.emplace_back(p.counter.id, p.counter.text);
      gps::save_table(gps::embed_all(embedder, hates), hate_out);
      gps::save_table(gps::embed_all(embedder, cands), cand_out);
    } else if (*train_cmd) {
      const auto pairs = load_pairs(train_ds);
      const auto s = gps::load_split_manifest(train_split, pairs);
      const auto pool = gps::load_pool(train_pool);
      const auto hate = gps::load_table(train_hate);
      const auto cand = gps::load_table(train_cand);
      Eigen::MatrixXd x, y, vx, vy;
      gps::pair_matrices(s.train, pool, hate, cand, nullptr, x, y);
      gps::pair_matrices(s.validation, pool, hate, cand, nullptr, vx, vy);
      const auto result = gps::train_map<double>(x, y, vx, vy, train_cfg);
      gps::save_map(result.map, map_out);
      std::cout << "epochs " << result.epochs_run << ", best " << result.best_epoch << ", validation objective "
                << result.validation_objective[static_cast<std::size_t>(result.best_epoch)] << "\n";
    } else if (*sel_cmd) {
      const auto pairs = load_pairs(sel_ds);
      const auto s = gps::load_split_manifest(sel_split, pairs);
      const auto pool = gps::load_pool(sel_pool);
      gps::SelectionModel model;
      model.strategy = gps::parse_strategy(strategy);
      gps::EmbeddingTable hate, cand;
      if (model.strategy != gps::Strategy::STfidf) {
        if (sel_hate.empty() || sel_cand.empty()) throw gps::ArgumentError("--hate-table and --cand-table are required");
        hate = gps::load_table(sel_hate);
        cand = gps::load_table(sel_cand);
        model.map = gps::LinearMapd::identity(cand.dim());
      }
      if (model.strategy == gps::Strategy::Gps) {
        if (sel_map.empty()) throw gps::ArgumentError("--map is required for gps");
        model.map = gps::load_map(sel_map);
      }
      if (model.strategy == gps::Strategy::SNeg) {
        Eigen::MatrixXd x, y;
        gps::pair_matrices(s.train, pool, hate, cand, nullptr, x, y);
        model.classifier = gps::train_neg_classifier(x, y, pool, cand, neg_ratio, neg_cfg);
      }
      gps::SelectionStats stats;
      const auto rows = gps::select_outputs(gps::group_instances(s.test), pool, hate, cand, model, exclude_gold, &stats);
      write_text(sel_out, gps::render_selected(rows));
      if (stats.empty_tfidf_queries) {
        std::cerr << "warning: " << stats.empty_tfidf_queries << " queries share no token with the pool\n";
      }
      if (stats.unrankable_queries) std::cerr << "warning: " << stats.unrankable_queries << " queries have a zero embedding\n";
    } else if (*eval_cmd) {
      const auto pairs = load_pairs(eval_ds);
      const auto s = gps::load_split_manifest(eval_split, pairs);
      const auto instances = gps::group_instances(s.test);
      const auto rows = gps::parse_selected(read_text(eval_selected));
      std::vector<std::string> outputs;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i < instances.size() && rows[i].instance_id != instances[i].id) {
          throw gps::ArgumentError("selected row " + std::to_string(i + 1) + " is for '" + rows[i].instance_id +
                                   "', expected '" + instances[i].id + "'");
        }
        outputs.push_back(rows[i].text);
      }
      gps::EvalOptions opts;
      for (const auto& e : eval_external) {
        const auto eq = e.find('=');
        if (eq == std::string::npos) throw gps::ArgumentError("--external expects metric=path");
        opts.external[e.substr(0, eq)] = gps::load_instance_scores(e.substr(eq + 1));
      }
      gps::RunManifest manifest;
      if (!eval_pool.empty()) manifest.pool_fingerprint = gps::load_pool(eval_pool).fingerprint();
      auto report = gps::evaluate_run(instances, outputs, manifest.pool_fingerprint, opts);
      report.strategy = eval_name;
      const fs::path dir = eval_dir;
      gps::emit_report({report}, manifest, gps::ReportFormat::Csv, dir / "report.csv");
      gps::emit_report({report}, manifest, gps::ReportFormat::Markdown, dir / "report.md");
      gps::emit_report({report}, manifest, gps::ReportFormat::Json, dir / "report.json");
      print_report(report, manifest);
    } else if (*run_cmd || *sweep_cmd) {
      if (!output_dir.empty()) sets.push_back("output_dir=" + output_dir);
      const auto cfg = gps::load_config(config_path, sets);
      if (*run_cmd) {
        const auto result = gps::run_pipeline(cfg);
        std::cout << "pool: base " << result.sizes.base << ", generated " << result.sizes.generated << ", combined "
                  << result.sizes.combined << ", selection " << result.sizes.selection << "\n";
        if (result.empty_tfidf_queries) {
          std::cerr << "warning: " << result.empty_tfidf_queries << " queries share no token with the pool\n";
        }
        print_report(result.report, result.manifest);
        std::cout << "artifacts in " << cfg.output_dir.string() << "\n";
      } else {
        const auto rows = gps::pool_size_sweep(cfg, counts);
        std::cout << gps::render_sweep_csv(rows);
      }
    } else if (*config_cmd) {
      std::cout << gps::default_config_json();
    }
  } catch (const gps::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
