#include "gps/pipeline.hpp"

#include <cmath>
#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "gps/error.hpp"
#include "gps/hash.hpp"
#include "gps/select.hpp"
#include "gps/text.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace gps {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Gps: return "gps";
    case Strategy::SCos: return "s-cos";
    case Strategy::STfidf: return "s-tfidf";
    case Strategy::SNeg: return "s-neg";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "gps") return Strategy::Gps;
  if (name == "s-cos") return Strategy::SCos;
  if (name == "s-tfidf") return Strategy::STfidf;
  if (name == "s-neg") return Strategy::SNeg;
  throw ArgumentError("unknown selection strategy '" + std::string(name) + "'");
}

namespace {

std::string_view to_string(GeneratorSource g) {
  switch (g) {
    case GeneratorSource::Markov: return "markov";
    case GeneratorSource::External: return "external";
    case GeneratorSource::None: return "none";
  }
  return "?";
}

json to_json(const PipelineConfig& c) {
  json policy_value = std::holds_alternative<ThresholdPolicy>(c.policy)
                          ? json(std::get<ThresholdPolicy>(c.policy).threshold)
                          : json(std::get<KeepFractionPolicy>(c.policy).fraction);
  json external = json::object();
  for (const auto& [k, v] : c.external_metrics) external[k] = v.string();
  return {
      {"dataset", {{"path", c.dataset_path.string()}, {"format", std::string(to_string(c.dataset_format))}}},
      {"split", {{"ratios", {c.ratios.train, c.ratios.validation, c.ratios.test}}, {"seed", c.split_seed},
                 {"grouped", c.grouped}}},
      {"generator", {{"source", std::string(to_string(c.generator))}, {"count", c.markov.count},
                     {"order", c.markov.order}, {"max_len", c.markov.max_len}, {"seed", c.markov.seed},
                     {"path", c.external_candidates.string()}}},
      {"prune", {{"skip", c.skip_prune}, {"scorer", c.scorer}, {"order", c.lm_order},
                 {"smoothing", c.lm_smoothing}, {"scores_path", c.scores_path.string()},
                 {"policy", std::holds_alternative<ThresholdPolicy>(c.policy) ? "threshold" : "keep_fraction"},
                 {"value", policy_value}, {"preset", ""}}},
      {"embed", {{"source", c.embed == EmbedSource::Fallback ? "fallback" : "tables"}, {"dim", c.dim},
                 {"seed", c.embed_seed}, {"hate_table", c.hate_table.string()},
                 {"candidate_table", c.candidate_table.string()}, {"save_tables", c.save_tables}}},
      {"select", {{"strategy", std::string(to_string(c.strategy))}, {"exclude_gold", c.exclude_gold},
                  {"neg_ratio", c.neg_ratio}}},
      {"train", {{"learning_rate", c.train.learning_rate}, {"max_epochs", c.train.max_epochs},
                 {"patience", c.train.patience}, {"seed", c.train.seed}, {"l2_penalty", c.train.l2_penalty}}},
      {"metrics", {{"selfbleu_sample", c.selfbleu_sample ? json(*c.selfbleu_sample) : json(nullptr)},
                   {"selfbleu_seed", c.selfbleu_seed}, {"bm25_k1", c.bm25_k1}, {"bm25_b", c.bm25_b},
                   {"external", external}}},
      {"output_dir", c.output_dir.string()},
  };
}

// Overlays `user` onto `base`, rejecting keys the defaults do not have.
// metrics.external is a free-form map.
void merge_checked(json& base, const json& user, const std::string& where) {
  if (!user.is_object()) throw ArgumentError("config: '" + where + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ArgumentError("config: unknown key '" + key + "'");
    auto& slot = base[it.key()];
    if (slot.is_object() && key != "metrics.external") {
      merge_checked(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ArgumentError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json patch = value;
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge_checked(doc, patch, "");
}

PipelineConfig from_json(const json& j) {
  PipelineConfig c;
  try {
    c.dataset_path = j.at("dataset").at("path").get<std::string>();
    c.dataset_format = parse_dataset_format(j.at("dataset").at("format").get<std::string>());
    const auto& s = j.at("split");
    const auto& r = s.at("ratios");
    if (!r.is_array() || r.size() != 3) throw ArgumentError("config: split.ratios needs three values");
    c.ratios = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
    c.split_seed = s.at("seed").get<std::uint64_t>();
    c.grouped = s.at("grouped").get<bool>();

    const auto& g = j.at("generator");
    const auto src = g.at("source").get<std::string>();
    if (src == "markov") {
      c.generator = GeneratorSource::Markov;
    } else if (src == "external") {
      c.generator = GeneratorSource::External;
    } else if (src == "none") {
      c.generator = GeneratorSource::None;
    } else {
      throw ArgumentError("config: generator.source must be markov, external or none");
    }
    c.markov.count = g.at("count").get<std::size_t>();
    c.markov.order = g.at("order").get<int>();
    c.markov.max_len = g.at("max_len").get<std::size_t>();
    c.markov.seed = g.at("seed").get<std::uint64_t>();
    c.external_candidates = g.at("path").get<std::string>();
    if (c.generator == GeneratorSource::External && c.external_candidates.empty()) {
      throw ArgumentError("config: generator.path is required for the external source");
    }

    const auto& p = j.at("prune");
    c.skip_prune = p.at("skip").get<bool>();
    c.scorer = p.at("scorer").get<std::string>();
    if (c.scorer != "ngram-lm" && c.scorer != "external-scores") {
      throw ArgumentError("config: prune.scorer must be ngram-lm or external-scores");
    }
    c.lm_order = p.at("order").get<int>();
    c.lm_smoothing = p.at("smoothing").get<double>();
    c.scores_path = p.at("scores_path").get<std::string>();
    const auto preset = p.at("preset").get<std::string>();
    const auto policy = p.at("policy").get<std::string>();
    if (!preset.empty()) {
      c.policy = keep_fraction_preset(preset);
    } else if (policy == "threshold") {
      c.policy = ThresholdPolicy{p.at("value").get<double>()};
    } else if (policy == "keep_fraction") {
      const double f = p.at("value").get<double>();
      if (!(f > 0 && f <= 1)) throw ArgumentError("config: keep_fraction must be in (0, 1]");
      c.policy = KeepFractionPolicy{f};
    } else {
      throw ArgumentError("config: prune.policy must be threshold or keep_fraction");
    }

    const auto& e = j.at("embed");
    const auto esrc = e.at("source").get<std::string>();
    if (esrc == "fallback") {
      c.embed = EmbedSource::Fallback;
    } else if (esrc == "tables") {
      c.embed = EmbedSource::Tables;
    } else {
      throw ArgumentError("config: embed.source must be fallback or tables");
    }
    c.dim = e.at("dim").get<Eigen::Index>();
    c.embed_seed = e.at("seed").get<std::uint64_t>();
    c.hate_table = e.at("hate_table").get<std::string>();
    c.candidate_table = e.at("candidate_table").get<std::string>();
    c.save_tables = e.at("save_tables").get<bool>();
    if (c.embed == EmbedSource::Tables && (c.hate_table.empty() || c.candidate_table.empty())) {
      throw ArgumentError("config: embed.hate_table and embed.candidate_table are required for tables");
    }

    const auto& sel = j.at("select");
    c.strategy = parse_strategy(sel.at("strategy").get<std::string>());
    c.exclude_gold = sel.at("exclude_gold").get<bool>();
    c.neg_ratio = sel.at("neg_ratio").get<int>();

    const auto& t = j.at("train");
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.max_epochs = t.at("max_epochs").get<int>();
    c.train.patience = t.at("patience").get<int>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.train.l2_penalty = t.at("l2_penalty").get<double>();

    const auto& m = j.at("metrics");
    if (!m.at("selfbleu_sample").is_null()) c.selfbleu_sample = m.at("selfbleu_sample").get<std::size_t>();
    c.selfbleu_seed = m.at("selfbleu_seed").get<std::uint64_t>();
    c.bm25_k1 = m.at("bm25_k1").get<double>();
    c.bm25_b = m.at("bm25_b").get<double>();
    for (auto it = m.at("external").begin(); it != m.at("external").end(); ++it) {
      if (it.key() != "moverscore" && it.key() != "bertscore" && it.key() != "gruen") {
        throw ArgumentError("config: unknown external metric '" + it.key() + "'");
      }
      c.external_metrics[it.key()] = it.value().get<std::string>();
    }
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& ex) {
    throw ArgumentError(std::string("config: ") + ex.what());
  }
  if (c.dataset_path.empty()) throw ArgumentError("config: dataset.path is required");
  const auto& r = c.ratios;
  if (!(r.train > 0 && r.validation > 0 && r.test > 0) || std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) {
    throw ArgumentError("config: split.ratios must be three positive numbers summing to 1");
  }
  if (const auto* kf = std::get_if<KeepFractionPolicy>(&c.policy); kf && !(kf->fraction > 0 && kf->fraction <= 1)) {
    throw ArgumentError("config: prune.value must be in (0, 1] for keep_fraction");
  }
  if (c.neg_ratio < 1) throw ArgumentError("config: select.neg_ratio must be >= 1");
  return c;
}

json resolved_without_output(const PipelineConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return j;
}

}  // namespace

std::string default_config_json() { return to_json(PipelineConfig{}).dump(2) + "\n"; }

PipelineConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides) {
  json doc = to_json(PipelineConfig{});
  json user = json::parse(json_text, nullptr, false);
  if (user.is_discarded()) throw ArgumentError("config: not valid JSON");
  merge_checked(doc, user, "");
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  return parse_config(detail::read_file(path), overrides);
}

std::string config_to_json(const PipelineConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(resolved_without_output(cfg).dump()); }

EmbeddingTable embed_all(const FallbackEmbedder& embedder,
                         const std::vector<std::pair<std::string, std::string>>& id_texts) {
  EmbeddingTable t(embedder.dim());
  for (const auto& [id, text] : id_texts) {
    if (!t.contains(id)) t.insert(id, embedder.embed(text));
  }
  return t;
}

namespace {

std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    const char n = s[++i];
    out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n == 'r' ? '\r' : n);
  }
  return out;
}

}  // namespace

std::string render_selected(const std::vector<SelectedOutput>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += escape_field(r.instance_id) + "\t" + escape_field(r.candidate_id) + "\t" +
           (r.score ? detail::format_double(*r.score) : std::string()) + "\t" + escape_field(r.text) + "\n";
  }
  return out;
}

std::vector<SelectedOutput> parse_selected(std::string_view content) {
  std::vector<SelectedOutput> out;
  const auto lines = detail::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (int k = 0; k < 3; ++k) {
      auto tab = lines[i].find('\t', start);
      if (tab == std::string_view::npos) throw ParseError(i + 1, "selected outputs need 4 tab-separated fields");
      f.push_back(lines[i].substr(start, tab - start));
      start = tab + 1;
    }
    f.push_back(lines[i].substr(start));
    SelectedOutput r;
    r.instance_id = unescape_field(f[0]);
    r.candidate_id = unescape_field(f[1]);
    if (!f[2].empty()) {
      double v = 0;
      if (!detail::parse_double(f[2], v)) throw ParseError(i + 1, "bad score");
      r.score = v;
    }
    r.text = unescape_field(f[3]);
    out.push_back(std::move(r));
  }
  return out;
}

void pair_matrices(const std::vector<ConversationPair>& pairs, const CandidatePool& pool,
                   const EmbeddingTable& hate_table, const EmbeddingTable& candidate_table,
                   const FallbackEmbedder* embedder, Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
  std::unordered_map<std::string, std::string> id_of_text;
  for (const auto& cand : pool.candidates()) id_of_text.emplace(cand.text, cand.id);
  std::vector<Embedding> xs, ys;
  for (const auto& p : pairs) {
    const auto& ex = hate_table.at(p.hate.id);
    Embedding ey;
    if (auto it = id_of_text.find(p.counter.text); it != id_of_text.end() && candidate_table.contains(it->second)) {
      ey = candidate_table.at(it->second);
    } else if (candidate_table.contains(p.counter.id)) {
      ey = candidate_table.at(p.counter.id);
    } else if (embedder) {
      ey = embedder->embed(p.counter.text);
    } else {
      continue;
    }
    if (is_unrankable(ex) || is_unrankable(ey)) continue;
    xs.push_back(ex);
    ys.push_back(std::move(ey));
  }
  const Eigen::Index d = hate_table.dim();
  X.resize(d, static_cast<Eigen::Index>(xs.size()));
  Y.resize(d, static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    X.col(static_cast<Eigen::Index>(i)) = xs[i];
    Y.col(static_cast<Eigen::Index>(i)) = ys[i];
  }
}

std::vector<SelectedOutput> select_outputs(const std::vector<EvalInstance>& instances, const CandidatePool& pool,
                                           const EmbeddingTable& hate_table, const EmbeddingTable& candidate_table,
                                           const SelectionModel& model, bool exclude_gold, SelectionStats* stats) {
  SelectionStats local;
  std::optional<MappedPool> mapped;
  std::optional<TfidfIndex> tfidf;
  switch (model.strategy) {
    case Strategy::Gps:
      mapped.emplace(pool, candidate_table, model.map);
      break;
    case Strategy::SCos:
      mapped.emplace(pool, candidate_table, LinearMapd::identity(candidate_table.dim()));
      break;
    case Strategy::STfidf:
      tfidf.emplace(pool);
      break;
    case Strategy::SNeg:
      if (!model.classifier) throw ArgumentError("s-neg selection needs a trained classifier");
      break;
  }
  std::vector<SelectedOutput> rows;
  for (const auto& inst : instances) {
    std::unordered_set<std::string> gold;
    if (exclude_gold) gold.insert(inst.references.begin(), inst.references.end());
    const std::size_t k = 1 + gold.size();
    Ranking ranking;
    if (tfidf) {
      ranking = tfidf->top_k(inst.hate, k);
      if (ranking.empty()) ++local.empty_tfidf_queries;
    } else {
      const auto& ex = hate_table.at(inst.id);
      if (is_unrankable(ex)) {
        ++local.unrankable_queries;
      } else {
        ranking = mapped ? mapped->top_k(ex, k) : select_by_classifier(ex, pool, candidate_table, *model.classifier, k);
      }
    }
    SelectedOutput row{inst.id, "", std::nullopt, ""};
    for (const auto& sc : ranking) {
      if (gold.count(sc.candidate.text)) continue;
      row.candidate_id = sc.candidate.id;
      row.score = sc.score;
      row.text = sc.candidate.text;
      break;
    }
    rows.push_back(std::move(row));
  }
  if (stats) *stats = local;
  return rows;
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// State shared by a single run and by every row of a sweep: everything
// that does not depend on the candidate count.
struct Session {
  PipelineConfig cfg;
  std::vector<ConversationPair> pairs;
  DatasetSplit split;
  CandidatePool base;
  std::optional<FallbackEmbedder> embedder;
  std::optional<EmbeddingTable> external_candidates_table;
  EmbeddingTable hate_table;
  EmbeddingTable base_table;
  std::optional<GrammaticalityScorer> scorer;
  std::vector<Candidate> external_generated;
  LinearMapd map;
  bool trained_map = false;
  Eigen::MatrixXd train_x, train_y;
  std::vector<EvalInstance> test;
  EvalOptions eval;

  explicit Session(const PipelineConfig& c) : cfg(c) {
    stage("load", [&] {
      const auto dataset = load_dataset(cfg.dataset_path, cfg.dataset_format);
      pairs = disaggregate(dataset);
      split = gps::split(pairs, cfg.ratios, cfg.split_seed, cfg.grouped);
      if (split.train.empty()) throw ArgumentError("training partition is empty");
      test = group_instances(split.test);
      return 0;
    });
    stage("pool", [&] {
      base = build_base_pool(split.train);
      if (cfg.generator == GeneratorSource::External) external_generated = ingest_candidates(cfg.external_candidates);
      return 0;
    });
    if (!cfg.skip_prune) {
      stage("prune", [&] {
        if (cfg.scorer == "external-scores") {
          scorer = ingest_scores(cfg.scores_path);
        } else {
          std::vector<std::string> corpus;
          for (const auto& cand : base.candidates()) corpus.push_back(cand.text);
          scorer = train_lm_scorer(corpus, cfg.lm_order, cfg.lm_smoothing);
        }
        return 0;
      });
    }
    stage("embed", [&] {
      if (cfg.embed == EmbedSource::Fallback) {
        std::vector<std::string> corpus;
        for (const auto& inst : group_instances(split.train)) corpus.push_back(inst.hate);
        for (const auto& cand : base.candidates()) corpus.push_back(cand.text);
        embedder.emplace(corpus, cfg.dim, cfg.embed_seed);
        std::vector<std::pair<std::string, std::string>> hates;
        for (const auto& p : pairs) hates.emplace_back(p.hate.id, p.hate.text);
        hate_table = embed_all(*embedder, hates);
        base_table = candidate_table(base);
      } else {
        hate_table = load_table(cfg.hate_table);
        external_candidates_table = load_table(cfg.candidate_table);
        base_table = *external_candidates_table;
        if (hate_table.dim() != base_table.dim()) throw FormatError("hate and candidate tables differ in dim");
      }
      return 0;
    });
    stage("train", [&] {
      build_training_matrices();
      if (cfg.strategy == Strategy::Gps) {
        Eigen::MatrixXd vx, vy;
        matrices_for(split.validation, vx, vy);
        map = train_map<double>(train_x, train_y, vx, vy, cfg.train).map;
        trained_map = true;
      } else {
        map = LinearMapd::identity(hate_table.dim());
      }
      return 0;
    });
    eval.bm25_k1 = cfg.bm25_k1;
    eval.bm25_b = cfg.bm25_b;
    eval.selfbleu_sample = cfg.selfbleu_sample;
    eval.selfbleu_seed = cfg.selfbleu_seed;
    stage("eval", [&] {
      for (const auto& [name, path] : cfg.external_metrics) eval.external[name] = load_instance_scores(path);
      return 0;
    });
  }

  EmbeddingTable candidate_table(const CandidatePool& pool) const {
    if (external_candidates_table) return *external_candidates_table;
    std::vector<std::pair<std::string, std::string>> items;
    for (const auto& cand : pool.candidates()) items.emplace_back(cand.id, cand.text);
    return embed_all(*embedder, items);
  }

  void matrices_for(const std::vector<ConversationPair>& ps, Eigen::MatrixXd& X, Eigen::MatrixXd& Y) const {
    pair_matrices(ps, base, hate_table, base_table, embedder ? &*embedder : nullptr, X, Y);
  }

  void build_training_matrices() {
    matrices_for(split.train, train_x, train_y);
    if (train_x.cols() == 0) throw ArgumentError("no training pair has two rankable embeddings");
  }

  struct PoolStep {
    PoolSizes sizes;
    CandidatePool combined;
    CandidatePool selection;
  };

  PoolStep build_pool(std::size_t count) const {
    PoolStep s;
    std::vector<Candidate> generated;
    stage("generate", [&] {
      if (cfg.generator == GeneratorSource::Markov) {
        MarkovConfig mc = cfg.markov;
        mc.count = count;
        generated = generate_markov(base, mc);
      } else if (cfg.generator == GeneratorSource::External) {
        generated.assign(external_generated.begin(),
                         external_generated.begin() + static_cast<std::ptrdiff_t>(std::min(count, external_generated.size())));
      }
      s.combined = merge(base, generated);
      return 0;
    });
    s.selection = cfg.skip_prune ? s.combined
                                 : stage("prune", [&] { return prune(s.combined, *scorer, cfg.policy); });
    s.sizes = {base.size(), generated.size(), s.combined.size(), s.selection.size()};
    return s;
  }

  struct Selection {
    std::vector<SelectedOutput> rows;
    std::string model_json;  // map or classifier, empty otherwise
    std::size_t empty_tfidf = 0;
  };

  Selection select(const CandidatePool& pool) const {
    return stage("select", [&] {
      Selection out;
      if (pool.empty()) throw ArgumentError("selection pool is empty");
      SelectionModel model{cfg.strategy, map, std::nullopt};
      EmbeddingTable table;
      if (cfg.strategy != Strategy::STfidf) table = candidate_table(pool);
      if (cfg.strategy == Strategy::Gps) out.model_json = map_to_json(map);
      if (cfg.strategy == Strategy::SNeg) {
        model.classifier = train_neg_classifier(train_x, train_y, pool, table, cfg.neg_ratio, cfg.train);
        out.model_json = classifier_to_json(*model.classifier);
      }
      SelectionStats stats;
      out.rows = select_outputs(test, pool, hate_table, table, model, cfg.exclude_gold, &stats);
      out.empty_tfidf = stats.empty_tfidf_queries;
      return out;
    });
  }

  MetricReport evaluate(const std::vector<SelectedOutput>& rows, const CandidatePool& pool) const {
    return stage("eval", [&] {
      std::vector<std::string> outputs;
      for (const auto& r : rows) outputs.push_back(r.text);
      auto report = evaluate_run(test, outputs, pool.fingerprint(), eval);
      report.strategy = std::string(to_string(cfg.strategy)) + (cfg.skip_prune ? "+p-no" : "");
      report.config_hash = config_hash(cfg);
      return report;
    });
  }
};

void write_artifact(const fs::path& dir, const std::string& name, std::string_view content, RunManifest& m) {
  detail::write_file(dir / name, content);
  m.artifacts[name] = sha256_hex(content);
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  fs::remove(dir / "STALE", ec);
  fs::remove(dir / "manifest.json", ec);
  try {
    Session session(cfg);
    RunResult result;
    RunManifest& m = result.manifest;
    m.config_hash = config_hash(cfg);
    write_artifact(dir, "config.json", resolved_without_output(cfg).dump(2) + "\n", m);
    write_artifact(dir, "split.json", split_manifest_json(session.split), m);
    m.split_manifest = "split.json";

    const auto step = session.build_pool(cfg.generator == GeneratorSource::None ? 0 : cfg.markov.count);
    result.sizes = step.sizes;
    m.pool_fingerprint = step.selection.fingerprint();
    save_pool(step.combined, dir / "pool.jsonl");
    m.artifacts["pool.jsonl"] = sha256_file(dir / "pool.jsonl");
    save_pool(step.selection, dir / "selection_pool.jsonl");
    m.artifacts["selection_pool.jsonl"] = sha256_file(dir / "selection_pool.jsonl");

    if (cfg.save_tables && session.embedder) {
      write_artifact(dir, "hate_embeddings.tsv", format_table(session.hate_table), m);
      // Pair counterspeech rows (keyed by counterspeech id) let a tables-mode
      // rerun train on validation pairs that are not pool candidates.
      std::vector<std::pair<std::string, std::string>> rows;
      for (const auto& c : step.selection.candidates()) rows.emplace_back(c.id, c.text);
      for (const auto& p : session.pairs) rows.emplace_back(p.counter.id, p.counter.text);
      write_artifact(dir, "candidate_embeddings.tsv", format_table(embed_all(*session.embedder, rows)), m);
    }

    const auto sel = session.select(step.selection);
    result.empty_tfidf_queries = sel.empty_tfidf;
    if (!sel.model_json.empty()) {
      const std::string name = cfg.strategy == Strategy::SNeg ? "classifier.json" : "map.json";
      write_artifact(dir, name, sel.model_json, m);
      m.map = name;
    }
    write_artifact(dir, "selected.tsv", render_selected(sel.rows), m);
    result.selected_outputs = dir / "selected.tsv";

    result.report = session.evaluate(sel.rows, step.selection);
    stage("report", [&] {
      const RunManifest embedded = m;
      write_artifact(dir, "report.csv", render_report({result.report}, embedded, ReportFormat::Csv), m);
      write_artifact(dir, "report.md", render_report({result.report}, embedded, ReportFormat::Markdown), m);
      write_artifact(dir, "report.json", render_report({result.report}, embedded, ReportFormat::Json), m);
      detail::write_file(dir / "manifest.json", manifest_to_json(m));
      return 0;
    });
    return result;
  } catch (const StageError& e) {
    json marker = {{"stage", e.stage()}, {"cause", e.what()}};
    detail::write_file(dir / "STALE", marker.dump(2) + "\n");
    throw;
  } catch (const std::exception& e) {
    json marker = {{"stage", "write"}, {"cause", e.what()}};
    detail::write_file(dir / "STALE", marker.dump(2) + "\n");
    throw StageError("write", e.what());
  }
}

std::string render_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "count,base,generated,combined,selection,dist1,dist2,ent1,ent2,selfbleu1,selfbleu2,bleu2,rouge2,bm25\n";
  auto n = [](double v) { return detail::format_double(v); };
  for (const auto& r : rows) {
    out += std::to_string(r.count) + "," + std::to_string(r.sizes.base) + "," + std::to_string(r.sizes.generated) +
           "," + std::to_string(r.sizes.combined) + "," + std::to_string(r.sizes.selection) + "," +
           n(r.report.dist1) + "," + n(r.report.dist2) + "," + n(r.report.ent1) + "," + n(r.report.ent2) + "," +
           n(r.report.selfbleu1) + "," + n(r.report.selfbleu2) + "," + n(r.report.bleu2) + "," +
           n(r.report.rouge2) + "," + n(r.report.bm25) + "\n";
  }
  return out;
}

std::vector<SweepRow> pool_size_sweep(const PipelineConfig& cfg, const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw ArgumentError("sweep: no counts");
  if (!std::is_sorted(counts.begin(), counts.end())) throw ArgumentError("sweep: counts must be ascending");
  Session session(cfg);
  std::vector<SweepRow> rows;
  for (auto count : counts) {
    const auto step = session.build_pool(count);
    const auto sel = session.select(step.selection);
    rows.push_back({count, step.sizes, session.evaluate(sel.rows, step.selection)});
  }
  const fs::path dir = cfg.output_dir;
  detail::write_file(dir / "config.json", resolved_without_output(cfg).dump(2) + "\n");
  detail::write_file(dir / "sweep.csv", render_sweep_csv(rows));
  return rows;
}

}  // namespace gps
