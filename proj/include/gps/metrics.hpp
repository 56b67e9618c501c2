#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gps/corpus.hpp"

namespace gps {

// Floor applied to zero n-gram precisions inside BLEU.
inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr double kBm25K1 = 1.5;
inline constexpr double kBm25B = 0.75;

// Unique n-grams across all outputs divided by total n-grams; 0 when there
// are none.
double dist_n(const std::vector<std::string>& outputs, int n);

// Entropy (natural log) of the pooled n-gram distribution.
double ent_n(const std::vector<std::string>& outputs, int n);

// Multi-reference sentence BLEU up to order n: geometric mean of clipped
// precisions (zero precisions floored at kBleuEpsilon) times the brevity
// penalty against the closest reference length. Empty hypothesis -> 0.
double bleu_n(std::string_view hypothesis, const std::vector<std::string>& references, int n);

// Mean BLEU of each output against all the others. With `sample`, only that
// many hypotheses (drawn with `seed`) are scored; references stay complete.
double self_bleu_n(const std::vector<std::string>& outputs, int n, std::optional<std::size_t> sample = std::nullopt,
                   std::uint64_t seed = 0);

// Bigram F1, maximised over references.
double rouge_2(std::string_view hypothesis, const std::vector<std::string>& references);

struct Bm25Stats {
  std::size_t doc_count = 0;
  double avg_length = 0.0;
  std::unordered_map<std::string, std::size_t> df;

  static Bm25Stats build(const std::vector<std::string>& documents);
  double idf(const std::string& term) const;
};

// Okapi BM25 with idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1). Every query
// token occurrence contributes. Throws DomainError when stats are empty.
double bm25(std::string_view query, std::string_view document, const Bm25Stats& stats, double k1 = kBm25K1,
            double b = kBm25B);

// One test hate speech with its full gold reference set.
struct EvalInstance {
  std::string id;
  std::string hate;
  std::vector<std::string> references;
};

// Groups dis-aggregated pairs back into instances, first-appearance order.
std::vector<EvalInstance> group_instances(const std::vector<ConversationPair>& pairs);

struct MetricReport {
  std::string strategy;
  double dist1 = 0, dist2 = 0, ent1 = 0, ent2 = 0;
  double selfbleu1 = 0, selfbleu2 = 0;
  double bleu2 = 0, rouge2 = 0, bm25 = 0;
  std::optional<double> moverscore, bertscore, gruen;
  std::size_t instances = 0;
  std::size_t unranked = 0;  // instances with no selectable candidate
  double bm25_k1 = kBm25K1;
  double bm25_b = kBm25B;
  std::string pool_fingerprint;
  std::string config_hash;

  bool operator==(const MetricReport&) const = default;
};

struct EvalOptions {
  double bm25_k1 = kBm25K1;
  double bm25_b = kBm25B;
  std::optional<std::size_t> selfbleu_sample;
  std::uint64_t selfbleu_seed = 0;
  // "moverscore" / "bertscore" / "gruen" -> per-instance scores.
  std::map<std::string, std::unordered_map<std::string, double>> external;
};

/// Scores one selected output per instance. Diversity metrics run over the
/// output collection; BLEU-2 and ROUGE-2 are averaged per instance against
/// its full reference set; BM25 (query = hate speech) is averaged with
/// stats built over the output collection. External columns are means of
/// the supplied per-instance scores. Throws ArgumentError on a count
/// mismatch or fewer than two instances.
MetricReport evaluate_run(const std::vector<EvalInstance>& instances, const std::vector<std::string>& outputs,
                          const std::string& pool_fingerprint, const EvalOptions& options = {});

// "instance-id<TAB>score" lines.
std::unordered_map<std::string, double> load_instance_scores(const std::filesystem::path& path);

}  // namespace gps
