#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "gps/pool.hpp"

namespace gps {

// Add-k smoothed n-gram token language model. Scores are the mean natural
// log-probability over the tokens of a text plus its end sentinel; higher
// means more fluent.
class NgramLmScorer {
 public:
  // Throws ArgumentError for an empty corpus, order < 1 or smoothing <= 0.
  NgramLmScorer(const std::vector<std::string>& corpus, int order, double smoothing);

  double score(std::string_view text) const;

  int order() const { return order_; }
  double smoothing() const { return smoothing_; }
  // Distinct corpus tokens plus the begin and end sentinels.
  std::vector<std::string> vocabulary() const;
  // Number of predictable outcomes: distinct tokens plus the end sentinel.
  std::size_t outcome_count() const { return outcomes_; }

 private:
  int order_;
  double smoothing_;
  std::size_t outcomes_ = 0;
  std::map<std::string, int> tokens_;
  std::map<std::vector<std::string>, std::unordered_map<std::string, std::size_t>> counts_;
  std::map<std::vector<std::string>, std::size_t> context_totals_;
};

// Scores produced outside this process (e.g. by a neural acceptability
// classifier), keyed by candidate id.
class ExternalScores {
 public:
  explicit ExternalScores(std::unordered_map<std::string, double> table) : table_(std::move(table)) {}
  // Throws LookupError for unknown ids.
  double score(const std::string& id) const;
  std::size_t size() const { return table_.size(); }

 private:
  std::unordered_map<std::string, double> table_;
};

using GrammaticalityScorer = std::variant<NgramLmScorer, ExternalScores>;

NgramLmScorer train_lm_scorer(const std::vector<std::string>& corpus, int order, double smoothing);

// Empty texts score -infinity and are always pruned.
double grammaticality_score(const GrammaticalityScorer& scorer, const Candidate& candidate);

// "id<TAB>score" lines. Duplicate ids and non-finite or non-numeric scores
// raise ParseError.
ExternalScores ingest_scores(const std::filesystem::path& path);
ExternalScores parse_scores(std::string_view content);

struct ThresholdPolicy {
  double threshold;
};
struct KeepFractionPolicy {
  double fraction;  // in (0, 1]
};
using PrunePolicy = std::variant<ThresholdPolicy, KeepFractionPolicy>;

// Keep-fraction presets matching the reported post-pruning pool sizes:
// conan 15.4k/30k, reddit 17.9k/30k, gab 25.4k/40k.
KeepFractionPolicy keep_fraction_preset(std::string_view dataset);

/// Scores every candidate and keeps those passing the policy. Threshold keeps
/// score >= threshold; keep-fraction keeps the top ceil(fraction * N) by
/// score with ties broken by id ascending. Output preserves input order and
/// carries the scores in Candidate::grammaticality.
CandidatePool prune(const CandidatePool& pool, const GrammaticalityScorer& scorer, const PrunePolicy& policy);

// Same, over precomputed scores aligned with the pool.
CandidatePool prune_scored(const CandidatePool& pool, const std::vector<double>& scores, const PrunePolicy& policy);

}  // namespace gps
