#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gps/corpus.hpp"

namespace gps {

enum class CandidateSource { Training, Markov, External };

std::string_view to_string(CandidateSource source);
CandidateSource parse_candidate_source(std::string_view name);

struct Candidate {
  std::string id;
  std::string text;
  CandidateSource source = CandidateSource::Training;
  std::optional<double> grammaticality;  // set by the pruning stage
};

// Ordered candidate list with a SHA-256 fingerprint over the ordered texts.
// Immutable once built; stages produce new pools.
class CandidatePool {
 public:
  CandidatePool() : CandidatePool(std::vector<Candidate>{}) {}
  // Throws ArgumentError on duplicate ids or empty texts.
  explicit CandidatePool(std::vector<Candidate> candidates);

  const std::vector<Candidate>& candidates() const { return candidates_; }
  const std::string& fingerprint() const { return fingerprint_; }
  std::size_t size() const { return candidates_.size(); }
  bool empty() const { return candidates_.empty(); }
  const Candidate& operator[](std::size_t i) const { return candidates_[i]; }

 private:
  std::vector<Candidate> candidates_;
  std::string fingerprint_;
};

// Each distinct training counterspeech text once, in first-seen order, with
// ids T0000000, T0000001, ...
CandidatePool build_base_pool(const std::vector<ConversationPair>& train);

struct MarkovConfig {
  std::size_t count = 0;
  int order = 2;  // n-gram order: the next token is conditioned on order-1 tokens
  std::size_t max_len = 40;
  std::uint64_t seed = 0;
};

/// Samples `count` sentences from an n-gram token chain fitted on the pool
/// texts (begin/end sentinels included). Sample i draws from its own
/// substream of `seed`, so a longer run extends a shorter one. Ids are
/// M0000000, M0000001, ...
///
/// Throws ModelFitError when no pool text has at least `order` tokens.
std::vector<Candidate> generate_markov(const CandidatePool& pool, const MarkovConfig& config);

// One candidate per non-blank line; ids are E<line number, zero-padded>.
std::vector<Candidate> ingest_candidates(const std::filesystem::path& path);
std::vector<Candidate> parse_candidates(std::string_view content);

// Exact-text dedupe, first occurrence wins.
CandidatePool dedupe(const CandidatePool& pool);

// Concatenates and dedupes.
CandidatePool merge(const CandidatePool& base, const std::vector<Candidate>& extra);

// JSON-lines {"id","text","source"[,"grammaticality"]}.
void save_pool(const CandidatePool& pool, const std::filesystem::path& path);
CandidatePool load_pool(const std::filesystem::path& path);

}  // namespace gps
