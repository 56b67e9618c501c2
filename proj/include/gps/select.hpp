#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gps/embed.hpp"
#include "gps/linear_map.hpp"
#include "gps/pool.hpp"

namespace gps {

struct ScoredCandidate {
  Candidate candidate;
  double score = 0.0;
};

using Ranking = std::vector<ScoredCandidate>;

// Candidate embeddings mapped once through a LinearMap and stored as unit
// columns, so each query is a single matrix-vector product. Candidates with
// a zero embedding are skipped. Construction throws LookupError listing
// every candidate missing from the table.
class MappedPool {
 public:
  MappedPool(const CandidatePool& pool, const EmbeddingTable& table, const LinearMapd& map);

  // Top-k by cos(e_x, mapped e_y) descending, ties by candidate id.
  // Throws ArgumentError for k < 1 and DomainError for a zero query.
  Ranking top_k(const Embedding& query, std::size_t k) const;

  std::size_t rankable() const { return members_.size(); }

 private:
  std::vector<Candidate> members_;
  Eigen::MatrixXd mapped_;  // dim x rankable, unit columns
  Eigen::Index dim_;
};

Ranking select_topk(const Embedding& e_x, const CandidatePool& pool, const EmbeddingTable& table,
                    const LinearMapd& map, std::size_t k);

// Unmapped cosine: select_topk with the identity map.
Ranking select_cos(const Embedding& e_x, const CandidatePool& pool, const EmbeddingTable& table, std::size_t k);

/// tf-idf retrieval over raw pool texts: tf is the raw count,
/// idf(t) = ln((N + 1) / (df(t) + 1)) + 1 over the pool documents, and
/// candidates are ranked by cosine between tf-idf vectors.
class TfidfIndex {
 public:
  explicit TfidfIndex(const CandidatePool& pool);

  // Empty when the query shares no token with the pool vocabulary.
  Ranking top_k(std::string_view query, std::size_t k) const;

  double idf(const std::string& term) const;
  std::size_t vocabulary_size() const { return term_ids_.size(); }

 private:
  std::vector<Candidate> docs_;
  std::unordered_map<std::string, std::size_t> term_ids_;
  std::vector<double> idf_;
  // term -> (doc, normalized weight)
  std::vector<std::vector<std::pair<std::size_t, double>>> postings_;
};

Ranking select_tfidf(std::string_view hate_text, const CandidatePool& pool, std::size_t k);

// Logistic response classifier over [e_x ; e_y ; e_x (*) e_y] with unit
// inputs.
struct NegSamplingClassifier {
  Eigen::VectorXd weights;  // 3 * dim
  double bias = 0.0;
  std::uint64_t seed = 0;
  int neg_ratio = 1;

  Eigen::Index dim() const { return weights.size() / 3; }
  double logit(const Embedding& e_x, const Embedding& e_y) const;
  // In (0, 1).
  double probability(const Embedding& e_x, const Embedding& e_y) const;
};

/// Each positive (e_x, e_y) is joined by neg_ratio negatives drawn uniformly
/// from the rankable pool with cfg.seed; weights are fitted by full-batch
/// gradient descent on the mean logistic loss (cfg.learning_rate,
/// cfg.max_epochs, cfg.l2_penalty) over standardized features, then mapped
/// back to raw-feature weights. Throws ArgumentError when the rankable pool
/// has fewer than neg_ratio + 1 candidates.
NegSamplingClassifier train_neg_classifier(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                           const CandidatePool& pool, const EmbeddingTable& table, int neg_ratio,
                                           const TrainConfig& cfg);

Ranking select_by_classifier(const Embedding& e_x, const CandidatePool& pool, const EmbeddingTable& table,
                             const NegSamplingClassifier& clf, std::size_t k);

// JSON: {"dim", "b", "W": row-major}, shortest round-trip decimals.
std::string map_to_json(const LinearMapd& map);
LinearMapd map_from_json(std::string_view text);
void save_map(const LinearMapd& map, const std::filesystem::path& path);
LinearMapd load_map(const std::filesystem::path& path);

std::string classifier_to_json(const NegSamplingClassifier& clf);
NegSamplingClassifier classifier_from_json(std::string_view text);

// Sorts by score descending then id ascending and keeps the first k.
void rank_in_place(Ranking& ranking, std::size_t k);

}  // namespace gps
