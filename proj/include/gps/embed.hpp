#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gps {

using Embedding = Eigen::VectorXd;

// Sentence id -> embedding, all of one dimension.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(Eigen::Index dim) : dim_(dim) {}

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }

  // Throws ArgumentError on dimension mismatch, non-finite entries or a
  // duplicate id.
  void insert(const std::string& id, Embedding e);
  // Throws LookupError for unknown ids.
  const Embedding& at(const std::string& id) const;

  const std::map<std::string, Embedding>& entries() const { return entries_; }

  bool operator==(const EmbeddingTable& other) const;

 private:
  Eigen::Index dim_ = 0;
  std::map<std::string, Embedding> entries_;
};

// True when the vector carries no direction (flagged un-rankable).
inline bool is_unrankable(const Embedding& e) { return e.squaredNorm() == 0.0; }

/// Embedding TSV: a "#dim=<d>" header, then "id<TAB>v1 v2 ... vd" rows with
/// values written at 9 significant digits. Rows are written in id order.
void save_table(const EmbeddingTable& table, const std::filesystem::path& path);
std::string format_table(const EmbeddingTable& table);
EmbeddingTable load_table(const std::filesystem::path& path);
EmbeddingTable parse_table(std::string_view content);

/// Built-in sentence embedder used when no external table is supplied:
/// idf-weighted bag of tokens hashed into `dim` signed buckets, then
/// L2-normalized. Tokens unseen at fit time are ignored.
class FallbackEmbedder {
 public:
  // idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the corpus sentences.
  // Throws ArgumentError for an empty corpus or dim < 8.
  FallbackEmbedder(const std::vector<std::string>& corpus, Eigen::Index dim, std::uint64_t seed);

  Embedding embed(std::string_view text) const;

  Eigen::Index dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  double idf(const std::string& token) const;

 private:
  struct Slot {
    Eigen::Index bucket;
    double sign;
  };
  Slot slot(const std::string& token) const;

  Eigen::Index dim_;
  std::uint64_t seed_;
  std::unordered_map<std::string, double> idf_;
};

FallbackEmbedder fit_fallback_embedder(const std::vector<std::string>& corpus, Eigen::Index dim, std::uint64_t seed);

}  // namespace gps
