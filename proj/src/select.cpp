#include "gps/select.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gps/error.hpp"
#include "gps/rng.hpp"
#include "gps/text.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace gps {

using nlohmann::json;

void rank_in_place(Ranking& ranking, std::size_t k) {
  auto better = [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.candidate.id < b.candidate.id;
  };
  k = std::min(k, ranking.size());
  std::partial_sort(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(k), ranking.end(), better);
  ranking.resize(k);
}

namespace {

void require_k(std::size_t k) {
  if (k < 1) throw ArgumentError("k must be >= 1");
}

void require_present(const CandidatePool& pool, const EmbeddingTable& table) {
  std::string missing;
  std::size_t n = 0;
  for (const auto& c : pool.candidates()) {
    if (table.contains(c.id)) continue;
    if (n++) missing += ", ";
    missing += c.id;
  }
  if (n) throw LookupError("no embedding for " + std::to_string(n) + " candidate(s): " + missing);
}

}  // namespace

MappedPool::MappedPool(const CandidatePool& pool, const EmbeddingTable& table, const LinearMapd& map)
    : dim_(table.dim()) {
  require_present(pool, table);
  if (map.dim() != dim_) throw ArgumentError("map dim differs from embedding dim");
  std::vector<Eigen::VectorXd> cols;
  for (const auto& c : pool.candidates()) {
    const auto& e = table.at(c.id);
    if (is_unrankable(e)) continue;
    Eigen::VectorXd u = map.apply(e / e.norm());
    const double n = u.norm();
    if (!(n > 0) || !std::isfinite(n)) continue;
    cols.push_back(u / n);
    members_.push_back(c);
  }
  mapped_.resize(dim_, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) mapped_.col(static_cast<Eigen::Index>(i)) = cols[i];
}

Ranking MappedPool::top_k(const Embedding& query, std::size_t k) const {
  require_k(k);
  if (query.size() != dim_) throw ArgumentError("query dim differs from embedding dim");
  const double qn = query.norm();
  if (qn == 0.0) throw DomainError("query embedding is zero");
  const Eigen::VectorXd scores = mapped_.transpose() * (query / qn);
  Ranking out;
  out.reserve(members_.size());
  for (std::size_t i = 0; i < members_.size(); ++i) {
    out.push_back({members_[i], std::clamp(scores[static_cast<Eigen::Index>(i)], -1.0, 1.0)});
  }
  rank_in_place(out, k);
  return out;
}

Ranking select_topk(const Embedding& e_x, const CandidatePool& pool, const EmbeddingTable& table,
                    const LinearMapd& map, std::size_t k) {
  require_k(k);
  return MappedPool(pool, table, map).top_k(e_x, k);
}

Ranking select_cos(const Embedding& e_x, const CandidatePool& pool, const EmbeddingTable& table, std::size_t k) {
  return select_topk(e_x, pool, table, LinearMapd::identity(table.dim()), k);
}

TfidfIndex::TfidfIndex(const CandidatePool& pool) : docs_(pool.candidates()) {
  if (pool.empty()) throw ArgumentError("tf-idf: empty pool");
  std::vector<std::map<std::size_t, double>> tf(docs_.size());
  std::vector<std::size_t> df;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    for (const auto& t : tokenize(docs_[d].text)) {
      auto [it, fresh] = term_ids_.emplace(t, term_ids_.size());
      if (fresh) df.push_back(0);
      auto& slot = tf[d][it->second];
      if (slot == 0.0) ++df[it->second];
      slot += 1.0;
    }
  }
  const auto n = static_cast<double>(docs_.size());
  idf_.resize(df.size());
  for (std::size_t t = 0; t < df.size(); ++t) idf_[t] = std::log((n + 1.0) / (static_cast<double>(df[t]) + 1.0)) + 1.0;
  postings_.resize(df.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    double norm2 = 0;
    for (const auto& [t, c] : tf[d]) norm2 += (c * idf_[t]) * (c * idf_[t]);
    const double norm = std::sqrt(norm2);
    for (const auto& [t, c] : tf[d]) postings_[t].push_back({d, c * idf_[t] / norm});
  }
}

double TfidfIndex::idf(const std::string& term) const {
  auto it = term_ids_.find(term);
  return it == term_ids_.end() ? 0.0 : idf_[it->second];
}

Ranking TfidfIndex::top_k(std::string_view query, std::size_t k) const {
  require_k(k);
  std::map<std::size_t, double> q;
  for (const auto& t : tokenize(query)) {
    auto it = term_ids_.find(t);
    if (it != term_ids_.end()) q[it->second] += 1.0;
  }
  if (q.empty()) return {};
  double norm2 = 0;
  for (auto& [t, c] : q) {
    c *= idf_[t];
    norm2 += c * c;
  }
  const double norm = std::sqrt(norm2);
  std::vector<double> scores(docs_.size(), 0.0);
  for (const auto& [t, w] : q) {
    for (const auto& [d, dw] : postings_[t]) scores[d] += (w / norm) * dw;
  }
  Ranking out;
  out.reserve(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) out.push_back({docs_[d], std::min(scores[d], 1.0)});
  rank_in_place(out, k);
  return out;
}

Ranking select_tfidf(std::string_view hate_text, const CandidatePool& pool, std::size_t k) {
  return TfidfIndex(pool).top_k(hate_text, k);
}

namespace {

Eigen::VectorXd features(const Embedding& x, const Embedding& y) {
  const Eigen::Index d = x.size();
  Eigen::VectorXd f(3 * d);
  const Eigen::VectorXd xu = x / x.norm();
  const Eigen::VectorXd yu = y / y.norm();
  f << xu, yu, xu.cwiseProduct(yu);
  return f;
}

double sigmoid(double z) {
  constexpr double kEps = 1e-15;
  const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(p, kEps, 1.0 - kEps);
}

}  // namespace

double NegSamplingClassifier::logit(const Embedding& e_x, const Embedding& e_y) const {
  if (e_x.size() != dim() || e_y.size() != dim()) throw ArgumentError("classifier: dimension mismatch");
  if (is_unrankable(e_x) || is_unrankable(e_y)) throw DomainError("classifier: zero embedding");
  return weights.dot(features(e_x, e_y)) + bias;
}

double NegSamplingClassifier::probability(const Embedding& e_x, const Embedding& e_y) const {
  return sigmoid(logit(e_x, e_y));
}

NegSamplingClassifier train_neg_classifier(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                           const CandidatePool& pool, const EmbeddingTable& table, int neg_ratio,
                                           const TrainConfig& cfg) {
  if (neg_ratio < 1) throw ArgumentError("neg_ratio must be >= 1");
  if (X.cols() < 1 || X.cols() != Y.cols() || X.rows() != Y.rows()) {
    throw ArgumentError("train_neg_classifier: need matching non-empty e_x/e_y columns");
  }
  if (X.rows() != table.dim()) throw ArgumentError("train_neg_classifier: table dim differs from pair dim");
  require_present(pool, table);
  std::vector<const Embedding*> rankable;
  for (const auto& c : pool.candidates()) {
    const auto& e = table.at(c.id);
    if (!is_unrankable(e)) rankable.push_back(&e);
  }
  if (rankable.size() < static_cast<std::size_t>(neg_ratio) + 1) {
    throw ArgumentError("pool has " + std::to_string(rankable.size()) + " rankable candidates, need at least neg_ratio + 1 = " +
                        std::to_string(neg_ratio + 1));
  }

  const Eigen::Index d = X.rows();
  const Eigen::Index n = X.cols();
  const Eigen::Index m = n * (1 + neg_ratio);
  Eigen::MatrixXd F(3 * d, m);
  Eigen::VectorXd target(m);
  Rng rng(cfg.seed);
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_unrankable(X.col(i)) || is_unrankable(Y.col(i))) throw ArgumentError("train_neg_classifier: zero embedding in pair " + std::to_string(i));
    F.col(col) = features(X.col(i), Y.col(i));
    target[col++] = 1.0;
    for (int r = 0; r < neg_ratio; ++r) {
      const auto j = uniform_index(rng, rankable.size());
      F.col(col) = features(X.col(i), *rankable[j]);
      target[col++] = 0.0;
    }
  }

  // Interaction features are O(1/d) next to the others; descend on
  // standardized rows and fold the scaling back into raw weights at the end.
  const Eigen::VectorXd mu = F.rowwise().mean();
  Eigen::VectorXd sigma = (F.colwise() - mu).array().square().rowwise().mean().sqrt();
  for (Eigen::Index r = 0; r < sigma.size(); ++r) {
    if (sigma[r] < 1e-12) sigma[r] = 1.0;
  }
  F = (F.colwise() - mu).array().colwise() / sigma.array();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(3 * d);
  double bias = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Eigen::VectorXd z = F.transpose() * w;
    z.array() += bias;
    Eigen::VectorXd resid(m);
    for (Eigen::Index i = 0; i < m; ++i) resid[i] = sigmoid(z[i]) - target[i];
    const Eigen::VectorXd gw = F * resid * inv_m + 2.0 * cfg.l2_penalty * w;
    const double gb = resid.sum() * inv_m;
    w -= cfg.learning_rate * gw;
    bias -= cfg.learning_rate * gb;
    if (!w.allFinite() || !std::isfinite(bias)) throw DivergenceError(epoch + 1, "classifier weights not finite");
  }

  NegSamplingClassifier clf;
  clf.weights = w.cwiseQuotient(sigma);
  clf.bias = bias - clf.weights.dot(mu);
  clf.seed = cfg.seed;
  clf.neg_ratio = neg_ratio;
  return clf;
}

Ranking select_by_classifier(const Embedding& e_x, const CandidatePool& pool, const EmbeddingTable& table,
                             const NegSamplingClassifier& clf, std::size_t k) {
  require_k(k);
  require_present(pool, table);
  if (is_unrankable(e_x)) throw DomainError("query embedding is zero");
  Ranking out;
  for (const auto& c : pool.candidates()) {
    const auto& e = table.at(c.id);
    if (is_unrankable(e)) continue;
    out.push_back({c, clf.probability(e_x, e)});
  }
  rank_in_place(out, k);
  return out;
}

std::string map_to_json(const LinearMapd& map) {
  json w = json::array();
  for (Eigen::Index r = 0; r < map.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < map.W.cols(); ++c) w.push_back(map.W(r, c));
  }
  json doc = {{"dim", map.dim()}, {"b", map.b}, {"W", w}};
  return doc.dump() + "\n";
}

LinearMapd map_from_json(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    const auto dim = doc.at("dim").get<Eigen::Index>();
    const auto& w = doc.at("W");
    if (dim < 1 || w.size() != static_cast<std::size_t>(dim * dim)) throw FormatError("map: W must hold dim*dim values");
    LinearMapd map = LinearMapd::identity(dim);
    map.b = doc.at("b").get<double>();
    for (Eigen::Index r = 0; r < dim; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) map.W(r, c) = w.at(static_cast<std::size_t>(r * dim + c)).get<double>();
    }
    if (!map.W.allFinite() || !std::isfinite(map.b)) throw FormatError("map: non-finite parameters");
    return map;
  } catch (const json::exception& e) {
    throw FormatError(std::string("map: ") + e.what());
  }
}

void save_map(const LinearMapd& map, const std::filesystem::path& path) {
  detail::write_file(path, map_to_json(map));
}

LinearMapd load_map(const std::filesystem::path& path) { return map_from_json(detail::read_file(path)); }

std::string classifier_to_json(const NegSamplingClassifier& clf) {
  json w = json::array();
  for (Eigen::Index i = 0; i < clf.weights.size(); ++i) w.push_back(clf.weights[i]);
  json doc = {{"dim", clf.dim()}, {"bias", clf.bias}, {"weights", w}, {"seed", clf.seed}, {"neg_ratio", clf.neg_ratio}};
  return doc.dump() + "\n";
}

NegSamplingClassifier classifier_from_json(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    NegSamplingClassifier clf;
    const auto dim = doc.at("dim").get<Eigen::Index>();
    const auto& w = doc.at("weights");
    if (w.size() != static_cast<std::size_t>(3 * dim)) throw FormatError("classifier: weights must hold 3*dim values");
    clf.weights.resize(3 * dim);
    for (Eigen::Index i = 0; i < 3 * dim; ++i) clf.weights[i] = w.at(static_cast<std::size_t>(i)).get<double>();
    clf.bias = doc.at("bias").get<double>();
    clf.seed = doc.at("seed").get<std::uint64_t>();
    clf.neg_ratio = doc.at("neg_ratio").get<int>();
    return clf;
  } catch (const json::exception& e) {
    throw FormatError(std::string("classifier: ") + e.what());
  }
}

}  // namespace gps
