// tf-idf hand values come from tests/oracles/hand_values.py.
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "gps/error.hpp"
#include "gps/rng.hpp"
#include "gps/select.hpp"

using gps::Embedding;

namespace {

struct Fixture {
  gps::CandidatePool pool;
  gps::EmbeddingTable table;
  Embedding query;
  gps::LinearMapd map;
};

Embedding random_vec(gps::Rng& rng, Eigen::Index d) {
  Embedding e(d);
  for (Eigen::Index k = 0; k < d; ++k) e[k] = gps::standard_normal(rng);
  return e;
}

// Random pool of `n` candidates in dim `d`, with a random map near identity.
// Candidate ids are shuffled so id order differs from pool order.
Fixture random_fixture(std::uint64_t seed, std::size_t n, Eigen::Index d) {
  auto rng = gps::substream(777, seed);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  gps::shuffle(perm, rng);
  std::vector<gps::Candidate> cands;
  gps::EmbeddingTable table(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = "c" + std::to_string(1000 + perm[i]);
    cands.push_back({id, "text " + id});
    table.insert(id, random_vec(rng, d));
  }
  auto map = gps::LinearMapd::identity(d);
  map.W = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return 0.3 * gps::standard_normal(rng); });
  map.b = 0.8;
  return {gps::CandidatePool(cands), table, random_vec(rng, d), map};
}

// Exhaustive score-sort oracle.
std::vector<std::pair<std::string, double>> oracle_topk(const Fixture& f, const gps::LinearMapd& map, std::size_t k) {
  std::vector<std::pair<std::string, double>> all;
  for (const auto& c : f.pool.candidates()) {
    const auto& e = f.table.at(c.id);
    if (e.norm() == 0) continue;
    const Embedding u = map.apply(Embedding(e / e.norm()));
    all.push_back({c.id, f.query.dot(u) / (f.query.norm() * u.norm())});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<std::string> ids(const gps::Ranking& r) {
  std::vector<std::string> out;
  for (const auto& s : r) out.push_back(s.candidate.id);
  return out;
}

gps::CandidatePool make(std::vector<gps::Candidate> c) { return gps::CandidatePool(std::move(c)); }

}  // namespace

TEST(SelectTopk, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto f = random_fixture(seed, 1 + seed * 3, 6);
    const auto got = gps::select_topk(f.query, f.pool, f.table, f.map, 5);
    const auto want = oracle_topk(f, f.map, 5);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].candidate.id, want[i].first) << "seed " << seed << " rank " << i;
      EXPECT_NEAR(got[i].score, want[i].second, 1e-12);
    }
  }
}

TEST(SelectTopk, ExactMatchRanksFirstWithScoreOne) {
  auto f = random_fixture(3, 20, 8);
  const auto& target = f.pool[7];
  f.query = f.table.at(target.id) * 2.5;
  const auto r = gps::select_cos(f.query, f.pool, f.table, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].candidate.id, target.id);
  EXPECT_NEAR(r[0].score, 1.0, 1e-12);
}

TEST(SelectTopk, PositiveScalingChangesNothing) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = random_fixture(seed, 40, 5);
    gps::EmbeddingTable scaled(5);
    for (const auto& [id, e] : f.table.entries()) scaled.insert(id, e * 3.7);
    const auto a = gps::select_topk(f.query, f.pool, f.table, f.map, 40);
    const auto b = gps::select_topk(Embedding(f.query * 0.01), f.pool, scaled, f.map, 40);
    EXPECT_EQ(ids(a), ids(b));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].score, b[i].score, 1e-12);
  }
}

TEST(SelectTopk, KLargerThanPoolReturnsRankablePool) {
  auto f = random_fixture(1, 6, 4);
  gps::EmbeddingTable t(4);
  for (const auto& [id, e] : f.table.entries()) t.insert(id, id == f.pool[2].id ? Embedding(Embedding::Zero(4)) : e);
  const auto r = gps::select_topk(f.query, f.pool, t, f.map, 100);
  EXPECT_EQ(r.size(), 5u);
  for (const auto& s : r) EXPECT_NE(s.candidate.id, f.pool[2].id);
}

TEST(SelectTopk, SingleCandidatePool) {
  auto f = random_fixture(2, 1, 4);
  const auto r = gps::select_topk(f.query, f.pool, f.table, f.map, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].candidate.id, f.pool[0].id);
}

TEST(SelectTopk, IdentityMapEqualsSelectCos) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = random_fixture(seed, 25, 7);
    const auto a = gps::select_cos(f.query, f.pool, f.table, 10);
    const auto b = gps::select_topk(f.query, f.pool, f.table, gps::LinearMapd::identity(7), 10);
    ASSERT_EQ(ids(a), ids(b));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].score, b[i].score);
  }
}

TEST(SelectTopk, ErrorsListMissingIds) {
  const auto f = random_fixture(4, 5, 4);
  gps::EmbeddingTable partial(4);
  partial.insert(f.pool[0].id, f.table.at(f.pool[0].id));
  partial.insert(f.pool[1].id, f.table.at(f.pool[1].id));
  try {
    gps::select_cos(f.query, f.pool, partial, 1);
    FAIL();
  } catch (const gps::LookupError& e) {
    const std::string msg = e.what();
    for (std::size_t i = 2; i < 5; ++i) EXPECT_NE(msg.find(f.pool[i].id), std::string::npos) << msg;
  }
  EXPECT_THROW(gps::select_cos(f.query, f.pool, f.table, 0), gps::ArgumentError);
  EXPECT_THROW(gps::select_cos(Embedding::Zero(4), f.pool, f.table, 1), gps::DomainError);
}

TEST(SelectTopk, TiesBrokenById) {
  gps::EmbeddingTable t(2);
  t.insert("b", Embedding::Unit(2, 0));
  t.insert("a", Embedding::Unit(2, 0) * 2);
  t.insert("c", Embedding::Unit(2, 1));
  const auto pool = make({{"b", "x"}, {"c", "y"}, {"a", "z"}});
  EXPECT_EQ(ids(gps::select_cos(Embedding::Unit(2, 0), pool, t, 3)), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Tfidf, HandComputedCosines) {
  const auto pool = make({{"p0", "you cannot blame all people"},
                          {"p1", "banning will not solve anything"},
                          {"p2", "all people deserve respect"}});
  const auto r = gps::select_tfidf("all people deserve respect", pool, 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].candidate.id, "p2");
  EXPECT_NEAR(r[0].score, 1.0, 1e-12);
  EXPECT_EQ(r[1].candidate.id, "p0");
  EXPECT_NEAR(r[1].score, 0.31934116407699986, 1e-12);
  EXPECT_EQ(r[2].candidate.id, "p1");
  EXPECT_EQ(r[2].score, 0.0);
}

TEST(Tfidf, NoSharedTokenIsEmpty) {
  const auto pool = make({{"p0", "a b"}, {"p1", "c d"}});
  EXPECT_TRUE(gps::select_tfidf("x y z", pool, 2).empty());
  EXPECT_TRUE(gps::select_tfidf("", pool, 2).empty());
}

TEST(Tfidf, DuplicatesAdjacentInIdOrder) {
  const auto pool = make({{"z", "we can talk"}, {"m", "something else"}, {"b", "we can talk"}});
  const auto r = gps::select_tfidf("talk", pool, 3);
  EXPECT_EQ(ids(r), (std::vector<std::string>{"b", "z", "m"}));
  EXPECT_EQ(r[0].score, r[1].score);
}

TEST(Tfidf, MatchesBruteForce) {
  const std::vector<std::string> words{"we", "all", "people", "respect", "talk", "they", "help", "care", "no"};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = gps::substream(55, seed);
    std::vector<gps::Candidate> c;
    for (int i = 0; i < 30; ++i) {
      std::string t;
      for (int k = 0; k < 5; ++k) t += words[gps::uniform_index(rng, words.size())] + " ";
      c.push_back({"d" + std::to_string(i), t});
    }
    const auto pool = gps::CandidatePool(c);
    const gps::TfidfIndex index(pool);
    const std::string query = "we respect people who talk";
    // Oracle: dense vectors over the index's own idf.
    auto vec = [&](const std::string& text) {
      std::map<std::string, double> v;
      for (const auto& w : words) v[w] = 0;
      std::istringstream in(text);
      for (std::string w; in >> w;) v[w] += 1;
      for (auto& [w, x] : v) x *= index.idf(w);
      return v;
    };
    const auto q = vec(query);
    std::vector<std::pair<std::string, double>> want;
    for (const auto& cand : c) {
      const auto d = vec(cand.text);
      double dot = 0, nq = 0, nd = 0;
      for (const auto& w : words) {
        dot += q.at(w) * d.at(w);
        nq += q.at(w) * q.at(w);
        nd += d.at(w) * d.at(w);
      }
      want.push_back({cand.id, dot / std::sqrt(nq * nd)});
    }
    const auto got = index.top_k(query, 30);
    ASSERT_EQ(got.size(), 30u);
    std::map<std::string, double> got_score;
    for (const auto& s : got) got_score[s.candidate.id] = s.score;
    for (const auto& [id, s] : want) EXPECT_NEAR(got_score.at(id), s, 1e-12);
    for (std::size_t i = 1; i < got.size(); ++i) {
      EXPECT_TRUE(got[i - 1].score > got[i].score ||
                  (got[i - 1].score == got[i].score && got[i - 1].candidate.id < got[i].candidate.id));
    }
  }
}

namespace {

// Positives: x_t = e_t, y near e_t (cos > 0.9). Pool lives in the other half
// of the space, so every sampled negative has cos < 0.1 with every x.
struct SeparableData {
  Eigen::MatrixXd X, Y;
  gps::CandidatePool pool;
  gps::EmbeddingTable table{16};
};

SeparableData separable(std::uint64_t seed) {
  auto rng = gps::substream(seed, 0);
  SeparableData s;
  s.X.resize(16, 40);
  s.Y.resize(16, 40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    const auto t = i % 8;
    s.X.col(i) = Embedding::Unit(16, t);
    Embedding y = Embedding::Unit(16, t);
    for (Eigen::Index k = 0; k < 8; ++k) y[k] += 0.05 * gps::standard_normal(rng);
    s.Y.col(i) = y.normalized();
  }
  std::vector<gps::Candidate> c;
  for (int j = 0; j < 30; ++j) {
    Embedding e = Embedding::Zero(16);
    for (Eigen::Index k = 8; k < 16; ++k) e[k] = gps::standard_normal(rng);
    const auto id = "n" + std::to_string(j);
    c.push_back({id, "neg " + id});
    s.table.insert(id, e);
  }
  s.pool = gps::CandidatePool(c);
  return s;
}

}  // namespace

TEST(NegClassifier, SeparableDataTrainsToFullAccuracy) {
  const auto s = separable(1);
  for (Eigen::Index i = 0; i < 40; ++i) ASSERT_GT(gps::cosine(s.X.col(i), s.Y.col(i)), 0.9);
  const auto clf = gps::train_neg_classifier(s.X, s.Y, s.pool, s.table, 4, {0.5, 200, 10, 3, 1e-4});
  for (Eigen::Index i = 0; i < 40; ++i) {
    const Embedding x = s.X.col(i);
    EXPECT_GT(clf.probability(x, s.Y.col(i)), 0.5);
    for (const auto& [id, e] : s.table.entries()) {
      ASSERT_LT(std::abs(gps::cosine(x, e)), 0.1);
      EXPECT_LT(clf.probability(x, e), 0.5);
    }
  }
}

TEST(NegClassifier, ProbabilitiesInOpenIntervalAndSeedDeterministic) {
  const auto s = separable(2);
  const auto a = gps::train_neg_classifier(s.X, s.Y, s.pool, s.table, 2, {0.5, 50, 10, 7, 1e-4});
  const auto b = gps::train_neg_classifier(s.X, s.Y, s.pool, s.table, 2, {0.5, 50, 10, 7, 1e-4});
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  auto rng = gps::substream(3, 3);
  for (int i = 0; i < 100; ++i) {
    const double p = a.probability(random_vec(rng, 16) * 100, random_vec(rng, 16));
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(NegClassifier, PoolTooSmall) {
  auto s = separable(3);
  const auto tiny = make({s.pool[0], s.pool[1]});
  EXPECT_THROW(gps::train_neg_classifier(s.X, s.Y, tiny, s.table, 2, {}), gps::ArgumentError);
  EXPECT_THROW(gps::train_neg_classifier(s.X, s.Y, s.pool, s.table, 0, {}), gps::ArgumentError);
}

TEST(NegClassifier, SelectionMatchesBruteForceAndLogitOrder) {
  const auto s = separable(4);
  auto clf = gps::train_neg_classifier(s.X, s.Y, s.pool, s.table, 4, {0.5, 100, 10, 1, 1e-4});
  // Shrink logits so the probability clamp never creates ties.
  clf.weights *= 1e-3;
  clf.bias *= 1e-3;
  auto rng = gps::substream(4, 4);
  for (int trial = 0; trial < 10; ++trial) {
    const Embedding x = random_vec(rng, 16);
    const auto got = gps::select_by_classifier(x, s.pool, s.table, clf, s.pool.size());
    std::vector<std::tuple<double, double, std::string>> want;
    for (const auto& c : s.pool.candidates()) {
      want.emplace_back(clf.probability(x, s.table.at(c.id)), clf.logit(x, s.table.at(c.id)), c.id);
    }
    std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
      return std::get<1>(a) != std::get<1>(b) ? std::get<1>(a) > std::get<1>(b) : std::get<2>(a) < std::get<2>(b);
    });
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].candidate.id, std::get<2>(want[i]));
      EXPECT_EQ(got[i].score, std::get<0>(want[i]));
    }
  }
  gps::EmbeddingTable missing(16);
  EXPECT_THROW(gps::select_by_classifier(Embedding::Ones(16), s.pool, missing, clf, 1), gps::LookupError);
}

TEST(Persistence, MapAndClassifierRoundTripExactly) {
  const auto f = random_fixture(9, 3, 5);
  EXPECT_TRUE(gps::map_from_json(gps::map_to_json(f.map)) == f.map);
  const auto s = separable(5);
  const auto clf = gps::train_neg_classifier(s.X, s.Y, s.pool, s.table, 1, {0.5, 20, 10, 1, 1e-4});
  const auto back = gps::classifier_from_json(gps::classifier_to_json(clf));
  EXPECT_EQ(back.weights, clf.weights);
  EXPECT_EQ(back.bias, clf.bias);
  EXPECT_EQ(back.seed, clf.seed);
  EXPECT_EQ(back.neg_ratio, clf.neg_ratio);
  EXPECT_THROW(gps::map_from_json("{\"dim\": 2, \"b\": 1, \"W\": [1, 2, 3]}"), gps::FormatError);
}
