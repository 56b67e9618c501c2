// LM hand values come from tests/oracles/hand_values.py.
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gps/error.hpp"
#include "gps/prune.hpp"

namespace {

gps::CandidatePool numbered(std::size_t n) {
  std::vector<gps::Candidate> c;
  for (std::size_t i = 0; i < n; ++i) c.push_back({"c" + std::to_string(i), "text " + std::to_string(i)});
  return gps::CandidatePool(c);
}

std::vector<double> spread_scores(std::size_t n) {
  std::vector<double> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(std::sin(static_cast<double>(i) * 1.7) * 3.0);
  return s;
}

}  // namespace

TEST(NgramLm, VocabularyIsTokensPlusSentinels) {
  const auto lm = gps::train_lm_scorer({"a b", "b c"}, 2, 0.1);
  EXPECT_EQ(lm.vocabulary(), (std::vector<std::string>{"</s>", "<s>", "a", "b", "c"}));
}

TEST(NgramLm, RejectsBadArguments) {
  EXPECT_THROW(gps::train_lm_scorer({"a"}, 0, 0.1), gps::ArgumentError);
  EXPECT_THROW(gps::train_lm_scorer({}, 2, 0.1), gps::ArgumentError);
  EXPECT_THROW(gps::train_lm_scorer({"a"}, 2, 0.0), gps::ArgumentError);
}

TEST(NgramLm, HandComputedSeenAndUnseen) {
  const auto lm = gps::train_lm_scorer({"a b c d"}, 2, 0.1);
  EXPECT_EQ(lm.outcome_count(), 5u);
  EXPECT_NEAR(lm.score("a b c d"), -0.31015492830383945, 1e-12);
  EXPECT_NEAR(lm.score("b a d c"), -2.70805020110221, 1e-12);
  EXPECT_GT(lm.score("a b c d"), lm.score("b a d c"));
}

TEST(NgramLm, UniformUnigramIsMinusLogV) {
  const auto lm = gps::train_lm_scorer({"a b c"}, 1, 0.5);
  const double v = static_cast<double>(lm.outcome_count());
  EXPECT_NEAR(lm.score("c a"), -std::log(v), 1e-12);
  EXPECT_NEAR(lm.score("b"), -std::log(v), 1e-12);
}

TEST(NgramLm, EmptyTextIsMinusInfinity) {
  const auto lm = gps::train_lm_scorer({"a b"}, 2, 0.1);
  EXPECT_EQ(lm.score(""), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(lm.score("  "), -std::numeric_limits<double>::infinity());
}

TEST(NgramLm, RefitIsDeterministic) {
  const std::vector<std::string> corpus{"we can talk", "talk to us", "we listen"};
  const auto a = gps::train_lm_scorer(corpus, 3, 0.2);
  const auto b = gps::train_lm_scorer(corpus, 3, 0.2);
  for (const char* s : {"we talk", "us to talk we", "unknown words here"}) EXPECT_EQ(a.score(s), b.score(s));
}

TEST(ExternalScores, ParseAndLookup) {
  const auto s = gps::parse_scores("a\t0.5\nb\t-2\nc\t1e3\n");
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.score("b"), -2.0);
  EXPECT_EQ(s.score("c"), 1000.0);
  EXPECT_THROW(s.score("d"), gps::LookupError);
  EXPECT_THROW(gps::parse_scores("a\t1\na\t2\n"), gps::FormatError);
  EXPECT_THROW(gps::parse_scores("a\tNaN\n"), gps::FormatError);
  EXPECT_THROW(gps::parse_scores("a\tabc\n"), gps::FormatError);
}

TEST(ExternalScores, MissingIdDuringPruneIsLookupError) {
  const gps::GrammaticalityScorer scorer = gps::parse_scores("c0\t1\n");
  EXPECT_THROW(gps::prune(numbered(2), scorer, gps::ThresholdPolicy{0.0}), gps::LookupError);
}

TEST(Prune, ThresholdMinusInfinityKeepsAll) {
  const auto pool = numbered(20);
  const auto out = gps::prune_scored(pool, spread_scores(20), gps::ThresholdPolicy{-std::numeric_limits<double>::infinity()});
  EXPECT_EQ(out.fingerprint(), pool.fingerprint());
}

TEST(Prune, KeepHalfOfTen) {
  EXPECT_EQ(gps::prune_scored(numbered(10), spread_scores(10), gps::KeepFractionPolicy{0.5}).size(), 5u);
}

TEST(Prune, KeepFractionOneIsIdentity) {
  const auto pool = numbered(17);
  const auto out = gps::prune_scored(pool, spread_scores(17), gps::KeepFractionPolicy{1.0});
  EXPECT_EQ(out.fingerprint(), pool.fingerprint());
}

TEST(Prune, KeepsTopScoresInInputOrder) {
  const auto pool = numbered(5);
  const auto out = gps::prune_scored(pool, {0.1, 0.9, 0.5, 0.9, -1.0}, gps::KeepFractionPolicy{0.6});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].id, "c1");
  EXPECT_EQ(out[1].id, "c2");
  EXPECT_EQ(out[2].id, "c3");
  EXPECT_EQ(out[1].grammaticality, 0.5);
}

TEST(Prune, TiesBrokenById) {
  const auto pool = numbered(4);
  const auto out = gps::prune_scored(pool, {1.0, 1.0, 1.0, 1.0}, gps::KeepFractionPolicy{0.5});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, "c0");
  EXPECT_EQ(out[1].id, "c1");
}

TEST(Prune, MinusInfinityAlwaysPruned) {
  const auto ninf = -std::numeric_limits<double>::infinity();
  const auto out = gps::prune_scored(numbered(3), {ninf, 0.0, ninf}, gps::KeepFractionPolicy{1.0});
  EXPECT_EQ(out.size(), 1u);
  EXPECT_EQ(gps::prune_scored(numbered(3), {ninf, 0.0, ninf}, gps::ThresholdPolicy{ninf}).size(), 1u);
}

TEST(Prune, MonotoneInThreshold) {
  const auto pool = numbered(60);
  const auto scores = spread_scores(60);
  std::size_t prev = pool.size() + 1;
  for (double t = -3.5; t <= 3.5; t += 0.7) {
    const auto n = gps::prune_scored(pool, scores, gps::ThresholdPolicy{t}).size();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(Prune, RejectsBadPolicyAndMisalignedScores) {
  EXPECT_THROW(gps::prune_scored(numbered(3), {1, 2, 3}, gps::KeepFractionPolicy{0.0}), gps::ArgumentError);
  EXPECT_THROW(gps::prune_scored(numbered(3), {1, 2, 3}, gps::KeepFractionPolicy{1.5}), gps::ArgumentError);
  EXPECT_THROW(gps::prune_scored(numbered(3), {1, 2}, gps::ThresholdPolicy{0}), gps::ArgumentError);
}

TEST(Prune, PaperScalePresets) {
  EXPECT_NEAR(gps::keep_fraction_preset("conan").fraction, 15.4 / 30, 1e-12);
  EXPECT_NEAR(gps::keep_fraction_preset("reddit").fraction, 17.9 / 30, 1e-12);
  EXPECT_NEAR(gps::keep_fraction_preset("gab").fraction, 25.4 / 40, 1e-12);
  EXPECT_THROW(gps::keep_fraction_preset("other"), gps::ArgumentError);
  // 30k candidates under the conan preset leave 15.4k.
  std::vector<double> s(30000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
  std::vector<gps::Candidate> c;
  for (std::size_t i = 0; i < s.size(); ++i) c.push_back({"c" + std::to_string(i), "t" + std::to_string(i)});
  EXPECT_EQ(gps::prune_scored(gps::CandidatePool(c), s, gps::keep_fraction_preset("conan")).size(), 15400u);
}

TEST(Prune, LmScorerRanksFluentAboveShuffled) {
  const gps::GrammaticalityScorer lm = gps::train_lm_scorer({"we should all respect each other"}, 2, 0.1);
  const gps::CandidatePool pool(std::vector<gps::Candidate>{{"a", "other each respect all should we"}, {"b", "we should all respect each other"}});
  const auto out = gps::prune(pool, lm, gps::KeepFractionPolicy{0.5});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, "b");
  ASSERT_TRUE(out[0].grammaticality.has_value());
}
