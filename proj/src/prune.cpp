#include "gps/prune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "gps/error.hpp"
#include "gps/text.hpp"
#include "io_util.hpp"

namespace gps {
namespace {

constexpr const char* kBegin = "<s>";
constexpr const char* kEnd = "</s>";

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

NgramLmScorer::NgramLmScorer(const std::vector<std::string>& corpus, int order, double smoothing)
    : order_(order), smoothing_(smoothing) {
  if (corpus.empty()) throw ArgumentError("lm scorer: empty corpus");
  if (order < 1) throw ArgumentError("lm scorer: order must be >= 1");
  if (!(smoothing > 0) || !std::isfinite(smoothing)) throw ArgumentError("lm scorer: smoothing must be > 0");
  const auto ctx_len = static_cast<std::size_t>(order - 1);
  std::set<std::string> outcomes{kEnd};
  for (const auto& text : corpus) {
    auto toks = tokenize(text);
    for (const auto& t : toks) {
      outcomes.insert(t);
      tokens_[t] = 1;
    }
    std::vector<std::string> seq(ctx_len, kBegin);
    seq.insert(seq.end(), toks.begin(), toks.end());
    seq.push_back(kEnd);
    for (std::size_t i = ctx_len; i < seq.size(); ++i) {
      std::vector<std::string> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - ctx_len),
                                   seq.begin() + static_cast<std::ptrdiff_t>(i));
      ++counts_[ctx][seq[i]];
      ++context_totals_[ctx];
    }
  }
  outcomes_ = outcomes.size();
}

std::vector<std::string> NgramLmScorer::vocabulary() const {
  std::vector<std::string> v;
  for (const auto& [t, _] : tokens_) v.push_back(t);
  v.push_back(kBegin);
  v.push_back(kEnd);
  std::sort(v.begin(), v.end());
  return v;
}

double NgramLmScorer::score(std::string_view text) const {
  const auto toks = tokenize(text);
  if (toks.empty()) return -std::numeric_limits<double>::infinity();
  const auto ctx_len = static_cast<std::size_t>(order_ - 1);
  std::vector<std::string> seq(ctx_len, kBegin);
  seq.insert(seq.end(), toks.begin(), toks.end());
  seq.push_back(kEnd);
  const double denom_extra = smoothing_ * static_cast<double>(outcomes_);
  double sum = 0.0;
  std::size_t events = 0;
  for (std::size_t i = ctx_len; i < seq.size(); ++i) {
    std::vector<std::string> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - ctx_len),
                                 seq.begin() + static_cast<std::ptrdiff_t>(i));
    double count = 0.0, total = 0.0;
    if (auto it = counts_.find(ctx); it != counts_.end()) {
      total = static_cast<double>(context_totals_.at(ctx));
      if (auto w = it->second.find(seq[i]); w != it->second.end()) count = static_cast<double>(w->second);
    }
    sum += std::log((count + smoothing_) / (total + denom_extra));
    ++events;
  }
  return sum / static_cast<double>(events);
}

double ExternalScores::score(const std::string& id) const {
  auto it = table_.find(id);
  if (it == table_.end()) throw LookupError("no external grammaticality score for candidate '" + id + "'");
  return it->second;
}

NgramLmScorer train_lm_scorer(const std::vector<std::string>& corpus, int order, double smoothing) {
  return NgramLmScorer(corpus, order, smoothing);
}

double grammaticality_score(const GrammaticalityScorer& scorer, const Candidate& candidate) {
  if (trim(candidate.text).empty()) return -std::numeric_limits<double>::infinity();
  return std::visit(overloaded{[&](const NgramLmScorer& lm) { return lm.score(candidate.text); },
                               [&](const ExternalScores& ext) { return ext.score(candidate.id); }},
                    scorer);
}

ExternalScores parse_scores(std::string_view content) {
  std::unordered_map<std::string, double> table;
  const auto lines = detail::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(i + 1, "expected id<TAB>score");
    const auto id = trim(line.substr(0, tab));
    double v = 0;
    if (id.empty()) throw ParseError(i + 1, "empty candidate id");
    if (!detail::parse_double(trim(line.substr(tab + 1)), v)) {
      throw ParseError(i + 1, "score is not a finite decimal");
    }
    if (!table.emplace(id, v).second) throw ParseError(i + 1, "duplicate id '" + id + "'");
  }
  return ExternalScores(std::move(table));
}

ExternalScores ingest_scores(const std::filesystem::path& path) {
  return parse_scores(detail::read_file(path));
}

KeepFractionPolicy keep_fraction_preset(std::string_view dataset) {
  if (dataset == "conan") return {15.4 / 30.0};
  if (dataset == "reddit") return {17.9 / 30.0};
  if (dataset == "gab") return {25.4 / 40.0};
  throw ArgumentError("no keep-fraction preset for '" + std::string(dataset) + "'");
}

CandidatePool prune_scored(const CandidatePool& pool, const std::vector<double>& scores,
                           const PrunePolicy& policy) {
  if (scores.size() != pool.size()) throw ArgumentError("prune: score count does not match pool size");
  const std::size_t n = pool.size();
  std::vector<bool> keep(n, false);
  if (const auto* t = std::get_if<ThresholdPolicy>(&policy)) {
    for (std::size_t i = 0; i < n; ++i) keep[i] = scores[i] != -std::numeric_limits<double>::infinity() && scores[i] >= t->threshold;
  } else {
    const double f = std::get<KeepFractionPolicy>(policy).fraction;
    if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("prune: keep_fraction must be in (0, 1]");
    const auto quota = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return pool[a].id < pool[b].id;
    });
    for (std::size_t r = 0; r < std::min(quota, n); ++r) {
      if (scores[order[r]] == -std::numeric_limits<double>::infinity()) break;
      keep[order[r]] = true;
    }
  }
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    Candidate c = pool[i];
    c.grammaticality = scores[i];
    out.push_back(std::move(c));
  }
  return CandidatePool(std::move(out));
}

CandidatePool prune(const CandidatePool& pool, const GrammaticalityScorer& scorer, const PrunePolicy& policy) {
  std::vector<double> scores;
  scores.reserve(pool.size());
  for (const auto& c : pool.candidates()) scores.push_back(grammaticality_score(scorer, c));
  return prune_scored(pool, scores, policy);
}

}  // namespace gps
