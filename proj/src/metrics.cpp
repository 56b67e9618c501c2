#include "gps/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "gps/error.hpp"
#include "gps/rng.hpp"
#include "gps/text.hpp"
#include "io_util.hpp"

namespace gps {
namespace {

using GramCounts = std::unordered_map<std::string, std::size_t>;

// n-gram counts keyed by the tokens joined with a unit separator.
GramCounts gram_counts(const TokenSequence& toks, int n) {
  GramCounts out;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= toks.size(); ++i) {
    std::string key = toks[i];
    for (std::size_t j = 1; j < un; ++j) {
      key.push_back('\x1f');
      key += toks[i + j];
    }
    ++out[key];
  }
  return out;
}

void require_n(int n) {
  if (n < 1) throw ArgumentError("n must be >= 1");
}

std::size_t closest_length(std::size_t hyp, const std::vector<std::size_t>& refs) {
  std::size_t best = refs.front();
  for (auto r : refs) {
    const auto d = r > hyp ? r - hyp : hyp - r;
    const auto bd = best > hyp ? best - hyp : hyp - best;
    if (d < bd || (d == bd && r < best)) best = r;
  }
  return best;
}

// BLEU from per-order hypothesis counts and a max-reference-count lookup.
template <typename MaxRef>
double bleu_core(const std::vector<GramCounts>& hyp, std::size_t hyp_len, std::size_t ref_len, int n,
                 MaxRef&& max_ref) {
  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    std::size_t total = 0, clipped = 0;
    for (const auto& [g, c] : hyp[static_cast<std::size_t>(k - 1)]) {
      total += c;
      clipped += std::min(c, max_ref(k, g));
    }
    const double p = total ? static_cast<double>(clipped) / static_cast<double>(total) : 0.0;
    log_sum += std::log(std::max(p, kBleuEpsilon)) / n;
  }
  const double c = static_cast<double>(hyp_len);
  const double r = static_cast<double>(ref_len);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

std::vector<GramCounts> counts_up_to(const TokenSequence& toks, int n) {
  std::vector<GramCounts> out;
  for (int k = 1; k <= n; ++k) out.push_back(gram_counts(toks, k));
  return out;
}

}  // namespace

double dist_n(const std::vector<std::string>& outputs, int n) {
  require_n(n);
  std::unordered_set<std::string> unique;
  std::size_t total = 0;
  for (const auto& o : outputs) {
    for (auto& [g, c] : gram_counts(tokenize(o), n)) {
      unique.insert(g);
      total += c;
    }
  }
  return total ? static_cast<double>(unique.size()) / static_cast<double>(total) : 0.0;
}

double ent_n(const std::vector<std::string>& outputs, int n) {
  require_n(n);
  GramCounts all;
  std::size_t total = 0;
  for (const auto& o : outputs) {
    for (auto& [g, c] : gram_counts(tokenize(o), n)) {
      all[g] += c;
      total += c;
    }
  }
  if (total == 0) return 0.0;
  // Sum in key order so the result does not depend on hash iteration order.
  std::vector<std::pair<std::string, std::size_t>> sorted(all.begin(), all.end());
  std::sort(sorted.begin(), sorted.end());
  const double F = static_cast<double>(total);
  double h = 0.0;
  for (const auto& [g, f] : sorted) {
    const double p = static_cast<double>(f) / F;
    h -= p * std::log(p);
  }
  return h;
}

double bleu_n(std::string_view hypothesis, const std::vector<std::string>& references, int n) {
  require_n(n);
  if (references.empty()) throw ArgumentError("bleu: no references");
  const auto hyp_toks = tokenize(hypothesis);
  if (hyp_toks.empty()) return 0.0;
  std::vector<std::vector<GramCounts>> refs;
  std::vector<std::size_t> lens;
  for (const auto& r : references) {
    auto t = tokenize(r);
    lens.push_back(t.size());
    refs.push_back(counts_up_to(t, n));
  }
  auto max_ref = [&](int k, const std::string& g) {
    std::size_t m = 0;
    for (const auto& r : refs) {
      const auto& rc = r[static_cast<std::size_t>(k - 1)];
      if (auto it = rc.find(g); it != rc.end()) m = std::max(m, it->second);
    }
    return m;
  };
  return bleu_core(counts_up_to(hyp_toks, n), hyp_toks.size(), closest_length(hyp_toks.size(), lens), n, max_ref);
}

double self_bleu_n(const std::vector<std::string>& outputs, int n, std::optional<std::size_t> sample,
                   std::uint64_t seed) {
  require_n(n);
  const std::size_t N = outputs.size();
  if (N < 2) throw ArgumentError("self-bleu needs at least 2 outputs");

  std::vector<std::vector<GramCounts>> counts;
  std::vector<std::size_t> lens;
  for (const auto& o : outputs) {
    auto t = tokenize(o);
    lens.push_back(t.size());
    counts.push_back(counts_up_to(t, n));
  }
  // Per order and n-gram: the two largest counts across outputs and the
  // owner of the largest, so "max over all other outputs" is O(1).
  struct Top2 {
    std::size_t best = 0, second = 0, owner = 0;
  };
  std::vector<std::unordered_map<std::string, Top2>> top(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < N; ++j) {
    for (int k = 1; k <= n; ++k) {
      auto& tk = top[static_cast<std::size_t>(k - 1)];
      for (const auto& [g, c] : counts[j][static_cast<std::size_t>(k - 1)]) {
        auto& t = tk[g];
        if (c > t.best) {
          t.second = t.best;
          t.best = c;
          t.owner = j;
        } else if (c > t.second) {
          t.second = c;
        }
      }
    }
  }

  std::vector<std::size_t> hyps(N);
  std::iota(hyps.begin(), hyps.end(), 0);
  if (sample && *sample < N) {
    if (*sample == 0) throw ArgumentError("self-bleu sample must be >= 1");
    Rng rng(seed);
    shuffle(hyps, rng);
    hyps.resize(*sample);
    std::sort(hyps.begin(), hyps.end());
  }

  double sum = 0.0;
  std::vector<std::size_t> others;
  for (auto i : hyps) {
    others.clear();
    for (std::size_t j = 0; j < N; ++j) {
      if (j != i) others.push_back(lens[j]);
    }
    auto max_ref = [&](int k, const std::string& g) {
      const auto& t = top[static_cast<std::size_t>(k - 1)].at(g);
      return t.owner == i ? t.second : t.best;
    };
    sum += bleu_core(counts[i], lens[i], closest_length(lens[i], others), n, max_ref);
  }
  return sum / static_cast<double>(hyps.size());
}

double rouge_2(std::string_view hypothesis, const std::vector<std::string>& references) {
  if (references.empty()) throw ArgumentError("rouge: no references");
  const auto hyp = gram_counts(tokenize(hypothesis), 2);
  std::size_t hyp_total = 0;
  for (const auto& [g, c] : hyp) hyp_total += c;
  double best = 0.0;
  for (const auto& r : references) {
    const auto ref = gram_counts(tokenize(r), 2);
    std::size_t ref_total = 0, overlap = 0;
    for (const auto& [g, c] : ref) {
      ref_total += c;
      if (auto it = hyp.find(g); it != hyp.end()) overlap += std::min(c, it->second);
    }
    if (overlap == 0 || hyp_total == 0 || ref_total == 0) continue;
    const double p = static_cast<double>(overlap) / static_cast<double>(hyp_total);
    const double rc = static_cast<double>(overlap) / static_cast<double>(ref_total);
    best = std::max(best, 2.0 * p * rc / (p + rc));
  }
  return best;
}

Bm25Stats Bm25Stats::build(const std::vector<std::string>& documents) {
  Bm25Stats s;
  s.doc_count = documents.size();
  std::size_t total_len = 0;
  for (const auto& d : documents) {
    auto toks = tokenize(d);
    total_len += toks.size();
    std::unordered_set<std::string> uniq(toks.begin(), toks.end());
    for (const auto& t : uniq) ++s.df[t];
  }
  s.avg_length = s.doc_count ? static_cast<double>(total_len) / static_cast<double>(s.doc_count) : 0.0;
  return s;
}

double Bm25Stats::idf(const std::string& term) const {
  auto it = df.find(term);
  const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((static_cast<double>(doc_count) - d + 0.5) / (d + 0.5) + 1.0);
}

double bm25(std::string_view query, std::string_view document, const Bm25Stats& stats, double k1, double b) {
  if (stats.doc_count == 0) throw DomainError("bm25: empty document statistics");
  if (!(k1 > 0)) throw ArgumentError("bm25: k1 must be > 0");
  if (!(b >= 0 && b <= 1)) throw ArgumentError("bm25: b must be in [0, 1]");
  const auto doc = tokenize(document);
  std::unordered_map<std::string, std::size_t> tf;
  for (const auto& t : doc) ++tf[t];
  const double len_ratio = stats.avg_length > 0 ? static_cast<double>(doc.size()) / stats.avg_length : 1.0;
  const double norm = k1 * (1.0 - b + b * len_ratio);
  double score = 0.0;
  for (const auto& q : tokenize(query)) {
    auto it = tf.find(q);
    if (it == tf.end()) continue;
    const double f = static_cast<double>(it->second);
    score += stats.idf(q) * f * (k1 + 1.0) / (f + norm);
  }
  return score;
}

std::vector<EvalInstance> group_instances(const std::vector<ConversationPair>& pairs) {
  std::vector<EvalInstance> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& p : pairs) {
    auto [it, fresh] = index.emplace(p.hate.id, out.size());
    if (fresh) out.push_back({p.hate.id, p.hate.text, {}});
    out[it->second].references.push_back(p.counter.text);
  }
  return out;
}

MetricReport evaluate_run(const std::vector<EvalInstance>& instances, const std::vector<std::string>& outputs,
                          const std::string& pool_fingerprint, const EvalOptions& options) {
  if (instances.size() != outputs.size()) {
    throw ArgumentError("evaluate_run: " + std::to_string(outputs.size()) + " outputs for " +
                        std::to_string(instances.size()) + " instances");
  }
  if (instances.size() < 2) throw ArgumentError("evaluate_run: need at least 2 instances");

  MetricReport r;
  r.instances = instances.size();
  r.pool_fingerprint = pool_fingerprint;
  r.bm25_k1 = options.bm25_k1;
  r.bm25_b = options.bm25_b;
  r.dist1 = dist_n(outputs, 1);
  r.dist2 = dist_n(outputs, 2);
  r.ent1 = ent_n(outputs, 1);
  r.ent2 = ent_n(outputs, 2);
  r.selfbleu1 = self_bleu_n(outputs, 1, options.selfbleu_sample, options.selfbleu_seed);
  r.selfbleu2 = self_bleu_n(outputs, 2, options.selfbleu_sample, options.selfbleu_seed);

  const auto stats = Bm25Stats::build(outputs);
  double bleu_sum = 0, rouge_sum = 0, bm25_sum = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    bleu_sum += bleu_n(outputs[i], instances[i].references, 2);
    rouge_sum += rouge_2(outputs[i], instances[i].references);
    bm25_sum += bm25(instances[i].hate, outputs[i], stats, options.bm25_k1, options.bm25_b);
    if (trim(outputs[i]).empty()) ++r.unranked;
  }
  const auto n = static_cast<double>(instances.size());
  r.bleu2 = bleu_sum / n;
  r.rouge2 = rouge_sum / n;
  r.bm25 = bm25_sum / n;

  for (const auto& [name, table] : options.external) {
    double sum = 0;
    for (const auto& inst : instances) {
      auto it = table.find(inst.id);
      if (it == table.end()) throw LookupError("no " + name + " score for instance '" + inst.id + "'");
      sum += it->second;
    }
    const double mean = sum / n;
    if (name == "moverscore") {
      r.moverscore = mean;
    } else if (name == "bertscore") {
      r.bertscore = mean;
    } else if (name == "gruen") {
      r.gruen = mean;
    } else {
      throw ArgumentError("unknown external metric '" + name + "'");
    }
  }
  return r;
}

std::unordered_map<std::string, double> load_instance_scores(const std::filesystem::path& path) {
  const auto content = detail::read_file(path);
  std::unordered_map<std::string, double> out;
  const auto lines = detail::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto tab = lines[i].find('\t');
    double v = 0;
    if (tab == std::string_view::npos || !detail::parse_double(trim(lines[i].substr(tab + 1)), v)) {
      throw ParseError(i + 1, "expected instance-id<TAB>score");
    }
    if (!out.emplace(trim(lines[i].substr(0, tab)), v).second) throw ParseError(i + 1, "duplicate instance id");
  }
  return out;
}

}  // namespace gps
