#include "gps/pool.hpp"

#include <cstdio>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "gps/error.hpp"
#include "gps/hash.hpp"
#include "gps/rng.hpp"
#include "gps/text.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace gps {

using nlohmann::json;

std::string_view to_string(CandidateSource source) {
  switch (source) {
    case CandidateSource::Training: return "training";
    case CandidateSource::Markov: return "markov";
    case CandidateSource::External: return "external";
  }
  return "?";
}

CandidateSource parse_candidate_source(std::string_view name) {
  if (name == "training") return CandidateSource::Training;
  if (name == "markov") return CandidateSource::Markov;
  if (name == "external") return CandidateSource::External;
  throw FormatError("unknown candidate source '" + std::string(name) + "'");
}

CandidatePool::CandidatePool(std::vector<Candidate> candidates) : candidates_(std::move(candidates)) {
  std::unordered_set<std::string> ids;
  Sha256 h;
  for (const auto& c : candidates_) {
    if (c.text.empty()) throw ArgumentError("candidate '" + c.id + "' has empty text");
    if (!ids.insert(c.id).second) throw ArgumentError("duplicate candidate id '" + c.id + "'");
    h.update_field(c.text);
  }
  fingerprint_ = h.hex_digest();
}

namespace {

std::string make_id(char prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%07zu", prefix, index);
  return buf;
}

}  // namespace

CandidatePool build_base_pool(const std::vector<ConversationPair>& train) {
  if (train.empty()) throw ArgumentError("build_base_pool: empty training set");
  std::vector<Candidate> out;
  std::unordered_set<std::string> seen;
  for (const auto& p : train) {
    if (!seen.insert(p.counter.text).second) continue;
    out.push_back({make_id('T', out.size()), p.counter.text, CandidateSource::Training, std::nullopt});
  }
  return CandidatePool(std::move(out));
}

namespace {

constexpr const char* kBegin = "<s>";
constexpr const char* kEnd = "</s>";

// Successor counts for one context, in lexicographic token order.
using Successors = std::vector<std::pair<std::string, std::size_t>>;

struct ChainModel {
  int order;
  std::map<std::vector<std::string>, Successors> table;
};

ChainModel fit_chain(const CandidatePool& pool, int order) {
  ChainModel m{order, {}};
  std::map<std::vector<std::string>, std::map<std::string, std::size_t>> counts;
  const auto ctx_len = static_cast<std::size_t>(order - 1);
  bool any = false;
  for (const auto& c : pool.candidates()) {
    auto toks = tokenize(c.text);
    if (toks.size() < static_cast<std::size_t>(order)) continue;
    any = true;
    std::vector<std::string> seq(ctx_len, kBegin);
    seq.insert(seq.end(), toks.begin(), toks.end());
    seq.push_back(kEnd);
    for (std::size_t i = ctx_len; i < seq.size(); ++i) {
      std::vector<std::string> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - ctx_len),
                                   seq.begin() + static_cast<std::ptrdiff_t>(i));
      ++counts[ctx][seq[i]];
    }
  }
  if (!any) {
    throw ModelFitError("markov order " + std::to_string(order) +
                        " exceeds the length of every pool sentence");
  }
  for (auto& [ctx, succ] : counts) {
    Successors s(succ.begin(), succ.end());
    m.table.emplace(ctx, std::move(s));
  }
  return m;
}

TokenSequence sample_chain(const ChainModel& m, std::size_t max_len, Rng& rng) {
  const auto ctx_len = static_cast<std::size_t>(m.order - 1);
  std::vector<std::string> ctx(ctx_len, kBegin);
  TokenSequence out;
  while (out.size() < max_len) {
    auto it = m.table.find(ctx);
    if (it == m.table.end()) break;
    std::size_t total = 0;
    for (const auto& [tok, n] : it->second) total += n;
    std::uint64_t r = uniform_index(rng, total);
    const std::string* next = nullptr;
    for (const auto& [tok, n] : it->second) {
      if (r < n) {
        next = &tok;
        break;
      }
      r -= n;
    }
    if (*next == kEnd) break;
    out.push_back(*next);
    if (ctx_len > 0) {
      ctx.erase(ctx.begin());
      ctx.push_back(*next);
    }
  }
  return out;
}

}  // namespace

std::vector<Candidate> generate_markov(const CandidatePool& pool, const MarkovConfig& config) {
  if (config.count == 0) return {};
  if (pool.empty()) throw ArgumentError("generate_markov: empty pool");
  if (config.order < 1) throw ArgumentError("generate_markov: order must be >= 1");
  if (config.max_len < 1) throw ArgumentError("generate_markov: max_len must be >= 1");
  const auto model = fit_chain(pool, config.order);

  constexpr int kMaxResamples = 64;
  std::vector<Candidate> out;
  out.reserve(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    Rng rng = substream(config.seed, i);
    TokenSequence toks;
    for (int attempt = 0; attempt < kMaxResamples && toks.empty(); ++attempt) {
      toks = sample_chain(model, config.max_len, rng);
    }
    if (toks.empty()) continue;
    out.push_back({make_id('M', i), join_tokens(toks), CandidateSource::Markov, std::nullopt});
  }
  return out;
}

std::vector<Candidate> parse_candidates(std::string_view content) {
  std::vector<Candidate> out;
  const auto lines = detail::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto t = trim(lines[i]);
    if (t.empty()) continue;
    out.push_back({make_id('E', i + 1), std::move(t), CandidateSource::External, std::nullopt});
  }
  return out;
}

std::vector<Candidate> ingest_candidates(const std::filesystem::path& path) {
  return parse_candidates(detail::read_file(path));
}

CandidatePool dedupe(const CandidatePool& pool) {
  std::vector<Candidate> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& c : pool.candidates()) {
    if (seen.insert(c.text).second) out.push_back(c);
  }
  return CandidatePool(std::move(out));
}

CandidatePool merge(const CandidatePool& base, const std::vector<Candidate>& extra) {
  std::vector<Candidate> all = base.candidates();
  all.insert(all.end(), extra.begin(), extra.end());
  std::vector<Candidate> out;
  std::unordered_set<std::string> seen;
  for (auto& c : all) {
    if (seen.insert(c.text).second) out.push_back(std::move(c));
  }
  return CandidatePool(std::move(out));
}

void save_pool(const CandidatePool& pool, const std::filesystem::path& path) {
  std::string out;
  for (const auto& c : pool.candidates()) {
    json obj = {{"id", c.id}, {"text", c.text}, {"source", std::string(to_string(c.source))}};
    if (c.grammaticality) obj["grammaticality"] = *c.grammaticality;
    out += obj.dump() + "\n";
  }
  detail::write_file(path, out);
}

CandidatePool load_pool(const std::filesystem::path& path) {
  const auto content = detail::read_file(path);
  const auto lines = detail::split_lines(content);
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      const auto obj = json::parse(lines[i]);
      Candidate c;
      c.id = obj.at("id").get<std::string>();
      c.text = obj.at("text").get<std::string>();
      c.source = parse_candidate_source(obj.at("source").get<std::string>());
      if (obj.contains("grammaticality")) c.grammaticality = obj["grammaticality"].get<double>();
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw ParseError(i + 1, std::string("pool record: ") + e.what());
    }
  }
  try {
    return CandidatePool(std::move(out));
  } catch (const ArgumentError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace gps
