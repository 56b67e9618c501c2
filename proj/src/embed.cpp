#include "gps/embed.hpp"

#include <cmath>
#include <unordered_set>

#include "gps/error.hpp"
#include "gps/rng.hpp"
#include "gps/text.hpp"
#include "io_util.hpp"

namespace gps {

void EmbeddingTable::insert(const std::string& id, Embedding e) {
  if (e.size() != dim_) {
    throw ArgumentError("embedding '" + id + "' has dim " + std::to_string(e.size()) + ", table dim is " +
                        std::to_string(dim_));
  }
  if (!e.allFinite()) throw ArgumentError("embedding '" + id + "' has non-finite entries");
  if (!entries_.emplace(id, std::move(e)).second) throw ArgumentError("duplicate embedding id '" + id + "'");
}

const Embedding& EmbeddingTable::at(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw LookupError("no embedding for '" + id + "'");
  return it->second;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  if (dim_ != other.dim_ || entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || a->second != b->second) return false;
  }
  return true;
}

std::string format_table(const EmbeddingTable& table) {
  std::string out = "#dim=" + std::to_string(table.dim()) + "\n";
  for (const auto& [id, e] : table.entries()) {
    out += id;
    out.push_back('\t');
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      if (i) out.push_back(' ');
      out += detail::format_double(e[i], 9);
    }
    out.push_back('\n');
  }
  return out;
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  detail::write_file(path, format_table(table));
}

EmbeddingTable parse_table(std::string_view content) {
  const auto lines = detail::split_lines(content);
  if (lines.empty() || lines[0].substr(0, 5) != "#dim=") {
    throw ParseError(1, "embedding table must start with '#dim=<d>'");
  }
  long dim = 0;
  {
    const auto spec = lines[0].substr(5);
    const auto r = std::from_chars(spec.data(), spec.data() + spec.size(), dim);
    if (r.ec != std::errc() || r.ptr != spec.data() + spec.size() || dim < 1) {
      throw ParseError(1, "bad dimension in header");
    }
  }
  EmbeddingTable table(dim);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) throw ParseError(i + 1, "expected id<TAB>values");
    std::string id(line.substr(0, tab));
    Embedding e(dim);
    Eigen::Index k = 0;
    std::size_t pos = tab + 1;
    while (pos <= line.size()) {
      auto end = line.find(' ', pos);
      if (end == std::string_view::npos) end = line.size();
      const auto field = line.substr(pos, end - pos);
      pos = end + 1;
      if (field.empty()) continue;
      if (k >= dim) throw ParseError(i + 1, "more than " + std::to_string(dim) + " values");
      double v = 0;
      if (!detail::parse_double(field, v)) throw ParseError(i + 1, "non-numeric value '" + std::string(field) + "'");
      e[k++] = v;
    }
    if (k != dim) {
      throw ParseError(i + 1, "expected " + std::to_string(dim) + " values, got " + std::to_string(k));
    }
    if (table.contains(id)) throw ParseError(i + 1, "duplicate id '" + id + "'");
    table.insert(id, std::move(e));
  }
  return table;
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  return parse_table(detail::read_file(path));
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

FallbackEmbedder::FallbackEmbedder(const std::vector<std::string>& corpus, Eigen::Index dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (corpus.empty()) throw ArgumentError("fallback embedder: empty corpus");
  if (dim < 8) throw ArgumentError("fallback embedder: dim must be >= 8");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& text : corpus) {
    auto toks = tokenize(text);
    std::unordered_set<std::string> uniq(toks.begin(), toks.end());
    for (const auto& t : uniq) ++df[t];
  }
  const auto n = static_cast<double>(corpus.size());
  for (const auto& [t, d] : df) idf_[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(d))) + 1.0;
}

double FallbackEmbedder::idf(const std::string& token) const {
  auto it = idf_.find(token);
  return it == idf_.end() ? 0.0 : it->second;
}

FallbackEmbedder::Slot FallbackEmbedder::slot(const std::string& token) const {
  const std::uint64_t h = splitmix64(fnv1a(token) ^ splitmix64(seed_));
  return {static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_)), (h >> 63) ? -1.0 : 1.0};
}

Embedding FallbackEmbedder::embed(std::string_view text) const {
  Embedding e = Embedding::Zero(dim_);
  for (const auto& t : tokenize(text)) {
    auto it = idf_.find(t);
    if (it == idf_.end()) continue;
    const auto s = slot(t);
    e[s.bucket] += s.sign * it->second;
  }
  const double norm = e.norm();
  if (norm > 0) e /= norm;
  return e;
}

FallbackEmbedder fit_fallback_embedder(const std::vector<std::string>& corpus, Eigen::Index dim, std::uint64_t seed) {
  return FallbackEmbedder(corpus, dim, seed);
}

}  // namespace gps
