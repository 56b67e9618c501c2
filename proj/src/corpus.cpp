#include "gps/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "gps/error.hpp"
#include "gps/rng.hpp"
#include "gps/text.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace gps {

using nlohmann::json;

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "pairs-jsonl") return DatasetFormat::PairsJsonl;
  if (name == "conan-json") return DatasetFormat::ConanJson;
  if (name == "reddit-gab-csv") return DatasetFormat::RedditGabCsv;
  throw ArgumentError("unknown dataset format '" + std::string(name) + "'");
}

std::string_view to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::PairsJsonl: return "pairs-jsonl";
    case DatasetFormat::ConanJson: return "conan-json";
    case DatasetFormat::RedditGabCsv: return "reddit-gab-csv";
  }
  return "?";
}

namespace {

// Collects entries, enforcing unique hate ids and dropping empty texts.
class DatasetBuilder {
 public:
  void add(std::size_t line, std::string id, const std::string& hate,
           const std::vector<std::string>& counters) {
    DatasetEntry e;
    e.hate.text = trim(hate);
    for (const auto& c : counters) {
      auto t = trim(c);
      if (t.empty()) continue;
      e.counters.push_back({"", std::move(t)});
    }
    if (e.hate.text.empty() || e.counters.empty()) {
      ++dataset_.rejected;
      return;
    }
    if (!ids_.insert(id).second) throw ParseError(line, "duplicate hate speech id '" + id + "'");
    e.hate.id = std::move(id);
    for (std::size_t j = 0; j < e.counters.size(); ++j) {
      e.counters[j].id = e.hate.id + "/c" + std::to_string(j);
    }
    dataset_.entries.push_back(std::move(e));
  }

  void reject() { ++dataset_.rejected; }
  Dataset take() { return std::move(dataset_); }

 private:
  Dataset dataset_;
  std::unordered_set<std::string> ids_;
};

Dataset parse_pairs_jsonl(std::string_view content) {
  DatasetBuilder builder;
  const auto lines = detail::split_lines(content);
  std::size_t record = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (trim(lines[i]).empty()) continue;
    json obj;
    try {
      obj = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(lineno, "record is not a JSON object");
    if (!obj.contains("hate") || !obj["hate"].is_string()) {
      throw ParseError(lineno, "missing string field 'hate'");
    }
    std::vector<std::string> counters;
    if (obj.contains("counters")) {
      if (!obj["counters"].is_array()) throw ParseError(lineno, "'counters' is not an array");
      for (const auto& c : obj["counters"]) {
        if (!c.is_string()) throw ParseError(lineno, "non-string counterspeech");
        counters.push_back(c.get<std::string>());
      }
    }
    std::string id = "h" + std::to_string(record);
    if (obj.contains("id")) {
      if (obj["id"].is_string()) {
        id = obj["id"].get<std::string>();
      } else if (obj["id"].is_number_integer()) {
        id = std::to_string(obj["id"].get<long long>());
      } else {
        throw ParseError(lineno, "'id' must be a string or integer");
      }
    }
    ++record;
    builder.add(lineno, std::move(id), obj["hate"].get<std::string>(), counters);
  }
  return builder.take();
}

// Line number of byte offset `pos` in `content` (1-based).
std::size_t line_of(std::string_view content, std::size_t pos) {
  return 1 + static_cast<std::size_t>(std::count(content.begin(),
                                                 content.begin() + static_cast<std::ptrdiff_t>(std::min(pos, content.size())), '\n'));
}

Dataset parse_conan_json(std::string_view content) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ParseError(line_of(content, e.byte > 0 ? e.byte - 1 : 0), std::string("invalid JSON: ") + e.what());
  }
  const json* records = &doc;
  if (doc.is_object()) {
    if (!doc.contains("conan") || !doc["conan"].is_array()) {
      throw ParseError(1, "expected a top-level array or an object with a 'conan' array");
    }
    records = &doc["conan"];
  } else if (!doc.is_array()) {
    throw ParseError(1, "expected a top-level array or an object with a 'conan' array");
  }

  // Merge by hate speech text, first appearance order.
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  std::unordered_map<std::string, std::size_t> index;
  DatasetBuilder builder;
  std::size_t n = 0;
  for (const auto& r : *records) {
    ++n;
    if (!r.is_object() || !r.contains("hateSpeech") || !r.contains("counterSpeech") ||
        !r["hateSpeech"].is_string() || !r["counterSpeech"].is_string()) {
      throw ParseError(1, "record " + std::to_string(n) + " lacks hateSpeech/counterSpeech strings");
    }
    std::string lang;
    if (r.contains("language") && r["language"].is_string()) {
      lang = r["language"].get<std::string>();
    } else if (r.contains("cn_id") && r["cn_id"].is_string()) {
      lang = r["cn_id"].get<std::string>().substr(0, 2);
    }
    if (!lang.empty() && lang != "EN" && lang != "en") continue;
    auto hate = trim(r["hateSpeech"].get<std::string>());
    auto [it, fresh] = index.emplace(hate, groups.size());
    if (fresh) groups.push_back({hate, {}});
    groups[it->second].second.push_back(r["counterSpeech"].get<std::string>());
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    builder.add(1, "conan-" + std::to_string(g), groups[g].first, groups[g].second);
  }
  return builder.take();
}

struct CsvRecord {
  std::size_t line;
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain separators, "" escapes and
// newlines.
std::vector<CsvRecord> parse_csv(std::string_view content) {
  std::vector<CsvRecord> records;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < content.size()) {
    CsvRecord rec{line, {}};
    std::string field;
    bool done = false;
    while (!done) {
      if (i < content.size() && content[i] == '"') {
        const std::size_t open_line = line;
        ++i;
        for (;;) {
          if (i >= content.size()) throw ParseError(open_line, "unterminated quoted field");
          const char c = content[i++];
          if (c == '"') {
            if (i < content.size() && content[i] == '"') {
              field.push_back('"');
              ++i;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
      }
      while (i < content.size() && content[i] != ',' && content[i] != '\n') {
        if (content[i] != '\r') field.push_back(content[i]);
        ++i;
      }
      rec.fields.push_back(std::move(field));
      field.clear();
      if (i >= content.size()) {
        done = true;
      } else if (content[i] == ',') {
        ++i;
      } else {
        ++i;
        ++line;
        done = true;
      }
    }
    if (!(rec.fields.size() == 1 && trim(rec.fields[0]).empty())) records.push_back(std::move(rec));
  }
  return records;
}

// Parses a Python list literal of strings or integers, e.g. "['a', \"b\"]"
// or "[1, 3]". Returns the elements as strings.
std::vector<std::string> parse_py_list(std::string_view s, std::size_t line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
  };
  skip_ws();
  if (i >= s.size() || s[i] != '[') throw ParseError(line, "expected a list literal");
  ++i;
  for (;;) {
    skip_ws();
    if (i >= s.size()) throw ParseError(line, "unterminated list literal");
    if (s[i] == ']') break;
    if (s[i] == '\'' || s[i] == '"') {
      const char q = s[i++];
      std::string item;
      for (;;) {
        if (i >= s.size()) throw ParseError(line, "unterminated string in list literal");
        char c = s[i++];
        if (c == q) break;
        if (c == '\\' && i < s.size()) {
          c = s[i++];
          switch (c) {
            case 'n': item.push_back('\n'); break;
            case 't': item.push_back('\t'); break;
            default: item.push_back(c); break;
          }
        } else {
          item.push_back(c);
        }
      }
      out.push_back(std::move(item));
    } else {
      std::string item;
      while (i < s.size() && s[i] != ',' && s[i] != ']') item.push_back(s[i++]);
      item = trim(item);
      if (item.empty()) throw ParseError(line, "empty list element");
      out.push_back(std::move(item));
    }
    skip_ws();
    if (i < s.size() && s[i] == ',') ++i;
  }
  return out;
}

// Posts of a conversation, keyed by their 1-based number.
std::map<int, std::string> split_posts(std::string_view text) {
  std::map<int, std::string> posts;
  for (auto line : detail::split_lines(text)) {
    auto t = trim(line);
    std::size_t k = 0;
    while (k < t.size() && t[k] >= '0' && t[k] <= '9') ++k;
    if (k == 0 || k >= t.size() || t[k] != '.') {
      if (!posts.empty()) posts.rbegin()->second += " " + t;
      continue;
    }
    posts[std::stoi(t.substr(0, k))] = trim(std::string_view(t).substr(k + 1));
  }
  return posts;
}

Dataset parse_reddit_gab_csv(std::string_view content) {
  auto records = parse_csv(content);
  DatasetBuilder builder;
  if (records.empty()) return builder.take();
  const auto& header = records.front().fields;
  auto column = [&](std::string_view name) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (trim(header[c]) == name) return c;
    }
    throw ParseError(records.front().line, "missing column '" + std::string(name) + "'");
  };
  const std::size_t c_id = column("id"), c_text = column("text"),
                    c_idx = column("hate_speech_idx"), c_resp = column("response");
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw ParseError(rec.line, "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(rec.fields.size()));
    }
    const auto idx_field = trim(rec.fields[c_idx]);
    const auto resp_field = trim(rec.fields[c_resp]);
    if (idx_field.empty() || idx_field == "n/a" || resp_field.empty() || resp_field == "n/a") {
      builder.reject();
      continue;
    }
    const auto indices = parse_py_list(idx_field, rec.line);
    const auto responses = parse_py_list(resp_field, rec.line);
    const auto posts = split_posts(rec.fields[c_text]);
    const auto row_id = trim(rec.fields[c_id]);
    for (const auto& idx : indices) {
      int k = 0;
      try {
        k = std::stoi(idx);
      } catch (const std::exception&) {
        throw ParseError(rec.line, "hate_speech_idx element '" + idx + "' is not an integer");
      }
      auto p = posts.find(k);
      if (p == posts.end()) throw ParseError(rec.line, "post " + idx + " not found in conversation");
      builder.add(rec.line, row_id + "-" + idx, p->second, responses);
    }
  }
  return builder.take();
}

}  // namespace

Dataset parse_dataset(std::string_view content, DatasetFormat format) {
  switch (format) {
    case DatasetFormat::PairsJsonl: return parse_pairs_jsonl(content);
    case DatasetFormat::ConanJson: return parse_conan_json(content);
    case DatasetFormat::RedditGabCsv: return parse_reddit_gab_csv(content);
  }
  throw ArgumentError("unknown dataset format");
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  return parse_dataset(detail::read_file(path), format);
}

void save_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::string out;
  for (const auto& e : dataset.entries) {
    json counters = json::array();
    for (const auto& c : e.counters) counters.push_back(c.text);
    json obj = {{"id", e.hate.id}, {"hate", e.hate.text}, {"counters", counters}};
    out += obj.dump() + "\n";
  }
  detail::write_file(path, out);
}

std::vector<ConversationPair> disaggregate(const Dataset& dataset) {
  std::vector<ConversationPair> pairs;
  for (const auto& e : dataset.entries) {
    for (const auto& c : e.counters) pairs.push_back({e.hate, c});
  }
  return pairs;
}

namespace {

void validate_ratios(const SplitRatios& r) {
  if (!(r.train > 0 && r.validation > 0 && r.test > 0)) {
    throw ArgumentError("split ratios must be positive");
  }
  if (std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) {
    throw ArgumentError("split ratios must sum to 1");
  }
}

}  // namespace

DatasetSplit split(const std::vector<ConversationPair>& pairs, SplitRatios ratios,
                   std::uint64_t seed, bool grouped) {
  validate_ratios(ratios);
  if (pairs.empty()) throw ArgumentError("split: no pairs");

  const auto n = static_cast<double>(pairs.size());
  const auto b1 = static_cast<std::size_t>(std::llround(n * ratios.train));
  const auto b2 = static_cast<std::size_t>(std::llround(n * (ratios.train + ratios.validation)));

  std::vector<int> part(pairs.size(), 0);
  Rng rng(seed);
  if (!grouped) {
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      part[order[pos]] = pos < b1 ? 0 : (pos < b2 ? 1 : 2);
    }
  } else {
    std::vector<std::string> hate_ids;
    std::unordered_map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      auto& m = members[pairs[i].hate.id];
      if (m.empty()) hate_ids.push_back(pairs[i].hate.id);
      m.push_back(i);
    }
    shuffle(hate_ids, rng);
    // A group goes to the partition that holds its first pair position.
    std::size_t pos = 0;
    for (const auto& h : hate_ids) {
      const int p = pos < b1 ? 0 : (pos < b2 ? 1 : 2);
      for (auto i : members[h]) part[i] = p;
      pos += members[h].size();
    }
  }

  DatasetSplit out;
  out.seed = seed;
  out.ratios = ratios;
  out.grouped = grouped;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (part[i] == 0 ? out.train : part[i] == 1 ? out.validation : out.test).push_back(pairs[i]);
  }
  return out;
}

std::string split_manifest_json(const DatasetSplit& s) {
  auto ids = [](const std::vector<ConversationPair>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back(p.id());
    return a;
  };
  json doc = {{"seed", s.seed},
              {"ratios", {s.ratios.train, s.ratios.validation, s.ratios.test}},
              {"grouped", s.grouped},
              {"train", ids(s.train)},
              {"validation", ids(s.validation)},
              {"test", ids(s.test)}};
  return doc.dump(2) + "\n";
}

void save_split_manifest(const DatasetSplit& split, const std::filesystem::path& path) {
  detail::write_file(path, split_manifest_json(split));
}

DatasetSplit load_split_manifest(const std::filesystem::path& path,
                                 const std::vector<ConversationPair>& pairs) {
  json doc;
  try {
    doc = json::parse(detail::read_file(path));
  } catch (const json::exception& e) {
    throw FormatError("split manifest " + path.string() + ": " + e.what());
  }
  std::unordered_map<std::string, const ConversationPair*> by_id;
  for (const auto& p : pairs) by_id[p.id()] = &p;
  DatasetSplit out;
  try {
    out.seed = doc.at("seed").get<std::uint64_t>();
    const auto& r = doc.at("ratios");
    out.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
    out.grouped = doc.value("grouped", false);
    auto fill = [&](const char* key, std::vector<ConversationPair>& dst) {
      for (const auto& id : doc.at(key)) {
        auto it = by_id.find(id.get<std::string>());
        if (it == by_id.end()) throw LookupError("split manifest names unknown pair '" + id.get<std::string>() + "'");
        dst.push_back(*it->second);
      }
    };
    fill("train", out.train);
    fill("validation", out.validation);
    fill("test", out.test);
  } catch (const json::exception& e) {
    throw FormatError("split manifest " + path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace gps
