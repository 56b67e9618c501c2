#include "support/synthetic.hpp"

#include <array>
#include <fstream>
#include <vector>

#include "gps/rng.hpp"

namespace gps::testing {
namespace {

const std::array<std::vector<std::string>, kTopics> kHateWords{{
    {"migrants", "borders", "invade", "jobs", "stealing", "foreigners", "flood"},
    {"women", "kitchen", "inferior", "emotional", "weak", "hysterical", "nagging"},
    {"muslims", "terrorists", "mosques", "sharia", "dangerous", "violent", "extremists"},
    {"gays", "unnatural", "perverts", "sinful", "disgusting", "deviant", "agenda"},
    {"disabled", "burden", "useless", "scroungers", "lazy", "worthless", "parasites"},
}};

const std::array<std::vector<std::string>, kTopics> kResponseWords{{
    {"immigration", "economy", "contribute", "workers", "taxes", "growth", "welcome"},
    {"equality", "careers", "capable", "leaders", "science", "respect", "rights"},
    {"faith", "peaceful", "neighbours", "community", "charity", "diversity", "prayer"},
    {"love", "family", "identity", "pride", "acceptance", "marriage", "dignity"},
    {"accessibility", "inclusion", "support", "talent", "independence", "care", "ability"},
}};

const std::vector<std::string> kFiller{"the", "they", "are", "all", "and", "we", "is", "of", "to", "so"};

std::string sample(const std::vector<std::string>& topical, std::uint64_t seed, std::size_t len) {
  Rng rng(splitmix64(seed));
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    const bool filler = uniform_real(rng) < 0.3;
    const auto& bag = filler ? kFiller : topical;
    if (!out.empty()) out += ' ';
    out += bag[uniform_index(rng, bag.size())];
  }
  return out;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string topic_hate_text(int topic, std::uint64_t seed) {
  return sample(kHateWords[static_cast<std::size_t>(topic)], seed, 8);
}

std::string topic_response_text(int topic, std::uint64_t seed) {
  return sample(kResponseWords[static_cast<std::size_t>(topic)], seed, 10);
}

std::string synthetic_pairs_jsonl(std::size_t hates, std::size_t responses, std::uint64_t seed) {
  std::string out;
  for (std::size_t h = 0; h < hates; ++h) {
    const int topic = static_cast<int>(h % kTopics);
    out += "{\"id\": \"h" + std::to_string(h) + "\", \"hate\": \"" +
           json_escape(topic_hate_text(topic, splitmix64(seed) + 2 * h * 1000)) + "\", \"counters\": [";
    for (std::size_t r = 0; r < responses; ++r) {
      if (r) out += ", ";
      out += "\"" + json_escape(topic_response_text(topic, splitmix64(seed) + (2 * h + 1) * 1000 + r)) + "\"";
    }
    out += "]}\n";
  }
  return out;
}

std::filesystem::path write_synthetic(const std::filesystem::path& dir, std::size_t hates, std::size_t responses,
                                      std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "pairs.jsonl";
  std::ofstream(path, std::ios::binary) << synthetic_pairs_jsonl(hates, responses, seed);
  return path;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gps-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gps::testing
