#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace gps::testing {

// Five topics; each hate speech draws words from its topic's hate vocabulary,
// each counterspeech from the matching response vocabulary.
inline constexpr int kTopics = 5;

std::string topic_hate_text(int topic, std::uint64_t seed);
std::string topic_response_text(int topic, std::uint64_t seed);

// pairs-jsonl content: `hates` records, `responses` counterspeech each.
std::string synthetic_pairs_jsonl(std::size_t hates, std::size_t responses, std::uint64_t seed);

std::filesystem::path write_synthetic(const std::filesystem::path& dir, std::size_t hates, std::size_t responses,
                                      std::uint64_t seed);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace gps::testing
