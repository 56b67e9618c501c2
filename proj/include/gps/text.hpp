#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gps {

using TokenSequence = std::vector<std::string>;

// Lowercases (Latin, Greek and Cyrillic case pairs), splits on Unicode
// whitespace and emits every punctuation character as its own token.
// Never produces an empty token.
TokenSequence tokenize(std::string_view text);

// Space-joined tokens. tokenize(join_tokens(tokenize(x))) == tokenize(x).
std::string join_tokens(const TokenSequence& tokens);

std::string trim(std::string_view s);

using NGram = std::vector<std::string>;

struct NGramCounts {
  int n = 1;
  std::map<NGram, std::size_t> counts;
  std::size_t total = 0;  // == sum of counts
};

// Sliding-window n-gram counts; throws ArgumentError for n < 1.
NGramCounts ngrams(const TokenSequence& tokens, int n);

}  // namespace gps
