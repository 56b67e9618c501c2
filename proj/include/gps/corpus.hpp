#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gps {

struct HateSpeechInstance {
  std::string id;
  std::string text;
};

struct CounterspeechInstance {
  std::string id;
  std::string text;
};

struct DatasetEntry {
  HateSpeechInstance hate;
  std::vector<CounterspeechInstance> counters;
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  // Records dropped because they carried no usable counterspeech.
  std::size_t rejected = 0;
};

// One (hate speech, counterspeech) unit. The counterspeech id is unique in
// its dataset and doubles as the pair id.
struct ConversationPair {
  HateSpeechInstance hate;
  CounterspeechInstance counter;

  const std::string& id() const { return counter.id; }
};

enum class DatasetFormat { PairsJsonl, ConanJson, RedditGabCsv };

DatasetFormat parse_dataset_format(std::string_view name);
std::string_view to_string(DatasetFormat format);

/// Loads a dataset and normalizes it into hate speech with attached
/// counterspeech lists.
///
/// - pairs-jsonl: one `{"id", "hate", "counters": [...]}` object per line.
///   Missing ids become `h<record index>`; counterspeech ids are always
///   `<hate id>/c<index>`.
/// - conan-json: the CONAN release (`{"conan": [...]}` or a bare array of
///   `cn_id`/`hateSpeech`/`counterSpeech` records). Only English records are
///   kept; records sharing a hate speech text are merged in file order.
/// - reddit-gab-csv: the Reddit/Gab intervention benchmark CSV with columns
///   `id,text,hate_speech_idx,response`. Each post listed in
///   `hate_speech_idx` becomes one hate speech carrying every response.
///
/// Throws ParseError naming the offending line for malformed records.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

// Same as load_dataset but from an in-memory buffer.
Dataset parse_dataset(std::string_view content, DatasetFormat format);

void save_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path);

// One pair per (hate, counter) in dataset order, then counterspeech order.
std::vector<ConversationPair> disaggregate(const Dataset& dataset);

struct SplitRatios {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
};

struct DatasetSplit {
  std::vector<ConversationPair> train;
  std::vector<ConversationPair> validation;
  std::vector<ConversationPair> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  bool grouped = false;
};

/// Seeded random partition. Partition sizes come from cumulative rounding
/// of the ratios, so they always total the input. With `grouped`, every
/// pair of one hate speech lands in the same partition; sizes then follow
/// the ratios only up to group granularity. Pairs keep their input order
/// inside each partition.
DatasetSplit split(const std::vector<ConversationPair>& pairs, SplitRatios ratios,
                   std::uint64_t seed, bool grouped = false);

// Split manifest: seed, ratios, grouped flag and the pair ids per partition.
void save_split_manifest(const DatasetSplit& split, const std::filesystem::path& path);
std::string split_manifest_json(const DatasetSplit& split);

// Rebuilds a split from a manifest and the pairs it was cut from. Unknown
// pair ids raise LookupError.
DatasetSplit load_split_manifest(const std::filesystem::path& path,
                                 const std::vector<ConversationPair>& pairs);

}  // namespace gps
