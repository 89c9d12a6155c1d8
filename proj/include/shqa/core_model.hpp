// Copyright 2026 The smarthome-qa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace shqa {

enum class Version { V1, V2, V3, Synthetic };
enum class Provenance { Original, Synthetic };

// "V1", "V2", "V3", "SYNTHETIC".
std::string_view to_string(Version v);
Version parse_version(std::string_view s);
std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

// Forum sources a pair may come from, plus "custom".
struct SourceInfo {
  std::string_view key;
  std::string_view display_name;
};
std::span<const SourceInfo> known_sources();
bool is_known_source(std::string_view key);
std::string_view source_display_name(std::string_view key);

struct QAPair {
  std::string id;
  std::string source;
  std::string question;
  std::string answer;
  Version version = Version::V1;
  std::optional<std::string> parent_id;
  Provenance provenance = Provenance::Original;
  std::optional<std::string> context;

  bool operator==(const QAPair&) const = default;
};

// Throws ValidationError naming the broken invariant. SYNTHETIC pairs may
// carry an empty answer while they wait for human answer entry.
void validate_pair(const QAPair& pair);

// Fields in the documented order:
// id, source, question, answer, version, parent_id, provenance, context.
nlohmann::ordered_json to_json(const QAPair& pair);
QAPair pair_from_json(const nlohmann::json& j);

// `<source>-<ordinal padded to 5 digits>`.
std::string make_pair_id(std::string_view source, std::size_t ordinal);
// Strips a ".v2"/".v3"/".syn" suffix.
std::string id_stem(std::string_view id);
std::string derived_id(std::string_view parent_id, Version target);

struct Dataset {
  Version version = Version::V1;
  std::vector<QAPair> pairs;
  std::string created_at;
  std::string notes;

  const QAPair* find(std::string_view id) const;
};

// Throws ValidationError: pair invariants, version agreement, unique ids.
void validate_dataset(const Dataset& dataset);

std::string utc_timestamp();

// Writes one JSON object per line, plus `<path>.meta.json` with version,
// created_at and notes. Refuses to write an invalid dataset.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Metadata sidecar is optional; without it the version comes from the pairs
// or `expected`. Errors carry the 1-based line number of a bad line.
Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<Version> expected = std::nullopt);

std::filesystem::path meta_path(const std::filesystem::path& dataset_path);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct Splits {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
  Version source_version = Version::V1;

  bool operator==(const Splits&) const = default;
};

// Sorts ids, shuffles them with SplitMix64 + Fisher-Yates under `seed`, then
// takes train, val and test in that order.
Splits split_dataset(const Dataset& dataset, SplitCounts counts,
                     std::uint64_t seed);

nlohmann::ordered_json to_json(const Splits& splits);
Splits splits_from_json(const nlohmann::json& j);
void save_splits(const Splits& splits, const std::filesystem::path& path);
Splits load_splits(const std::filesystem::path& path);

struct StatsReport {
  std::map<std::string, std::size_t> per_source_counts;
  double avg_question_len_words = 0.0;
  double avg_answer_len_words = 0.0;
  std::size_t total_pairs = 0;
};

StatsReport dataset_stats(const Dataset& dataset);
nlohmann::ordered_json to_json(const StatsReport& stats);

// Shared JSONL helpers.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path,
                 std::span<const nlohmann::ordered_json> rows);
void write_json(const std::filesystem::path& path,
                const nlohmann::ordered_json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace shqa
