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

#include "shqa/core_model.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <unordered_set>

#include "shqa/error.hpp"
#include "shqa/rng.hpp"
#include "shqa/text.hpp"

namespace shqa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<SourceInfo, 20> kSources{{
    {"avs-forum", "AVS Forum"},
    {"smartthings", "SmartThings"},
    {"home-assistant", "Home Assistant"},
    {"ezlo", "Ezlo"},
    {"cocoontech", "CocoonTech"},
    {"other-forums", "Other Forums"},
    {"digital-home", "Digital Home"},
    {"diynot", "DIYNot"},
    {"whirlpool", "Whirlpool"},
    {"google-nest", "Google Nest"},
    {"apple-community", "Apple Community"},
    {"verizon", "Verizon"},
    {"level1techs", "level1techs"},
    {"openwrt", "OpenWRT"},
    {"diy-home", "DIY Home"},
    {"reddit", "Reddit"},
    {"snb", "SNB"},
    {"toms-guide", "Tom's Guide"},
    {"stack-exchange", "Stack Exchange"},
    {"custom", "Custom"},
}};

std::string optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw ParseError(std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw ParseError(std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Version v) {
  switch (v) {
    case Version::V1: return "V1";
    case Version::V2: return "V2";
    case Version::V3: return "V3";
    case Version::Synthetic: return "SYNTHETIC";
  }
  return "?";
}

Version parse_version(std::string_view s) {
  if (s == "V1" || s == "1.0" || s == "v1") return Version::V1;
  if (s == "V2" || s == "2.0" || s == "v2") return Version::V2;
  if (s == "V3" || s == "3.0" || s == "v3") return Version::V3;
  if (s == "SYNTHETIC" || s == "synthetic") return Version::Synthetic;
  throw ParseError("unknown dataset version '" + std::string(s) + "'");
}

std::string_view to_string(Provenance p) {
  return p == Provenance::Original ? "ORIGINAL" : "SYNTHETIC";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "ORIGINAL") return Provenance::Original;
  if (s == "SYNTHETIC") return Provenance::Synthetic;
  throw ParseError("unknown provenance '" + std::string(s) + "'");
}

std::span<const SourceInfo> known_sources() { return kSources; }

bool is_known_source(std::string_view key) {
  return std::any_of(kSources.begin(), kSources.end(),
                     [&](const SourceInfo& s) { return s.key == key; });
}

std::string_view source_display_name(std::string_view key) {
  for (const auto& s : kSources) {
    if (s.key == key) return s.display_name;
  }
  return key;
}

void validate_pair(const QAPair& pair) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("pair '" + pair.id + "': " + what);
  };
  if (pair.id.empty()) throw ValidationError("pair with empty id");
  if (!is_known_source(pair.source)) fail("unknown source '" + pair.source + "'");
  if (text::trim(pair.question).empty()) fail("empty question");
  if (text::trim(pair.answer).empty() &&
      pair.provenance != Provenance::Synthetic) {
    fail("empty answer");
  }
  switch (pair.version) {
    case Version::V1:
      if (pair.parent_id) fail("V1 pair must not have parent_id");
      if (pair.provenance != Provenance::Original) fail("V1 pair must be ORIGINAL");
      break;
    case Version::V2:
    case Version::V3:
      if (!pair.parent_id) fail("derived pair requires parent_id");
      break;
    case Version::Synthetic:
      if (!pair.parent_id) fail("synthetic pair requires parent_id");
      if (pair.provenance != Provenance::Synthetic) {
        fail("SYNTHETIC version requires SYNTHETIC provenance");
      }
      break;
  }
}

ordered_json to_json(const QAPair& pair) {
  ordered_json j;
  j["id"] = pair.id;
  j["source"] = pair.source;
  j["question"] = pair.question;
  j["answer"] = pair.answer;
  j["version"] = to_string(pair.version);
  j["parent_id"] = pair.parent_id ? ordered_json(*pair.parent_id) : ordered_json();
  j["provenance"] = to_string(pair.provenance);
  j["context"] = pair.context ? ordered_json(*pair.context) : ordered_json();
  return j;
}

QAPair pair_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("expected a JSON object");
  QAPair p;
  p.id = required_string(j, "id");
  p.source = required_string(j, "source");
  p.question = required_string(j, "question");
  p.answer = required_string(j, "answer");
  p.version = parse_version(required_string(j, "version"));
  if (auto it = j.find("parent_id"); it != j.end() && !it->is_null()) {
    p.parent_id = optional_string(j, "parent_id");
  }
  p.provenance = parse_provenance(required_string(j, "provenance"));
  if (auto it = j.find("context"); it != j.end() && !it->is_null()) {
    p.context = optional_string(j, "context");
  }
  return p;
}

std::string make_pair_id(std::string_view source, std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", ordinal);
  return std::string(source) + "-" + buf;
}

std::string id_stem(std::string_view id) {
  for (std::string_view suffix : {".v2", ".v3", ".syn"}) {
    if (id.size() > suffix.size() && id.ends_with(suffix)) {
      return std::string(id.substr(0, id.size() - suffix.size()));
    }
  }
  return std::string(id);
}

std::string derived_id(std::string_view parent_id, Version target) {
  const std::string stem = id_stem(parent_id);
  switch (target) {
    case Version::V1: return stem;
    case Version::V2: return stem + ".v2";
    case Version::V3: return stem + ".v3";
    case Version::Synthetic: return stem + ".syn";
  }
  return stem;
}

const QAPair* Dataset::find(std::string_view id) const {
  for (const auto& p : pairs) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

void validate_dataset(const Dataset& dataset) {
  std::unordered_set<std::string> seen;
  seen.reserve(dataset.pairs.size());
  for (const auto& p : dataset.pairs) {
    validate_pair(p);
    if (p.version != dataset.version) {
      throw ValidationError("pair '" + p.id + "' has version " +
                            std::string(to_string(p.version)) +
                            " in a " + std::string(to_string(dataset.version)) +
                            " dataset");
    }
    if (!seen.insert(p.id).second) {
      throw ValidationError("duplicate id '" + p.id + "'");
    }
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::filesystem::path meta_path(const std::filesystem::path& dataset_path) {
  auto p = dataset_path;
  p += ".meta.json";
  return p;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  validate_dataset(dataset);
  std::vector<ordered_json> rows;
  rows.reserve(dataset.pairs.size());
  for (const auto& p : dataset.pairs) rows.push_back(to_json(p));
  write_jsonl(path, rows);

  ordered_json meta;
  meta["version"] = to_string(dataset.version);
  meta["created_at"] =
      dataset.created_at.empty() ? utc_timestamp() : dataset.created_at;
  meta["notes"] = dataset.notes;
  meta["pair_count"] = dataset.pairs.size();
  write_json(meta_path(path), meta);
}

Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<Version> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");

  Dataset ds;
  std::optional<Version> declared;
  if (std::filesystem::exists(meta_path(path))) {
    const json meta = read_json(meta_path(path));
    declared = parse_version(meta.value("version", std::string("V1")));
    ds.created_at = meta.value("created_at", std::string());
    ds.notes = meta.value("notes", std::string());
  }

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      ds.pairs.push_back(pair_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    }
  }

  if (declared) {
    ds.version = *declared;
  } else if (!ds.pairs.empty()) {
    ds.version = ds.pairs.front().version;
  } else if (expected) {
    ds.version = *expected;
  }
  if (expected && ds.version != *expected) {
    throw ValidationError("dataset '" + path.string() + "' is version " +
                          std::string(to_string(ds.version)) + ", expected " +
                          std::string(to_string(*expected)));
  }
  validate_dataset(ds);
  return ds;
}

Splits split_dataset(const Dataset& dataset, SplitCounts counts,
                     std::uint64_t seed) {
  const std::size_t need = counts.train + counts.val + counts.test;
  if (need > dataset.pairs.size()) {
    throw ValidationError("split counts (" + std::to_string(need) +
                          ") exceed dataset size (" +
                          std::to_string(dataset.pairs.size()) + ")");
  }
  std::vector<std::string> ids;
  ids.reserve(dataset.pairs.size());
  for (const auto& p : dataset.pairs) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("dataset has duplicate ids");
  }
  SplitMix64 rng(seed);
  fisher_yates(std::span<std::string>(ids), rng);

  Splits s;
  s.seed = seed;
  s.source_version = dataset.version;
  auto it = ids.begin();
  s.train_ids.assign(it, it + counts.train);
  it += counts.train;
  s.val_ids.assign(it, it + counts.val);
  it += counts.val;
  s.test_ids.assign(it, it + counts.test);
  return s;
}

ordered_json to_json(const Splits& splits) {
  ordered_json j;
  j["seed"] = splits.seed;
  j["source_version"] = to_string(splits.source_version);
  j["train_ids"] = splits.train_ids;
  j["val_ids"] = splits.val_ids;
  j["test_ids"] = splits.test_ids;
  return j;
}

Splits splits_from_json(const json& j) {
  try {
    Splits s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.source_version = parse_version(j.at("source_version").get<std::string>());
    s.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    s.val_ids = j.at("val_ids").get<std::vector<std::string>>();
    s.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    std::set<std::string> all;
    for (const auto* list : {&s.train_ids, &s.val_ids, &s.test_ids}) {
      for (const auto& id : *list) {
        if (!all.insert(id).second) {
          throw ValidationError("split id '" + id + "' appears twice");
        }
      }
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad splits file: ") + e.what());
  }
}

void save_splits(const Splits& splits, const std::filesystem::path& path) {
  write_json(path, to_json(splits));
}

Splits load_splits(const std::filesystem::path& path) {
  return splits_from_json(read_json(path));
}

StatsReport dataset_stats(const Dataset& dataset) {
  if (dataset.pairs.empty()) {
    throw ValidationError("dataset_stats needs a non-empty dataset");
  }
  StatsReport r;
  std::size_t q_words = 0;
  std::size_t a_words = 0;
  for (const auto& p : dataset.pairs) {
    ++r.per_source_counts[p.source];
    q_words += text::word_count(p.question);
    a_words += text::word_count(p.answer);
  }
  r.total_pairs = dataset.pairs.size();
  r.avg_question_len_words =
      static_cast<double>(q_words) / static_cast<double>(r.total_pairs);
  r.avg_answer_len_words =
      static_cast<double>(a_words) / static_cast<double>(r.total_pairs);
  return r;
}

ordered_json to_json(const StatsReport& stats) {
  ordered_json j;
  j["total_pairs"] = stats.total_pairs;
  j["avg_question_len_words"] = stats.avg_question_len_words;
  j["avg_answer_len_words"] = stats.avg_answer_len_words;
  ordered_json per = ordered_json::object();
  for (const auto& [k, v] : stats.per_source_counts) per[k] = v;
  j["per_source_counts"] = per;
  return j;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path,
                 std::span<const ordered_json> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace shqa
