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
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "shqa/chat_client.hpp"
#include "shqa/core_model.hpp"

namespace shqa {

enum class Stage { Rephrase, Summarize, SynthQuestion, Context };

// PENDING -> {ACCEPTED, EDITED, REJECTED}. FAILED marks a pair whose request
// never produced a usable proposal; the next run retries it in place.
enum class RecordStatus { Pending, Accepted, Edited, Rejected, Failed };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);
std::string_view to_string(RecordStatus s);
RecordStatus parse_status(std::string_view s);

struct RefinementRecord {
  std::string id;
  std::string pair_id;
  Stage stage = Stage::Rephrase;
  std::string original;
  std::string proposed;
  RecordStatus status = RecordStatus::Pending;
  std::optional<std::string> final_text;
  std::optional<std::string> reviewer_note;
  std::string model_name;
  std::string created_at;

  bool operator==(const RefinementRecord&) const = default;
};

void validate_record(const RefinementRecord& record);
nlohmann::ordered_json to_json(const RefinementRecord& record);
RefinementRecord record_from_json(const nlohmann::json& j);

// `<pair_id>:<stage>:<generation>`.
std::string make_record_id(std::string_view pair_id, Stage stage,
                           int generation);

enum class DecisionAction { Accept, Edit, Reject };
std::string_view to_string(DecisionAction a);
DecisionAction parse_action(std::string_view s);

// Applies a reviewer decision to a PENDING record. ConflictError if the
// record is no longer pending, ValidationError if EDIT lacks text or
// ACCEPT/REJECT carry one.
RefinementRecord decide(RefinementRecord record, DecisionAction action,
                        const std::optional<std::string>& final_text,
                        const std::optional<std::string>& reviewer_note);

// Append-only JSONL log of records; the last line for an id wins. One
// writer at a time, any number of readers.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  std::vector<RefinementRecord> snapshot() const;
  std::optional<RefinementRecord> get(const std::string& id) const;
  // Newest record for (pair_id, stage), by append order.
  std::optional<RefinementRecord> latest(const std::string& pair_id,
                                         Stage stage) const;

  // Inserts or supersedes a record; durable before returning.
  void put(const RefinementRecord& record);

  // Atomically reads, transforms and writes one record. `mutate` may throw
  // to abort without writing.
  RefinementRecord update(
      const std::string& id,
      const std::function<RefinementRecord(const RefinementRecord&)>& mutate);

 private:
  void append_line(const RefinementRecord& record);
  void put_locked(const RefinementRecord& record);

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::vector<RefinementRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::pair<std::string, Stage>, std::size_t> latest_;
};

struct PromptTemplate {
  Stage stage = Stage::Rephrase;
  std::string text;  // placeholders {question}, {answer}, {context}
};

using PromptSet = std::map<Stage, PromptTemplate>;

// Placeholders each stage must contain.
std::vector<std::string_view> required_placeholders(Stage stage);
void validate_template(const PromptTemplate& t);
// JSON object keyed by stage name ("REPHRASE", ...).
PromptSet load_prompt_templates(const std::filesystem::path& path);
std::string render_template(std::string_view tmpl, const QAPair& pair);

// "question: ...\nanswer: ..." blocks carry both fields of a REPHRASE
// proposal (and optionally a synthetic answer).
std::string format_qa_block(std::string_view question, std::string_view answer);
std::optional<std::pair<std::string, std::string>> parse_qa_block(
    std::string_view text);

// Text a record snapshots as `original` for the stage.
std::string stage_source_text(const QAPair& pair, Stage stage);

struct StageOptions {
  std::string model_name;
  int max_concurrency = 4;
  RetryPolicy retry;
  double temperature = 0.0;
  int max_tokens = 512;
};

struct StageRunResult {
  std::vector<RefinementRecord> records;  // current record per pair
  std::size_t requested = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
};

// One record per pair. Pairs whose newest record is PENDING, ACCEPTED or
// EDITED are skipped; FAILED ones are retried under the same id, REJECTED
// ones get a new generation. Throws EndpointError (after persisting
// finished work) when the endpoint is unreachable.
StageRunResult run_stage(const Dataset& dataset, Stage stage,
                         ChatClient& client, const PromptSet& prompts,
                         RecordStore& store, const StageOptions& options);

struct ApplySummary {
  std::size_t replaced = 0;
  std::size_t kept = 0;
};

// Builds the next dataset from decided records of `stage`. ACCEPTED and
// EDITED records replace the stage's field; REJECTED/FAILED keep the old
// text. SYNTH_QUESTION yields a SYNTHETIC dataset of the accepted questions.
Dataset apply_decisions(const Dataset& dataset,
                        std::span<const RefinementRecord> records, Stage stage,
                        Version target_version,
                        ApplySummary* summary = nullptr);

struct SyntheticSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::uint64_t seed = 0;

  std::size_t train() const { return train_ids.size(); }
  std::size_t val() const { return val_ids.size(); }
  std::size_t total() const { return train() + val(); }
};

// Seeded train/val split of synthetic pairs; every pair needs an answer.
SyntheticSplit synthetic_totals(const Dataset& synthetic, std::size_t train,
                                std::size_t val, std::uint64_t seed);

}  // namespace shqa
