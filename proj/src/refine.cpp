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

#include "shqa/refine.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>
#include <unordered_set>
#include <variant>
#include <unistd.h>

#include "shqa/error.hpp"
#include "shqa/rng.hpp"
#include "shqa/text.hpp"

namespace shqa {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Rephrase: return "REPHRASE";
    case Stage::Summarize: return "SUMMARIZE";
    case Stage::SynthQuestion: return "SYNTH_QUESTION";
    case Stage::Context: return "CONTEXT";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  if (s == "REPHRASE") return Stage::Rephrase;
  if (s == "SUMMARIZE") return Stage::Summarize;
  if (s == "SYNTH_QUESTION") return Stage::SynthQuestion;
  if (s == "CONTEXT") return Stage::Context;
  throw ParseError("unknown stage '" + std::string(s) + "'");
}

std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::Pending: return "PENDING";
    case RecordStatus::Accepted: return "ACCEPTED";
    case RecordStatus::Edited: return "EDITED";
    case RecordStatus::Rejected: return "REJECTED";
    case RecordStatus::Failed: return "FAILED";
  }
  return "?";
}

RecordStatus parse_status(std::string_view s) {
  if (s == "PENDING") return RecordStatus::Pending;
  if (s == "ACCEPTED") return RecordStatus::Accepted;
  if (s == "EDITED") return RecordStatus::Edited;
  if (s == "REJECTED") return RecordStatus::Rejected;
  if (s == "FAILED") return RecordStatus::Failed;
  throw ParseError("unknown status '" + std::string(s) + "'");
}

std::string_view to_string(DecisionAction a) {
  switch (a) {
    case DecisionAction::Accept: return "ACCEPT";
    case DecisionAction::Edit: return "EDIT";
    case DecisionAction::Reject: return "REJECT";
  }
  return "?";
}

DecisionAction parse_action(std::string_view s) {
  if (s == "ACCEPT") return DecisionAction::Accept;
  if (s == "EDIT") return DecisionAction::Edit;
  if (s == "REJECT") return DecisionAction::Reject;
  throw ParseError("unknown action '" + std::string(s) + "'");
}

void validate_record(const RefinementRecord& r) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("record '" + r.id + "': " + what);
  };
  if (r.id.empty()) throw ValidationError("record with empty id");
  if (r.pair_id.empty()) fail("empty pair_id");
  switch (r.status) {
    case RecordStatus::Edited:
      if (!r.final_text || text::trim(*r.final_text).empty()) {
        fail("EDITED requires final_text");
      }
      break;
    case RecordStatus::Accepted:
      if (!r.final_text || *r.final_text != r.proposed) {
        fail("ACCEPTED requires final_text == proposed");
      }
      break;
    case RecordStatus::Pending:
    case RecordStatus::Rejected:
    case RecordStatus::Failed:
      if (r.final_text) fail("final_text only allowed on ACCEPTED/EDITED");
      break;
  }
}

ordered_json to_json(const RefinementRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["pair_id"] = r.pair_id;
  j["stage"] = to_string(r.stage);
  j["original"] = r.original;
  j["proposed"] = r.proposed;
  j["status"] = to_string(r.status);
  j["final_text"] = r.final_text ? ordered_json(*r.final_text) : ordered_json();
  j["reviewer_note"] = r.reviewer_note ? ordered_json(*r.reviewer_note) : ordered_json();
  j["model_name"] = r.model_name;
  j["created_at"] = r.created_at;
  return j;
}

RefinementRecord record_from_json(const json& j) {
  try {
    RefinementRecord r;
    r.id = j.at("id").get<std::string>();
    r.pair_id = j.at("pair_id").get<std::string>();
    r.stage = parse_stage(j.at("stage").get<std::string>());
    r.original = j.at("original").get<std::string>();
    r.proposed = j.at("proposed").get<std::string>();
    r.status = parse_status(j.at("status").get<std::string>());
    if (auto it = j.find("final_text"); it != j.end() && !it->is_null()) {
      r.final_text = it->get<std::string>();
    }
    if (auto it = j.find("reviewer_note"); it != j.end() && !it->is_null()) {
      r.reviewer_note = it->get<std::string>();
    }
    r.model_name = j.value("model_name", std::string());
    r.created_at = j.value("created_at", std::string());
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad refinement record: ") + e.what());
  }
}

std::string make_record_id(std::string_view pair_id, Stage stage,
                           int generation) {
  std::string stage_name = text::to_lower(to_string(stage));
  return std::string(pair_id) + ":" + stage_name + ":" +
         std::to_string(generation);
}

RefinementRecord decide(RefinementRecord record, DecisionAction action,
                        const std::optional<std::string>& final_text,
                        const std::optional<std::string>& reviewer_note) {
  if (record.status != RecordStatus::Pending) {
    throw ConflictError("record '" + record.id + "' is already " +
                        std::string(to_string(record.status)));
  }
  switch (action) {
    case DecisionAction::Accept:
      if (final_text) throw ValidationError("ACCEPT must not carry final_text");
      record.status = RecordStatus::Accepted;
      record.final_text = record.proposed;
      break;
    case DecisionAction::Edit:
      if (!final_text || text::trim(*final_text).empty()) {
        throw ValidationError("EDIT requires a non-empty final_text");
      }
      record.status = RecordStatus::Edited;
      record.final_text = final_text;
      break;
    case DecisionAction::Reject:
      if (final_text) throw ValidationError("REJECT must not carry final_text");
      record.status = RecordStatus::Rejected;
      record.final_text.reset();
      break;
  }
  if (reviewer_note) record.reviewer_note = reviewer_note;
  return record;
}

// ---------------------------------------------------------------------------
// RecordStore

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  for (const json& row : read_jsonl(path_)) {
    RefinementRecord r = record_from_json(row);
    validate_record(r);
    put_locked(r);
  }
}

std::vector<RefinementRecord> RecordStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::optional<RefinementRecord> RecordStore::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return records_[it->second];
}

std::optional<RefinementRecord> RecordStore::latest(const std::string& pair_id,
                                                    Stage stage) const {
  std::shared_lock lock(mutex_);
  auto it = latest_.find({pair_id, stage});
  if (it == latest_.end()) return std::nullopt;
  return records_[it->second];
}

void RecordStore::put_locked(const RefinementRecord& record) {
  auto [it, inserted] = by_id_.try_emplace(record.id, records_.size());
  if (inserted) {
    records_.push_back(record);
  } else {
    records_[it->second] = record;
  }
  auto key = std::make_pair(record.pair_id, record.stage);
  auto cur = latest_.find(key);
  if (cur == latest_.end() || cur->second <= it->second) {
    latest_[key] = it->second;
  }
}

void RecordStore::append_line(const RefinementRecord& record) {
  const std::string line = to_json(record).dump() + "\n";
  std::FILE* f = std::fopen(path_.c_str(), "ab");
  if (f == nullptr) throw IoError("cannot append to '" + path_.string() + "'");
  const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size() &&
                  std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw IoError("write failed for '" + path_.string() + "'");
}

void RecordStore::put(const RefinementRecord& record) {
  validate_record(record);
  std::unique_lock lock(mutex_);
  append_line(record);
  put_locked(record);
}

RefinementRecord RecordStore::update(
    const std::string& id,
    const std::function<RefinementRecord(const RefinementRecord&)>& mutate) {
  std::unique_lock lock(mutex_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw NotFoundError("no record '" + id + "'");
  RefinementRecord next = mutate(records_[it->second]);
  if (next.id != id) throw ValidationError("update must not change the id");
  validate_record(next);
  append_line(next);
  put_locked(next);
  return next;
}

// ---------------------------------------------------------------------------
// Prompts

std::vector<std::string_view> required_placeholders(Stage stage) {
  switch (stage) {
    case Stage::Summarize: return {"{answer}"};
    case Stage::Rephrase:
    case Stage::SynthQuestion:
    case Stage::Context: return {"{question}", "{answer}"};
  }
  return {};
}

void validate_template(const PromptTemplate& t) {
  for (auto ph : required_placeholders(t.stage)) {
    if (t.text.find(ph) == std::string::npos) {
      throw ValidationError(std::string(to_string(t.stage)) +
                            " template lacks placeholder " + std::string(ph));
    }
  }
}

PromptSet load_prompt_templates(const std::filesystem::path& path) {
  const json j = read_json(path);
  if (!j.is_object()) throw ParseError(path.string() + ": expected an object");
  PromptSet set;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) {
      throw ParseError(path.string() + ": template '" + key + "' is not a string");
    }
    PromptTemplate t{parse_stage(key), value.get<std::string>()};
    validate_template(t);
    set[t.stage] = std::move(t);
  }
  return set;
}

std::string render_template(std::string_view tmpl, const QAPair& pair) {
  std::string out;
  out.reserve(tmpl.size() + pair.question.size() + pair.answer.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::string_view rest = tmpl.substr(i);
      if (rest.starts_with("{question}")) {
        out += pair.question;
        i += 10;
        continue;
      }
      if (rest.starts_with("{answer}")) {
        out += pair.answer;
        i += 8;
        continue;
      }
      if (rest.starts_with("{context}")) {
        out += pair.context.value_or("");
        i += 9;
        continue;
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string format_qa_block(std::string_view question, std::string_view answer) {
  return "question: " + std::string(question) + "\nanswer: " +
         std::string(answer);
}

namespace {

// Position just past "label:" when a line starts with it (optionally
// decorated with markdown '*' or '#').
std::optional<std::size_t> label_at(std::string_view s, std::size_t line_start,
                                    std::string_view label) {
  std::size_t i = line_start;
  while (i < s.size() && (s[i] == ' ' || s[i] == '*' || s[i] == '#')) ++i;
  if (!text::starts_with_ci(s.substr(i), label)) return std::nullopt;
  i += label.size();
  while (i < s.size() && s[i] == '*') ++i;
  if (i >= s.size() || s[i] != ':') return std::nullopt;
  ++i;
  while (i < s.size() && s[i] == '*') ++i;
  return i;
}

std::string strip_label(std::string_view s, std::string_view label) {
  const std::string_view t = text::trim(s);
  if (auto p = label_at(t, 0, label)) return std::string(text::trim(t.substr(*p)));
  return std::string(t);
}

}  // namespace

std::optional<std::pair<std::string, std::string>> parse_qa_block(
    std::string_view s) {
  std::optional<std::size_t> q_body;
  std::size_t a_line = std::string_view::npos;
  std::size_t a_body = 0;
  std::size_t line = 0;
  while (line <= s.size()) {
    if (!q_body) {
      q_body = label_at(s, line, "question");
    } else if (auto a = label_at(s, line, "answer")) {
      a_line = line;
      a_body = *a;
      break;
    }
    const std::size_t nl = s.find('\n', line);
    if (nl == std::string_view::npos) break;
    line = nl + 1;
  }
  if (!q_body || a_line == std::string_view::npos) return std::nullopt;
  std::string question(text::trim(s.substr(*q_body, a_line - *q_body)));
  std::string answer(text::trim(s.substr(a_body)));
  if (question.empty()) return std::nullopt;
  return std::make_pair(std::move(question), std::move(answer));
}

std::string stage_source_text(const QAPair& pair, Stage stage) {
  return stage == Stage::Summarize ? pair.answer
                                   : format_qa_block(pair.question, pair.answer);
}

// ---------------------------------------------------------------------------
// run_stage

namespace {

void check_stage_input(const Dataset& dataset, Stage stage) {
  const Version v = dataset.version;
  const bool ok = (stage == Stage::Rephrase && v == Version::V1) ||
                  (stage == Stage::Summarize && v == Version::V2) ||
                  ((stage == Stage::SynthQuestion || stage == Stage::Context) &&
                   (v == Version::V2 || v == Version::V3));
  if (!ok) {
    throw ValidationError(std::string(to_string(stage)) +
                          " cannot run on a " + std::string(to_string(v)) +
                          " dataset");
  }
}

// Cleans a completion into the proposal for the stage, or returns an error
// reason.
std::variant<std::string, std::string> clean_proposal(const std::string& reply,
                                                      Stage stage) {
  using Result = std::variant<std::string, std::string>;
  const std::string_view t = text::trim(reply);
  if (t.empty()) return Result(std::in_place_index<1>, "empty completion");
  switch (stage) {
    case Stage::Rephrase: {
      auto qa = parse_qa_block(t);
      if (!qa || qa->second.empty()) {
        return Result(std::in_place_index<1>,
                      "completion is not a question/answer block");
      }
      return Result(std::in_place_index<0>, format_qa_block(qa->first, qa->second));
    }
    case Stage::Summarize:
      return Result(std::in_place_index<0>, strip_label(t, "answer"));
    case Stage::SynthQuestion:
      return Result(std::in_place_index<0>, strip_label(t, "question"));
    case Stage::Context:
      return Result(std::in_place_index<0>, strip_label(t, "context"));
  }
  return Result(std::in_place_index<1>, "unknown stage");
}

struct StageTask {
  const QAPair* pair;
  std::string record_id;
};

}  // namespace

StageRunResult run_stage(const Dataset& dataset, Stage stage,
                         ChatClient& client, const PromptSet& prompts,
                         RecordStore& store, const StageOptions& options) {
  check_stage_input(dataset, stage);
  auto tmpl = prompts.find(stage);
  if (tmpl == prompts.end()) {
    throw ValidationError(std::string("no prompt template for ") +
                          std::string(to_string(stage)));
  }
  if (tmpl->second.stage != stage) {
    throw ValidationError("prompt template registered under the wrong stage");
  }
  validate_template(tmpl->second);
  if (options.max_concurrency < 1) {
    throw ValidationError("max_concurrency must be >= 1");
  }

  StageRunResult result;
  std::vector<StageTask> tasks;
  for (const auto& pair : dataset.pairs) {
    const auto prev = store.latest(pair.id, stage);
    if (!prev) {
      tasks.push_back({&pair, make_record_id(pair.id, stage, 1)});
      continue;
    }
    switch (prev->status) {
      case RecordStatus::Pending:
      case RecordStatus::Accepted:
      case RecordStatus::Edited:
        ++result.skipped;
        break;
      case RecordStatus::Failed:
        tasks.push_back({&pair, prev->id});
        break;
      case RecordStatus::Rejected: {
        const auto colon = prev->id.rfind(':');
        const int gen = std::stoi(prev->id.substr(colon + 1));
        tasks.push_back({&pair, make_record_id(pair.id, stage, gen + 1)});
        break;
      }
    }
  }

  std::atomic<std::size_t> failed{0};
  auto work = [&](std::size_t i) {
    const StageTask& task = tasks[i];
    RefinementRecord rec;
    rec.id = task.record_id;
    rec.pair_id = task.pair->id;
    rec.stage = stage;
    rec.original = stage_source_text(*task.pair, stage);
    rec.model_name = options.model_name;

    ChatRequest req;
    req.model = options.model_name;
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    req.messages.push_back({"user", render_template(tmpl->second.text, *task.pair)});

    std::string reason;
    try {
      const std::string reply = complete_with_retry(
          client, req, options.retry, fnv1a64(rec.id));
      auto cleaned = clean_proposal(reply, stage);
      if (cleaned.index() == 0) {
        rec.proposed = std::get<0>(cleaned);
        rec.status = RecordStatus::Pending;
      } else {
        rec.proposed = reply;
        reason = std::get<1>(cleaned);
      }
    } catch (const UnreachableError&) {
      throw;
    } catch (const EndpointError& e) {
      reason = e.what();
    }
    if (!reason.empty()) {
      rec.status = RecordStatus::Failed;
      rec.reviewer_note = "failed: " + reason;
      ++failed;
    }
    rec.created_at = utc_timestamp();
    store.put(rec);
  };

  result.requested = tasks.size();
  try {
    run_bounded(tasks.size(), static_cast<std::size_t>(options.max_concurrency),
                work);
  } catch (const UnreachableError& e) {
    throw EndpointError(std::string("endpoint unreachable after retries (") +
                        e.what() + "); finished records were kept");
  }
  result.failed = failed.load();

  for (const auto& pair : dataset.pairs) {
    if (auto r = store.latest(pair.id, stage)) result.records.push_back(*r);
  }
  return result;
}

// ---------------------------------------------------------------------------
// apply_decisions

Dataset apply_decisions(const Dataset& dataset,
                        std::span<const RefinementRecord> records, Stage stage,
                        Version target_version, ApplySummary* summary) {
  const Version from = dataset.version;
  const bool target_ok =
      (stage == Stage::Rephrase && from == Version::V1 &&
       target_version == Version::V2) ||
      (stage == Stage::Summarize && from == Version::V2 &&
       target_version == Version::V3) ||
      (stage == Stage::Context && from != Version::Synthetic &&
       target_version != Version::Synthetic && target_version >= from) ||
      (stage == Stage::SynthQuestion && target_version == Version::Synthetic &&
       (from == Version::V2 || from == Version::V3));
  if (!target_ok) {
    throw ValidationError(std::string("cannot apply ") +
                          std::string(to_string(stage)) + " to a " +
                          std::string(to_string(from)) + " dataset producing " +
                          std::string(to_string(target_version)));
  }

  // Last record per pair wins.
  std::unordered_set<std::string_view> ids;
  for (const auto& p : dataset.pairs) ids.insert(p.id);
  std::unordered_map<std::string, const RefinementRecord*> by_pair;
  for (const auto& r : records) {
    if (r.stage != stage) continue;
    if (!ids.contains(r.pair_id)) {
      throw ValidationError("record '" + r.id + "' refers to unknown pair '" +
                            r.pair_id + "'");
    }
    by_pair[r.pair_id] = &r;
  }
  for (const auto& [pair_id, r] : by_pair) {
    if (r->status == RecordStatus::Pending) {
      throw ValidationError("record '" + r->id + "' is still PENDING");
    }
  }

  ApplySummary local;
  Dataset out;
  out.version = target_version;
  out.created_at = utc_timestamp();
  out.notes = std::string("from ") + std::string(to_string(from)) + " via " +
              std::string(to_string(stage));

  auto decided_text = [&](const QAPair& p) -> std::optional<std::string> {
    auto it = by_pair.find(p.id);
    if (it == by_pair.end()) return std::nullopt;
    const RefinementRecord& r = *it->second;
    if (r.status == RecordStatus::Accepted || r.status == RecordStatus::Edited) {
      return r.final_text;
    }
    return std::nullopt;
  };

  if (stage == Stage::SynthQuestion) {
    for (const auto& p : dataset.pairs) {
      auto t = decided_text(p);
      if (!t) continue;
      QAPair s;
      s.id = derived_id(p.id, Version::Synthetic);
      s.source = p.source;
      s.version = Version::Synthetic;
      s.provenance = Provenance::Synthetic;
      s.parent_id = p.id;
      if (auto qa = parse_qa_block(*t)) {
        s.question = qa->first;
        s.answer = qa->second;
      } else {
        s.question = std::string(text::trim(*t));
      }
      out.pairs.push_back(std::move(s));
      ++local.replaced;
    }
    local.kept = dataset.pairs.size() - local.replaced;
  } else {
    for (const auto& p : dataset.pairs) {
      QAPair q = p;
      q.version = target_version;
      if (target_version != from) {
        q.id = derived_id(p.id, target_version);
        q.parent_id = p.id;
      }
      if (auto t = decided_text(p)) {
        switch (stage) {
          case Stage::Rephrase: {
            auto qa = parse_qa_block(*t);
            if (!qa || qa->second.empty()) {
              throw ValidationError("REPHRASE text for '" + p.id +
                                    "' is not a question/answer block");
            }
            q.question = qa->first;
            q.answer = qa->second;
            break;
          }
          case Stage::Summarize:
            q.answer = *t;
            break;
          case Stage::Context:
            q.context = *t;
            break;
          case Stage::SynthQuestion:
            break;
        }
        ++local.replaced;
      } else {
        ++local.kept;
      }
      out.pairs.push_back(std::move(q));
    }
  }
  validate_dataset(out);
  if (summary) *summary = local;
  return out;
}

SyntheticSplit synthetic_totals(const Dataset& synthetic, std::size_t train,
                                std::size_t val, std::uint64_t seed) {
  if (synthetic.version != Version::Synthetic) {
    throw ValidationError("synthetic_totals needs a SYNTHETIC dataset");
  }
  for (const auto& p : synthetic.pairs) {
    if (text::trim(p.answer).empty()) {
      throw ValidationError("synthetic pair '" + p.id + "' has no answer yet");
    }
  }
  const Splits s = split_dataset(synthetic, {train, val, 0}, seed);
  return {s.train_ids, s.val_ids, seed};
}

}  // namespace shqa
