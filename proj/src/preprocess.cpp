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

#include "shqa/preprocess.hpp"

#include <map>
#include <unordered_set>

#include "shqa/error.hpp"
#include "shqa/text.hpp"

namespace shqa {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const QACandidate& c) {
  ordered_json j;
  j["source"] = c.source;
  j["thread_id"] = c.thread_id;
  j["question"] = c.question;
  j["answers"] = c.answers;
  return j;
}

QACandidate candidate_from_json(const json& j) {
  try {
    QACandidate c;
    c.source = j.at("source").get<std::string>();
    c.thread_id = j.value("thread_id", std::string());
    c.question = j.at("question").get<std::string>();
    c.answers = j.at("answers").get<std::vector<std::string>>();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad candidate: ") + e.what());
  }
}

std::string normalize_text(std::string_view input) {
  const std::string lowered = text::to_lower(input);
  std::string out;
  out.reserve(lowered.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < lowered.size(); ++i) {
    char c = lowered[i];
    if (c == '\r') {
      if (i + 1 < lowered.size() && lowered[i + 1] == '\n') ++i;
      c = '\n';
    }
    if (c == ' ' || c == '\t') {
      pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return std::string(text::trim(out));
}

std::optional<std::size_t> select_answer_index(const QACandidate& candidate) {
  std::optional<std::size_t> best;
  std::size_t best_words = 0;
  std::size_t best_chars = 0;
  for (std::size_t i = 0; i < candidate.answers.size(); ++i) {
    const std::string& a = candidate.answers[i];
    const std::size_t words = text::word_count(a);
    if (words == 0) continue;
    const std::size_t chars = text::char_count(a);
    // Strict comparison keeps the earliest answer on a full tie.
    if (!best || words > best_words ||
        (words == best_words && chars > best_chars)) {
      best = i;
      best_words = words;
      best_chars = chars;
    }
  }
  return best;
}

std::optional<std::string> select_answer(const QACandidate& candidate) {
  if (auto i = select_answer_index(candidate)) return candidate.answers[*i];
  return std::nullopt;
}

ordered_json to_json(const ReductionReport& r) {
  ordered_json j;
  j["input_candidates"] = r.input_candidates;
  j["dropped_not_selected"] = r.dropped_not_selected;
  j["dropped_no_answer"] = r.dropped_no_answer;
  j["dropped_duplicate"] = r.dropped_duplicate;
  j["output_pairs"] = r.output_pairs;
  return j;
}

BuildV1Result build_v1(const std::vector<QACandidate>& candidates,
                       const BuildV1Options& options) {
  BuildV1Result result;
  ReductionReport& report = result.report;
  report.input_candidates = candidates.size();

  Dataset& ds = result.dataset;
  ds.version = Version::V1;
  ds.created_at = utc_timestamp();
  ds.notes = options.notes;

  std::unordered_set<std::string> seen_questions;
  std::map<std::string, std::size_t> ordinals;
  for (const auto& c : candidates) {
    if (options.allowlist && !options.allowlist->contains(c.thread_id)) {
      ++report.dropped_not_selected;
      continue;
    }
    if (!is_known_source(c.source)) {
      throw ValidationError("candidate '" + c.thread_id + "' has unknown source '" +
                            c.source + "'");
    }
    const auto selected = select_answer(c);
    if (!selected) {
      ++report.dropped_no_answer;
      continue;
    }
    std::string question = normalize_text(c.question);
    if (question.empty()) {
      throw ValidationError("candidate '" + c.thread_id + "' has a blank question");
    }
    if (!seen_questions.insert(question).second) {
      ++report.dropped_duplicate;
      continue;
    }
    QAPair p;
    p.source = c.source;
    p.id = make_pair_id(c.source, ++ordinals[c.source]);
    p.question = std::move(question);
    p.answer = normalize_text(*selected);
    p.version = Version::V1;
    p.provenance = Provenance::Original;
    ds.pairs.push_back(std::move(p));
  }
  report.output_pairs = ds.pairs.size();
  validate_dataset(ds);
  return result;
}

}  // namespace shqa
