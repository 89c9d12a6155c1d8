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
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shqa/core_model.hpp"

namespace shqa {

// One question with every answer the thread produced, in post order.
struct QACandidate {
  std::string source;
  std::string thread_id;
  std::string question;
  std::vector<std::string> answers;

  bool operator==(const QACandidate&) const = default;
};

nlohmann::ordered_json to_json(const QACandidate& c);
QACandidate candidate_from_json(const nlohmann::json& j);

// Lowercase, CR/CRLF -> LF, collapse runs of spaces/tabs, trim.
std::string normalize_text(std::string_view text);

// Index of the answer with most words, then most characters, then the
// earliest position. Blank answers are never selected.
std::optional<std::size_t> select_answer_index(const QACandidate& candidate);
std::optional<std::string> select_answer(const QACandidate& candidate);

struct ReductionReport {
  std::size_t input_candidates = 0;
  std::size_t dropped_not_selected = 0;
  std::size_t dropped_no_answer = 0;
  std::size_t dropped_duplicate = 0;
  std::size_t output_pairs = 0;

  bool operator==(const ReductionReport&) const = default;
};

nlohmann::ordered_json to_json(const ReductionReport& r);

struct BuildV1Options {
  // Thread ids kept by a manual relevance pass; unset keeps everything.
  std::optional<std::set<std::string>> allowlist;
  std::string notes;
};

struct BuildV1Result {
  Dataset dataset;
  ReductionReport report;
};

// Candidates whose selected answer is missing are dropped, then questions
// that normalize to an earlier question are dropped. Ids are
// `<source>-<ordinal>` with ordinals counted per source from 1.
BuildV1Result build_v1(const std::vector<QACandidate>& candidates,
                       const BuildV1Options& options = {});

}  // namespace shqa
