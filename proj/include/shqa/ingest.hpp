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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shqa/preprocess.hpp"

namespace shqa {

struct Post {
  int position = 0;
  std::string body;
  // Author, date, votes, ... kept only until candidate extraction.
  std::map<std::string, std::string> meta;

  bool operator==(const Post&) const = default;
};

struct RawThread {
  std::string source;
  std::string thread_id;
  std::string title;
  std::vector<Post> posts;  // ascending position; 0 is the question

  bool operator==(const RawThread&) const = default;
};

struct IngestWarning {
  std::string file;
  std::size_t row = 0;
  std::string reason;
};

nlohmann::ordered_json to_json(const IngestWarning& w);

struct ParseResult {
  std::vector<RawThread> threads;
  std::vector<IngestWarning> warnings;
};

// Reads a scraper export. JSON: array of
//   {thread_id, title, source?, posts: [{position, body, meta?}]}.
// CSV: header with thread_id, position, title, body and optional meta
// (a JSON object) and source columns; one row per post.
// A per-thread `source` overrides the `source` argument.
ParseResult parse_export(const std::filesystem::path& path,
                         const std::string& source);

struct KeywordFilterSpec {
  std::vector<std::string> keywords;
  bool match_title = true;
  bool match_opening_post = true;

  // Throws ValidationError if keywords are empty, blank or not lowercase, or
  // no field is selected.
  void validate() const;
};

// One phrase per line; blank lines and '#' comments ignored.
KeywordFilterSpec load_keyword_spec(const std::filesystem::path& path);

// Keeps threads where some phrase is a case-insensitive substring of a
// selected field. Order is preserved.
std::vector<RawThread> keyword_filter(const std::vector<RawThread>& threads,
                                      const KeywordFilterSpec& spec);

// question = title + blank line + opening post; answers = later posts.
QACandidate thread_to_candidate(const RawThread& thread);

}  // namespace shqa
