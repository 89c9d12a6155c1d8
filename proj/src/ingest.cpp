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

#include "shqa/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "shqa/error.hpp"
#include "shqa/text.hpp"

namespace shqa {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read export '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// RFC 4180: comma separated, double-quoted fields may hold commas, quotes
// ("") and newlines. Returns records; an unterminated quote ends the input.
std::vector<std::vector<std::string>> parse_csv(std::string_view data,
                                                bool& unterminated) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  unterminated = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) unterminated = true;
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::map<std::string, std::string> meta_from_json(const json& j) {
  std::map<std::string, std::string> meta;
  if (!j.is_object()) return meta;
  for (const auto& [k, v] : j.items()) {
    meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  return meta;
}

void sort_posts(RawThread& t) {
  std::stable_sort(t.posts.begin(), t.posts.end(),
                   [](const Post& a, const Post& b) {
                     return a.position < b.position;
                   });
}

ParseResult parse_json_export(const std::filesystem::path& path,
                              std::string_view data,
                              const std::string& source) {
  json root;
  try {
    root = json::parse(data);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": invalid JSON export: " + e.what());
  }
  if (root.is_object() && root.contains("threads")) root = root["threads"];
  if (!root.is_array()) {
    throw ParseError(path.string() + ": JSON export must be an array of threads");
  }

  ParseResult result;
  const std::string file = path.string();
  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& jt = root[i];
    const std::size_t row = i + 1;
    auto warn = [&](std::string reason) {
      result.warnings.push_back({file, row, std::move(reason)});
    };
    if (!jt.is_object()) {
      warn("thread entry is not an object");
      continue;
    }
    RawThread t;
    auto id = jt.find("thread_id");
    if (id == jt.end() || !(id->is_string() || id->is_number_integer())) {
      warn("missing thread_id");
      continue;
    }
    t.thread_id = id->is_string() ? id->get<std::string>() : id->dump();
    t.source = jt.value("source", source);
    if (auto title = jt.find("title"); title != jt.end() && title->is_string()) {
      t.title = title->get<std::string>();
    }
    auto posts = jt.find("posts");
    if (posts == jt.end() || !posts->is_array()) {
      warn("thread '" + t.thread_id + "' has no posts array");
      continue;
    }
    for (const json& jp : *posts) {
      if (!jp.is_object() || !jp.contains("position") ||
          !jp["position"].is_number_integer() || jp["position"].get<int>() < 0 ||
          !jp.contains("body") || !jp["body"].is_string()) {
        warn("thread '" + t.thread_id + "' has a malformed post");
        continue;
      }
      Post p;
      p.position = jp["position"].get<int>();
      p.body = jp["body"].get<std::string>();
      if (auto m = jp.find("meta"); m != jp.end()) p.meta = meta_from_json(*m);
      t.posts.push_back(std::move(p));
    }
    if (t.posts.empty()) {
      warn("thread '" + t.thread_id + "' has no valid posts");
      continue;
    }
    sort_posts(t);
    result.threads.push_back(std::move(t));
  }
  return result;
}

ParseResult parse_csv_export(const std::filesystem::path& path,
                             std::string_view data, const std::string& source) {
  bool unterminated = false;
  auto rows = parse_csv(data, unterminated);
  if (rows.empty()) throw ParseError(path.string() + ": empty CSV export");

  const auto& header = rows.front();
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    col[text::to_lower(text::trim(header[i]))] = i;
  }
  for (const char* required : {"thread_id", "position", "title", "body"}) {
    if (!col.contains(required)) {
      throw ParseError(path.string() + ": CSV export lacks column '" +
                       required + "'");
    }
  }

  ParseResult result;
  const std::string file = path.string();
  std::vector<RawThread> threads;
  std::unordered_map<std::string, std::size_t> index;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto warn = [&](std::string reason) {
      result.warnings.push_back({file, r, std::move(reason)});
    };
    if (row.size() != header.size()) {
      warn("expected " + std::to_string(header.size()) + " columns, got " +
           std::to_string(row.size()));
      continue;
    }
    const std::string& thread_id = row[col["thread_id"]];
    if (text::trim(thread_id).empty()) {
      warn("empty thread_id");
      continue;
    }
    const std::string pos_text(text::trim(row[col["position"]]));
    int position = -1;
    auto [ptr, ec] = std::from_chars(pos_text.data(),
                                     pos_text.data() + pos_text.size(), position);
    if (ec != std::errc{} || ptr != pos_text.data() + pos_text.size() ||
        position < 0) {
      warn("bad position '" + pos_text + "'");
      continue;
    }
    Post post;
    post.position = position;
    post.body = row[col["body"]];
    if (auto m = col.find("meta"); m != col.end() && !row[m->second].empty()) {
      try {
        post.meta = meta_from_json(json::parse(row[m->second]));
      } catch (const json::exception&) {
        warn("meta is not a JSON object");
        continue;
      }
    }

    auto [it, inserted] = index.try_emplace(thread_id, threads.size());
    if (inserted) {
      RawThread t;
      t.thread_id = thread_id;
      t.source = source;
      if (auto s = col.find("source");
          s != col.end() && !text::trim(row[s->second]).empty()) {
        t.source = row[s->second];
      }
      threads.push_back(std::move(t));
    }
    RawThread& t = threads[it->second];
    const std::string& title = row[col["title"]];
    if (!title.empty() && (t.title.empty() || position == 0)) t.title = title;
    const bool dup = std::any_of(t.posts.begin(), t.posts.end(),
                                 [&](const Post& p) {
                                   return p.position == position;
                                 });
    if (dup) {
      warn("duplicate position " + std::to_string(position) + " in thread '" +
           thread_id + "'");
      continue;
    }
    t.posts.push_back(std::move(post));
  }
  if (unterminated) {
    result.warnings.push_back({file, rows.size() - 1, "unterminated quoted field"});
  }
  for (auto& t : threads) {
    sort_posts(t);
    result.threads.push_back(std::move(t));
  }
  return result;
}

bool contains_phrase(const std::string& haystack_lower,
                     const std::vector<std::string>& phrases) {
  return std::any_of(phrases.begin(), phrases.end(), [&](const std::string& k) {
    return haystack_lower.find(k) != std::string::npos;
  });
}

}  // namespace

nlohmann::ordered_json to_json(const IngestWarning& w) {
  nlohmann::ordered_json j;
  j["file"] = w.file;
  j["row"] = w.row;
  j["reason"] = w.reason;
  return j;
}

ParseResult parse_export(const std::filesystem::path& path,
                         const std::string& source) {
  const std::string data = read_file(path);
  const std::string ext = text::to_lower(path.extension().string());

  ParseResult result;
  if (ext == ".json") {
    result = parse_json_export(path, data, source);
  } else if (ext == ".csv") {
    result = parse_csv_export(path, data, source);
  } else {
    const std::string_view head = text::trim(data);
    if (!head.empty() && head.front() == '[') {
      result = parse_json_export(path, data, source);
    } else {
      throw ParseError(path.string() + ": unknown export format");
    }
  }
  if (result.threads.empty()) {
    throw ParseError(path.string() + ": no parseable threads");
  }
  return result;
}

void KeywordFilterSpec::validate() const {
  if (keywords.empty()) throw ValidationError("keyword list is empty");
  for (const auto& k : keywords) {
    if (text::trim(k).empty()) throw ValidationError("blank keyword");
    if (text::to_lower(k) != k) {
      throw ValidationError("keyword '" + k + "' is not lowercase");
    }
  }
  if (!match_title && !match_opening_post) {
    throw ValidationError("keyword filter selects no field");
  }
}

KeywordFilterSpec load_keyword_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read keyword file '" + path.string() + "'");
  KeywordFilterSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    spec.keywords.push_back(text::to_lower(t));
  }
  spec.validate();
  return spec;
}

std::vector<RawThread> keyword_filter(const std::vector<RawThread>& threads,
                                      const KeywordFilterSpec& spec) {
  spec.validate();
  std::vector<RawThread> kept;
  for (const auto& t : threads) {
    bool hit = spec.match_title && contains_phrase(text::to_lower(t.title),
                                                   spec.keywords);
    if (!hit && spec.match_opening_post && !t.posts.empty()) {
      hit = contains_phrase(text::to_lower(t.posts.front().body), spec.keywords);
    }
    if (hit) kept.push_back(t);
  }
  return kept;
}

QACandidate thread_to_candidate(const RawThread& thread) {
  if (thread.posts.empty()) {
    throw ValidationError("thread '" + thread.thread_id + "' has no posts");
  }
  const std::string_view title = text::trim(thread.title);
  // The lowest-positioned post is the opening post even if position 0 was
  // lost upstream.
  const std::string_view body = text::trim(thread.posts.front().body);
  if (title.empty() && body.empty()) {
    throw ValidationError("thread '" + thread.thread_id +
                          "' has an empty title and opening post");
  }

  QACandidate c;
  c.source = thread.source;
  c.thread_id = thread.thread_id;
  if (title.empty()) {
    c.question = std::string(body);
  } else if (body.empty()) {
    c.question = std::string(title);
  } else {
    c.question = std::string(title) + "\n\n" + std::string(body);
  }
  for (std::size_t i = 1; i < thread.posts.size(); ++i) {
    c.answers.push_back(thread.posts[i].body);
  }
  return c;
}

}  // namespace shqa
