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

#include "shqa/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include <fmt/format.h>

#include "shqa/error.hpp"
#include "shqa/rng.hpp"
#include "shqa/text.hpp"

namespace shqa {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(PromptMode m) {
  return m == PromptMode::WithContext ? "WITH_CONTEXT" : "WITHOUT_CONTEXT";
}

PromptMode parse_mode(std::string_view s) {
  if (s == "WITH_CONTEXT" || s == "with-context") return PromptMode::WithContext;
  if (s == "WITHOUT_CONTEXT" || s == "without-context") {
    return PromptMode::WithoutContext;
  }
  throw ParseError("unknown prompt mode '" + std::string(s) + "'");
}

ordered_json to_json(const Prediction& p) {
  ordered_json j;
  j["pair_id"] = p.pair_id;
  j["output"] = p.output;
  j["model_name"] = p.model_name;
  j["mode"] = to_string(p.mode);
  return j;
}

Prediction prediction_from_json(const json& j) {
  try {
    Prediction p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.output = j.at("output").get<std::string>();
    p.model_name = j.value("model_name", std::string());
    p.mode = parse_mode(j.value("mode", std::string("WITHOUT_CONTEXT")));
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad prediction: ") + e.what());
  }
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  for (const auto& row : read_jsonl(path)) out.push_back(prediction_from_json(row));
  return out;
}

// ---------------------------------------------------------------------------
// Lexical metrics

namespace {

bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

PrfScore from_overlap(std::size_t overlap, std::size_t n_pred,
                      std::size_t n_gold) {
  if (n_pred == 0 && n_gold == 0) return {1.0, 1.0, 1.0};
  if (n_pred == 0 || n_gold == 0 || overlap == 0) return {0.0, 0.0, 0.0};
  PrfScore s;
  s.precision = static_cast<double>(overlap) / static_cast<double>(n_pred);
  s.recall = static_cast<double>(overlap) / static_cast<double>(n_gold);
  s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace

std::vector<std::string> normalize_answer(std::string_view raw) {
  std::string lowered = text::to_lower(raw);
  std::erase_if(lowered, is_ascii_punct);
  std::vector<std::string> tokens;
  for (auto w : text::split_words(lowered)) {
    if (w == "a" || w == "an" || w == "the") continue;
    tokens.emplace_back(w);
  }
  return tokens;
}

PrfScore token_f1(std::string_view pred, std::string_view gold) {
  const auto p = normalize_answer(pred);
  const auto g = normalize_answer(gold);
  std::unordered_map<std::string_view, int> gold_counts;
  for (const auto& t : g) ++gold_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : p) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return from_overlap(overlap, p.size(), g.size());
}

std::size_t lcs_length(std::span<const std::string> a,
                       std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PrfScore rouge_l(std::string_view pred, std::string_view gold) {
  const auto p = normalize_answer(pred);
  const auto g = normalize_answer(gold);
  return from_overlap(lcs_length(p, g), p.size(), g.size());
}

// ---------------------------------------------------------------------------
// Embedders

Eigen::MatrixXd OneHotEmbedder::embed(std::span<const std::string> tokens) {
  std::vector<Eigen::Index> cols;
  cols.reserve(tokens.size());
  Eigen::Index dims = 0;
  {
    std::lock_guard lock(mutex_);
    for (const auto& t : tokens) {
      auto [it, inserted] =
          index_.try_emplace(t, static_cast<Eigen::Index>(index_.size()));
      cols.push_back(it->second);
    }
    dims = static_cast<Eigen::Index>(index_.size());
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(tokens.size()), dims);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    m(static_cast<Eigen::Index>(i), cols[i]) = 1.0;
  }
  return m;
}

Eigen::MatrixXd HashingEmbedder::embed(std::span<const std::string> tokens) {
  Eigen::MatrixXd m =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tokens.size()), dims_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string padded = "<" + tokens[i] + ">";
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j + 3 <= padded.size(); ++j) {
      const std::uint64_t h = fnv1a64(std::string_view(padded).substr(j, 3));
      m(row, static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dims_))) +=
          1.0;
    }
    // Whole-token feature keeps distinct short tokens apart.
    const std::uint64_t h = fnv1a64(padded);
    m(row, static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dims_))) +=
        1.0;
    m.row(row).normalize();
  }
  return m;
}

HttpEmbedder::HttpEmbedder(std::string base_url, std::string model,
                           std::string api_key_ref, int timeout_ms)
    : url_(parse_base_url(base_url)),
      model_(std::move(model)),
      timeout_ms_(timeout_ms) {
  if (!api_key_ref.empty()) {
    if (const char* key = std::getenv(api_key_ref.c_str())) api_key_ = key;
  }
}

Eigen::MatrixXd HttpEmbedder::embed(std::span<const std::string> tokens) {
  std::string joined;
  for (const auto& t : tokens) {
    if (!joined.empty()) joined.push_back(' ');
    joined += t;
  }
  ordered_json body;
  body["model"] = model_;
  body["text"] = joined;
  body["tokens"] = std::vector<std::string>(tokens.begin(), tokens.end());
  const json reply =
      post_json(url_, "/token-embeddings", body.dump(), api_key_, timeout_ms_);
  try {
    const auto& rows = reply.at("embeddings");
    if (rows.size() != tokens.size()) {
      throw PermanentError("embedding endpoint returned " +
                           std::to_string(rows.size()) + " vectors for " +
                           std::to_string(tokens.size()) + " tokens");
    }
    const auto dims = rows.empty() ? 0 : rows.at(0).size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(dims));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != dims) throw PermanentError("ragged embeddings");
      for (std::size_t j = 0; j < dims; ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            rows[i][j].get<double>();
      }
      const double n = m.row(static_cast<Eigen::Index>(i)).norm();
      if (n > 0.0) m.row(static_cast<Eigen::Index>(i)) /= n;
    }
    return m;
  } catch (const json::exception& e) {
    throw PermanentError(std::string("bad embedding reply: ") + e.what());
  }
}

PrfScore greedy_match(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gold) {
  if (pred.rows() == 0 && gold.rows() == 0) return {1.0, 1.0, 1.0};
  if (pred.rows() == 0 || gold.rows() == 0) return {0.0, 0.0, 0.0};
  const Eigen::Index dims = std::min(pred.cols(), gold.cols());
  const Eigen::MatrixXd sim =
      pred.leftCols(dims) * gold.leftCols(dims).transpose();
  PrfScore s;
  s.precision = sim.rowwise().maxCoeff().mean();
  s.recall = sim.colwise().maxCoeff().mean();
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

PrfScore semantic_f1(std::string_view pred, std::string_view gold,
                     Embedder& embedder) {
  const auto p = normalize_answer(pred);
  const auto g = normalize_answer(gold);
  if (p.empty() && g.empty()) return {1.0, 1.0, 1.0};
  if (p.empty() || g.empty()) return {0.0, 0.0, 0.0};
  return greedy_match(embedder.embed(p), embedder.embed(g));
}

// ---------------------------------------------------------------------------
// Prediction generation

std::string build_prompt(const QAPair& pair, PromptMode mode) {
  std::string prompt;
  if (mode == PromptMode::WithContext) {
    if (!pair.context || text::trim(*pair.context).empty()) {
      throw ValidationError("pair '" + pair.id + "' has no context");
    }
    prompt = "context: " + *pair.context + "\n";
  }
  prompt += "question: " + pair.question + "\nanswer:";
  return prompt;
}

std::vector<Prediction> generate_predictions(
    std::span<const std::string> split_ids, const Dataset& dataset,
    ChatClient& client, const GenerationParams& params, PromptMode mode,
    const PredictOptions& options) {
  std::unordered_map<std::string_view, const QAPair*> by_id;
  for (const auto& p : dataset.pairs) by_id.emplace(p.id, &p);
  std::vector<const QAPair*> pairs;
  pairs.reserve(split_ids.size());
  for (const auto& id : split_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw ValidationError("split id '" + id + "' is not in the dataset");
    }
    pairs.push_back(it->second);
    // Fail before any request if a prompt cannot be built.
    build_prompt(*it->second, mode);
  }

  std::unordered_map<std::string, Prediction> done;
  if (std::filesystem::exists(options.output_path)) {
    for (auto& p : load_predictions(options.output_path)) {
      if (p.model_name == options.model_name && p.mode == mode) {
        done.insert_or_assign(p.pair_id, std::move(p));
      }
    }
  }

  std::vector<const QAPair*> todo;
  for (const auto* p : pairs) {
    if (!done.contains(p->id)) todo.push_back(p);
  }

  std::mutex write_mutex;
  auto work = [&](std::size_t i) {
    const QAPair& pair = *todo[i];
    ChatRequest req;
    req.model = options.model_name;
    req.temperature = params.temperature;
    req.max_tokens = params.max_tokens;
    req.seed = params.seed;
    req.messages.push_back({"user", build_prompt(pair, mode)});
    Prediction pred;
    pred.pair_id = pair.id;
    pred.model_name = options.model_name;
    pred.mode = mode;
    pred.output = complete_with_retry(client, req, options.retry,
                                      fnv1a64(pair.id));

    const std::string line = to_json(pred).dump() + "\n";
    std::lock_guard lock(write_mutex);
    std::FILE* f = std::fopen(options.output_path.c_str(), "ab");
    if (f == nullptr) {
      throw IoError("cannot append to '" + options.output_path.string() + "'");
    }
    const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size() &&
                    std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
    std::fclose(f);
    if (!ok) throw IoError("write failed for '" + options.output_path.string() + "'");
    done.insert_or_assign(pred.pair_id, std::move(pred));
  };
  run_bounded(todo.size(),
              static_cast<std::size_t>(std::max(options.max_concurrency, 1)),
              work);

  std::vector<Prediction> out;
  out.reserve(pairs.size());
  for (const auto* p : pairs) out.push_back(done.at(p->id));
  return out;
}

// ---------------------------------------------------------------------------
// Reports

ScoreTriple score_example(std::string_view pred, std::string_view gold,
                          Embedder& embedder) {
  return {token_f1(pred, gold).f1, rouge_l(pred, gold).f1,
          semantic_f1(pred, gold, embedder).f1};
}

Eigen::MatrixXd EvalReport::distribution() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(per_example.size()), 3);
  for (std::size_t i = 0; i < per_example.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = per_example[i].scores.f1;
    m(r, 1) = per_example[i].scores.rouge_l;
    m(r, 2) = per_example[i].scores.semantic_f1;
  }
  return m;
}

EvalReport evaluate_predictions(std::span<const Prediction> predictions,
                                const Dataset& dataset, Embedder& embedder) {
  if (predictions.empty()) throw ValidationError("no predictions to evaluate");
  std::unordered_map<std::string_view, const QAPair*> by_id;
  for (const auto& p : dataset.pairs) by_id.emplace(p.id, &p);

  std::vector<const Prediction*> sorted;
  sorted.reserve(predictions.size());
  std::set<std::string_view> seen;
  for (const auto& p : predictions) {
    if (!by_id.contains(p.pair_id)) {
      throw ValidationError("prediction for unknown pair '" + p.pair_id + "'");
    }
    if (p.model_name != predictions.front().model_name ||
        p.mode != predictions.front().mode) {
      throw ValidationError("predictions mix models or modes");
    }
    if (!seen.insert(p.pair_id).second) {
      throw ValidationError("two predictions for pair '" + p.pair_id + "'");
    }
    sorted.push_back(&p);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const Prediction* a, const Prediction* b) {
              return a->pair_id < b->pair_id;
            });

  EvalReport report;
  report.model_name = predictions.front().model_name;
  report.mode = predictions.front().mode;
  report.per_example.resize(sorted.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::thread::hardware_concurrency());
  run_bounded(sorted.size(), workers, [&](std::size_t i) {
    const Prediction& p = *sorted[i];
    report.per_example[i] = {p.pair_id,
                             score_example(p.output, by_id.at(p.pair_id)->answer,
                                           embedder)};
  });

  ScoreTriple sum;
  for (const auto& e : report.per_example) {
    sum.f1 += e.scores.f1;
    sum.rouge_l += e.scores.rouge_l;
    sum.semantic_f1 += e.scores.semantic_f1;
  }
  const double n = static_cast<double>(report.per_example.size());
  report.means = {sum.f1 / n, sum.rouge_l / n, sum.semantic_f1 / n};
  return report;
}

ordered_json to_json(const EvalReport& report) {
  ordered_json j;
  j["model_name"] = report.model_name;
  j["mode"] = to_string(report.mode);
  j["means"] = {{"f1", report.means.f1},
                {"rouge_l", report.means.rouge_l},
                {"semantic_f1", report.means.semantic_f1}};
  ordered_json rows = ordered_json::array();
  for (const auto& e : report.per_example) {
    rows.push_back({{"pair_id", e.pair_id},
                    {"f1", e.scores.f1},
                    {"rouge_l", e.scores.rouge_l},
                    {"semantic_f1", e.scores.semantic_f1}});
  }
  j["per_example"] = std::move(rows);
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  try {
    EvalReport r;
    r.model_name = j.at("model_name").get<std::string>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    const auto& m = j.at("means");
    r.means = {m.at("f1").get<double>(), m.at("rouge_l").get<double>(),
               m.at("semantic_f1").get<double>()};
    for (const auto& e : j.value("per_example", json::array())) {
      r.per_example.push_back(
          {e.at("pair_id").get<std::string>(),
           {e.at("f1").get<double>(), e.at("rouge_l").get<double>(),
            e.at("semantic_f1").get<double>()}});
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad eval report: ") + e.what());
  }
}

std::string distribution_csv(const EvalReport& report) {
  std::string out = "pair_id,f1,rouge_l,semantic_f1\n";
  for (const auto& e : report.per_example) {
    out += fmt::format("{},{},{},{}\n", e.pair_id, e.scores.f1,
                       e.scores.rouge_l, e.scores.semantic_f1);
  }
  return out;
}

ComparisonTable compare_models(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ValidationError("compare_models needs a report");
  std::set<std::pair<std::string, PromptMode>> keys;
  bool mixed_modes = false;
  for (const auto& r : reports) {
    if (!keys.insert({r.model_name, r.mode}).second) {
      throw ValidationError("duplicate report for " + r.model_name + " (" +
                            std::string(to_string(r.mode)) + ")");
    }
    mixed_modes |= r.mode != reports.front().mode;
  }

  ComparisonTable t;
  t.metrics = {"F1", "ROUGE-L", "Semantic F1"};
  t.values.resize(3, static_cast<Eigen::Index>(reports.size()));
  for (std::size_t c = 0; c < reports.size(); ++c) {
    const auto& r = reports[c];
    t.models.push_back(mixed_modes ? r.model_name + " (" +
                                         std::string(to_string(r.mode)) + ")"
                                   : r.model_name);
    const auto col = static_cast<Eigen::Index>(c);
    t.values(0, col) = r.means.f1;
    t.values(1, col) = r.means.rouge_l;
    t.values(2, col) = r.means.semantic_f1;
  }
  for (Eigen::Index m = 0; m < t.values.rows(); ++m) {
    Eigen::Index best = 0;
    t.values.row(m).maxCoeff(&best);
    t.best.push_back(best);
  }
  return t;
}

std::string ComparisonTable::csv() const {
  std::string out = "metric";
  for (const auto& m : models) out += "," + m;
  out += ",best\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out += metrics[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out += fmt::format(",{}", values(r, c));
    }
    out += "," + models[static_cast<std::size_t>(best[static_cast<std::size_t>(r)])] +
           "\n";
  }
  return out;
}

std::string ComparisonTable::text() const {
  std::size_t label_w = 6;
  for (const auto& m : metrics) label_w = std::max(label_w, m.size());
  std::vector<std::size_t> widths;
  for (const auto& m : models) widths.push_back(std::max<std::size_t>(m.size(), 7));

  std::string out = fmt::format("{:<{}}", "Metric", label_w);
  for (std::size_t c = 0; c < models.size(); ++c) {
    out += fmt::format("  {:>{}}", models[c], widths[c]);
  }
  out += "\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    const auto ri = static_cast<std::size_t>(r);
    out += fmt::format("{:<{}}", metrics[ri], label_w);
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const std::string cell =
          fmt::format("{:.4f}{}", values(r, c), best[ri] == c ? "*" : " ");
      out += fmt::format("  {:>{}}", cell, widths[ci] + 1);
    }
    out += "\n";
  }
  out += "(* best per metric)\n";
  return out;
}

double relative_improvement(double base, double improved) {
  if (!(base > 0.0)) {
    throw ValidationError("relative improvement needs a positive base");
  }
  return 100.0 * (improved - base) / base;
}

}  // namespace shqa
