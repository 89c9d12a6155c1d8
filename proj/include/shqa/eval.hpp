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
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "shqa/chat_client.hpp"
#include "shqa/core_model.hpp"

namespace shqa {

enum class PromptMode { WithContext, WithoutContext };
std::string_view to_string(PromptMode m);
PromptMode parse_mode(std::string_view s);

struct GenerationParams {
  double temperature = 0.0;
  std::int64_t seed = 0;
  int max_tokens = 512;
};

struct Prediction {
  std::string pair_id;
  std::string output;
  std::string model_name;
  PromptMode mode = PromptMode::WithoutContext;

  bool operator==(const Prediction&) const = default;
};

nlohmann::ordered_json to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ScoreTriple {
  double f1 = 0.0;
  double rouge_l = 0.0;
  double semantic_f1 = 0.0;
};

// SQuAD answer normalisation: lowercase, drop ASCII punctuation, drop the
// articles a/an/the, split on whitespace.
std::vector<std::string> normalize_answer(std::string_view text);

// Bag-of-tokens overlap. Both sides empty scores 1, one side empty 0.
PrfScore token_f1(std::string_view pred, std::string_view gold);

std::size_t lcs_length(std::span<const std::string> a,
                       std::span<const std::string> b);

// ROUGE-L with beta = 1 over normalised tokens; empty sides as token_f1.
PrfScore rouge_l(std::string_view pred, std::string_view gold);

// Supplies one unit-length row per token.
class Embedder {
 public:
  virtual ~Embedder() = default;
  // Must be safe to call concurrently.
  virtual Eigen::MatrixXd embed(std::span<const std::string> tokens) = 0;
};

// Each distinct token gets its own basis vector, so cosine similarity is 1
// for equal tokens and 0 otherwise. Dimensions grow as tokens are seen.
class OneHotEmbedder : public Embedder {
 public:
  Eigen::MatrixXd embed(std::span<const std::string> tokens) override;

 private:
  std::mutex mutex_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

// Character-trigram feature hashing. Offline and deterministic; close
// spellings ("router", "routers") land near each other.
class HashingEmbedder : public Embedder {
 public:
  explicit HashingEmbedder(int dims = 512) : dims_(dims) {}
  Eigen::MatrixXd embed(std::span<const std::string> tokens) override;

 private:
  int dims_;
};

// POST {base_url}/token-embeddings {model, text, tokens} ->
// {embeddings: [[...], ...]}, one vector per token. Rows are normalised
// locally.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(std::string base_url, std::string model, std::string api_key_ref,
               int timeout_ms = 60000);
  Eigen::MatrixXd embed(std::span<const std::string> tokens) override;

 private:
  BaseUrl url_;
  std::string model_;
  std::string api_key_;
  int timeout_ms_;
};

// Greedy matching over the cosine matrix: precision averages each
// candidate row's best match, recall each reference row's. Inputs with
// different widths are compared as if zero-padded.
PrfScore greedy_match(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gold);

// BERTScore-style F1 over normalised tokens; no idf, no rescaling.
PrfScore semantic_f1(std::string_view pred, std::string_view gold,
                     Embedder& embedder);

// "context: {context}\nquestion: {question}\nanswer:" or without the first
// line.
std::string build_prompt(const QAPair& pair, PromptMode mode);

struct PredictOptions {
  std::string model_name;
  std::filesystem::path output_path;  // JSONL, appended to
  int max_concurrency = 4;
  RetryPolicy retry;
};

// Resumable: ids already in the output file for the same model and mode
// are not requested again. Returns predictions in `split_ids` order.
std::vector<Prediction> generate_predictions(
    std::span<const std::string> split_ids, const Dataset& dataset,
    ChatClient& client, const GenerationParams& params, PromptMode mode,
    const PredictOptions& options);

struct ExampleScore {
  std::string pair_id;
  ScoreTriple scores;
};

struct EvalReport {
  std::string model_name;
  PromptMode mode = PromptMode::WithoutContext;
  std::vector<ExampleScore> per_example;  // sorted by pair_id
  ScoreTriple means;

  // Per-metric score vectors (f1, rouge_l, semantic_f1), for plotting.
  Eigen::MatrixXd distribution() const;
};

ScoreTriple score_example(std::string_view pred, std::string_view gold,
                          Embedder& embedder);

EvalReport evaluate_predictions(std::span<const Prediction> predictions,
                                const Dataset& dataset, Embedder& embedder);

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
// pair_id,f1,rouge_l,semantic_f1 rows.
std::string distribution_csv(const EvalReport& report);

struct ComparisonTable {
  std::vector<std::string> metrics;  // row labels
  std::vector<std::string> models;   // column labels
  Eigen::MatrixXd values;            // metrics x models
  std::vector<Eigen::Index> best;    // best column per metric

  std::string csv() const;
  std::string text() const;
};

// Metric-by-model matrix of report means; best column per metric is the
// first maximum.
ComparisonTable compare_models(std::span<const EvalReport> reports);

// 100 * (improved - base) / base, base > 0.
double relative_improvement(double base, double improved);

}  // namespace shqa
