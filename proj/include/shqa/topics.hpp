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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "shqa/core_model.hpp"
#include "shqa/rng.hpp"

namespace shqa {

// Doc-topic counts are walked row-wise by the sampler, topic-word counts
// column-wise, hence the two storage orders.
using DocTopicCounts =
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using TopicWordCounts = Eigen::MatrixXi;

struct BowDoc {
  std::string doc_id;
  std::vector<int> tokens;  // indices into BowCorpus::vocabulary
};

struct BowCorpus {
  std::vector<std::string> vocabulary;  // sorted
  std::vector<BowDoc> docs;
  std::vector<std::string> stopwords_applied;
  int min_df = 1;
  std::vector<std::string> warnings;

  std::size_t token_count() const;
  int vocab_size() const { return static_cast<int>(vocabulary.size()); }
};

// Lowercased runs of ASCII letters/digits (bytes >= 0x80 count as letters),
// keeping runs of at least three characters.
std::vector<std::string> lda_tokens(std::string_view text);

std::vector<std::string> load_stopwords(const std::filesystem::path& path);

// Document = question + " " + answer. Drops stopwords and terms found in
// fewer than `min_df` documents; documents left empty are dropped with a
// warning.
BowCorpus tokenize_corpus(std::span<const QAPair> pairs,
                          std::span<const std::string> stopwords, int min_df);

struct LdaParams {
  int num_topics = 10;
  std::optional<double> alpha;  // defaults to 50 / num_topics
  double beta = 0.01;
  int iterations = 1000;
  std::uint64_t seed = 0;

  double resolved_alpha() const { return alpha.value_or(50.0 / num_topics); }
};

struct TopicModel {
  int num_topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  Eigen::MatrixXd phi;    // K x V
  Eigen::MatrixXd theta;  // D x K
  std::vector<std::vector<int>> assignments;
  std::uint64_t seed = 0;
  int iterations = 0;
  std::vector<std::string> vocabulary;
  std::vector<std::string> doc_ids;
};

// Dirichlet-smoothed row normalisation: (c_ij + prior) / (sum_j c_ij +
// cols * prior). phi = smoothed_rows(n_kw, beta), theta = smoothed_rows(n_dk,
// alpha).
template <typename Derived>
Eigen::MatrixXd smoothed_rows(const Eigen::MatrixBase<Derived>& counts,
                              double prior) {
  const Eigen::MatrixXd c = counts.template cast<double>();
  const Eigen::VectorXd denom =
      (c.rowwise().sum().array() + prior * static_cast<double>(c.cols()))
          .matrix();
  return ((c.array() + prior).colwise() / denom.array()).matrix();
}

// Collapsed Gibbs sampler for LDA; keeps a reference to the corpus. Every
// sweep resamples each token in document order from
//   p(z = k) ∝ (n_dk + α)(n_kw + β) / (n_k + Vβ)
// with the token's own count removed.
class GibbsSampler {
 public:
  GibbsSampler(const BowCorpus& corpus, const LdaParams& params);

  void sweep();
  int sweeps_done() const { return sweeps_; }

  const DocTopicCounts& doc_topic_counts() const { return n_dk_; }
  const TopicWordCounts& topic_word_counts() const { return n_kw_; }
  const Eigen::VectorXi& topic_totals() const { return n_k_; }
  const Eigen::VectorXi& doc_lengths() const { return n_d_; }
  const std::vector<std::vector<int>>& assignments() const { return z_; }

  TopicModel model() const;

 private:
  const BowCorpus& corpus_;
  int num_topics_;
  double alpha_;
  double beta_;
  std::uint64_t seed_;
  SplitMix64 rng_;
  DocTopicCounts n_dk_;
  TopicWordCounts n_kw_;
  Eigen::VectorXi n_k_;
  Eigen::VectorXi n_d_;
  std::vector<std::vector<int>> z_;
  Eigen::VectorXd weights_;
  int sweeps_ = 0;
};

// Validates parameters, runs `iterations` sweeps and returns the final-sweep
// point estimate. `on_sweep` sees the sampler after every sweep.
TopicModel fit_lda(const BowCorpus& corpus, const LdaParams& params,
                   const std::function<void(const GibbsSampler&)>& on_sweep = {});

// Counts implied by a set of assignments.
struct TopicCounts {
  DocTopicCounts doc_topic;
  TopicWordCounts topic_word;
};
TopicCounts counts_from_assignments(const BowCorpus& corpus,
                                    const std::vector<std::vector<int>>& z,
                                    int num_topics);

struct Segment {
  std::string name;
  std::vector<std::string> sources;
  std::vector<QAPair> pairs;
};

inline constexpr std::string_view kResidualSegment = "combined-small";

// The `top_n` largest sources (ties by source key) each become a segment;
// everything else goes into one residual segment.
std::vector<Segment> segment_dataset(const Dataset& dataset, int top_n = 12);

struct TopicKeywords {
  int topic_id = 0;
  std::optional<std::string> label;
  std::vector<std::string> keywords;
  std::vector<double> weights;
};

struct TopicReport {
  std::string segment;
  std::vector<TopicKeywords> topics;
  std::vector<double> coherence;  // empty unless computed
};

// Highest-phi terms per topic; ties broken by term.
TopicReport top_keywords(const TopicModel& model, int k);

// UMass coherence of each topic's top-k words:
//   sum_{i>j} log((D(w_i, w_j) + 1) / D(w_j))
// with words in descending phi order and D counting documents.
std::vector<double> umass_coherence(const TopicModel& model,
                                    const BowCorpus& corpus, int k);

// {"0": "Device and Network Security", ...} keyed by topic id.
void apply_topic_labels(TopicReport& report,
                        const std::map<int, std::string>& labels);
std::map<int, std::string> load_topic_labels(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const TopicReport& report);
// "segment,topic,label,keywords" rows, keywords joined with "; ".
std::string topic_report_csv(const TopicReport& report);

}  // namespace shqa
