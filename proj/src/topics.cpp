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

#include "shqa/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "shqa/error.hpp"
#include "shqa/text.hpp"

namespace shqa {

using nlohmann::json;
using nlohmann::ordered_json;

std::size_t BowCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.tokens.size();
  return n;
}

std::vector<std::string> lda_tokens(std::string_view raw) {
  const std::string lowered = text::to_lower(raw);
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (text::char_count(cur) >= 3) out.push_back(cur);
    cur.clear();
  };
  for (char c : lowered) {
    const auto u = static_cast<unsigned char>(c);
    const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                      u >= 0x80;
    if (word) {
      cur.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::vector<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read stopword file '" + path.string() + "'");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    words.push_back(text::to_lower(t));
  }
  return words;
}

BowCorpus tokenize_corpus(std::span<const QAPair> pairs,
                          std::span<const std::string> stopwords, int min_df) {
  if (pairs.empty()) throw ValidationError("tokenize_corpus needs pairs");
  BowCorpus corpus;
  corpus.min_df = std::max(min_df, 1);
  corpus.stopwords_applied.assign(stopwords.begin(), stopwords.end());
  const std::unordered_set<std::string> stop(stopwords.begin(), stopwords.end());

  std::vector<std::vector<std::string>> raw_docs;
  raw_docs.reserve(pairs.size());
  std::unordered_map<std::string, int> df;
  for (const auto& p : pairs) {
    std::vector<std::string> toks;
    for (auto& t : lda_tokens(p.question + " " + p.answer)) {
      if (!stop.contains(t)) toks.push_back(std::move(t));
    }
    std::unordered_set<std::string_view> uniq(toks.begin(), toks.end());
    for (auto t : uniq) ++df[std::string(t)];
    raw_docs.push_back(std::move(toks));
  }

  for (const auto& [term, count] : df) {
    if (count >= corpus.min_df) corpus.vocabulary.push_back(term);
  }
  std::sort(corpus.vocabulary.begin(), corpus.vocabulary.end());
  std::unordered_map<std::string_view, int> index;
  for (std::size_t i = 0; i < corpus.vocabulary.size(); ++i) {
    index.emplace(corpus.vocabulary[i], static_cast<int>(i));
  }

  for (std::size_t d = 0; d < pairs.size(); ++d) {
    BowDoc doc;
    doc.doc_id = pairs[d].id;
    for (const auto& t : raw_docs[d]) {
      if (auto it = index.find(t); it != index.end()) {
        doc.tokens.push_back(it->second);
      }
    }
    if (doc.tokens.empty()) {
      corpus.warnings.push_back("document '" + doc.doc_id +
                                "' is empty after filtering");
      continue;
    }
    corpus.docs.push_back(std::move(doc));
  }
  if (corpus.docs.empty()) {
    throw ValidationError("every document is empty after filtering");
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Gibbs sampling

GibbsSampler::GibbsSampler(const BowCorpus& corpus, const LdaParams& params)
    : corpus_(corpus),
      num_topics_(params.num_topics),
      alpha_(params.resolved_alpha()),
      beta_(params.beta),
      seed_(params.seed),
      rng_(params.seed) {
  const int D = static_cast<int>(corpus.docs.size());
  const int V = corpus.vocab_size();
  const int K = num_topics_;
  n_dk_ = DocTopicCounts::Zero(D, K);
  n_kw_ = TopicWordCounts::Zero(K, V);
  n_k_ = Eigen::VectorXi::Zero(K);
  n_d_ = Eigen::VectorXi::Zero(D);
  weights_.resize(K);
  z_.resize(D);
  for (int d = 0; d < D; ++d) {
    const auto& tokens = corpus.docs[d].tokens;
    z_[d].resize(tokens.size());
    n_d_(d) = static_cast<int>(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const int k = static_cast<int>(rng_.below(static_cast<std::uint64_t>(K)));
      z_[d][i] = k;
      ++n_dk_(d, k);
      ++n_kw_(k, tokens[i]);
      ++n_k_(k);
    }
  }
}

void GibbsSampler::sweep() {
  const int K = num_topics_;
  const double v_beta = beta_ * corpus_.vocab_size();
  for (std::size_t d = 0; d < corpus_.docs.size(); ++d) {
    const auto& tokens = corpus_.docs[d].tokens;
    auto& zd = z_[d];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const int w = tokens[i];
      int k = zd[i];
      --n_dk_(d, k);
      --n_kw_(k, w);
      --n_k_(k);

      double total = 0.0;
      for (int t = 0; t < K; ++t) {
        total += (n_dk_(d, t) + alpha_) * (n_kw_(t, w) + beta_) /
                 (n_k_(t) + v_beta);
        weights_(t) = total;
      }
      const double u = rng_.uniform() * total;
      k = 0;
      while (k < K - 1 && weights_(k) <= u) ++k;

      zd[i] = k;
      ++n_dk_(d, k);
      ++n_kw_(k, w);
      ++n_k_(k);
    }
  }
  ++sweeps_;
}

TopicModel GibbsSampler::model() const {
  TopicModel m;
  m.num_topics = num_topics_;
  m.alpha = alpha_;
  m.beta = beta_;
  m.phi = smoothed_rows(n_kw_, beta_);
  m.theta = smoothed_rows(n_dk_, alpha_);
  m.assignments = z_;
  m.seed = seed_;
  m.iterations = sweeps_;
  m.vocabulary = corpus_.vocabulary;
  m.doc_ids.reserve(corpus_.docs.size());
  for (const auto& d : corpus_.docs) m.doc_ids.push_back(d.doc_id);
  return m;
}

TopicModel fit_lda(const BowCorpus& corpus, const LdaParams& params,
                   const std::function<void(const GibbsSampler&)>& on_sweep) {
  if (params.num_topics < 1) throw ValidationError("K must be >= 1");
  if (params.iterations < 1) throw ValidationError("iterations must be >= 1");
  if (!(params.resolved_alpha() > 0.0) || !(params.beta > 0.0)) {
    throw ValidationError("Dirichlet priors must be positive");
  }
  if (corpus.docs.empty() || corpus.vocabulary.empty()) {
    throw ValidationError("fit_lda needs a non-empty corpus");
  }
  if (static_cast<std::size_t>(params.num_topics) > corpus.token_count()) {
    throw ValidationError("K exceeds the corpus token count");
  }
  GibbsSampler sampler(corpus, params);
  for (int it = 0; it < params.iterations; ++it) {
    sampler.sweep();
    if (on_sweep) on_sweep(sampler);
  }
  return sampler.model();
}

TopicCounts counts_from_assignments(const BowCorpus& corpus,
                                    const std::vector<std::vector<int>>& z,
                                    int num_topics) {
  TopicCounts c;
  c.doc_topic = DocTopicCounts::Zero(static_cast<int>(corpus.docs.size()),
                                     num_topics);
  c.topic_word = TopicWordCounts::Zero(num_topics, corpus.vocab_size());
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    const auto& tokens = corpus.docs[d].tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      ++c.doc_topic(static_cast<int>(d), z[d][i]);
      ++c.topic_word(z[d][i], tokens[i]);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Segments and reports

std::vector<Segment> segment_dataset(const Dataset& dataset, int top_n) {
  if (top_n < 0) throw ValidationError("top_n must be non-negative");
  std::map<std::string, std::size_t> counts;
  for (const auto& p : dataset.pairs) ++counts[p.source];
  if (counts.size() < static_cast<std::size_t>(top_n)) {
    throw ValidationError("dataset has " + std::to_string(counts.size()) +
                          " sources, fewer than top_n = " +
                          std::to_string(top_n));
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;  // map order breaks ties
                   });

  std::vector<Segment> segments(static_cast<std::size_t>(top_n) + 1);
  std::unordered_map<std::string, std::size_t> slot;
  for (int i = 0; i < top_n; ++i) {
    segments[i].name = ranked[i].first;
    segments[i].sources = {ranked[i].first};
    slot[ranked[i].first] = static_cast<std::size_t>(i);
  }
  Segment& residual = segments.back();
  residual.name = std::string(kResidualSegment);
  for (std::size_t i = static_cast<std::size_t>(top_n); i < ranked.size(); ++i) {
    residual.sources.push_back(ranked[i].first);
    slot[ranked[i].first] = segments.size() - 1;
  }
  for (const auto& p : dataset.pairs) segments[slot[p.source]].pairs.push_back(p);
  return segments;
}

namespace {

std::vector<int> top_terms(const TopicModel& model, int topic, int k) {
  std::vector<int> idx(static_cast<std::size_t>(model.phi.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&](int a, int b) {
    const double pa = model.phi(topic, a);
    const double pb = model.phi(topic, b);
    if (pa != pb) return pa > pb;
    return model.vocabulary[a] < model.vocabulary[b];
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

TopicReport top_keywords(const TopicModel& model, int k) {
  if (k < 1 || k > model.phi.cols()) {
    throw ValidationError("k = " + std::to_string(k) +
                          " outside [1, vocabulary size = " +
                          std::to_string(model.phi.cols()) + "]");
  }
  TopicReport report;
  for (int t = 0; t < model.num_topics; ++t) {
    TopicKeywords tk;
    tk.topic_id = t;
    for (int w : top_terms(model, t, k)) {
      tk.keywords.push_back(model.vocabulary[w]);
      tk.weights.push_back(model.phi(t, w));
    }
    report.topics.push_back(std::move(tk));
  }
  return report;
}

std::vector<double> umass_coherence(const TopicModel& model,
                                    const BowCorpus& corpus, int k) {
  if (k < 2) throw ValidationError("UMass coherence needs k >= 2");
  if (k > model.phi.cols()) throw ValidationError("k exceeds vocabulary size");

  std::vector<std::vector<int>> doc_terms;
  doc_terms.reserve(corpus.docs.size());
  for (const auto& d : corpus.docs) {
    std::vector<int> u = d.tokens;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    doc_terms.push_back(std::move(u));
  }

  std::vector<double> scores;
  for (int t = 0; t < model.num_topics; ++t) {
    const std::vector<int> words = top_terms(model, t, k);
    // Binary document-by-word incidence; its Gram matrix holds D(wi, wj)
    // off the diagonal and D(w) on it.
    Eigen::MatrixXd incidence =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(doc_terms.size()), k);
    for (std::size_t d = 0; d < doc_terms.size(); ++d) {
      for (int j = 0; j < k; ++j) {
        if (std::binary_search(doc_terms[d].begin(), doc_terms[d].end(),
                               words[j])) {
          incidence(static_cast<Eigen::Index>(d), j) = 1.0;
        }
      }
    }
    const Eigen::MatrixXd co = incidence.transpose() * incidence;
    double score = 0.0;
    for (int i = 1; i < k; ++i) {
      for (int j = 0; j < i; ++j) {
        if (co(j, j) <= 0.0) {
          throw ValidationError("term '" + model.vocabulary[words[j]] +
                                "' occurs in no document");
        }
        score += std::log((co(i, j) + 1.0) / co(j, j));
      }
    }
    scores.push_back(score);
  }
  return scores;
}

void apply_topic_labels(TopicReport& report,
                        const std::map<int, std::string>& labels) {
  for (auto& t : report.topics) {
    if (auto it = labels.find(t.topic_id); it != labels.end()) {
      t.label = it->second;
    }
  }
}

std::map<int, std::string> load_topic_labels(const std::filesystem::path& path) {
  const json j = read_json(path);
  std::map<int, std::string> labels;
  if (!j.is_object()) throw ParseError(path.string() + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    try {
      labels[std::stoi(key)] = value.get<std::string>();
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad label entry '" + key + "'");
    }
  }
  return labels;
}

ordered_json to_json(const TopicReport& report) {
  ordered_json j;
  j["segment"] = report.segment;
  ordered_json topics = ordered_json::array();
  for (std::size_t i = 0; i < report.topics.size(); ++i) {
    const auto& t = report.topics[i];
    ordered_json jt;
    jt["topic_id"] = t.topic_id;
    jt["label"] = t.label ? ordered_json(*t.label) : ordered_json();
    jt["keywords"] = t.keywords;
    jt["weights"] = t.weights;
    if (i < report.coherence.size()) jt["umass_coherence"] = report.coherence[i];
    topics.push_back(std::move(jt));
  }
  j["topics"] = std::move(topics);
  return j;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string topic_report_csv(const TopicReport& report) {
  std::ostringstream out;
  out << "segment,topic,label,keywords\n";
  for (const auto& t : report.topics) {
    std::string joined;
    for (std::size_t i = 0; i < t.keywords.size(); ++i) {
      if (i) joined += "; ";
      joined += t.keywords[i];
    }
    out << csv_field(report.segment) << ',' << t.topic_id << ','
        << csv_field(t.label.value_or("")) << ',' << csv_field(joined) << '\n';
  }
  return out.str();
}

}  // namespace shqa
