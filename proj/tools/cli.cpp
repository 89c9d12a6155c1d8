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

#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "shqa/chat_client.hpp"
#include "shqa/core_model.hpp"
#include "shqa/error.hpp"
#include "shqa/eval.hpp"
#include "shqa/ingest.hpp"
#include "shqa/preprocess.hpp"
#include "shqa/refine.hpp"
#include "shqa/text.hpp"
#include "shqa/review_api.hpp"
#include "shqa/topics.hpp"

#ifndef SHQA_DATA_DIR
#define SHQA_DATA_DIR "data"
#endif

namespace shqa::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::string kDataDir = SHQA_DATA_DIR;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f.flush()) throw IoError("write failed for " + path.string());
}

void require_file(const fs::path& path, std::string_view what) {
  if (!fs::is_regular_file(path)) {
    throw IoError(fmt::format("{} not found: {}", what, path.string()));
  }
}

// Outputs are always new files; an output may not overwrite an input.
void guard_output(const fs::path& out, std::initializer_list<fs::path> inputs) {
  std::error_code ec;
  for (const auto& in : inputs) {
    if (fs::exists(out) && fs::equivalent(out, in, ec)) {
      throw ValidationError("refusing to overwrite input " + in.string());
    }
  }
}

template <typename T>
std::vector<ordered_json> to_rows(const std::vector<T>& items) {
  std::vector<ordered_json> rows;
  rows.reserve(items.size());
  for (const auto& it : items) rows.push_back(to_json(it));
  return rows;
}

struct LlmFlags {
  std::string base_url;
  std::string model;
  std::string api_key_env = "SHQA_API_KEY";
  int max_concurrency = 4;
  int max_attempts = 4;
  int backoff_ms = 500;
  int timeout_ms = 60000;

  void add_to(CLI::App& app) {
    app.add_option("--base-url", base_url, "Chat-completion endpoint base URL")
        ->required();
    app.add_option("--model", model, "Model name sent with each request")
        ->required();
    app.add_option("--api-key-env", api_key_env,
                   "Environment variable holding the API key")
        ->capture_default_str();
    app.add_option("--max-concurrency", max_concurrency)
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--max-attempts", max_attempts)
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--backoff-ms", backoff_ms)
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    app.add_option("--timeout-ms", timeout_ms)
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  LlmClientConfig config() const {
    LlmClientConfig c;
    c.base_url = base_url;
    c.model_name = model;
    c.api_key_ref = api_key_env;
    c.max_concurrency = max_concurrency;
    c.retry = {max_attempts, backoff_ms};
    c.request_timeout_ms = timeout_ms;
    c.validate();
    return c;
  }
};

// review-serve stops on SIGINT/SIGTERM.
std::atomic<bool> g_stop_requested{false};
extern "C" void on_stop_signal(int) { g_stop_requested = true; }

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{"Smart-home security QA dataset toolkit", "shqa"};
  app.set_config("--config", "", "TOML config file; flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  // ---- ingest
  struct {
    std::vector<std::string> inputs;
    std::string source = "custom";
    std::string keywords = kDataDir + "/keywords.txt";
    bool no_filter = false;
    bool title_only = false;
    bool post_only = false;
    std::string out;
    std::string warnings;
  } ingest;
  auto* c_ingest = app.add_subcommand(
      "ingest", "Parse scraper exports, keyword-filter, emit QA candidates");
  c_ingest->add_option("--input", ingest.inputs, "Export files (.json/.csv)")
      ->required();
  c_ingest->add_option("--source", ingest.source,
                       "Source key for threads without one")
      ->capture_default_str();
  c_ingest->add_option("--keywords", ingest.keywords, "Keyword list file")
      ->capture_default_str();
  c_ingest->add_flag("--no-filter", ingest.no_filter, "Keep every thread");
  c_ingest->add_flag("--title-only", ingest.title_only,
                     "Match keywords in titles only");
  c_ingest->add_flag("--post-only", ingest.post_only,
                     "Match keywords in opening posts only");
  c_ingest->add_option("--out", ingest.out, "Candidates JSONL")->required();
  c_ingest->add_option("--warnings", ingest.warnings,
                       "Warnings JSONL (default <out>.warnings.jsonl)");

  // ---- build-v1
  struct {
    std::string candidates;
    std::string allowlist;
    std::string out;
    std::string notes;
  } build;
  auto* c_build = app.add_subcommand(
      "build-v1", "Select answers, deduplicate, write the V1 dataset");
  c_build->add_option("--candidates", build.candidates)->required();
  c_build->add_option("--allowlist", build.allowlist,
                      "Thread ids to keep, one per line");
  c_build->add_option("--out", build.out, "V1 dataset JSONL")->required();
  c_build->add_option("--notes", build.notes);

  // ---- refine
  struct {
    std::string dataset;
    std::string stage;
    std::string records;
    std::string prompts = kDataDir + "/prompt_templates.json";
    int max_tokens = 512;
    LlmFlags llm;
  } refine;
  auto* c_refine = app.add_subcommand(
      "refine", "Request LLM proposals for one stage into the record store");
  c_refine->add_option("--dataset", refine.dataset)->required();
  c_refine->add_option("--stage", refine.stage,
                       "REPHRASE, SUMMARIZE, SYNTH_QUESTION or CONTEXT")
      ->required();
  c_refine->add_option("--records", refine.records, "Record store JSONL")
      ->required();
  c_refine->add_option("--prompts", refine.prompts, "Prompt templates JSON")
      ->capture_default_str();
  c_refine->add_option("--max-tokens", refine.max_tokens)
      ->capture_default_str();
  refine.llm.add_to(*c_refine);

  // ---- review-serve
  struct {
    std::string records;
    std::vector<std::string> datasets;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
  } serve;
  auto* c_serve = app.add_subcommand("review-serve",
                                     "Serve the review API over a record store");
  c_serve->add_option("--records", serve.records)->required();
  c_serve->add_option("--dataset", serve.datasets,
                      "Datasets for /api/pairs lookups");
  c_serve->add_option("--host", serve.host)->capture_default_str();
  c_serve->add_option("--port", serve.port, "0 picks a free port")
      ->capture_default_str();
  c_serve->add_option("--static", serve.static_dir,
                      "Directory served at / (review UI bundle)");

  // ---- apply-review
  struct {
    std::string dataset;
    std::string records;
    std::string stage;
    std::string target;
    std::string out;
  } apply;
  auto* c_apply = app.add_subcommand(
      "apply-review", "Build the next dataset version from decided records");
  c_apply->add_option("--dataset", apply.dataset)->required();
  c_apply->add_option("--records", apply.records)->required();
  c_apply->add_option("--stage", apply.stage)->required();
  c_apply->add_option("--target", apply.target, "V2, V3 or SYNTHETIC")
      ->required();
  c_apply->add_option("--out", apply.out)->required();

  // ---- topics
  struct {
    std::string dataset;
    std::string stopwords = kDataDir + "/stopwords.txt";
    int min_df = 1;
    int num_topics = 10;
    std::optional<double> alpha;
    double beta = 0.01;
    int iterations = 1000;
    std::uint64_t seed = 0;
    int top_words = 10;
    bool segments = false;
    int top_n = 12;
    std::string labels;
    std::string out_dir;
    int jobs = 4;
  } topics;
  auto* c_topics =
      app.add_subcommand("topics", "Fit LDA and write topic keyword reports");
  c_topics->add_option("--dataset", topics.dataset)->required();
  c_topics->add_option("--stopwords", topics.stopwords)->capture_default_str();
  c_topics->add_option("--min-df", topics.min_df)->capture_default_str();
  c_topics->add_option("-k,--num-topics", topics.num_topics)
      ->capture_default_str();
  c_topics->add_option("--alpha", topics.alpha, "Default 50/K");
  c_topics->add_option("--beta", topics.beta)->capture_default_str();
  c_topics->add_option("--iterations", topics.iterations)
      ->capture_default_str();
  c_topics->add_option("--seed", topics.seed)->capture_default_str();
  c_topics->add_option("--top-words", topics.top_words)->capture_default_str();
  c_topics->add_flag("--segments", topics.segments,
                     "One model per source segment");
  c_topics->add_option("--top-n", topics.top_n, "Named segments")
      ->capture_default_str();
  c_topics->add_option("--labels", topics.labels, "Topic labels JSON");
  c_topics->add_option("--out-dir", topics.out_dir)->required();
  c_topics->add_option("--jobs", topics.jobs, "Segments fitted in parallel")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // ---- split
  struct {
    std::string dataset;
    std::size_t train = 2383;
    std::size_t val = 596;
    std::size_t test = 340;
    std::uint64_t seed = 0;
    std::string out;
  } split;
  auto* c_split = app.add_subcommand("split", "Seeded train/val/test split");
  c_split->add_option("--dataset", split.dataset)->required();
  c_split->add_option("--train", split.train)->capture_default_str();
  c_split->add_option("--val", split.val)->capture_default_str();
  c_split->add_option("--test", split.test)->capture_default_str();
  c_split->add_option("--seed", split.seed)->capture_default_str();
  c_split->add_option("--out", split.out, "Splits JSON")->required();

  // ---- synth-split
  struct {
    std::string dataset;
    std::size_t train = 1792;
    std::size_t val = 453;
    std::uint64_t seed = 0;
    std::string out;
  } synth;
  auto* c_synth = app.add_subcommand(
      "synth-split", "Seeded train/val split of a synthetic dataset");
  c_synth->add_option("--dataset", synth.dataset)->required();
  c_synth->add_option("--train", synth.train)->capture_default_str();
  c_synth->add_option("--val", synth.val)->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--out", synth.out)->required();

  // ---- predict
  struct {
    std::string dataset;
    std::string splits;
    std::string part = "test";
    std::string mode = "WITHOUT_CONTEXT";
    double temperature = 0.0;
    std::int64_t seed = 0;
    int max_tokens = 512;
    std::string out;
    LlmFlags llm;
  } predict;
  auto* c_predict = app.add_subcommand(
      "predict", "Generate predictions for a split from an inference endpoint");
  c_predict->add_option("--dataset", predict.dataset)->required();
  c_predict->add_option("--splits", predict.splits)->required();
  c_predict->add_option("--part", predict.part)
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "val", "test"}));
  c_predict->add_option("--mode", predict.mode)->capture_default_str();
  c_predict->add_option("--temperature", predict.temperature)
      ->capture_default_str();
  c_predict->add_option("--seed", predict.seed)->capture_default_str();
  c_predict->add_option("--max-tokens", predict.max_tokens)
      ->capture_default_str();
  c_predict->add_option("--out", predict.out, "Predictions JSONL (appended)")
      ->required();
  predict.llm.add_to(*c_predict);

  // ---- eval
  struct {
    std::string predictions;
    std::string dataset;
    std::string model;
    std::string mode;
    std::string embedder = "hashing";
    std::string embed_url;
    std::string embed_model;
    std::string api_key_env = "SHQA_API_KEY";
    std::string out;
    std::string csv;
  } ev;
  auto* c_eval = app.add_subcommand("eval", "Score predictions against gold");
  c_eval->add_option("--predictions", ev.predictions)->required();
  c_eval->add_option("--dataset", ev.dataset)->required();
  c_eval->add_option("--model", ev.model, "Only this model's predictions");
  c_eval->add_option("--mode", ev.mode, "Only predictions in this mode");
  c_eval->add_option("--embedder", ev.embedder)
      ->capture_default_str()
      ->check(CLI::IsMember({"hashing", "onehot", "http"}));
  c_eval->add_option("--embed-url", ev.embed_url);
  c_eval->add_option("--embed-model", ev.embed_model);
  c_eval->add_option("--api-key-env", ev.api_key_env)->capture_default_str();
  c_eval->add_option("--out", ev.out, "Report JSON")->required();
  c_eval->add_option("--csv", ev.csv, "Per-example distribution CSV");

  // ---- compare
  struct {
    std::vector<std::string> reports;
    std::string csv;
  } cmp;
  auto* c_compare =
      app.add_subcommand("compare", "Metric-by-model table of eval reports");
  c_compare->add_option("--report", cmp.reports)->required();
  c_compare->add_option("--csv", cmp.csv);

  // ---- stats
  struct {
    std::string dataset;
    bool json = false;
  } stats;
  auto* c_stats = app.add_subcommand("stats", "Pair counts and average lengths");
  c_stats->add_option("--dataset", stats.dataset)->required();
  c_stats->add_flag("--json", stats.json, "JSON instead of a table");

  // ---- improvement
  struct {
    double base = 0;
    double improved = 0;
  } imp;
  auto* c_imp = app.add_subcommand("improvement", "Relative improvement in %");
  c_imp->add_option("--base", imp.base)->required();
  c_imp->add_option("--improved", imp.improved)->required();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("shqa");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_ingest->parsed()) {
      KeywordFilterSpec spec;
      if (!ingest.no_filter) {
        spec = load_keyword_spec(ingest.keywords);
        spec.match_title = !ingest.post_only;
        spec.match_opening_post = !ingest.title_only;
        spec.validate();
      }
      std::vector<ParseResult> parsed(ingest.inputs.size());
      run_bounded(ingest.inputs.size(), std::thread::hardware_concurrency(),
                  [&](std::size_t i) {
                    parsed[i] = parse_export(ingest.inputs[i], ingest.source);
                  });
      std::vector<QACandidate> candidates;
      std::vector<IngestWarning> warnings;
      std::size_t threads = 0;
      for (auto& r : parsed) {
        threads += r.threads.size();
        auto kept = ingest.no_filter ? std::move(r.threads)
                                     : keyword_filter(r.threads, spec);
        for (const auto& t : kept) candidates.push_back(thread_to_candidate(t));
        warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
      }
      write_jsonl(ingest.out, to_rows(candidates));
      const fs::path wpath = ingest.warnings.empty()
                                 ? fs::path(ingest.out + ".warnings.jsonl")
                                 : fs::path(ingest.warnings);
      write_jsonl(wpath, to_rows(warnings));
      fmt::print(err, "ingest: {} threads, {} candidates, {} warnings\n",
                 threads, candidates.size(), warnings.size());
      return 0;
    }

    if (c_build->parsed()) {
      require_file(build.candidates, "candidates file");
      guard_output(build.out, {build.candidates});
      std::vector<QACandidate> candidates;
      for (const auto& j : read_jsonl(build.candidates)) {
        candidates.push_back(candidate_from_json(j));
      }
      BuildV1Options opts;
      opts.notes = build.notes;
      if (!build.allowlist.empty()) {
        require_file(build.allowlist, "allowlist");
        std::ifstream f(build.allowlist);
        std::set<std::string> ids;
        for (std::string line; std::getline(f, line);) {
          std::string id(text::trim(line));
          if (!id.empty() && id.front() != '#') ids.insert(std::move(id));
        }
        opts.allowlist = std::move(ids);
      }
      const BuildV1Result r = build_v1(candidates, opts);
      save_dataset(r.dataset, build.out);
      write_json(build.out + ".report.json", to_json(r.report));
      fmt::print(err,
                 "build-v1: {} candidates -> {} pairs ({} not selected, {} no "
                 "answer, {} duplicate)\n",
                 r.report.input_candidates, r.report.output_pairs,
                 r.report.dropped_not_selected, r.report.dropped_no_answer,
                 r.report.dropped_duplicate);
      return 0;
    }

    if (c_refine->parsed()) {
      const Stage stage = parse_stage(refine.stage);
      const Dataset ds = load_dataset(refine.dataset);
      const PromptSet prompts = load_prompt_templates(refine.prompts);
      const LlmClientConfig cfg = refine.llm.config();
      HttpChatClient client(cfg);
      RecordStore store(refine.records);
      StageOptions opts;
      opts.model_name = cfg.model_name;
      opts.max_concurrency = cfg.max_concurrency;
      opts.retry = cfg.retry;
      opts.max_tokens = refine.max_tokens;
      const StageRunResult r =
          run_stage(ds, stage, client, prompts, store, opts);
      fmt::print(err, "refine {}: {} requested, {} failed, {} skipped\n",
                 to_string(stage), r.requested, r.failed, r.skipped);
      return 0;
    }

    if (c_serve->parsed()) {
      RecordStore store(serve.records);
      std::vector<Dataset> datasets;
      for (const auto& p : serve.datasets) datasets.push_back(load_dataset(p));
      ReviewService service(store, std::move(datasets));
      std::optional<fs::path> static_dir;
      if (!serve.static_dir.empty()) static_dir = serve.static_dir;
      ReviewServer server(service, static_dir);
      const int port = server.bind(serve.host, serve.port);
      if (port < 0) {
        throw IoError(fmt::format("cannot bind {}:{}", serve.host, serve.port));
      }
      fmt::print(err, "review-serve: listening on http://{}:{}\n", serve.host,
                 port);
      fmt::print(out, "{}\n", port);
      out.flush();
      g_stop_requested = false;
      auto old_int = std::signal(SIGINT, on_stop_signal);
      auto old_term = std::signal(SIGTERM, on_stop_signal);
      std::thread watcher([&] {
        while (!g_stop_requested) {
          std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        server.stop();
      });
      server.listen_after_bind();
      g_stop_requested = true;
      watcher.join();
      std::signal(SIGINT, old_int);
      std::signal(SIGTERM, old_term);
      return 0;
    }

    if (c_apply->parsed()) {
      guard_output(apply.out, {apply.dataset, apply.records});
      const Stage stage = parse_stage(apply.stage);
      const Version target = parse_version(apply.target);
      const Dataset ds = load_dataset(apply.dataset);
      require_file(apply.records, "record store");
      RecordStore store(apply.records);
      const auto records = store.snapshot();
      ApplySummary summary;
      Dataset next = apply_decisions(ds, records, stage, target, &summary);
      save_dataset(next, apply.out);
      fmt::print(err, "apply-review: {} pairs, {} replaced, {} kept\n",
                 next.pairs.size(), summary.replaced, summary.kept);
      return 0;
    }

    if (c_topics->parsed()) {
      const Dataset ds = load_dataset(topics.dataset);
      const auto stopwords = load_stopwords(topics.stopwords);
      std::map<int, std::string> labels;
      if (!topics.labels.empty()) labels = load_topic_labels(topics.labels);
      LdaParams params;
      params.num_topics = topics.num_topics;
      params.alpha = topics.alpha;
      params.beta = topics.beta;
      params.iterations = topics.iterations;
      params.seed = topics.seed;

      std::vector<Segment> segments;
      if (topics.segments) {
        segments = segment_dataset(ds, topics.top_n);
      } else {
        segments.push_back({"all", {}, ds.pairs});
      }
      std::vector<TopicReport> reports(segments.size());
      run_bounded(segments.size(), static_cast<std::size_t>(topics.jobs),
                  [&](std::size_t i) {
                    const Segment& seg = segments[i];
                    const BowCorpus corpus =
                        tokenize_corpus(seg.pairs, stopwords, topics.min_df);
                    const TopicModel model = fit_lda(corpus, params);
                    TopicReport rep = top_keywords(model, topics.top_words);
                    rep.segment = seg.name;
                    rep.coherence =
                        umass_coherence(model, corpus, topics.top_words);
                    apply_topic_labels(rep, labels);
                    reports[i] = std::move(rep);
                  });
      const fs::path dir = topics.out_dir;
      fs::create_directories(dir);
      ordered_json index = ordered_json::array();
      for (std::size_t i = 0; i < reports.size(); ++i) {
        const std::string& name = segments[i].name;
        write_json(dir / (name + ".json"), to_json(reports[i]));
        write_text(dir / (name + ".csv"), topic_report_csv(reports[i]));
        index.push_back({{"segment", name},
                         {"sources", segments[i].sources},
                         {"pairs", segments[i].pairs.size()}});
        fmt::print(err, "topics: {} ({} pairs)\n", name,
                   segments[i].pairs.size());
      }
      write_json(dir / "segments.json", index);
      return 0;
    }

    if (c_split->parsed()) {
      const Dataset ds = load_dataset(split.dataset);
      const Splits s =
          split_dataset(ds, {split.train, split.val, split.test}, split.seed);
      save_splits(s, split.out);
      fmt::print(err, "split: train {}, val {}, test {} (seed {})\n",
                 s.train_ids.size(), s.val_ids.size(), s.test_ids.size(),
                 s.seed);
      return 0;
    }

    if (c_synth->parsed()) {
      const Dataset ds = load_dataset(synth.dataset, Version::Synthetic);
      const SyntheticSplit s =
          synthetic_totals(ds, synth.train, synth.val, synth.seed);
      ordered_json j;
      j["seed"] = s.seed;
      j["train"] = s.train();
      j["val"] = s.val();
      j["total"] = s.total();
      j["train_ids"] = s.train_ids;
      j["val_ids"] = s.val_ids;
      write_json(synth.out, j);
      fmt::print(err, "synth-split: train {}, val {}, total {}\n", s.train(),
                 s.val(), s.total());
      return 0;
    }

    if (c_predict->parsed()) {
      const Dataset ds = load_dataset(predict.dataset);
      const Splits s = load_splits(predict.splits);
      const auto& ids = predict.part == "train" ? s.train_ids
                        : predict.part == "val" ? s.val_ids
                                                : s.test_ids;
      const PromptMode mode = parse_mode(predict.mode);
      const LlmClientConfig cfg = predict.llm.config();
      HttpChatClient client(cfg);
      GenerationParams params{predict.temperature, predict.seed,
                              predict.max_tokens};
      PredictOptions opts;
      opts.model_name = cfg.model_name;
      opts.output_path = predict.out;
      opts.max_concurrency = cfg.max_concurrency;
      opts.retry = cfg.retry;
      const auto preds =
          generate_predictions(ids, ds, client, params, mode, opts);
      fmt::print(err, "predict: {} predictions for {} ({})\n", preds.size(),
                 cfg.model_name, to_string(mode));
      return 0;
    }

    if (c_eval->parsed()) {
      const Dataset ds = load_dataset(ev.dataset);
      std::vector<Prediction> preds = load_predictions(ev.predictions);
      std::optional<PromptMode> mode;
      if (!ev.mode.empty()) mode = parse_mode(ev.mode);
      std::erase_if(preds, [&](const Prediction& p) {
        return (!ev.model.empty() && p.model_name != ev.model) ||
               (mode && p.mode != *mode);
      });
      std::unique_ptr<Embedder> embedder;
      if (ev.embedder == "onehot") {
        embedder = std::make_unique<OneHotEmbedder>();
      } else if (ev.embedder == "http") {
        if (ev.embed_url.empty() || ev.embed_model.empty()) {
          throw ValidationError("--embedder http needs --embed-url and --embed-model");
        }
        embedder = std::make_unique<HttpEmbedder>(ev.embed_url, ev.embed_model,
                                                  ev.api_key_env);
      } else {
        embedder = std::make_unique<HashingEmbedder>();
      }
      const EvalReport report = evaluate_predictions(preds, ds, *embedder);
      write_json(ev.out, to_json(report));
      if (!ev.csv.empty()) write_text(ev.csv, distribution_csv(report));
      fmt::print(err, "eval: {} examples\n", report.per_example.size());
      fmt::print(out, "{}\t{}\tf1={:.4f}\trouge_l={:.4f}\tsemantic_f1={:.4f}\n",
                 report.model_name, to_string(report.mode), report.means.f1,
                 report.means.rouge_l, report.means.semantic_f1);
      return 0;
    }

    if (c_compare->parsed()) {
      std::vector<EvalReport> reports;
      for (const auto& p : cmp.reports) {
        reports.push_back(eval_report_from_json(read_json(p)));
      }
      const ComparisonTable t = compare_models(reports);
      if (!cmp.csv.empty()) write_text(cmp.csv, t.csv());
      out << t.text();
      return 0;
    }

    if (c_stats->parsed()) {
      const StatsReport s = dataset_stats(load_dataset(stats.dataset));
      if (stats.json) {
        out << to_json(s).dump(2) << '\n';
        return 0;
      }
      fmt::print(out, "{:<24}{:>8}\n", "source", "pairs");
      for (const auto& [src, n] : s.per_source_counts) {
        fmt::print(out, "{:<24}{:>8}\n", src, n);
      }
      fmt::print(out, "{:<24}{:>8}\n", "total", s.total_pairs);
      fmt::print(out, "avg question length (words): {:.2f}\n",
                 s.avg_question_len_words);
      fmt::print(out, "avg answer length (words):   {:.2f}\n",
                 s.avg_answer_len_words);
      return 0;
    }

    if (c_imp->parsed()) {
      fmt::print(out, "{:+.2f}%\n", relative_improvement(imp.base, imp.improved));
      return 0;
    }
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  }
  return 2;
}

int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace shqa::cli
