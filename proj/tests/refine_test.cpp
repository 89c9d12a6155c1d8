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

#include <atomic>
#include <set>
#include <thread>

#include <doctest.h>

#include "shqa/error.hpp"
#include "shqa/refine.hpp"
#include "test_support.hpp"

using namespace shqa;
using shqa::test::StubLlmServer;
using shqa::test::TempDir;

namespace {

Dataset make_v1(std::size_t n) {
  Dataset ds;
  ds.version = Version::V1;
  ds.created_at = utc_timestamp();
  for (std::size_t i = 1; i <= n; ++i) {
    QAPair p;
    p.id = make_pair_id("smartthings", i);
    p.source = "smartthings";
    p.question = "how do i secure device " + std::to_string(i) + "?";
    p.answer = "change the default password on device " + std::to_string(i) +
               " and update its firmware regularly";
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

Dataset derive(const Dataset& from, Version v) {
  Dataset ds;
  ds.version = v;
  for (const auto& p : from.pairs) {
    QAPair q = p;
    q.id = derived_id(p.id, v);
    q.parent_id = p.id;
    q.version = v;
    ds.pairs.push_back(std::move(q));
  }
  return ds;
}

PromptSet default_prompts() {
  return load_prompt_templates(shqa::test::data_file("prompt_templates.json"));
}

// Scripted in-process client. `reply` gets the prompt and the 0-based
// attempt number for that prompt.
class FakeClient : public ChatClient {
 public:
  using Fn = std::function<std::string(const std::string&, int)>;
  explicit FakeClient(Fn fn, int delay_ms = 0) : fn_(std::move(fn)), delay_ms_(delay_ms) {}

  std::string complete(const ChatRequest& req) override {
    const int now = ++in_flight_;
    int prev = max_in_flight_.load();
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    if (delay_ms_) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
    int attempt = 0;
    {
      std::lock_guard lock(mutex_);
      attempt = attempts_[req.messages.back().content]++;
      requests_.push_back(req);
    }
    struct Leave {
      std::atomic<int>& n;
      ~Leave() { --n; }
    } leave{in_flight_};
    return fn_(req.messages.back().content, attempt);
  }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
  }
  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  Fn fn_;
  int delay_ms_;
  mutable std::mutex mutex_;
  std::map<std::string, int> attempts_;
  std::vector<ChatRequest> requests_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

std::string rephrased(const std::string&, int) {
  return "Question: How can I secure my device?\nAnswer: Change the default "
         "password and keep the firmware updated.";
}

StageOptions fast_options() {
  StageOptions o;
  o.model_name = "stub-model";
  o.max_concurrency = 4;
  o.retry = {4, 1};
  return o;
}

RefinementRecord pending_record(std::string id = "p-00001:rephrase:1") {
  RefinementRecord r;
  r.id = std::move(id);
  r.pair_id = "p-00001";
  r.stage = Stage::Rephrase;
  r.original = "question: q\nanswer: a";
  r.proposed = "question: q2\nanswer: a2";
  r.model_name = "m";
  r.created_at = "2026-01-01T00:00:00.000Z";
  return r;
}

}  // namespace

TEST_CASE("stage, status and action strings") {
  for (Stage s : {Stage::Rephrase, Stage::Summarize, Stage::SynthQuestion, Stage::Context}) {
    CHECK(parse_stage(to_string(s)) == s);
  }
  for (RecordStatus s : {RecordStatus::Pending, RecordStatus::Accepted, RecordStatus::Edited,
                         RecordStatus::Rejected, RecordStatus::Failed}) {
    CHECK(parse_status(to_string(s)) == s);
  }
  CHECK(parse_action("EDIT") == DecisionAction::Edit);
  CHECK_THROWS_AS(parse_stage("TRANSLATE"), ParseError);
  CHECK(make_record_id("ezlo-00001", Stage::SynthQuestion, 2) == "ezlo-00001:synth_question:2");
}

TEST_CASE("record JSON field order and round trip") {
  RefinementRecord r = pending_record();
  const std::string s = to_json(r).dump();
  CHECK(s.find(R"({"id":)") == 0);
  const char* order[] = {"\"id\"", "\"pair_id\"", "\"stage\"", "\"original\"", "\"proposed\"",
                         "\"status\"", "\"final_text\"", "\"reviewer_note\"",
                         "\"model_name\"", "\"created_at\""};
  std::size_t last = 0;
  for (const char* k : order) {
    const auto at = s.find(k);
    REQUIRE(at != std::string::npos);
    CHECK(at >= last);
    last = at;
  }
  CHECK(record_from_json(nlohmann::json::parse(s)) == r);
}

TEST_CASE("decide transitions") {
  const RefinementRecord r = pending_record();
  const auto acc = decide(r, DecisionAction::Accept, std::nullopt, std::nullopt);
  CHECK(acc.status == RecordStatus::Accepted);
  CHECK(acc.final_text == r.proposed);
  CHECK_NOTHROW(validate_record(acc));

  const auto ed = decide(r, DecisionAction::Edit, std::string("fixed"), std::string("typo"));
  CHECK(ed.status == RecordStatus::Edited);
  CHECK(ed.final_text == "fixed");
  CHECK(ed.reviewer_note == "typo");

  const auto rej = decide(r, DecisionAction::Reject, std::nullopt, std::nullopt);
  CHECK(rej.status == RecordStatus::Rejected);
  CHECK_FALSE(rej.final_text.has_value());

  CHECK_THROWS_AS(decide(acc, DecisionAction::Reject, std::nullopt, std::nullopt), ConflictError);
  CHECK_THROWS_AS(decide(r, DecisionAction::Edit, std::nullopt, std::nullopt), ValidationError);
  CHECK_THROWS_AS(decide(r, DecisionAction::Edit, std::string("  "), std::nullopt), ValidationError);
  CHECK_THROWS_AS(decide(r, DecisionAction::Accept, std::string("x"), std::nullopt), ValidationError);
  RefinementRecord failed = r;
  failed.status = RecordStatus::Failed;
  CHECK_THROWS_AS(decide(failed, DecisionAction::Accept, std::nullopt, std::nullopt), ConflictError);
}

TEST_CASE("validate_record status rules") {
  RefinementRecord r = pending_record();
  r.final_text = "x";
  CHECK_THROWS_AS(validate_record(r), ValidationError);
  r.status = RecordStatus::Accepted;
  CHECK_THROWS_AS(validate_record(r), ValidationError);
  r.final_text = r.proposed;
  CHECK_NOTHROW(validate_record(r));
  r.status = RecordStatus::Edited;
  r.final_text = " ";
  CHECK_THROWS_AS(validate_record(r), ValidationError);
}

TEST_CASE("record store persistence") {
  TempDir dir;
  const auto path = dir / "records.jsonl";
  {
    RecordStore store(path);
    CHECK(store.snapshot().empty());
    store.put(pending_record("a:rephrase:1"));
    RefinementRecord b = pending_record("b:rephrase:1");
    b.pair_id = "b";
    store.put(b);
    store.update("a:rephrase:1", [](const RefinementRecord& r) {
      return decide(r, DecisionAction::Accept, std::nullopt, std::nullopt);
    });
    CHECK_THROWS_AS(store.update("zzz", [](const RefinementRecord& r) { return r; }),
                    NotFoundError);
    // A throwing mutation writes nothing.
    CHECK_THROWS_AS(store.update("b:rephrase:1",
                                 [](const RefinementRecord&) -> RefinementRecord {
                                   throw ValidationError("no");
                                 }),
                    ValidationError);
  }
  RecordStore again(path);
  REQUIRE(again.snapshot().size() == 2);
  CHECK(again.get("a:rephrase:1")->status == RecordStatus::Accepted);
  CHECK(again.get("b:rephrase:1")->status == RecordStatus::Pending);
  CHECK(again.latest("b", Stage::Rephrase)->id == "b:rephrase:1");
  CHECK_FALSE(again.latest("b", Stage::Summarize).has_value());
  // The log keeps history; the last line for an id wins.
  CHECK(read_jsonl(path).size() == 3);
}

TEST_CASE("concurrent decisions on one record: exactly one wins") {
  TempDir dir;
  RecordStore store(dir / "r.jsonl");
  store.put(pending_record());
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      try {
        store.update("p-00001:rephrase:1", [&](const RefinementRecord& r) {
          return decide(r, i % 2 ? DecisionAction::Accept : DecisionAction::Reject,
                        std::nullopt, std::nullopt);
        });
        ++ok;
      } catch (const ConflictError&) {
        ++conflict;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 1);
  CHECK(conflict == 7);
  RecordStore reread(dir / "r.jsonl");
  CHECK(reread.get("p-00001:rephrase:1")->status != RecordStatus::Pending);
}

TEST_CASE("prompt templates") {
  const PromptSet ps = default_prompts();
  CHECK(ps.size() == 4);
  for (const auto& [stage, t] : ps) {
    CHECK(t.stage == stage);
    CHECK_NOTHROW(validate_template(t));
  }
  QAPair p;
  p.question = "Q?";
  p.answer = "A.";
  p.context = "C";
  CHECK(render_template("{question}|{answer}|{context}|{other}", p) == "Q?|A.|C|{other}");
  p.context.reset();
  CHECK(render_template("[{context}]", p) == "[]");
  CHECK_THROWS_AS(validate_template({Stage::Rephrase, "only {question}"}), ValidationError);
  CHECK_NOTHROW(validate_template({Stage::Summarize, "sum {answer}"}));

  TempDir dir;
  shqa::test::spit(dir / "t.json", R"({"TRANSLATE": "x"})");
  CHECK_THROWS(load_prompt_templates(dir / "t.json"));
}

TEST_CASE("question/answer blocks") {
  const std::string b = format_qa_block("How?", "Like this.\nAnd this.");
  CHECK(b == "question: How?\nanswer: Like this.\nAnd this.");
  auto qa = parse_qa_block(b);
  REQUIRE(qa);
  CHECK(qa->first == "How?");
  CHECK(qa->second == "Like this.\nAnd this.");
  qa = parse_qa_block("**Question:** Is it safe?\n\n**Answer:** Yes, mostly.");
  REQUIRE(qa);
  CHECK(qa->first == "Is it safe?");
  CHECK(qa->second == "Yes, mostly.");
  qa = parse_qa_block("## QUESTION: a\n## ANSWER: b");
  REQUIRE(qa);
  CHECK(qa->second == "b");
  CHECK_FALSE(parse_qa_block("just some text").has_value());
}

TEST_CASE("complete_with_retry") {
  ChatRequest req;
  req.messages.push_back({"user", "hi"});
  SUBCASE("transient failures then success") {
    FakeClient c([](const std::string&, int attempt) -> std::string {
      if (attempt < 2) throw TransientError("busy");
      return "ok";
    });
    CHECK(complete_with_retry(c, req, {4, 1}, 1) == "ok");
    CHECK(c.calls() == 3);
  }
  SUBCASE("permanent errors are not retried") {
    FakeClient c([](const std::string&, int) -> std::string { throw PermanentError("400"); });
    CHECK_THROWS_AS(complete_with_retry(c, req, {4, 1}, 1), PermanentError);
    CHECK(c.calls() == 1);
  }
  SUBCASE("budget exhausted") {
    FakeClient c([](const std::string&, int) -> std::string { throw TransientError("503"); });
    CHECK_THROWS_AS(complete_with_retry(c, req, {4, 1}, 1), TransientError);
    CHECK(c.calls() == 4);
  }
}

TEST_CASE("run_stage is idempotent and resumable") {
  TempDir dir;
  const Dataset ds = make_v1(20);
  RecordStore store(dir / "records.jsonl");
  FakeClient client(rephrased);

  StageRunResult r1 = run_stage(ds, Stage::Rephrase, client, default_prompts(), store, fast_options());
  CHECK(r1.requested == 20);
  CHECK(r1.failed == 0);
  CHECK(r1.records.size() == 20);
  CHECK(client.calls() == 20);
  for (const auto& r : r1.records) {
    CHECK(r.status == RecordStatus::Pending);
    CHECK(r.proposed == "question: How can I secure my device?\nanswer: Change the default "
                        "password and keep the firmware updated.");
    CHECK(r.id == make_record_id(r.pair_id, Stage::Rephrase, 1));
    CHECK(r.original == stage_source_text(*ds.find(r.pair_id), Stage::Rephrase));
  }

  StageRunResult r2 = run_stage(ds, Stage::Rephrase, client, default_prompts(), store, fast_options());
  CHECK(r2.requested == 0);
  CHECK(r2.skipped == 20);
  CHECK(client.calls() == 20);

  // Rejected pairs get a fresh generation; decided ones are left alone.
  for (int i = 1; i <= 3; ++i) {
    store.update(make_record_id(make_pair_id("smartthings", i), Stage::Rephrase, 1),
                 [](const RefinementRecord& r) {
                   return decide(r, DecisionAction::Reject, std::nullopt, std::nullopt);
                 });
  }
  store.update(make_record_id(make_pair_id("smartthings", 4), Stage::Rephrase, 1),
               [](const RefinementRecord& r) {
                 return decide(r, DecisionAction::Accept, std::nullopt, std::nullopt);
               });
  StageRunResult r3 = run_stage(ds, Stage::Rephrase, client, default_prompts(), store, fast_options());
  CHECK(r3.requested == 3);
  CHECK(client.calls() == 23);
  CHECK(store.latest(make_pair_id("smartthings", 1), Stage::Rephrase)->id ==
        make_record_id(make_pair_id("smartthings", 1), Stage::Rephrase, 2));

  // The store on disk agrees.
  RecordStore reread(dir / "records.jsonl");
  CHECK(reread.snapshot().size() == 23);
}

TEST_CASE("run_stage marks unusable replies FAILED and retries them in place") {
  TempDir dir;
  const Dataset ds = make_v1(10);
  RecordStore store(dir / "records.jsonl");
  std::atomic<bool> healthy{false};
  FakeClient client([&](const std::string& prompt, int) -> std::string {
    const bool odd = prompt.find("device 1 ") != std::string::npos ||
                     prompt.find("device 3 ") != std::string::npos;
    if (odd && !healthy) return "I cannot help with that";
    if (prompt.find("device 5 ") != std::string::npos && !healthy) {
      throw PermanentError("400 bad request");
    }
    return rephrased(prompt, 0);
  });
  auto r1 = run_stage(ds, Stage::Rephrase, client, default_prompts(), store, fast_options());
  CHECK(r1.failed == 3);
  std::size_t failed = 0;
  for (const auto& r : r1.records) {
    if (r.status == RecordStatus::Failed) {
      ++failed;
      REQUIRE(r.reviewer_note.has_value());
      CHECK(r.reviewer_note->find("failed") == 0);
    }
  }
  CHECK(failed == 3);

  healthy = true;
  auto r2 = run_stage(ds, Stage::Rephrase, client, default_prompts(), store, fast_options());
  CHECK(r2.requested == 3);
  CHECK(r2.failed == 0);
  for (const auto& r : r2.records) {
    CHECK(r.status == RecordStatus::Pending);
    CHECK(r.id.ends_with(":1"));
  }
  CHECK(store.snapshot().size() == 10);
}

TEST_CASE("run_stage respects max_concurrency") {
  TempDir dir;
  const Dataset ds = make_v1(24);
  RecordStore store(dir / "records.jsonl");
  FakeClient client(rephrased, 5);
  StageOptions o = fast_options();
  o.max_concurrency = 3;
  run_stage(ds, Stage::Rephrase, client, default_prompts(), store, o);
  CHECK(client.max_in_flight() <= 3);
  CHECK(client.max_in_flight() >= 2);
}

TEST_CASE("run_stage aborts when the endpoint is unreachable") {
  TempDir dir;
  const Dataset ds = make_v1(6);
  RecordStore store(dir / "records.jsonl");
  FakeClient client([](const std::string& prompt, int) -> std::string {
    if (prompt.find("device 4 ") != std::string::npos) throw UnreachableError("refused");
    return rephrased(prompt, 0);
  });
  StageOptions o = fast_options();
  o.max_concurrency = 1;
  CHECK_THROWS_AS(run_stage(ds, Stage::Rephrase, client, default_prompts(), store, o),
                  EndpointError);
  // Work finished before the abort is kept.
  CHECK(store.snapshot().size() == 3);
}

TEST_CASE("run_stage stage prerequisites") {
  TempDir dir;
  RecordStore store(dir / "records.jsonl");
  FakeClient client(rephrased);
  const Dataset v1 = make_v1(2);
  CHECK_THROWS_AS(run_stage(v1, Stage::Summarize, client, default_prompts(), store, fast_options()),
                  ValidationError);
  CHECK_THROWS_AS(run_stage(v1, Stage::SynthQuestion, client, default_prompts(), store, fast_options()),
                  ValidationError);
  CHECK_THROWS_AS(run_stage(derive(v1, Version::V2), Stage::Rephrase, client, default_prompts(),
                            store, fast_options()),
                  ValidationError);
  PromptSet missing = default_prompts();
  missing.erase(Stage::Rephrase);
  CHECK_THROWS_AS(run_stage(v1, Stage::Rephrase, client, missing, store, fast_options()),
                  ValidationError);
  CHECK(client.calls() == 0);
}

TEST_CASE("HttpChatClient wire contract against a stub server") {
  StubLlmServer server([](const nlohmann::json& req, int attempt) {
    const std::string prompt = StubLlmServer::prompt_of(req);
    if (prompt == "rate limited" && attempt == 0) return StubLlmServer::Reply{429, ""};
    if (prompt == "bad") return StubLlmServer::Reply{400, ""};
    return StubLlmServer::Reply{200, "echo: " + prompt};
  });
  LlmClientConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model_name = "gemini-stub";
  cfg.api_key_ref = "SHQA_TEST_UNSET_KEY";
  HttpChatClient client(cfg);

  ChatRequest req;
  req.model = "gemini-stub";
  req.messages.push_back({"user", "hello"});
  req.seed = 0;
  CHECK(client.complete(req) == "echo: hello");
  const auto sent = server.requests().at(0);
  CHECK(sent["model"] == "gemini-stub");
  CHECK(sent["temperature"] == 0.0);
  CHECK(sent["max_tokens"] == 512);
  CHECK(sent["seed"] == 0);
  CHECK(sent["messages"][0]["role"] == "user");

  req.messages[0].content = "rate limited";
  CHECK_THROWS_AS(client.complete(req), TransientError);
  CHECK(complete_with_retry(client, req, {4, 1}, 0) == "echo: rate limited");

  req.messages[0].content = "bad";
  CHECK_THROWS_AS(complete_with_retry(client, req, {4, 1}, 0), PermanentError);

  LlmClientConfig dead = cfg;
  dead.base_url = "http://127.0.0.1:1/v1";
  dead.request_timeout_ms = 2000;
  HttpChatClient unreachable(dead);
  CHECK_THROWS_AS(unreachable.complete(req), UnreachableError);
}

TEST_CASE("llm config validation") {
  LlmClientConfig c;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = llm_config_from_json(nlohmann::json{{"base_url", "http://localhost:9/v1"},
                                          {"model_name", "m"},
                                          {"api_key_ref", "KEY"},
                                          {"max_concurrency", 2}});
  CHECK(c.max_concurrency == 2);
  CHECK(c.retry.max_attempts == 4);
  const BaseUrl u = parse_base_url("https://api.example.com:8443/v1beta/openai/");
  CHECK(u.scheme_host_port == "https://api.example.com:8443");
  CHECK(u.path_prefix == "/v1beta/openai");
  CHECK(parse_base_url("http://h").path_prefix.empty());
  CHECK_THROWS(parse_base_url("ftp://x"));
}

TEST_CASE("apply_decisions builds V2 with 5 accepted, 3 edited, 2 rejected") {
  TempDir dir;
  const Dataset v1 = make_v1(10);
  RecordStore store(dir / "records.jsonl");
  FakeClient client(rephrased);
  run_stage(v1, Stage::Rephrase, client, default_prompts(), store, fast_options());
  CHECK_THROWS_AS(apply_decisions(v1, store.snapshot(), Stage::Rephrase, Version::V2),
                  ValidationError);

  for (std::size_t i = 1; i <= 10; ++i) {
    const std::string id = make_record_id(make_pair_id("smartthings", i), Stage::Rephrase, 1);
    store.update(id, [&](const RefinementRecord& r) {
      if (i <= 5) return decide(r, DecisionAction::Accept, std::nullopt, std::nullopt);
      if (i <= 8) {
        return decide(r, DecisionAction::Edit,
                      format_qa_block("edited q " + std::to_string(i), "edited a"),
                      std::nullopt);
      }
      return decide(r, DecisionAction::Reject, std::nullopt, std::nullopt);
    });
  }
  ApplySummary summary;
  const Dataset v2 =
      apply_decisions(v1, store.snapshot(), Stage::Rephrase, Version::V2, &summary);
  CHECK(v2.version == Version::V2);
  CHECK(v2.pairs.size() == v1.pairs.size());
  CHECK(summary.replaced == 8);
  CHECK(summary.kept == 2);
  CHECK_NOTHROW(validate_dataset(v2));
  for (std::size_t i = 0; i < 10; ++i) {
    const QAPair& p = v2.pairs[i];
    CHECK(p.id == v1.pairs[i].id + ".v2");
    CHECK(p.parent_id == v1.pairs[i].id);
    if (i < 5) {
      CHECK(p.question == "How can I secure my device?");
    } else if (i < 8) {
      CHECK(p.question == "edited q " + std::to_string(i + 1));
      CHECK(p.answer == "edited a");
    } else {
      CHECK(p.question == v1.pairs[i].question);
      CHECK(p.answer == v1.pairs[i].answer);
    }
  }
  CHECK_THROWS_AS(apply_decisions(v1, store.snapshot(), Stage::Rephrase, Version::V3),
                  ValidationError);
}

TEST_CASE("apply_decisions for summaries, contexts and synthetic questions") {
  TempDir dir;
  const Dataset v2 = derive(make_v1(4), Version::V2);
  RecordStore store(dir / "records.jsonl");
  FakeClient client([](const std::string& prompt, int) -> std::string {
    if (prompt.find("background") != std::string::npos) return "Context: routers matter.";
    if (prompt.find("new question") != std::string::npos) return "Question: what about cameras?";
    return "Answer: change it and update.";
  });
  run_stage(v2, Stage::Summarize, client, default_prompts(), store, fast_options());
  for (const auto& r : store.snapshot()) {
    CHECK(r.proposed == "change it and update.");
    store.update(r.id, [](const RefinementRecord& x) {
      return decide(x, DecisionAction::Accept, std::nullopt, std::nullopt);
    });
  }
  const Dataset v3 = apply_decisions(v2, store.snapshot(), Stage::Summarize, Version::V3);
  CHECK(v3.pairs.size() == 4);
  CHECK(v3.pairs[0].answer == "change it and update.");
  CHECK(v3.pairs[0].question == v2.pairs[0].question);
  CHECK(v3.pairs[0].parent_id == v2.pairs[0].id);

  run_stage(v3, Stage::Context, client, default_prompts(), store, fast_options());
  run_stage(v3, Stage::SynthQuestion, client, default_prompts(), store, fast_options());
  for (const auto& r : store.snapshot()) {
    if (r.status != RecordStatus::Pending) continue;
    store.update(r.id, [](const RefinementRecord& x) {
      if (x.stage == Stage::SynthQuestion && x.pair_id.find("00002") != std::string::npos) {
        return decide(x, DecisionAction::Reject, std::nullopt, std::nullopt);
      }
      if (x.stage == Stage::SynthQuestion) {
        return decide(x, DecisionAction::Edit,
                      format_qa_block(x.proposed, "use a separate camera vlan"), std::nullopt);
      }
      return decide(x, DecisionAction::Accept, std::nullopt, std::nullopt);
    });
  }
  const Dataset v3c = apply_decisions(v3, store.snapshot(), Stage::Context, Version::V3);
  CHECK(v3c.pairs[0].id == v3.pairs[0].id);
  CHECK(v3c.pairs[0].context == "routers matter.");

  const Dataset syn = apply_decisions(v3, store.snapshot(), Stage::SynthQuestion, Version::Synthetic);
  CHECK(syn.version == Version::Synthetic);
  REQUIRE(syn.pairs.size() == 3);
  for (const auto& p : syn.pairs) {
    CHECK(p.provenance == Provenance::Synthetic);
    CHECK(p.question == "what about cameras?");
    CHECK(p.answer == "use a separate camera vlan");
    REQUIRE(p.parent_id.has_value());
    CHECK(v3.find(*p.parent_id) != nullptr);
  }
}

TEST_CASE("synthetic_totals") {
  Dataset syn;
  syn.version = Version::Synthetic;
  for (std::size_t i = 1; i <= 2245; ++i) {
    QAPair p;
    p.id = make_pair_id("reddit", i) + ".syn";
    p.source = "reddit";
    p.question = "q" + std::to_string(i);
    p.answer = "a";
    p.version = Version::Synthetic;
    p.provenance = Provenance::Synthetic;
    p.parent_id = make_pair_id("reddit", i) + ".v3";
    syn.pairs.push_back(std::move(p));
  }
  const SyntheticSplit s = synthetic_totals(syn, 1792, 453, 0);
  CHECK(s.train() == 1792);
  CHECK(s.val() == 453);
  CHECK(s.total() == 2245);
  std::set<std::string> all(s.train_ids.begin(), s.train_ids.end());
  all.insert(s.val_ids.begin(), s.val_ids.end());
  CHECK(all.size() == 2245);
  CHECK(synthetic_totals(syn, 1792, 453, 0).train_ids == s.train_ids);
  CHECK_THROWS_AS(synthetic_totals(syn, 1800, 453, 0), ValidationError);
  syn.pairs[7].answer.clear();
  CHECK_THROWS_AS(synthetic_totals(syn, 10, 10, 0), ValidationError);
}
