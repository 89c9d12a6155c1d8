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

#include <cctype>
#include <functional>
#include <map>
#include <set>

#include <doctest.h>

#include "shqa/error.hpp"
#include "shqa/eval.hpp"
#include "shqa/rng.hpp"
#include "test_support.hpp"

using namespace shqa;
using shqa::test::StubLlmServer;
using shqa::test::TempDir;

namespace {

// ---- independent reference implementations

std::vector<std::string> ref_normalize(const std::string& s) {
  std::string t;
  for (unsigned char c : s) {
    if (std::ispunct(c)) continue;
    t += static_cast<char>(std::tolower(c));
  }
  std::vector<std::string> out;
  std::string cur;
  for (char c : t + " ") {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

PrfScore ref_prf(double overlap, double np, double ng) {
  if (np == 0 && ng == 0) return {1, 1, 1};
  if (np == 0 || ng == 0 || overlap == 0) return {0, 0, 0};
  const double p = overlap / np, r = overlap / ng;
  return {p, r, 2 * p * r / (p + r)};
}

PrfScore ref_token_f1(const std::string& pred, const std::string& gold) {
  const auto p = ref_normalize(pred);
  auto g = ref_normalize(gold);
  std::vector<bool> used(g.size(), false);
  double overlap = 0;
  for (const auto& t : p) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!used[j] && g[j] == t) {
        used[j] = true;
        ++overlap;
        break;
      }
    }
  }
  return ref_prf(overlap, static_cast<double>(p.size()), static_cast<double>(g.size()));
}

std::size_t ref_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size() || j == b.size()) return std::size_t{0};
    auto it = memo.find({i, j});
    if (it != memo.end()) return it->second;
    const std::size_t v = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    memo[{i, j}] = v;
    return v;
  };
  return go(0, 0);
}

PrfScore ref_rouge_l(const std::string& pred, const std::string& gold) {
  const auto p = ref_normalize(pred), g = ref_normalize(gold);
  return ref_prf(static_cast<double>(ref_lcs(p, g)), static_cast<double>(p.size()),
                 static_cast<double>(g.size()));
}

// Fraction of each side's tokens that occur anywhere on the other side.
PrfScore ref_bag_presence(const std::string& pred, const std::string& gold) {
  const auto p = ref_normalize(pred), g = ref_normalize(gold);
  if (p.empty() && g.empty()) return {1, 1, 1};
  if (p.empty() || g.empty()) return {0, 0, 0};
  const std::set<std::string> ps(p.begin(), p.end()), gs(g.begin(), g.end());
  double hp = 0, hg = 0;
  for (const auto& t : p) hp += gs.count(t);
  for (const auto& t : g) hg += ps.count(t);
  PrfScore s;
  s.precision = hp / static_cast<double>(p.size());
  s.recall = hg / static_cast<double>(g.size());
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0;
  return s;
}

std::string random_sentence(SplitMix64& rng) {
  static const char* vocab[] = {"router", "The", "a", "camera", "lock", "AN", "vpn,",
                                "firmware.", "update!", "it's", "default", "password",
                                "(hub)", "zigbee", "the", "wifi", "x"};
  std::string s;
  const auto n = rng.below(14);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) s += rng.below(5) ? " " : "  ";
    s += vocab[rng.below(17)];
  }
  return s;
}

class EchoClient : public ChatClient {
 public:
  explicit EchoClient(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const ChatRequest& r) override {
    ++calls;
    return fn_(r);
  }
  std::atomic<int> calls{0};

 private:
  std::function<std::string(const ChatRequest&)> fn_;
};

Dataset gold_dataset(std::size_t n) {
  Dataset ds;
  ds.version = Version::V3;
  for (std::size_t i = 1; i <= n; ++i) {
    QAPair p;
    p.id = make_pair_id("ezlo", i) + ".v3";
    p.parent_id = make_pair_id("ezlo", i) + ".v2";
    p.version = Version::V3;
    p.source = "ezlo";
    p.question = "question " + std::to_string(i);
    p.answer = "gold answer number " + std::to_string(i);
    p.context = "context " + std::to_string(i);
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

}  // namespace

TEST_CASE("normalize_answer") {
  CHECK(normalize_answer("The Router's FIRMWARE, an update!") ==
        std::vector<std::string>{"routers", "firmware", "update"});
  CHECK(normalize_answer("").empty());
  CHECK(normalize_answer("a an the").empty());
}

TEST_CASE("metric anchors") {
  const auto f = token_f1("change the default password",
                          "you should change your default password immediately");
  CHECK(std::abs(f.f1 - 0.6) < 1e-12);
  CHECK(f.precision == 1.0);
  CHECK(std::abs(f.recall - 3.0 / 7.0) < 1e-12);

  HashingEmbedder hashing;
  OneHotEmbedder onehot;
  for (const char* s : {"change the default password", "x", "Router firmware update"}) {
    CHECK(token_f1(s, s).f1 == 1.0);
    CHECK(rouge_l(s, s).f1 == 1.0);
    CHECK(semantic_f1(s, s, onehot).f1 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(semantic_f1(s, s, hashing).f1 == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(token_f1("alpha beta", "gamma delta").f1 == 0.0);
  CHECK(rouge_l("alpha beta", "gamma delta").f1 == 0.0);
  CHECK(semantic_f1("alpha beta", "gamma delta", onehot).f1 == 0.0);

  CHECK(token_f1("", "").f1 == 1.0);
  CHECK(token_f1("", "x").f1 == 0.0);
  CHECK(rouge_l("x", "").f1 == 0.0);
  CHECK(semantic_f1("the", "x", onehot).f1 == 0.0);
}

TEST_CASE("token_f1 and rouge_l match reference implementations") {
  SplitMix64 rng(2024);
  for (int i = 0; i < 500; ++i) {
    const std::string p = random_sentence(rng), g = random_sentence(rng);
    const PrfScore a = token_f1(p, g), ra = ref_token_f1(p, g);
    CHECK(std::abs(a.precision - ra.precision) <= 1e-12);
    CHECK(std::abs(a.recall - ra.recall) <= 1e-12);
    CHECK(std::abs(a.f1 - ra.f1) <= 1e-12);
    const PrfScore b = rouge_l(p, g), rb = ref_rouge_l(p, g);
    CHECK(std::abs(b.precision - rb.precision) <= 1e-12);
    CHECK(std::abs(b.recall - rb.recall) <= 1e-12);
    CHECK(std::abs(b.f1 - rb.f1) <= 1e-12);
  }
}

TEST_CASE("semantic_f1 with one-hot embeddings equals bag presence") {
  SplitMix64 rng(7);
  OneHotEmbedder e;
  for (int i = 0; i < 300; ++i) {
    const std::string p = random_sentence(rng), g = random_sentence(rng);
    const PrfScore s = semantic_f1(p, g, e), r = ref_bag_presence(p, g);
    CHECK(s.precision == r.precision);
    CHECK(s.recall == r.recall);
    CHECK(s.f1 == r.f1);
  }
}

TEST_CASE("metric properties on random pairs") {
  SplitMix64 rng(8);
  HashingEmbedder e;
  for (int i = 0; i < 300; ++i) {
    const std::string p = random_sentence(rng), g = random_sentence(rng);
    const auto a = token_f1(p, g), b = token_f1(g, p);
    CHECK(a.f1 == doctest::Approx(b.f1).epsilon(1e-12));
    CHECK(a.precision == b.recall);
    const auto c = rouge_l(p, g), d = rouge_l(g, p);
    CHECK(c.f1 == doctest::Approx(d.f1).epsilon(1e-12));
    const auto s1 = semantic_f1(p, g, e), s2 = semantic_f1(g, p, e);
    CHECK(s1.f1 == doctest::Approx(s2.f1).epsilon(1e-12));
    CHECK(s1.precision == doctest::Approx(s2.recall).epsilon(1e-12));

    const auto pn = normalize_answer(p), gn = normalize_answer(g);
    std::multiset<std::string> gm(gn.begin(), gn.end());
    std::size_t overlap = 0;
    for (const auto& t : pn) {
      auto it = gm.find(t);
      if (it != gm.end()) {
        gm.erase(it);
        ++overlap;
      }
    }
    CHECK(lcs_length(pn, gn) <= overlap);
    for (double v : {a.f1, c.f1, s1.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("lcs_length") {
  const std::vector<std::string> a = {"a", "b", "c", "d"}, b = {"b", "d", "c"};
  CHECK(lcs_length(a, b) == 2);
  CHECK(lcs_length(a, {}) == 0);
  CHECK(lcs_length(a, a) == 4);
}

TEST_CASE("greedy_match handles different widths") {
  Eigen::MatrixXd p(1, 2), g(1, 3);
  p << 1, 0;
  g << 1, 0, 0;
  CHECK(greedy_match(p, g).f1 == 1.0);
  CHECK(greedy_match(Eigen::MatrixXd(0, 2), g).f1 == 0.0);
}

TEST_CASE("hashing embedder rows are unit length and deterministic") {
  HashingEmbedder e(128);
  const std::vector<std::string> toks = {"router", "routers", "zzz"};
  const Eigen::MatrixXd m = e.embed(toks);
  CHECK(m.rows() == 3);
  for (int i = 0; i < 3; ++i) CHECK(m.row(i).norm() == doctest::Approx(1.0));
  CHECK(m == e.embed(toks));
  CHECK(m.row(0).dot(m.row(1)) > m.row(0).dot(m.row(2)));
}

TEST_CASE("http embedder against a stub endpoint") {
  StubLlmServer server([](const nlohmann::json&, int) { return StubLlmServer::Reply{}; });
  HttpEmbedder e(server.base_url(), "stub-embed", "SHQA_TEST_UNSET_KEY");
  CHECK(semantic_f1("router firmware", "router firmware", e).f1 == doctest::Approx(1.0));
  CHECK(semantic_f1("router", "firmware", e).f1 == 0.0);
}

TEST_CASE("build_prompt") {
  const Dataset ds = gold_dataset(1);
  CHECK(build_prompt(ds.pairs[0], PromptMode::WithoutContext) == "question: question 1\nanswer:");
  CHECK(build_prompt(ds.pairs[0], PromptMode::WithContext) ==
        "context: context 1\nquestion: question 1\nanswer:");
  QAPair bare = ds.pairs[0];
  bare.context.reset();
  CHECK_THROWS_AS(build_prompt(bare, PromptMode::WithContext), ValidationError);
}

TEST_CASE("generate_predictions is resumable and sends generation params") {
  TempDir dir;
  const Dataset ds = gold_dataset(30);
  std::vector<std::string> ids;
  for (const auto& p : ds.pairs) ids.push_back(p.id);

  std::mutex m;
  std::vector<ChatRequest> seen;
  EchoClient client([&](const ChatRequest& r) {
    std::lock_guard lock(m);
    seen.push_back(r);
    return "out";
  });
  PredictOptions opts;
  opts.model_name = "t5-small";
  opts.output_path = dir / "preds.jsonl";
  opts.retry = {4, 1};
  const std::span<const std::string> first(ids.data(), 12);
  auto a = generate_predictions(first, ds, client, {}, PromptMode::WithoutContext, opts);
  CHECK(a.size() == 12);
  CHECK(client.calls == 12);
  auto b = generate_predictions(ids, ds, client, {}, PromptMode::WithoutContext, opts);
  CHECK(b.size() == 30);
  CHECK(client.calls == 30);
  for (std::size_t i = 0; i < 30; ++i) CHECK(b[i].pair_id == ids[i]);
  // Another mode is a separate run.
  generate_predictions(first, ds, client, {}, PromptMode::WithContext, opts);
  CHECK(client.calls == 42);
  CHECK(load_predictions(opts.output_path).size() == 42);
  for (const auto& r : seen) {
    CHECK(r.temperature == 0.0);
    CHECK(r.seed == 0);
    CHECK(r.max_tokens == 512);
    CHECK(r.model == "t5-small");
  }
  std::vector<std::string> bad = {"nope"};
  CHECK_THROWS_AS(generate_predictions(bad, ds, client, {}, PromptMode::WithoutContext, opts),
                  ValidationError);
}

TEST_CASE("evaluate_predictions") {
  const Dataset ds = gold_dataset(5);
  OneHotEmbedder e;
  std::vector<Prediction> preds;
  for (auto it = ds.pairs.rbegin(); it != ds.pairs.rend(); ++it) {
    preds.push_back({it->id, it->answer, "m", PromptMode::WithoutContext});
  }
  EvalReport r = evaluate_predictions(preds, ds, e);
  CHECK(r.means.f1 == 1.0);
  CHECK(r.means.rouge_l == 1.0);
  CHECK(r.means.semantic_f1 == 1.0);
  CHECK(std::is_sorted(r.per_example.begin(), r.per_example.end(),
                       [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; }));

  for (auto& p : preds) p.output = "";
  r = evaluate_predictions(preds, ds, e);
  CHECK(r.means.f1 == 0.0);
  CHECK(r.means.rouge_l == 0.0);
  CHECK(r.means.semantic_f1 == 0.0);

  // Hand-built outputs scored by the reference formulas.
  const char* outs[] = {"gold answer", "number 2 gold answer", "answer number gold 3",
                        "nothing", "gold answer number 5 extra"};
  for (std::size_t i = 0; i < 5; ++i) preds[4 - i].output = outs[i];
  r = evaluate_predictions(preds, ds, e);
  double sum_f1 = 0, sum_rl = 0, sum_sem = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& ex = r.per_example[i];
    const std::string& gold = ds.pairs[i].answer;
    CHECK(ex.scores.f1 == doctest::Approx(ref_token_f1(outs[i], gold).f1).epsilon(1e-12));
    CHECK(ex.scores.rouge_l == doctest::Approx(ref_rouge_l(outs[i], gold).f1).epsilon(1e-12));
    CHECK(ex.scores.semantic_f1 ==
          doctest::Approx(ref_bag_presence(outs[i], gold).f1).epsilon(1e-12));
    sum_f1 += ex.scores.f1;
    sum_rl += ex.scores.rouge_l;
    sum_sem += ex.scores.semantic_f1;
  }
  CHECK(std::abs(r.means.f1 - sum_f1 / 5) < 1e-12);
  CHECK(std::abs(r.means.rouge_l - sum_rl / 5) < 1e-12);
  CHECK(std::abs(r.means.semantic_f1 - sum_sem / 5) < 1e-12);
  const Eigen::MatrixXd dist = r.distribution();
  CHECK(dist.rows() == 5);
  CHECK(dist.cols() == 3);
  CHECK(std::abs(dist.colwise().mean()(0) - r.means.f1) < 1e-12);

  const EvalReport back = eval_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(back.model_name == "m");
  CHECK(back.means.f1 == r.means.f1);
  CHECK(back.per_example.size() == 5);
  const std::string csv = distribution_csv(r);
  CHECK(csv.find("pair_id,f1,rouge_l,semantic_f1\n") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

  CHECK_THROWS_AS(evaluate_predictions(std::vector<Prediction>{}, ds, e), ValidationError);
  preds[0].pair_id = "ghost";
  CHECK_THROWS_AS(evaluate_predictions(preds, ds, e), ValidationError);
}

TEST_CASE("compare_models") {
  auto report = [](std::string model, PromptMode mode, double f1, double rl, double sem) {
    EvalReport r;
    r.model_name = std::move(model);
    r.mode = mode;
    r.means = {f1, rl, sem};
    return r;
  };
  std::vector<EvalReport> one = {report("base", PromptMode::WithoutContext, 0.35, 0.3, 0.8)};
  ComparisonTable t = compare_models(one);
  CHECK(t.values.rows() == 3);
  CHECK(t.values.cols() == 1);

  std::vector<EvalReport> six;
  const char* names[] = {"t5", "bart", "gpt2", "llama", "flan", "qwen"};
  for (int i = 0; i < 6; ++i) {
    six.push_back(report(names[i], PromptMode::WithoutContext, 0.1 * i, 0.5 - 0.05 * i, 0.7));
  }
  t = compare_models(six);
  CHECK(t.values.rows() == 3);
  CHECK(t.values.cols() == 6);
  CHECK(t.values(0, 2) == six[2].means.f1);
  CHECK(t.best[0] == 5);
  CHECK(t.best[1] == 0);
  CHECK(t.best[2] == 0);
  CHECK(t.csv().find("metric,t5") == 0);
  CHECK(t.text().find("llama") != std::string::npos);

  six.push_back(six[0]);
  CHECK_THROWS_AS(compare_models(six), ValidationError);
  CHECK_THROWS_AS(compare_models(std::vector<EvalReport>{}), ValidationError);
}

TEST_CASE("relative_improvement") {
  CHECK(relative_improvement(0.42, 0.42) == 0.0);
  CHECK(relative_improvement(0.3500, 0.5258) == doctest::Approx(50.2286).epsilon(1e-6));
  CHECK_THROWS_AS(relative_improvement(0.0, 0.5), ValidationError);
  CHECK_THROWS_AS(relative_improvement(-1.0, 0.5), ValidationError);
}
