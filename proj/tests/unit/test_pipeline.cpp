/*
 * Copyright 2026 The afort Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "afort/pipeline.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace afort;

namespace {

struct Harness {
    PromptAssets assets = PromptAssets::load(AFORT_ASSETS);
    std::vector<ArgumentRecord> records = load_corpus(testing::fixture("corpus_10.csv").string());
    FixedClock clock;
    CompletionContext completion;
    Harness() { completion.sleep = [](std::chrono::milliseconds) {}; }
    PipelineContext context(GenerationProvider& p) { return {assets, p, completion, clock}; }
};

const ArgumentRecord& by_id(const std::vector<ArgumentRecord>& rs, const std::string& id) {
    for (const auto& r : rs)
        if (r.id == id) return r;
    throw std::runtime_error("no record " + id);
}

}  // namespace

TEST_CASE("scripted run is ordered, counted and reproducible") {
    Harness h;
    auto provider = ScriptedProvider::from_file(testing::fixture("interpret_20.jsonl"));
    auto ctx = h.context(*provider);
    PipelineOptions opt;
    opt.concurrency = 4;
    auto a = run_corpus(h.records, opt, ctx);
    REQUIRE(a.results.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(a.results[i].record_id == std::to_string(i + 1));
    CHECK(a.manifest["counts"]["status"]["ok"] == 10);
    CHECK(a.manifest["counts"]["verdict"]["NAF"] == 2);
    CHECK(a.manifest["usage"]["calls"] == 10);
    CHECK(a.manifest["corpus_digest"] == corpus_digest(h.records));

    Harness h2;
    auto provider2 = ScriptedProvider::from_file(testing::fixture("interpret_20.jsonl"));
    auto ctx2 = h2.context(*provider2);
    opt.concurrency = 1;
    auto b = run_corpus(h2.records, opt, ctx2);
    CHECK(results_jsonl(a.results) == results_jsonl(b.results));
    CHECK(a.manifest.dump() == b.manifest.dump());

    opt.regime = Regime::WithExternalInfo;
    auto c = run_corpus(h2.records, opt, ctx2);
    CHECK(c.manifest["run_id"] != a.manifest["run_id"]);
    CHECK(c.manifest["config_digest"] != a.manifest["config_digest"]);
}

TEST_CASE("gated runs halt after a non-AF verdict, forced runs do not") {
    Harness h;
    auto provider = ScriptedProvider::from_file(testing::fixture("interpret_20.jsonl"));
    auto ctx = h.context(*provider);
    PipelineOptions gated;
    gated.mode = Mode::Gated;
    auto g = interpret_sentence(by_id(h.records, "9"), gated, ctx);
    CHECK(g.verdict == Verdict::NAF);
    CHECK(g.trace.stages.size() == 1);
    CHECK(g.trace.stages[0].stage == "identification");
    CHECK_FALSE(g.correlate);
    CHECK(g.properties.empty());

    PipelineOptions forced;
    auto f = interpret_sentence(by_id(h.records, "9"), forced, ctx);
    REQUIRE(f.trace.stages.size() == 5);
    CHECK(f.trace.stages[4].stage == "explanation");
    CHECK(*f.correlate == "a new car");
    CHECK(f.properties.size() == 2);

    auto af = interpret_sentence(by_id(h.records, "1"), gated, ctx);
    CHECK(af.trace.stages.size() == 5);
    CHECK(af.trace.stages[1].parsed["correlate"] == "lift a chair");
}

TEST_CASE("malformed output marks the record invalid and the run continues") {
    Harness h;
    testing::LambdaProvider p([](const ProviderRequest& r) -> ProviderReply {
        if (r.record_id == "3") return {"{\"verdict\": \"AF\", ", "", 0, 0};
        return {R"({"verdict":"NAF"})", "", 0, 0};
    });
    auto ctx = h.context(p);
    auto out = run_corpus(h.records, {}, ctx);
    const auto& bad = out.results[2];
    CHECK(bad.status == ResultStatus::Invalid);
    CHECK(bad.error.find("byte offset") != std::string::npos);
    CHECK_FALSE(bad.trace.stages.empty());
    CHECK_FALSE(bad.trace.stages[0].valid);
    CHECK(out.manifest["counts"]["status"]["invalid"] == 1);
    CHECK(out.manifest["counts"]["status"]["ok"] == 9);
}

TEST_CASE("a run where every record fails is a provider error") {
    Harness h;
    testing::LambdaProvider p([](const ProviderRequest&) -> ProviderReply { throw ProviderError("401"); });
    auto ctx = h.context(p);
    CHECK_THROWS_AS(run_corpus(h.records, {}, ctx), ProviderError);
    CHECK_THROWS_AS(run_corpus({}, {}, ctx), UsageError);

    // A single failure is only recorded.
    testing::LambdaProvider some([](const ProviderRequest& r) -> ProviderReply {
        if (r.record_id == "2") throw ProviderError("boom");
        return {R"({"verdict":"NAF"})", "", 0, 0};
    });
    auto ctx2 = h.context(some);
    auto out = run_corpus(h.records, {}, ctx2);
    CHECK(out.results[1].status == ResultStatus::Failed);
    CHECK(out.results[1].error == "boom");
}

TEST_CASE("with external info the trace and prompt carry the suggestions") {
    Harness h;
    EchoProvider echo;
    auto ctx = h.context(echo);
    PipelineOptions opt;
    opt.regime = Regime::WithExternalInfo;
    const auto& r = by_id(h.records, "2");
    auto res = interpret_sentence(r, opt, ctx);
    REQUIRE(res.trace.stages.size() == 5);
    CHECK(res.trace.stages[1].parsed["suggested"]["correlate"] == "explain");
    CHECK(res.trace.stages[2].parsed["suggested"]["logic_category"] == "NS");
    CHECK(res.long_explanation.find("Suggestion from the annotators") != std::string::npos);

    opt.regime = Regime::WithoutExternalInfo;
    auto plain = interpret_sentence(r, opt, ctx);
    CHECK_FALSE(plain.trace.stages[1].parsed.contains("suggested"));
    CHECK(plain.long_explanation.find("Suggestion from the annotators") == std::string::npos);
}

TEST_CASE("identification runs record verdicts only") {
    Harness h;
    auto provider = ScriptedProvider::from_file(testing::fixture("identify_with_examples.jsonl"));
    auto ctx = h.context(*provider);
    auto out = run_identification(h.records, true, {}, ctx);
    CHECK(out.manifest["task"] == "identify");
    CHECK(out.manifest["with_examples"] == true);
    for (const auto& r : out.results) {
        CHECK(r.task == Task::Identify);
        CHECK(r.trace.stages.size() == 1);
    }
    auto without = run_identification(h.records, false, {}, ctx);
    CHECK(without.manifest["config_digest"] != out.manifest["config_digest"]);
}

TEST_CASE("results round trip through the run directory and the call log") {
    Harness h;
    testing::TempDir dir;
    RunStore store(dir / "calls.jsonl");
    h.completion.store = &store;
    auto provider = ScriptedProvider::from_file(testing::fixture("interpret_20.jsonl"));
    auto ctx = h.context(*provider);
    auto out = run_corpus(h.records, {}, ctx);
    write_run(dir / "run", out);
    auto back = read_results(dir / "run" / "results.jsonl");
    CHECK(results_jsonl(back) == results_jsonl(out.results));
    auto log = RunStore::read(dir / "calls.jsonl");
    std::size_t calls = 0, results = 0;
    for (const auto& e : log) {
        calls += e["kind"] == "call";
        results += e["kind"] == "result";
        CHECK(e["run_id"] == out.manifest["run_id"]);
    }
    CHECK(calls == 10);
    CHECK(results == 10);
}
