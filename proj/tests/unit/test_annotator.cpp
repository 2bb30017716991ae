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

#include <fstream>
#include <thread>

#include "afort/annotator.hpp"
#include "afort/pipeline.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"

using namespace afort;

namespace {

struct Fixture {
    std::vector<ArgumentRecord> records = load_corpus(testing::fixture("corpus_20.csv").string());
    std::vector<InterpretationResult> results;
    EvaluationSet set;

    Fixture() {
        PromptAssets assets = PromptAssets::load(AFORT_ASSETS);
        FixedClock clock;
        CompletionContext completion;
        auto scripted = ScriptedProvider::from_file(testing::fixture("interpret_20.jsonl"));
        PipelineContext ctx{assets, *scripted, completion, clock};
        results = run_corpus(records, {}, ctx).results;
        for (int i = 1; i <= 10; ++i) set.record_ids.push_back(std::to_string(i));
    }
    Campaign campaign(std::string id = "c1", std::string token = "") const {
        auto c = build_campaign(std::move(id), set, records, results, {"ann1", "ann2"}, "run-1");
        c.token = std::move(token);
        return c;
    }
};

std::vector<JudgmentInput> property_votes(bool novel, bool relevant) {
    return {{JudgmentTarget::Property1, Criterion::Novelty, novel},
            {JudgmentTarget::Property1, Criterion::Relevance, relevant}};
}

std::vector<std::string> item_ids(const Campaign& c) {
    std::vector<std::string> out;
    for (const auto& i : c.items) out.push_back(i.item_id);
    return out;
}

}  // namespace

TEST_CASE("campaign items pair records with run results") {
    Fixture f;
    auto c = f.campaign();
    REQUIRE(c.items.size() == 10);
    const auto& first = c.items[0];
    CHECK(first.spans_source == "gold");
    CHECK(first.correlate->start == 13);
    CHECK(first.properties.size() == 2);
    CHECK(first.targets().size() == 3);
    const auto& naf = c.items[5];
    CHECK(naf.spans_source.empty());
    CHECK(naf.targets().empty());
    CHECK(c.evaluation_set_id.size() == 16);

    auto back = campaign_from_json(to_json(c));
    CHECK(item_ids(back) == item_ids(c));
    CHECK(to_json(back) == to_json(c));
    auto j = to_json(c);
    j["id"] = "a/b";
    CHECK_THROWS_AS(campaign_from_json(j), DataError);
    j["id"] = "ok";
    j["annotators"] = nlohmann::json::array();
    CHECK_THROWS_AS(campaign_from_json(j), DataError);

    EvaluationSet missing;
    missing.record_ids = {"999"};
    CHECK_THROWS_AS(build_campaign("x", missing, f.records, f.results, {"a"}, ""), DataError);
}

TEST_CASE("prediction spans are used when gold spans are absent") {
    Fixture f;
    auto records = f.records;
    records[0].correlate.reset();
    auto c = build_campaign("c", f.set, records, f.results, {"a"}, "");
    CHECK(c.items[0].spans_source == "prediction");
    CHECK(c.items[0].correlate->start == 13);
}

TEST_CASE("store registration, ordering and versioned submissions") {
    Fixture f;
    testing::TempDir dir;
    FixedClock clock;
    AnnotationStore store(dir.path(), clock);
    auto c = f.campaign();
    store.register_campaign(c);
    CHECK_NOTHROW(store.register_campaign(c));
    auto other = c;
    other.items.pop_back();
    CHECK_THROWS_AS(store.register_campaign(other), DataError);
    auto dup = f.campaign("dup");
    dup.items.push_back(dup.items[0]);
    CHECK_THROWS_AS(store.register_campaign(dup), DataError);
    CHECK(store.campaign_ids() == std::vector<std::string>{"c1"});

    auto o1 = store.annotator_order("c1", "ann1");
    CHECK(o1 == store.annotator_order("c1", "ann1"));
    auto sorted = o1;
    std::sort(sorted.begin(), sorted.end());
    auto ids = item_ids(c);
    std::sort(ids.begin(), ids.end());
    CHECK(sorted == ids);
    CHECK(store.next_task("c1", "ann1")->item_id == o1[0]);
    CHECK_THROWS_AS(store.next_task("c1", "stranger"), NotFoundError);
    CHECK_THROWS_AS(store.next_task("nope", "ann1"), NotFoundError);

    auto v1 = store.submit("c1", "ann1", "1", property_votes(true, true));
    CHECK(v1[0].version == 1);
    auto v2 = store.submit("c1", "ann1", "1", property_votes(false, true));
    CHECK(v2[0].version == 2);
    CHECK_THROWS_AS(store.submit("c1", "ann1", "1", {{JudgmentTarget::Property1, Criterion::Completeness, true}}),
                    DataError);
    CHECK_THROWS_AS(store.submit("c1", "ann1", "6", property_votes(true, true)), DataError);
    CHECK_THROWS_AS(store.submit("c1", "ann1", "77", property_votes(true, true)), NotFoundError);
    CHECK_THROWS_AS(store.submit("c1", "ann1", "1", {}), UsageError);

    auto agg = store.aggregate("c1");
    CHECK(agg["property_level"]["relevant_not_novel"] == 1);
    CHECK(agg["progress"]["annotators"]["ann1"]["judged"] == 1);
    CHECK(store.next_task("c1", "ann1")->item_id != "1");
}

TEST_CASE("the store resumes after a restart and tolerates a torn final line") {
    Fixture f;
    testing::TempDir dir;
    FixedClock clock;
    std::string next_before;
    {
        AnnotationStore store(dir.path(), clock);
        store.register_campaign(f.campaign());
        auto order = store.annotator_order("c1", "ann2");
        store.submit("c1", "ann2", order[0], {{JudgmentTarget::ShortExplanation, Criterion::Pertinence, true}});
        next_before = store.next_task("c1", "ann2")->item_id;
        CHECK(next_before == order[1]);
        CHECK_THROWS_AS(AnnotationStore(dir.path(), clock), IoError);
    }
    std::ofstream(dir / "judgments" / "c1.jsonl", std::ios::app) << R"({"annotator":"ann2","item)";
    AnnotationStore again(dir.path(), clock);
    CHECK(again.judgments("c1").size() == 1);
    CHECK(again.next_task("c1", "ann2")->item_id == next_before);
}

TEST_CASE("aggregate through the store equals the offline computation") {
    Fixture f;
    testing::TempDir dir;
    FixedClock clock;
    AnnotationStore store(dir.path(), clock);
    auto c = f.campaign();
    store.register_campaign(c);
    testing::Gen g(71);
    std::vector<JudgmentRecord> offline;
    for (const auto& item : c.items) {
        for (const std::string ann : {"ann1", "ann2"}) {
            for (int round = 0; round < 2; ++round) {
                std::vector<JudgmentInput> in;
                for (auto t : item.targets())
                    for (auto crit : {Criterion::Novelty, Criterion::Relevance, Criterion::LogicalValidity,
                                      Criterion::Completeness, Criterion::Pertinence})
                        if (criterion_applies(t, crit) && g.coin(0.8)) in.push_back({t, crit, g.coin()});
                if (in.empty()) continue;
                for (const auto& r : store.submit("c1", ann, item.item_id, in)) offline.push_back(r);
            }
        }
    }
    auto expected = to_json(judgment_aggregate(offline, item_ids(c)));
    auto got = store.aggregate("c1");
    for (const auto& key : {"sentence_level", "property_level", "explanation_patterns", "criterion_true", "agreement"})
        CHECK(got[key] == expected[key]);
}

TEST_CASE("store_call validates its requests") {
    Fixture f;
    testing::TempDir dir;
    FixedClock clock;
    AnnotationStore store(dir.path(), clock);
    store.register_campaign(f.campaign());
    CHECK(store_call(store, "campaigns", {})["campaigns"].size() == 1);
    CHECK_THROWS_AS(store_call(store, "next", {{"campaign", "c1"}}), UsageError);
    CHECK_THROWS_AS(store_call(store, "bogus", {}), UsageError);
    CHECK_THROWS_AS(store_call(store, "submit",
                               {{"campaign", "c1"},
                                {"annotator", "ann1"},
                                {"item_id", "1"},
                                {"judgments", {{{"target", "property1"}, {"criterion", "novelty"}, {"value", "yes"}}}}}),
                    DataError);
    auto item = store_call(store, "item", {{"item_id", "2"}});
    CHECK(item["criteria"]["short_explanation"].size() == 3);
    CHECK_THROWS_AS(store_call(store, "item", {{"item_id", "404"}}), NotFoundError);
}

TEST_CASE("HTTP API round trip") {
    Fixture f;
    testing::TempDir dir;
    FixedClock clock;
    AnnotationStore store(dir.path(), clock);
    store.register_campaign(f.campaign("c1", "s3cret"));
    AnnotatorServer server(store, {"127.0.0.1", 0, {}});
    server.start();
    REQUIRE(server.port() > 0);
    httplib::Client cli("127.0.0.1", server.port());
    httplib::Headers auth = {{"X-Campaign-Token", "s3cret"}};

    auto health = cli.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(nlohmann::json::parse(cli.Get("/api/campaigns")->body)["campaigns"][0] == "c1");

    auto denied = cli.Get("/api/campaigns/c1/next?annotator=ann1");
    CHECK(denied->status == 401);
    CHECK(nlohmann::json::parse(denied->body)["kind"] == "auth");
    CHECK(cli.Get("/api/campaigns/c1/next?annotator=ann1&token=s3cret")->status == 200);

    auto next = cli.Get("/api/campaigns/c1/next?annotator=ann1", auth);
    REQUIRE(next->status == 200);
    auto task = nlohmann::json::parse(next->body);
    CHECK(task["done"] == false);
    std::string item = task["task"]["item_id"];
    CHECK(item == store.annotator_order("c1", "ann1")[0]);

    nlohmann::json body = {{"annotator", "ann1"},
                           {"item_id", "1"},
                           {"judgments",
                            {{{"target", "property1"}, {"criterion", "novelty"}, {"value", true}},
                             {{"target", "property1"}, {"criterion", "relevance"}, {"value", true}}}}};
    auto sub = cli.Post("/api/campaigns/c1/judgments", auth, body.dump(), "application/json");
    REQUIRE(sub->status == 200);
    CHECK(nlohmann::json::parse(sub->body)["stored"][0]["version"] == 1);
    sub = cli.Post("/api/campaigns/c1/judgments", auth, body.dump(), "application/json");
    CHECK(nlohmann::json::parse(sub->body)["stored"][0]["version"] == 2);

    auto bad = body;
    bad["judgments"][0]["criterion"] = "completeness";
    CHECK(cli.Post("/api/campaigns/c1/judgments", auth, bad.dump(), "application/json")->status == 400);
    CHECK(cli.Post("/api/campaigns/c1/judgments", auth, "not json", "application/json")->status == 400);
    bad = body;
    bad["annotator"] = "mallory";
    CHECK(cli.Post("/api/campaigns/c1/judgments", auth, bad.dump(), "application/json")->status == 404);
    CHECK(cli.Get("/api/campaigns/zzz/progress", auth)->status == 404);

    auto progress = nlohmann::json::parse(cli.Get("/api/campaigns/c1/progress", auth)->body);
    CHECK(progress["annotators"]["ann1"]["judged"] == 1);
    auto agg = nlohmann::json::parse(cli.Get("/api/campaigns/c1/aggregate", auth)->body);
    CHECK(agg["property_level"]["novel_and_relevant"] == 1);
    CHECK(agg == store.aggregate("c1"));

    auto it = cli.Get("/api/items/2");
    CHECK(it->status == 200);
    CHECK(nlohmann::json::parse(it->body)["item_id"] == "2");
    CHECK(cli.Get("/api/items/404")->status == 404);

    AnnotatorServer clash(store, {"127.0.0.1", server.port(), {}});
    CHECK_THROWS_AS(clash.start(), IoError);
    server.stop();
}

TEST_CASE("concurrent HTTP submissions are all recorded") {
    Fixture f;
    testing::TempDir dir;
    FixedClock clock;
    AnnotationStore store(dir.path(), clock);
    auto c = f.campaign();
    c.annotators = {"a0", "a1", "a2", "a3"};
    store.register_campaign(c);
    AnnotatorServer server(store, {"127.0.0.1", 0, {}});
    server.start();
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            httplib::Client cli("127.0.0.1", server.port());
            for (int i = 0; i < 10; ++i) {
                nlohmann::json body = {
                    {"annotator", "a" + std::to_string(t)},
                    {"item_id", "1"},
                    {"judgments", {{{"target", "property2"}, {"criterion", "relevance"}, {"value", i % 2 == 0}}}}};
                auto res = cli.Post("/api/campaigns/c1/judgments", body.dump(), "application/json");
                ok += res && res->status == 200;
            }
        });
    for (auto& th : threads) th.join();
    server.stop();
    CHECK(ok == 40);
    std::ifstream in(dir / "judgments" / "c1.jsonl");
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) {
        CHECK_NOTHROW(nlohmann::json::parse(l));
        ++lines;
    }
    CHECK(lines == 40);
    for (const auto& j : latest_judgments(store.judgments("c1"))) CHECK(j.version == 10);
}
