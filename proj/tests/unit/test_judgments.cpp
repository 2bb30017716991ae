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

#include <cmath>

#include "afort/evaluate.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace afort;

namespace {

JudgmentRecord jr(std::string annotator, std::string item, JudgmentTarget t, Criterion c, bool v,
                  std::uint64_t version = 1) {
    return {std::move(annotator), std::move(item), t, c, v, version, ""};
}

void add_property(std::vector<JudgmentRecord>& store, const std::vector<std::string>& annotators,
                  const std::string& item, JudgmentTarget t, bool novel, bool relevant) {
    for (const auto& a : annotators) {
        store.push_back(jr(a, item, t, Criterion::Novelty, novel));
        store.push_back(jr(a, item, t, Criterion::Relevance, relevant));
    }
}

double kappa_oracle(const std::vector<bool>& a, const std::vector<bool>& b) {
    double n = double(a.size()), agree = 0, ya = 0, yb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        agree += a[i] == b[i];
        ya += a[i];
        yb += b[i];
    }
    double po = agree / n, pe = (ya / n) * (yb / n) + ((n - ya) / n) * ((n - yb) / n);
    return (po - pe) / (1 - pe);
}

}  // namespace

TEST_CASE("kappa and phi against hand values") {
    CHECK(cohen_kappa({1, 1, 0, 0}, {1, 0, 0, 0}) == doctest::Approx(0.5));
    CHECK(*phi_coefficient({1, 1, 0, 0}, {1, 0, 0, 0}) == doctest::Approx(2.0 / std::sqrt(12.0)));
    CHECK(cohen_kappa({1, 1, 1}, {1, 1, 1}) == 1.0);
    CHECK_FALSE(phi_coefficient({1, 1}, {1, 0}));
    CHECK_THROWS_AS(cohen_kappa({}, {}), DataError);

    testing::Gen g(61);
    for (int round = 0; round < 300; ++round) {
        std::size_t n = 2 + g.below(30);
        std::vector<bool> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = g.coin();
            b[i] = g.coin(0.3) ? !a[i] : a[i];
        }
        double pa = 0, pb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            pa += a[i];
            pb += b[i];
        }
        bool constant = (pa == 0 || pa == double(n)) && (pb == 0 || pb == double(n)) && pa == pb;
        if (constant) continue;
        double k = cohen_kappa(a, b);
        CHECK(k == doctest::Approx(kappa_oracle(a, b)));
        CHECK(k <= 1.0 + 1e-12);
        CHECK(cohen_kappa(b, a) == doctest::Approx(k));
    }
}

TEST_CASE("the latest version of a judgment wins") {
    std::vector<JudgmentRecord> store = {
        jr("ann1", "1", JudgmentTarget::Property1, Criterion::Novelty, true, 1),
        jr("ann1", "1", JudgmentTarget::Property1, Criterion::Novelty, false, 3),
        jr("ann1", "1", JudgmentTarget::Property1, Criterion::Novelty, true, 2),
        jr("ann1", "1", JudgmentTarget::Property1, Criterion::Relevance, true, 1),
        jr("ann1", "1", JudgmentTarget::Property1, Criterion::Relevance, false, 1),
        jr("ann2", "1", JudgmentTarget::Property1, Criterion::Novelty, true, 1),
    };
    auto latest = latest_judgments(store);
    REQUIRE(latest.size() == 3);
    CHECK(latest[0].version == 3);
    CHECK_FALSE(latest[0].value);
    CHECK_FALSE(latest[1].value);  // equal versions: later entry
    CHECK(latest[2].annotator == "ann2");
}

TEST_CASE("criteria apply to their targets only") {
    CHECK(criterion_applies(JudgmentTarget::Property1, Criterion::Novelty));
    CHECK(criterion_applies(JudgmentTarget::Property2, Criterion::Relevance));
    CHECK_FALSE(criterion_applies(JudgmentTarget::Property1, Criterion::Completeness));
    CHECK(criterion_applies(JudgmentTarget::ShortExplanation, Criterion::Pertinence));
    CHECK_FALSE(criterion_applies(JudgmentTarget::ShortExplanation, Criterion::Novelty));
    CHECK_THROWS_AS(judgment_from_json({{"annotator", "a"},
                                        {"item_id", "1"},
                                        {"target", "short_explanation"},
                                        {"criterion", "novelty"},
                                        {"value", true}}),
                    DataError);
    auto j = jr("a", "9", JudgmentTarget::ShortExplanation, Criterion::LogicalValidity, true, 4);
    auto back = judgment_from_json(to_json(j));
    CHECK(back.version == 4);
    CHECK(back.target == JudgmentTarget::ShortExplanation);
    CHECK(back.criterion == Criterion::LogicalValidity);
}

TEST_CASE("two annotators agreeing on nine of ten judgments") {
    std::vector<JudgmentRecord> store;
    std::vector<std::string> items;
    std::vector<bool> a, b;
    for (int i = 0; i < 10; ++i) {
        items.push_back(std::to_string(i + 1));
        bool va = i % 3 == 0, vb = i == 4 ? !va : va;
        a.push_back(va);
        b.push_back(vb);
        store.push_back(jr("ann1", items.back(), JudgmentTarget::Property1, Criterion::Novelty, va));
        store.push_back(jr("ann2", items.back(), JudgmentTarget::Property1, Criterion::Novelty, vb));
    }
    auto s = judgment_aggregate(store, items);
    CHECK(s.annotators == 2);
    const auto& ag = s.agreement.at("novelty");
    CHECK(ag.pairs == 10);
    CHECK(ag.percent == doctest::Approx(0.9));
    REQUIRE(ag.kappa);
    CHECK(*ag.kappa == doctest::Approx(kappa_oracle(a, b)));
    CHECK(s.agreement.at("relevance").pairs == 0);
    CHECK(render_judgment_summary(s, "run").find("Agreement (relevance)") != std::string::npos);
}

TEST_CASE("majority consensus counts ties as false") {
    std::vector<JudgmentRecord> store = {
        jr("a", "1", JudgmentTarget::ShortExplanation, Criterion::LogicalValidity, true),
        jr("b", "1", JudgmentTarget::ShortExplanation, Criterion::LogicalValidity, false),
        jr("a", "1", JudgmentTarget::ShortExplanation, Criterion::Completeness, true),
        jr("b", "1", JudgmentTarget::ShortExplanation, Criterion::Completeness, true),
        jr("a", "1", JudgmentTarget::ShortExplanation, Criterion::Pertinence, true),
        jr("b", "1", JudgmentTarget::ShortExplanation, Criterion::Pertinence, true),
        jr("c", "1", JudgmentTarget::ShortExplanation, Criterion::Pertinence, false),
    };
    auto s = judgment_aggregate(store, {"1"});
    CHECK(s.explanation_patterns.at("011") == 1);
    CHECK(s.criterion_true.at("logical_validity") == 0);
    CHECK(s.criterion_true.at("pertinence") == 1);
}

TEST_CASE("synthetic store reproduces the published property-level counts") {
    // 54 single-property sentences, property novel and relevant.
    // 40 two-property sentences with exactly one novel and relevant property;
    //    the other is novel only (20), relevant only (16) or neither (4).
    // 6 sentences holding 8 relevant-only properties.
    const std::vector<std::string> ann = {"ann1", "ann2", "ann3"};
    std::vector<JudgmentRecord> store;
    std::vector<std::string> items;
    int id = 0;
    auto next = [&] {
        items.push_back("s" + std::to_string(++id));
        return items.back();
    };
    for (int i = 0; i < 54; ++i) add_property(store, ann, next(), JudgmentTarget::Property1, true, true);
    for (int i = 0; i < 40; ++i) {
        auto item = next();
        add_property(store, ann, item, JudgmentTarget::Property1, true, true);
        bool novel = i < 20, relevant = i >= 20 && i < 36;
        add_property(store, ann, item, JudgmentTarget::Property2, novel, relevant);
    }
    for (int i = 0; i < 6; ++i) {
        auto item = next();
        add_property(store, ann, item, JudgmentTarget::Property1, false, true);
        if (i < 2) add_property(store, ann, item, JudgmentTarget::Property2, false, true);
    }
    // A dissenting minority never changes the consensus.
    for (int i = 0; i < 100; i += 7)
        store.push_back(jr("ann3", items[i], JudgmentTarget::Property1, Criterion::Novelty, false, 2));

    auto s = judgment_aggregate(store, items);
    REQUIRE(s.items == 100);
    CHECK(s.property_slots == 200);
    CHECK(s.properties_novel_relevant == 94);
    CHECK(s.properties_relevant_not_novel == 24);
    CHECK(s.properties_novel_not_relevant == 20);
    CHECK(s.properties_neither == 4);
    CHECK(s.sentences_all_properties_good == 54);
    CHECK(s.sentences_at_least_one_good == 94);
    CHECK(s.sentences_all_properties_neither == 0);
    auto j = to_json(s);
    CHECK(j["property_level"]["novel_and_relevant"] == 94);
    CHECK(j["property_level"]["denominator"] == 200);
    CHECK(j["sentence_level"]["at_least_one_novel_and_relevant"] == 94);

    // Comparing with itself gives no testable difference.
    auto cmp = judgment_comparison_json(s, s);
    for (const auto& row : cmp) CHECK(row["t_test"].is_null());
    auto text = render_judgment_comparison(s, s, "With", "Without");
    CHECK(text.find("94/200") != std::string::npos);
    CHECK(text.find("54/100") != std::string::npos);
}

TEST_CASE("comparison p-values come from paired item vectors") {
    std::vector<JudgmentRecord> a, b;
    std::vector<std::string> items = {"1", "2", "3", "4"};
    const bool va[] = {true, false, true, true}, vb[] = {false, false, true, false};
    for (int i = 0; i < 4; ++i) {
        add_property(a, {"x"}, items[i], JudgmentTarget::Property1, va[i], va[i]);
        add_property(b, {"x"}, items[i], JudgmentTarget::Property1, vb[i], vb[i]);
    }
    auto sa = judgment_aggregate(a, items), sb = judgment_aggregate(b, items);
    auto rows = judgment_comparison_json(sa, sb);
    const nlohmann::json* good = nullptr;
    for (const auto& r : rows)
        if (r["key"] == "properties_novel_relevant") good = &r;
    REQUIRE(good);
    CHECK((*good)["a"] == 3);
    CHECK((*good)["b"] == 1);
    CHECK((*good)["t_test"]["p_two_tailed"].get<double>() == doctest::Approx(0.18169).epsilon(1e-4));
}
