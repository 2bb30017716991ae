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

#include <map>
#include <set>

#include "afort/corpus.hpp"
#include "afort/error.hpp"
#include "afort/util.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace afort;

namespace {

const char* kHeader = "text,cor_start,cor_end,rem_start,rem_end,NAF,prop1,prop2,logic,class,metaphor,additive,comment\n";

}  // namespace

TEST_CASE("a row resolves spans by code point index") {
    auto r = parse_dataset(std::string(kHeader) +
                           "\"He could not lift a chair, let alone a sofa\",13,25,37,43,No,Size,,NS,QU,No,No,\n");
    REQUIRE(r.records.size() == 1);
    CHECK(r.rejects.empty());
    const auto& rec = r.records[0];
    CHECK(rec.id == "1");
    CHECK(rec.correlate_text() == "lift a chair");
    CHECK(rec.remnant_text() == "a sofa");
    CHECK(rec.is_a_fortiori);
    CHECK(rec.sentence_class == SentenceType::QU);
    CHECK(rec.logic == LogicCategory::NS);
    CHECK(rec.properties() == std::vector<std::string>{"Size"});
}

TEST_CASE("non-ASCII spans count code points") {
    auto r = parse_dataset(std::string(kHeader) + "\"Zoë can't find the street, let alone the café\",10,25,37,45,No,,,NS,SP,,,\n");
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].correlate_text() == "find the street");
    CHECK(r.records[0].remnant_text() == "the café");
}

TEST_CASE("bad rows are rejected with their line, good rows kept") {
    std::string text = std::string(kHeader) +
                       "ok row let alone more,0,2,17,21,No,,,NS,RE,No,No,\n"
                       "too few,1,2\n"
                       "bad flag let alone x,0,3,17,18,Maybe,,,NS,RE,No,No,\n"
                       "out of bounds,0,99,1,2,No,,,NS,RE,No,No,\n"
                       "bad label,0,3,4,7,No,,,ZZ,RE,No,No,\n"
                       "\"multi\nline\",,,,,Yes,,,,,,,\n"
                       "empty span,3,3,4,5,No,,,NS,RE,No,No,\n";
    auto r = parse_dataset(text);
    CHECK(r.records.size() == 2);
    REQUIRE(r.rejects.size() == 5);
    CHECK(r.rejects[0].line == 3);
    CHECK(r.rejects[0].reason.find("field count") != std::string::npos);
    CHECK(r.rejects[1].reason.find("NAF") != std::string::npos);
    CHECK(r.rejects[2].reason.find("out of bounds") != std::string::npos);
    CHECK(r.rejects[3].reason.find("logic") != std::string::npos);
    CHECK(r.rejects[4].line == 9);
    CHECK(r.records[1].text == "multi\nline");
}

TEST_CASE("missing mandatory column is a schema error") {
    CHECK_THROWS_AS(parse_dataset(std::string("text,cor_start\nx,1\n")), DataError);
    CHECK_THROWS_AS(parse_dataset(std::string("")), DataError);
}

TEST_CASE("tab delimiter and BOM are detected") {
    std::string header = kHeader;
    for (auto& c : header)
        if (c == ',') c = '\t';
    std::string row = "a, b, let alone c\t\t\t\t\tYes\t\t\t\t\t\t\t\n";
    auto r = parse_dataset("\xEF\xBB\xBF" + header + row);
    CHECK(r.delimiter == '\t');
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].text == "a, b, let alone c");
    CHECK_FALSE(r.records[0].is_a_fortiori);
}

TEST_CASE("long label names are accepted") {
    auto r = parse_dataset(std::string(kHeader) + "x let alone y,0,1,12,13,No,,,Negative Simple,Resource Allocation,,,\n");
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].logic == LogicCategory::NS);
    CHECK(r.records[0].sentence_class == SentenceType::RE);
}

TEST_CASE("one-sided Undefined taxonomy is a warning, not a reject") {
    auto r = parse_dataset(std::string(kHeader) + "x let alone y,0,1,12,13,No,,,NS,,,,\n");
    CHECK(r.records.size() == 1);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("only one dimension") != std::string::npos);
}

TEST_CASE("delimited and canonical round trips preserve records") {
    auto recs = load_corpus(testing::fixture("corpus_20.csv").string());
    REQUIRE(recs.size() == 20);
    auto back = parse_dataset(write_delimited(recs, ',')).records;
    CHECK(back == recs);
    auto tabbed = parse_dataset(write_delimited(recs, '\t')).records;
    CHECK(tabbed == recs);
    auto canon = read_canonical(write_canonical(recs));
    CHECK(canon == recs);
    CHECK(corpus_digest(canon) == corpus_digest(recs));
}

TEST_CASE("swapped reading only for annotated NAF rows") {
    auto recs = load_corpus(testing::fixture("corpus_20.csv").string());
    // Row 9 is a labelled NAF row, row 6 an unlabelled one, row 1 AF.
    auto swapped = recs[8].swapped_reading();
    REQUIRE(swapped);
    CHECK(swapped->correlate == recs[8].remnant_text());
    CHECK(swapped->remnant == recs[8].correlate_text());
    CHECK_FALSE(recs[5].swapped_reading());
    CHECK_FALSE(recs[0].swapped_reading());
}

TEST_CASE("distribution totals equal a direct recount") {
    auto recs = load_corpus(testing::fixture("corpus_20.csv").string());
    auto t = dataset_stats(recs);
    std::map<std::pair<std::string, std::string>, std::size_t> recount;
    for (const auto& r : recs) recount[{to_string(r.logic), to_string(r.sentence_class)}]++;
    for (auto l : kLogicCategories)
        for (auto c : kSentenceTypes) CHECK(t.count(l, c) == recount[{to_string(l), to_string(c)}]);
    CHECK(t.total() == 20);
}

namespace {

std::vector<ArgumentRecord> synthetic(const std::map<std::pair<LogicCategory, SentenceType>, std::size_t>& grid) {
    std::vector<ArgumentRecord> out;
    int id = 0;
    for (const auto& [key, n] : grid)
        for (std::size_t i = 0; i < n; ++i) {
            ArgumentRecord r;
            r.id = std::to_string(++id);
            r.text = "s" + r.id + " let alone t";
            r.logic = key.first;
            r.sentence_class = key.second;
            out.push_back(r);
        }
    return out;
}

}  // namespace

TEST_CASE("sampler property: quotas, caps and determinism on random grids") {
    testing::Gen g(99);
    for (int round = 0; round < 60; ++round) {
        std::map<std::pair<LogicCategory, SentenceType>, std::size_t> grid;
        for (auto c : kSentenceTypes) {
            // Guarantee each class can fill its quota.
            std::size_t total = 0;
            for (auto l : kLogicCategories) {
                std::size_t n = g.below(12);
                grid[{l, c}] = n;
                total += n;
            }
            if (total < 20) grid[{LogicCategory::NS, c}] += 20 - total;
        }
        auto recs = synthetic(grid);
        EvaluationSetParams p;
        p.seed = g.rng();
        p.per_combo_target = 4;
        auto set = stratified_sample(recs, p);
        auto again = stratified_sample(recs, p);
        CHECK(set.record_ids == again.record_ids);

        std::map<std::string, const ArgumentRecord*> by_id;
        for (const auto& r : recs) by_id[r.id] = &r;
        std::map<SentenceType, std::size_t> per_class;
        std::map<std::pair<LogicCategory, SentenceType>, std::size_t> per_combo;
        std::set<std::string> unique(set.record_ids.begin(), set.record_ids.end());
        CHECK(unique.size() == set.record_ids.size());
        for (const auto& id : set.record_ids) {
            auto* r = by_id.at(id);
            per_class[r->sentence_class]++;
            per_combo[{r->logic, r->sentence_class}]++;
        }
        for (auto c : kSentenceTypes) CHECK(per_class[c] == 20);
        for (const auto& [k, n] : grid) {
            CHECK(per_combo[k] <= n);
            // Every combination contributes min(available, target) before backfill.
            CHECK(per_combo[k] >= std::min<std::size_t>(n, 4));
        }
    }
}

TEST_CASE("sampler errors when a class cannot fill its quota") {
    auto recs = synthetic({{{LogicCategory::NS, SentenceType::RE}, 3}});
    CHECK_THROWS_AS(stratified_sample(recs, {}), DataError);
}

TEST_CASE("per-combination targets above the quota are refused") {
    std::map<std::pair<LogicCategory, SentenceType>, std::size_t> grid;
    for (auto l : kLogicCategories) grid[{l, SentenceType::RE}] = 10;
    CHECK_THROWS_AS(stratified_sample(synthetic(grid), {}), DataError);
}

TEST_CASE("full corpus reproduces the published distribution and draw totals") {
    auto recs = load_corpus(testing::fixture("corpus_1030.csv").string());
    REQUIRE(recs.size() == 1030);
    const std::size_t grid[5][5] = {
        {373, 225, 20, 113, 0}, {40, 0, 103, 1, 0}, {33, 10, 6, 6, 0}, {32, 0, 18, 0, 0}, {0, 0, 0, 0, 50}};
    auto t = dataset_stats(recs);
    for (std::size_t l = 0; l < 5; ++l)
        for (std::size_t c = 0; c < 5; ++c) CHECK(t.cells[l][c] == grid[l][c]);
    std::size_t naf = 0;
    for (const auto& r : recs) naf += !r.is_a_fortiori;
    CHECK(naf == 64);

    auto set = stratified_sample(recs, {});
    REQUIRE(set.record_ids.size() == 100);
    std::map<std::string, const ArgumentRecord*> by_id;
    for (const auto& r : recs) by_id[r.id] = &r;
    std::map<LogicCategory, std::size_t> logic;
    for (const auto& id : set.record_ids) logic[by_id.at(id)->logic]++;
    CHECK(logic[LogicCategory::NS] == 39);
    CHECK(logic[LogicCategory::NR] == 11);
    CHECK(logic[LogicCategory::PR] == 20);
    CHECK(logic[LogicCategory::PS] == 10);
    CHECK(logic[LogicCategory::Undefined] == 20);
}

TEST_CASE("different seeds draw different sets") {
    auto recs = load_corpus(testing::fixture("corpus_1030.csv").string());
    EvaluationSetParams a, b;
    b.seed = 1;
    CHECK(stratified_sample(recs, a).record_ids != stratified_sample(recs, b).record_ids);
}
