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

#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace afort {

// Principles of likelihood comparison.
enum class SentenceType { RE, PC, QU, SP, Undefined };
// Logical flow: Negative/Positive x Simple/Reverse.
enum class LogicCategory { NS, NR, PS, PR, Undefined };

inline constexpr std::array<SentenceType, 5> kSentenceTypes = {
    SentenceType::RE, SentenceType::PC, SentenceType::QU, SentenceType::SP, SentenceType::Undefined};
// Row order used by the distribution tables.
inline constexpr std::array<LogicCategory, 5> kLogicCategories = {
    LogicCategory::NS, LogicCategory::NR, LogicCategory::PR, LogicCategory::PS, LogicCategory::Undefined};

const char* to_string(SentenceType t) noexcept;
const char* to_string(LogicCategory l) noexcept;
// Accepts the short codes and the long names ("Resource Allocation",
// "Negative Simple"); empty text maps to Undefined. Returns nullopt for
// anything else.
std::optional<SentenceType> parse_sentence_type(std::string_view s);
std::optional<LogicCategory> parse_logic_category(std::string_view s);
std::size_t index_of(SentenceType t) noexcept;
std::size_t index_of(LogicCategory l) noexcept;

// Half-open range [start, end) of code points.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;
    friend bool operator==(const Span&, const Span&) = default;
};

struct ArgumentRecord {
    std::string id;
    std::string text;
    std::optional<Span> correlate;
    std::optional<Span> remnant;
    bool is_a_fortiori = true;
    std::optional<std::string> prop1;
    std::optional<std::string> prop2;
    LogicCategory logic = LogicCategory::Undefined;
    SentenceType sentence_class = SentenceType::Undefined;
    bool metaphor = false;
    bool additive = false;
    std::optional<std::string> comment;
    // Surrounding context. The corpus has no context column; kept empty.
    std::optional<std::string> context;

    std::string correlate_text() const;
    std::string remnant_text() const;
    std::vector<std::string> properties() const;

    // NAF rows that still carry annotations read coherently with the two
    // spans exchanged. Never mutates the stored record.
    struct SwappedReading {
        std::string correlate;
        std::string remnant;
    };
    std::optional<SwappedReading> swapped_reading() const;

    friend bool operator==(const ArgumentRecord&, const ArgumentRecord&) = default;
};

nlohmann::json to_json(const ArgumentRecord& r);
ArgumentRecord record_from_json(const nlohmann::json& j);

struct RowReject {
    std::size_t line = 0;  // 1-based physical line where the row starts
    std::string reason;
};

struct ParseResult {
    std::vector<ArgumentRecord> records;
    std::vector<RowReject> rejects;
    std::vector<std::string> warnings;
    char delimiter = ',';
};

// 0 autodetects comma vs tab from the header row.
struct DelimiterSpec {
    char delimiter = 0;
};

// The 13 annotation columns; an optional `id` column is honoured, otherwise
// ids are the 1-based data row number.
inline constexpr std::array<const char*, 13> kCorpusColumns = {
    "text", "cor_start", "cor_end", "rem_start", "rem_end", "NAF", "prop1",
    "prop2", "logic", "class", "metaphor", "additive", "comment"};

// Throws DataError (schema error) for a missing mandatory column. Row
// problems land in ParseResult::rejects.
ParseResult parse_dataset(std::istream& in, DelimiterSpec format = {});
ParseResult parse_dataset(std::string_view text, DelimiterSpec format = {});

// Delimited serialization with an `id` column; parse_dataset reads it back.
std::string write_delimited(const std::vector<ArgumentRecord>& records, char delimiter = ',');

// Canonical corpus: one JSON object per line.
std::string write_canonical(const std::vector<ArgumentRecord>& records);
std::vector<ArgumentRecord> read_canonical(std::string_view jsonl);
// Loads either a canonical .jsonl corpus or a delimited file.
std::vector<ArgumentRecord> load_corpus(const std::string& path);

std::string corpus_digest(const std::vector<ArgumentRecord>& records);

// Class x logic count grid; rows follow kLogicCategories, columns follow
// kSentenceTypes.
struct DistributionTable {
    std::array<std::array<std::size_t, 5>, 5> cells{};
    std::size_t count(LogicCategory l, SentenceType t) const { return cells[index_of(l)][index_of(t)]; }
    std::size_t logic_total(LogicCategory l) const;
    std::size_t class_total(SentenceType t) const;
    std::size_t total() const;
};

DistributionTable dataset_stats(const std::vector<ArgumentRecord>& records);
std::string render_distribution(const DistributionTable& table);
nlohmann::json to_json(const DistributionTable& table);

struct EvaluationSetParams {
    std::uint64_t seed = 0;
    std::size_t per_class_quota = 20;
    std::size_t per_combo_target = 5;
};

struct EvaluationSet {
    std::vector<std::string> record_ids;
    std::uint64_t seed = 0;
    std::size_t per_class_quota = 20;
    std::size_t per_combo_target = 5;
};

nlohmann::json to_json(const EvaluationSet& set);
EvaluationSet evaluation_set_from_json(const nlohmann::json& j);

// Draws per_combo_target records from every class x logic combination.
// A class whose combinations cannot fill its quota is topped up from the
// class's remaining records, apportioned by largest remainder over each
// logic category's remaining count. Deterministic for a given seed.
EvaluationSet stratified_sample(const std::vector<ArgumentRecord>& records, const EvaluationSetParams& params);

}  // namespace afort
