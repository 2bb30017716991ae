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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "afort/pipeline.hpp"
#include "json.hpp"

namespace afort {

// Canonical topic table loaded from "Canonical: synonym, synonym" lines.
class TopicMap {
public:
    static TopicMap parse(std::string_view text);
    static TopicMap load(const std::filesystem::path& path);

    // Canonical topic for `raw`, or nullopt when unmapped.
    std::optional<std::string> lookup(std::string_view raw) const;
    std::vector<std::string> canonical_topics() const { return canonical_; }
    // Covers every synonym mapping; feeds the augmentation config digest.
    std::string digest() const;

private:
    std::map<std::string, std::string> index_;  // lowercased key -> canonical
    std::vector<std::string> canonical_;
};

inline constexpr const char* kOtherTopic = "Other";

// Unmapped topics become "Other"; `unmapped` (if given) collects them.
std::string normalize_topic(std::string_view raw, const TopicMap& map, std::vector<std::string>* unmapped = nullptr);

struct AugmentedRecord {
    std::string id;
    std::string source_id;
    AugmentationStrategy strategy = AugmentationStrategy::SimilarSemantic;
    ResultStatus status = ResultStatus::Ok;
    std::string error;

    // Core fields, union-compatible with ArgumentRecord.
    std::string text;
    std::string correlate;
    std::string remnant;
    std::optional<Span> correlate_span;
    std::optional<Span> remnant_span;
    bool is_a_fortiori = true;
    std::optional<std::string> prop1;
    std::optional<std::string> prop2;
    LogicCategory logic = LogicCategory::Undefined;
    SentenceType sentence_class = SentenceType::Undefined;

    std::string original_topic;
    std::string new_topic;
    std::string normalized_original_topic;
    std::string normalized_new_topic;
    std::string short_explanation;
    std::string long_explanation;
    bool contains_let_alone = false;
    // Generated analyses are weak labels, never gold.
    bool noisy = true;
    std::vector<std::string> flags;
};

nlohmann::json to_json(const AugmentedRecord& r);
AugmentedRecord augmented_from_json(const nlohmann::json& j);
// Core-field view for merging into a corpus.
ArgumentRecord to_argument_record(const AugmentedRecord& r);

// Conformance checks against the source labels; flags only, nothing is
// corrected. Also resolves span indices.
void check_conformance(AugmentedRecord& r, const ArgumentRecord& source, const InterpretationResult& analysis);

struct AugmentOptions {
    AugmentationStrategy strategy = AugmentationStrategy::SimilarSemantic;
    GenerationParams params;
    std::size_t concurrency = 4;
    // Upper bound on generations per run, checked before any dispatch.
    std::size_t quota = 2000;
    // USD per 1000 estimated tokens; 0 disables the cost line.
    double prompt_price_per_1k = 0.003;
    double completion_price_per_1k = 0.004;
    std::string run_id;
};

AugmentedRecord augment_sentence(const ArgumentRecord& record, const InterpretationResult& analysis,
                                 const AugmentOptions& options, PipelineContext& ctx, const TopicMap& topics);

struct CostEstimate {
    std::size_t requests = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    double cost = 0.0;
};

nlohmann::json to_json(const CostEstimate& c);

CostEstimate estimate_augmentation_cost(const std::vector<ArgumentRecord>& records,
                                        const std::map<std::string, InterpretationResult>& analyses,
                                        const AugmentOptions& options, const PromptAssets& assets);

struct AugmentRun {
    nlohmann::json manifest;
    std::vector<AugmentedRecord> records;
};

// Throws UsageError when the record count exceeds the quota, before any
// provider call. Records without an analysis come back failed.
AugmentRun run_augmentation(const std::vector<ArgumentRecord>& records,
                            const std::map<std::string, InterpretationResult>& analyses,
                            const AugmentOptions& options, PipelineContext& ctx, const TopicMap& topics);

std::string augmented_jsonl(const std::vector<AugmentedRecord>& records);
std::vector<AugmentedRecord> read_augmented(const std::filesystem::path& path);

struct DiversityReport {
    std::size_t records = 0;
    std::size_t unique_raw_topics = 0;
    std::size_t unique_new_topics = 0;
    std::size_t same_topic = 0;
    std::size_t emergent_topics = 0;
    std::size_t let_alone = 0;
};

nlohmann::json to_json(const DiversityReport& d);

// `original_topics` are the normalized topics of the source corpus.
DiversityReport diversity_report(const std::vector<std::string>& original_topics,
                                 const std::vector<AugmentedRecord>& augmented);

// Side-by-side table of the two strategies.
std::string render_diversity(const DiversityReport& similar, const DiversityReport& novel);

}  // namespace afort
