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

// Value types shared by the prompt, backend, pipeline and augment modules.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afort/corpus.hpp"
#include "json.hpp"

namespace afort {

enum class Verdict { AF, NAF, Unknown };
const char* to_string(Verdict v) noexcept;
std::optional<Verdict> parse_verdict(std::string_view s);

// Whether gold annotations are offered to the model as suggestions.
enum class Regime { WithExternalInfo, WithoutExternalInfo };
const char* to_string(Regime r) noexcept;
Regime parse_regime(std::string_view s);

// Gated runs stop after identification unless the verdict is AF.
enum class Mode { Gated, Forced };
const char* to_string(Mode m) noexcept;
Mode parse_mode(std::string_view s);

enum class Task { Identify, Interpret, Augment };
const char* to_string(Task t) noexcept;

enum class AugmentationStrategy { SimilarSemantic, Novel };
const char* to_string(AugmentationStrategy s) noexcept;
// Throws UsageError for ReversedLogic (deliberately unsupported) and for
// unknown names.
AugmentationStrategy parse_strategy(std::string_view s);

struct StructuredOutput {
    Verdict verdict = Verdict::Unknown;
    std::optional<std::string> correlate;
    std::optional<std::string> remnant;
    std::optional<bool> correlate_more_likely;
    std::optional<std::string> likelihood_rationale;
    SentenceType sentence_type = SentenceType::Undefined;
    LogicCategory logic_category = LogicCategory::Undefined;
    std::optional<std::string> property1;
    std::optional<std::string> property2;
    std::string short_explanation;
    std::string long_explanation;
    std::optional<std::string> topic;
    std::optional<std::string> new_topic;
    std::optional<std::string> new_sentence;
    // Set when the verdict came from a refusal phrasing.
    bool refusal = false;
};

nlohmann::json to_json(const StructuredOutput& s);

struct TraceStage {
    std::string stage;
    std::string prompt_digest;
    std::string raw_excerpt;
    nlohmann::json parsed;
    std::string timestamp;
    bool valid = true;
};

inline constexpr const char* kTraceStages[] = {"identification", "extraction", "classification",
                                               "property_prediction", "explanation"};

struct ReasoningTrace {
    std::vector<TraceStage> stages;
};

enum class ResultStatus { Ok, Invalid, Failed };
const char* to_string(ResultStatus s) noexcept;

struct InterpretationResult {
    std::string record_id;
    Regime regime = Regime::WithoutExternalInfo;
    Mode mode = Mode::Forced;
    Task task = Task::Interpret;
    ResultStatus status = ResultStatus::Ok;
    std::string error;
    Verdict verdict = Verdict::Unknown;
    std::optional<std::string> correlate;
    std::optional<std::string> remnant;
    std::optional<bool> correlate_more_likely;
    std::optional<std::string> likelihood_rationale;
    SentenceType sentence_type = SentenceType::Undefined;
    LogicCategory logic_category = LogicCategory::Undefined;
    std::vector<std::string> properties;
    std::string short_explanation;
    std::string long_explanation;
    ReasoningTrace trace;
    std::vector<std::string> validation_warnings;
};

nlohmann::json to_json(const InterpretationResult& r);
InterpretationResult interpretation_from_json(const nlohmann::json& j);

}  // namespace afort
