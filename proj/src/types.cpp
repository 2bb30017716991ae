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

#include "afort/types.hpp"

#include "afort/error.hpp"
#include "afort/util.hpp"

namespace afort {

using nlohmann::json;

const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::AF: return "AF";
        case Verdict::NAF: return "NAF";
        case Verdict::Unknown: return "Unknown";
    }
    return "Unknown";
}

std::optional<Verdict> parse_verdict(std::string_view raw) {
    auto s = to_lower(trim(raw));
    if (s == "af" || s == "yes" || s == "true" || s == "a fortiori") return Verdict::AF;
    if (s == "naf" || s == "no" || s == "false" || s == "non a fortiori" || s == "not a fortiori")
        return Verdict::NAF;
    if (s == "unknown") return Verdict::Unknown;
    return std::nullopt;
}

const char* to_string(Regime r) noexcept {
    return r == Regime::WithExternalInfo ? "with-info" : "without-info";
}

Regime parse_regime(std::string_view raw) {
    auto s = to_lower(trim(raw));
    if (s == "with-info" || s == "with" || s == "withexternalinfo") return Regime::WithExternalInfo;
    if (s == "without-info" || s == "without" || s == "withoutexternalinfo") return Regime::WithoutExternalInfo;
    throw UsageError("unknown regime '" + std::string(raw) + "' (expected with-info or without-info)");
}

const char* to_string(Mode m) noexcept { return m == Mode::Gated ? "gated" : "forced"; }

Mode parse_mode(std::string_view raw) {
    auto s = to_lower(trim(raw));
    if (s == "gated") return Mode::Gated;
    if (s == "forced") return Mode::Forced;
    throw UsageError("unknown mode '" + std::string(raw) + "' (expected gated or forced)");
}

const char* to_string(Task t) noexcept {
    switch (t) {
        case Task::Identify: return "identify";
        case Task::Interpret: return "interpret";
        case Task::Augment: return "augment";
    }
    return "interpret";
}

const char* to_string(AugmentationStrategy s) noexcept {
    return s == AugmentationStrategy::SimilarSemantic ? "SimilarSemantic" : "Novel";
}

AugmentationStrategy parse_strategy(std::string_view raw) {
    auto s = to_lower(trim(raw));
    if (s == "similarsemantic" || s == "similar-semantic" || s == "similar") return AugmentationStrategy::SimilarSemantic;
    if (s == "novel") return AugmentationStrategy::Novel;
    if (s == "reversedlogic" || s == "reversed-logic" || s == "reversed")
        throw UsageError("unsupported strategy: ReversedLogic is not offered (its outputs read as unnatural)");
    throw UsageError("unknown augmentation strategy '" + std::string(raw) + "'");
}

const char* to_string(ResultStatus s) noexcept {
    switch (s) {
        case ResultStatus::Ok: return "ok";
        case ResultStatus::Invalid: return "invalid";
        case ResultStatus::Failed: return "failed";
    }
    return "failed";
}

namespace {

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

json to_json(const StructuredOutput& s) {
    json j;
    j["verdict"] = to_string(s.verdict);
    j["correlate"] = opt(s.correlate);
    j["remnant"] = opt(s.remnant);
    j["correlate_more_likely"] = opt(s.correlate_more_likely);
    j["likelihood_rationale"] = opt(s.likelihood_rationale);
    j["sentence_type"] = to_string(s.sentence_type);
    j["logic_category"] = to_string(s.logic_category);
    j["property1"] = opt(s.property1);
    j["property2"] = opt(s.property2);
    j["short_explanation"] = s.short_explanation;
    j["long_explanation"] = s.long_explanation;
    j["topic"] = opt(s.topic);
    j["new_topic"] = opt(s.new_topic);
    j["new_sentence"] = opt(s.new_sentence);
    j["refusal"] = s.refusal;
    return j;
}

json to_json(const InterpretationResult& r) {
    json j;
    j["record_id"] = r.record_id;
    j["task"] = to_string(r.task);
    j["regime"] = to_string(r.regime);
    j["mode"] = to_string(r.mode);
    j["status"] = to_string(r.status);
    j["error"] = r.error;
    j["verdict"] = to_string(r.verdict);
    j["correlate"] = opt(r.correlate);
    j["remnant"] = opt(r.remnant);
    j["correlate_more_likely"] = opt(r.correlate_more_likely);
    j["likelihood_rationale"] = opt(r.likelihood_rationale);
    j["sentence_type"] = to_string(r.sentence_type);
    j["logic_category"] = to_string(r.logic_category);
    j["properties"] = r.properties;
    j["short_explanation"] = r.short_explanation;
    j["long_explanation"] = r.long_explanation;
    json stages = json::array();
    for (const auto& s : r.trace.stages)
        stages.push_back({{"stage", s.stage},
                          {"prompt_digest", s.prompt_digest},
                          {"raw_excerpt", s.raw_excerpt},
                          {"parsed", s.parsed},
                          {"timestamp", s.timestamp},
                          {"valid", s.valid}});
    j["trace"] = stages;
    j["validation_warnings"] = r.validation_warnings;
    return j;
}

InterpretationResult interpretation_from_json(const json& j) {
    InterpretationResult r;
    r.record_id = j.at("record_id").get<std::string>();
    auto task = j.value("task", std::string("interpret"));
    r.task = task == "identify" ? Task::Identify : task == "augment" ? Task::Augment : Task::Interpret;
    r.regime = parse_regime(j.value("regime", std::string("without-info")));
    r.mode = parse_mode(j.value("mode", std::string("forced")));
    auto status = j.value("status", std::string("ok"));
    r.status = status == "ok" ? ResultStatus::Ok : status == "invalid" ? ResultStatus::Invalid : ResultStatus::Failed;
    r.error = j.value("error", std::string{});
    r.verdict = parse_verdict(j.value("verdict", std::string("Unknown"))).value_or(Verdict::Unknown);
    r.correlate = get_opt<std::string>(j, "correlate");
    r.remnant = get_opt<std::string>(j, "remnant");
    r.correlate_more_likely = get_opt<bool>(j, "correlate_more_likely");
    r.likelihood_rationale = get_opt<std::string>(j, "likelihood_rationale");
    r.sentence_type = parse_sentence_type(j.value("sentence_type", std::string{})).value_or(SentenceType::Undefined);
    r.logic_category =
        parse_logic_category(j.value("logic_category", std::string{})).value_or(LogicCategory::Undefined);
    r.properties = j.value("properties", std::vector<std::string>{});
    r.short_explanation = j.value("short_explanation", std::string{});
    r.long_explanation = j.value("long_explanation", std::string{});
    if (j.contains("trace"))
        for (const auto& s : j.at("trace"))
            r.trace.stages.push_back({s.value("stage", std::string{}), s.value("prompt_digest", std::string{}),
                                      s.value("raw_excerpt", std::string{}), s.value("parsed", json{}),
                                      s.value("timestamp", std::string{}), s.value("valid", true)});
    r.validation_warnings = j.value("validation_warnings", std::vector<std::string>{});
    return r;
}

}  // namespace afort
