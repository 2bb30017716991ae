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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afort/corpus.hpp"
#include "afort/types.hpp"

namespace afort {

enum class SectionName {
    Role,
    TaskDescription,
    Class,
    Logic,
    NormalizeShortExplanation,
    CommonProperties,
    Examples,
    CoT,
    ExternalInfo,
    AugmentStrategy,
    FinalPrompt,
};

const char* to_string(SectionName n) noexcept;
std::optional<SectionName> parse_section_name(std::string_view s);

struct PromptSection {
    SectionName name;
    std::string body;
    std::vector<SectionName> references;
};

struct PromptBundle {
    std::string record_id;
    Task task = Task::Interpret;
    std::vector<PromptSection> sections;
    std::string rendered;
    Regime regime = Regime::WithoutExternalInfo;
    std::size_t exemplar_count = 0;
    // Estimated tokens of the prompt excluding the input sentence.
    std::size_t token_estimate = 0;
    // Estimated tokens of the input sentence.
    std::size_t input_tokens = 0;
    std::string asset_version;

    std::string digest() const;
};

struct FewShotExample {
    std::string sentence;
    std::string correlate;
    std::string remnant;
    std::string likelihood;
    std::string property1;
    std::string property2;
    std::string short_explanation;
    std::string long_explanation;
};

struct IdentificationExample {
    std::string sentence;
    bool is_a_fortiori = true;
};

// Short-explanation pattern. Placeholders: {X}, {Y}, {P}, {Y^word} (Y with
// `word` inserted after its first token) and alternation groups [a|b|c].
struct ExplanationTemplate {
    SentenceType sentence_type = SentenceType::Undefined;
    int number = 0;
    std::string pattern;

    bool uses_p() const;
};

// Substitutes the placeholders. `choices[i]` picks the alternative of the
// i-th alternation group; missing entries pick the first alternative.
// Throws UsageError when the pattern needs P and none is given.
std::string render_template(const ExplanationTemplate& tmpl, std::string_view x, std::string_view y,
                            std::optional<std::string_view> p = std::nullopt,
                            const std::vector<std::size_t>& choices = {});

// Parses "QU3: {X} ..." lines out of a section body.
std::vector<ExplanationTemplate> parse_templates(std::string_view body);

struct PromptConfig {
    std::string version = "v1";
    std::size_t window = 16384;
    std::size_t reserve_out = 1600;
    std::uint64_t seed = 0;
    std::string exemplar_file = "exemplars.json";
    std::string identification_file = "identification_examples.json";
};

// Parses `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// Versioned prompt text assets: one file per section, `<Section>.txt`, with
// task variants `<Section>.<variant>.txt`. A first line `@refs: A, B` lists
// the sections the body cross-references.
class PromptAssets {
public:
    static PromptAssets load(const std::filesystem::path& dir);

    // Section body for a task variant, falling back to the plain section.
    // Throws DataError if neither exists.
    const PromptSection& section(SectionName name, std::string_view variant = {}) const;
    bool has_section(SectionName name, std::string_view variant = {}) const;
    void set_section(SectionName name, std::string_view variant, PromptSection section);

    const std::vector<FewShotExample>& exemplars() const { return exemplars_; }
    const std::vector<IdentificationExample>& identification_examples() const { return identification_; }
    const std::vector<ExplanationTemplate>& templates() const { return templates_; }
    const PromptConfig& config() const { return config_; }
    PromptConfig& config() { return config_; }
    void set_exemplars(std::vector<FewShotExample> e) { exemplars_ = std::move(e); }
    void set_identification_examples(std::vector<IdentificationExample> e) { identification_ = std::move(e); }

    // Concatenated asset bytes; feeds artifact digests.
    std::string digest() const;

private:
    std::map<std::string, PromptSection> sections_;
    std::vector<FewShotExample> exemplars_;
    std::vector<IdentificationExample> identification_;
    std::vector<ExplanationTemplate> templates_;
    PromptConfig config_;
};

std::size_t estimate_tokens(std::string_view text);

struct BudgetCheck {
    bool pass = true;
    std::size_t required = 0;
    std::size_t window = 0;
    // Tokens over the window; 0 when passing.
    std::size_t overflow = 0;
};

BudgetCheck check_budget(const PromptBundle& bundle, std::size_t input_len, std::size_t reserve_out,
                         std::size_t window);
// Raw form for callers that only hold the numbers.
BudgetCheck check_budget(std::size_t prompt_tokens, std::size_t input_len, std::size_t reserve_out,
                         std::size_t window);

// The bundles below are checked against the configured window; a bundle
// that does not fit throws BudgetError rather than being truncated.
PromptBundle assemble_interpretation_prompt(const ArgumentRecord& record, Regime regime, const PromptAssets& assets,
                                            Mode mode = Mode::Forced);
PromptBundle assemble_identification_prompt(const ArgumentRecord& record, bool with_examples,
                                            const PromptAssets& assets);
PromptBundle assemble_augmentation_prompt(const ArgumentRecord& record, const InterpretationResult& analysis,
                                          AugmentationStrategy strategy, const PromptAssets& assets);
PromptBundle assemble_augmentation_prompt(const ArgumentRecord& record, const InterpretationResult& analysis,
                                          std::string_view strategy, const PromptAssets& assets);

// Gold annotation strings of `record` that must never reach a rendering
// in the WithoutExternalInfo regime: the annotation values that do not
// already occur in the sentence or in the record-independent asset text.
std::vector<std::string> leak_sentinels(const ArgumentRecord& record, const PromptAssets& assets);

}  // namespace afort
