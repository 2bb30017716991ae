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
#include <string>
#include <vector>

#include "afort/backend.hpp"
#include "afort/corpus.hpp"
#include "afort/prompt_kit.hpp"
#include "afort/types.hpp"
#include "afort/util.hpp"
#include "json.hpp"

namespace afort {

struct PipelineOptions {
    Regime regime = Regime::WithoutExternalInfo;
    Mode mode = Mode::Forced;
    GenerationParams params;
    std::size_t concurrency = 4;
    // Empty: derived from the corpus and config digests.
    std::string run_id;
};

struct PipelineContext {
    const PromptAssets& assets;
    GenerationProvider& provider;
    CompletionContext& completion;
    Clock& clock;
};

// One structured round trip; the trace splits the parsed payload by stage.
// Provider and parse failures are captured in the result status.
InterpretationResult interpret_sentence(const ArgumentRecord& record, const PipelineOptions& options,
                                        PipelineContext& ctx);

// Plain identification call (AF/NAF verdict only), used by the
// identification experiments.
InterpretationResult identify_sentence(const ArgumentRecord& record, bool with_examples,
                                       const GenerationParams& params, PipelineContext& ctx);

struct RunOutput {
    nlohmann::json manifest;
    std::vector<InterpretationResult> results;
};

std::string config_digest(const PipelineOptions& options, const PromptAssets& assets);

// Results are ordered by natural record id. Throws ProviderError when every
// record failed.
RunOutput run_corpus(const std::vector<ArgumentRecord>& records, const PipelineOptions& options,
                     PipelineContext& ctx);
RunOutput run_identification(const std::vector<ArgumentRecord>& records, bool with_examples,
                             const PipelineOptions& options, PipelineContext& ctx);

nlohmann::json manifest_counts(const std::vector<InterpretationResult>& results);

std::string results_jsonl(const std::vector<InterpretationResult>& results);
std::vector<InterpretationResult> read_results(const std::filesystem::path& path);

// Writes results.jsonl and manifest.json into `dir`.
void write_run(const std::filesystem::path& dir, const RunOutput& run);

}  // namespace afort
