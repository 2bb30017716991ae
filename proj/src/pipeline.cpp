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

#include <algorithm>
#include <array>
#include <atomic>
#include <sstream>
#include <thread>

#include "afort/error.hpp"

namespace afort {

namespace {

constexpr std::size_t kExcerptBytes = 240;

std::string excerpt(std::string_view raw) {
    if (utf8_length(raw) <= kExcerptBytes) return std::string(raw);
    return utf8_substr(raw, 0, kExcerptBytes);
}

nlohmann::json opt(const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(); }

void apply_output(InterpretationResult& r, const StructuredOutput& o) {
    r.verdict = o.verdict;
    r.correlate = o.correlate;
    r.remnant = o.remnant;
    r.correlate_more_likely = o.correlate_more_likely;
    r.likelihood_rationale = o.likelihood_rationale;
    r.sentence_type = o.sentence_type;
    r.logic_category = o.logic_category;
    r.properties.clear();
    for (const auto& p : {o.property1, o.property2})
        if (p && !trim(*p).empty()) r.properties.push_back(*p);
    r.short_explanation = o.short_explanation;
    r.long_explanation = o.long_explanation;
}

void clear_downstream(InterpretationResult& r) {
    r.correlate.reset();
    r.remnant.reset();
    r.correlate_more_likely.reset();
    r.likelihood_rationale.reset();
    r.sentence_type = SentenceType::Undefined;
    r.logic_category = LogicCategory::Undefined;
    r.properties.clear();
    r.short_explanation.clear();
    r.long_explanation.clear();
}

// Parsed value per stage, plus the suggestions the prompt carried.
std::vector<nlohmann::json> stage_values(const InterpretationResult& r, const ArgumentRecord& rec, Regime regime) {
    nlohmann::json ident = {{"verdict", to_string(r.verdict)}};
    nlohmann::json extraction = {{"correlate", opt(r.correlate)}, {"remnant", opt(r.remnant)}};
    nlohmann::json classification = {
        {"correlate_more_likely",
         r.correlate_more_likely ? nlohmann::json(*r.correlate_more_likely) : nlohmann::json()},
        {"likelihood_rationale", opt(r.likelihood_rationale)},
        {"sentence_type", to_string(r.sentence_type)},
        {"logic_category", to_string(r.logic_category)}};
    nlohmann::json properties = {{"properties", r.properties}};
    nlohmann::json explanation = {{"short_explanation", r.short_explanation},
                                  {"long_explanation", r.long_explanation}};
    if (regime == Regime::WithExternalInfo) {
        nlohmann::json s1;
        if (rec.correlate) s1["correlate"] = rec.correlate_text();
        if (rec.remnant) s1["remnant"] = rec.remnant_text();
        if (!s1.is_null()) extraction["suggested"] = s1;
        if (rec.logic != LogicCategory::Undefined)
            classification["suggested"] = {{"logic_category", to_string(rec.logic)}};
        if (!rec.properties().empty()) properties["suggested"] = {{"properties", rec.properties()}};
    }
    return {ident, extraction, classification, properties, explanation};
}

void build_trace(InterpretationResult& r, const ArgumentRecord& rec, Regime regime, std::size_t stages,
                 const std::string& digest, const std::string& raw, bool valid, Clock& clock) {
    auto values = stage_values(r, rec, regime);
    for (std::size_t i = 0; i < stages; ++i) {
        TraceStage s;
        s.stage = kTraceStages[i];
        s.prompt_digest = digest;
        s.raw_excerpt = excerpt(raw);
        s.parsed = valid ? values[i] : nlohmann::json();
        s.timestamp = clock.now_iso8601();
        s.valid = valid;
        r.trace.stages.push_back(std::move(s));
    }
}

void persist(const InterpretationResult& r, PipelineContext& ctx) {
    if (!ctx.completion.store) return;
    nlohmann::json entry = to_json(r);
    entry["kind"] = "result";
    entry["run_id"] = ctx.completion.run_id;
    ctx.completion.store->append(entry);
}

}  // namespace

InterpretationResult interpret_sentence(const ArgumentRecord& record, const PipelineOptions& options,
                                        PipelineContext& ctx) {
    InterpretationResult r;
    r.record_id = record.id;
    r.regime = options.regime;
    r.mode = options.mode;
    r.task = Task::Interpret;
    std::string digest;
    ModelResponse resp;
    try {
        auto bundle = assemble_interpretation_prompt(record, options.regime, ctx.assets, options.mode);
        digest = bundle.digest();
        resp = complete(bundle, options.params, ctx.provider, ctx.completion);
    } catch (const Error& e) {
        r.status = ResultStatus::Failed;
        r.error = e.what();
        build_trace(r, record, options.regime, 1, digest, "", false, ctx.clock);
        persist(r, ctx);
        return r;
    }
    if (!resp.parsed) {
        r.status = ResultStatus::Invalid;
        r.error = resp.parse_error;
        std::size_t n = options.mode == Mode::Gated ? 1 : std::size(kTraceStages);
        build_trace(r, record, options.regime, n, digest, resp.raw_text, false, ctx.clock);
        persist(r, ctx);
        return r;
    }
    apply_output(r, *resp.parsed);
    bool halted = options.mode == Mode::Gated && r.verdict != Verdict::AF;
    if (halted) {
        clear_downstream(r);
    } else {
        r.validation_warnings = validate_output(*resp.parsed, Task::Interpret);
    }
    build_trace(r, record, options.regime, halted ? 1 : std::size(kTraceStages), digest, resp.raw_text, true,
                ctx.clock);
    persist(r, ctx);
    return r;
}

InterpretationResult identify_sentence(const ArgumentRecord& record, bool with_examples,
                                       const GenerationParams& params, PipelineContext& ctx) {
    InterpretationResult r;
    r.record_id = record.id;
    r.task = Task::Identify;
    r.mode = Mode::Gated;
    std::string digest;
    ModelResponse resp;
    try {
        auto bundle = assemble_identification_prompt(record, with_examples, ctx.assets);
        digest = bundle.digest();
        resp = complete(bundle, params, ctx.provider, ctx.completion);
    } catch (const Error& e) {
        r.status = ResultStatus::Failed;
        r.error = e.what();
        build_trace(r, record, r.regime, 1, digest, "", false, ctx.clock);
        persist(r, ctx);
        return r;
    }
    if (!resp.parsed) {
        r.status = ResultStatus::Invalid;
        r.error = resp.parse_error;
        build_trace(r, record, r.regime, 1, digest, resp.raw_text, false, ctx.clock);
    } else {
        r.verdict = resp.parsed->verdict;
        build_trace(r, record, r.regime, 1, digest, resp.raw_text, true, ctx.clock);
    }
    persist(r, ctx);
    return r;
}

std::string config_digest(const PipelineOptions& options, const PromptAssets& assets) {
    nlohmann::json j = {{"params", to_json(options.params)},
                        {"regime", to_string(options.regime)},
                        {"mode", to_string(options.mode)},
                        {"prompt_version", assets.config().version},
                        {"assets", assets.digest()}};
    return sha256_hex(j.dump());
}

nlohmann::json manifest_counts(const std::vector<InterpretationResult>& results) {
    nlohmann::json verdicts = {{"AF", 0}, {"NAF", 0}, {"Unknown", 0}};
    nlohmann::json statuses = {{"ok", 0}, {"invalid", 0}, {"failed", 0}};
    for (const auto& r : results) {
        if (r.status == ResultStatus::Ok) verdicts[to_string(r.verdict)] = verdicts[to_string(r.verdict)].get<int>() + 1;
        statuses[to_string(r.status)] = statuses[to_string(r.status)].get<int>() + 1;
    }
    return {{"records", results.size()}, {"verdict", verdicts}, {"status", statuses}};
}

namespace {

template <class Fn>
RunOutput run_each(const std::vector<ArgumentRecord>& records, const PipelineOptions& options, PipelineContext& ctx,
                   const std::string& task, nlohmann::json extra, Fn&& fn) {
    if (records.empty()) throw UsageError("run needs at least one record");
    std::string corpus = corpus_digest(records);
    std::string cfg = config_digest(options, ctx.assets);
    if (task != "interpret") cfg = sha256_hex(cfg + task + extra.dump());
    RunOutput out;
    std::string run_id = options.run_id.empty() ? sha256_hex(corpus + cfg).substr(0, 16) : options.run_id;
    ctx.completion.run_id = run_id;
    std::string started = ctx.clock.now_iso8601();
    auto& u = ctx.completion.usage;
    std::array<std::size_t, 4> before = {u.calls.load(), u.cached.load(), u.prompt_tokens.load(),
                                         u.completion_tokens.load()};

    out.results.resize(records.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < records.size();) out.results[i] = fn(records[i]);
    };
    std::size_t n = std::max<std::size_t>(1, std::min(options.concurrency, records.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::stable_sort(out.results.begin(), out.results.end(),
                     [](const auto& a, const auto& b) { return natural_less(a.record_id, b.record_id); });
    auto counts = manifest_counts(out.results);
    if (counts["status"]["failed"].get<std::size_t>() == out.results.size())
        throw ProviderError("all " + std::to_string(out.results.size()) + " records failed: " + out.results[0].error);
    out.manifest = {{"run_id", run_id},
                    {"task", task},
                    {"corpus_digest", corpus},
                    {"config_digest", cfg},
                    {"prompt_version", ctx.assets.config().version},
                    {"asset_digest", ctx.assets.digest()},
                    {"params", to_json(options.params)},
                    {"regime", to_string(options.regime)},
                    {"mode", to_string(options.mode)},
                    {"provider", ctx.provider.name()},
                    {"started", started},
                    {"finished", ctx.clock.now_iso8601()},
                    {"counts", counts},
                    {"usage",
                     {{"calls", u.calls.load() - before[0]},
                      {"cached", u.cached.load() - before[1]},
                      {"prompt_tokens", u.prompt_tokens.load() - before[2]},
                      {"completion_tokens", u.completion_tokens.load() - before[3]}}}};
    for (auto& [k, v] : extra.items()) out.manifest[k] = v;
    return out;
}

}  // namespace

RunOutput run_corpus(const std::vector<ArgumentRecord>& records, const PipelineOptions& options,
                     PipelineContext& ctx) {
    return run_each(records, options, ctx, "interpret", nlohmann::json::object(),
                    [&](const ArgumentRecord& r) { return interpret_sentence(r, options, ctx); });
}

RunOutput run_identification(const std::vector<ArgumentRecord>& records, bool with_examples,
                             const PipelineOptions& options, PipelineContext& ctx) {
    return run_each(records, options, ctx, "identify", {{"with_examples", with_examples}},
                    [&](const ArgumentRecord& r) { return identify_sentence(r, with_examples, options.params, ctx); });
}

std::string results_jsonl(const std::vector<InterpretationResult>& results) {
    std::string out;
    for (const auto& r : results) out += to_json(r).dump() + "\n";
    return out;
}

std::vector<InterpretationResult> read_results(const std::filesystem::path& path) {
    std::vector<InterpretationResult> out;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(interpretation_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void write_run(const std::filesystem::path& dir, const RunOutput& run) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "results.jsonl", results_jsonl(run.results));
    write_file_atomic(dir / "manifest.json", run.manifest.dump(2) + "\n");
}

}  // namespace afort
