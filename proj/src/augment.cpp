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

#include "afort/augment.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>
#include <thread>

#include "afort/error.hpp"
#include "afort/util.hpp"

namespace afort {

namespace {

std::string topic_key(std::string_view raw) {
    std::string s = to_lower(trim(raw));
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?')) s.pop_back();
    std::string out;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty() && out.back() != ' ') out += ' ';
        } else {
            out += c;
        }
    }
    return trim(out);
}

}  // namespace

TopicMap TopicMap::parse(std::string_view text) {
    TopicMap m;
    std::size_t n = 0;
    for (const auto& raw : split(text, '\n')) {
        ++n;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto colon = line.find(':');
        std::string canonical = trim(line.substr(0, colon));
        if (canonical.empty()) throw DataError("topic map line " + std::to_string(n) + ": empty canonical topic");
        m.canonical_.push_back(canonical);
        m.index_[topic_key(canonical)] = canonical;
        if (colon == std::string::npos) continue;
        for (const auto& syn : split(line.substr(colon + 1), ',')) {
            std::string key = topic_key(syn);
            if (key.empty()) continue;
            auto [it, inserted] = m.index_.emplace(key, canonical);
            if (!inserted && it->second != canonical)
                throw DataError("topic map line " + std::to_string(n) + ": synonym '" + key +
                                "' already maps to " + it->second);
        }
    }
    return m;
}

TopicMap TopicMap::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string TopicMap::digest() const {
    std::string all;
    for (const auto& [k, v] : index_) all += k + '\x1f' + v + '\n';
    return sha256_hex(all);
}

std::optional<std::string> TopicMap::lookup(std::string_view raw) const {
    auto it = index_.find(topic_key(raw));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string normalize_topic(std::string_view raw, const TopicMap& map, std::vector<std::string>* unmapped) {
    if (auto t = map.lookup(raw)) return *t;
    if (unmapped) unmapped->push_back(std::string(raw));
    return kOtherTopic;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const AugmentedRecord& r) {
    auto span = [](const std::optional<Span>& s, bool start) {
        return s ? nlohmann::json(start ? s->start : s->end) : nlohmann::json();
    };
    auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(); };
    return {{"id", r.id},
            {"source_id", r.source_id},
            {"strategy", to_string(r.strategy)},
            {"status", to_string(r.status)},
            {"error", r.error},
            {"text", r.text},
            {"correlate", r.correlate},
            {"remnant", r.remnant},
            {"cor_start", span(r.correlate_span, true)},
            {"cor_end", span(r.correlate_span, false)},
            {"rem_start", span(r.remnant_span, true)},
            {"rem_end", span(r.remnant_span, false)},
            {"is_a_fortiori", r.is_a_fortiori},
            {"prop1", opt(r.prop1)},
            {"prop2", opt(r.prop2)},
            {"logic", to_string(r.logic)},
            {"class", to_string(r.sentence_class)},
            {"metaphor", false},
            {"additive", false},
            {"comment", nullptr},
            {"original_topic", r.original_topic},
            {"new_topic", r.new_topic},
            {"normalized_original_topic", r.normalized_original_topic},
            {"normalized_new_topic", r.normalized_new_topic},
            {"short_explanation", r.short_explanation},
            {"long_explanation", r.long_explanation},
            {"contains_let_alone", r.contains_let_alone},
            {"noisy", r.noisy},
            {"flags", r.flags}};
}

AugmentedRecord augmented_from_json(const nlohmann::json& j) {
    AugmentedRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.source_id = j.at("source_id").get<std::string>();
        r.strategy = parse_strategy(j.at("strategy").get<std::string>());
        auto st = j.value("status", std::string("ok"));
        r.status = st == "failed" ? ResultStatus::Failed : st == "invalid" ? ResultStatus::Invalid : ResultStatus::Ok;
        r.error = j.value("error", std::string());
        r.text = j.value("text", std::string());
        r.correlate = j.value("correlate", std::string());
        r.remnant = j.value("remnant", std::string());
        if (j.contains("cor_start") && !j["cor_start"].is_null())
            r.correlate_span = Span{j["cor_start"].get<std::size_t>(), j["cor_end"].get<std::size_t>()};
        if (j.contains("rem_start") && !j["rem_start"].is_null())
            r.remnant_span = Span{j["rem_start"].get<std::size_t>(), j["rem_end"].get<std::size_t>()};
        r.is_a_fortiori = j.value("is_a_fortiori", true);
        if (j.contains("prop1") && !j["prop1"].is_null()) r.prop1 = j["prop1"].get<std::string>();
        if (j.contains("prop2") && !j["prop2"].is_null()) r.prop2 = j["prop2"].get<std::string>();
        r.logic = parse_logic_category(j.value("logic", std::string("Undefined"))).value_or(LogicCategory::Undefined);
        r.sentence_class = parse_sentence_type(j.value("class", std::string("Undefined"))).value_or(SentenceType::Undefined);
        r.original_topic = j.value("original_topic", std::string());
        r.new_topic = j.value("new_topic", std::string());
        r.normalized_original_topic = j.value("normalized_original_topic", std::string());
        r.normalized_new_topic = j.value("normalized_new_topic", std::string());
        r.short_explanation = j.value("short_explanation", std::string());
        r.long_explanation = j.value("long_explanation", std::string());
        r.contains_let_alone = j.value("contains_let_alone", false);
        r.noisy = j.value("noisy", true);
        r.flags = j.value("flags", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("augmented record: ") + e.what());
    }
    return r;
}

ArgumentRecord to_argument_record(const AugmentedRecord& r) {
    ArgumentRecord a;
    a.id = r.id;
    a.text = r.text;
    a.correlate = r.correlate_span;
    a.remnant = r.remnant_span;
    a.is_a_fortiori = r.is_a_fortiori;
    a.prop1 = r.prop1;
    a.prop2 = r.prop2;
    a.logic = r.logic;
    a.sentence_class = r.sentence_class;
    return a;
}

void check_conformance(AugmentedRecord& r, const ArgumentRecord& source, const InterpretationResult& analysis) {
    // Gold labels win; an Undefined gold label defers to the analysis.
    SentenceType want_type =
        source.sentence_class != SentenceType::Undefined ? source.sentence_class : analysis.sentence_type;
    LogicCategory want_logic = source.logic != LogicCategory::Undefined ? source.logic : analysis.logic_category;
    r.contains_let_alone = icontains(r.text, "let alone");
    if (r.sentence_class != want_type) r.flags.push_back("label_changed:sentence_type");
    if (r.logic != want_logic) r.flags.push_back("label_changed:logic_category");
    bool same_topic = r.normalized_original_topic == r.normalized_new_topic;
    if (r.strategy == AugmentationStrategy::SimilarSemantic) {
        if (!same_topic) r.flags.push_back("topic_drift");
    } else {
        if (same_topic) r.flags.push_back("topic_unchanged");
        if (!r.contains_let_alone) r.flags.push_back("missing_let_alone");
    }
    auto resolve = [&](const std::string& phrase, std::optional<Span>& span, const char* flag) {
        span.reset();
        std::size_t at = phrase.empty() ? std::string::npos : utf8_find(r.text, phrase);
        if (at == std::string::npos) {
            r.flags.push_back(flag);
            return;
        }
        span = Span{at, at + utf8_length(phrase)};
    };
    resolve(r.correlate, r.correlate_span, "span_unresolved:correlate");
    resolve(r.remnant, r.remnant_span, "span_unresolved:remnant");
}

AugmentedRecord augment_sentence(const ArgumentRecord& record, const InterpretationResult& analysis,
                                 const AugmentOptions& options, PipelineContext& ctx, const TopicMap& topics) {
    AugmentedRecord r;
    r.source_id = record.id;
    r.strategy = options.strategy;
    r.id = record.id + "-" + (options.strategy == AugmentationStrategy::Novel ? "novel" : "similar");
    ModelResponse resp;
    try {
        auto bundle = assemble_augmentation_prompt(record, analysis, options.strategy, ctx.assets);
        resp = complete(bundle, options.params, ctx.provider, ctx.completion);
    } catch (const Error& e) {
        r.status = ResultStatus::Failed;
        r.error = e.what();
        return r;
    }
    if (!resp.parsed) {
        r.status = ResultStatus::Invalid;
        r.error = resp.parse_error;
        return r;
    }
    const auto& o = *resp.parsed;
    r.text = o.new_sentence.value_or("");
    r.correlate = o.correlate.value_or("");
    r.remnant = o.remnant.value_or("");
    r.is_a_fortiori = o.verdict == Verdict::AF;
    r.prop1 = o.property1;
    r.prop2 = o.property2;
    r.logic = o.logic_category;
    r.sentence_class = o.sentence_type;
    r.original_topic = o.topic.value_or("");
    r.new_topic = o.new_topic.value_or("");
    r.normalized_original_topic = normalize_topic(r.original_topic, topics);
    r.normalized_new_topic = normalize_topic(r.new_topic, topics);
    r.short_explanation = o.short_explanation;
    r.long_explanation = o.long_explanation;
    check_conformance(r, record, analysis);
    if (ctx.completion.store) {
        auto entry = to_json(r);
        entry["kind"] = "augmented";
        entry["run_id"] = ctx.completion.run_id;
        ctx.completion.store->append(entry);
    }
    return r;
}

nlohmann::json to_json(const CostEstimate& c) {
    return {{"requests", c.requests},
            {"prompt_tokens", c.prompt_tokens},
            {"completion_tokens", c.completion_tokens},
            {"cost_usd", c.cost}};
}

CostEstimate estimate_augmentation_cost(const std::vector<ArgumentRecord>& records,
                                        const std::map<std::string, InterpretationResult>& analyses,
                                        const AugmentOptions& options, const PromptAssets& assets) {
    CostEstimate c;
    for (const auto& rec : records) {
        auto it = analyses.find(rec.id);
        if (it == analyses.end()) continue;
        auto bundle = assemble_augmentation_prompt(rec, it->second, options.strategy, assets);
        ++c.requests;
        c.prompt_tokens += bundle.token_estimate + bundle.input_tokens;
        c.completion_tokens += assets.config().reserve_out;
    }
    c.cost = c.prompt_tokens / 1000.0 * options.prompt_price_per_1k +
             c.completion_tokens / 1000.0 * options.completion_price_per_1k;
    return c;
}

AugmentRun run_augmentation(const std::vector<ArgumentRecord>& records,
                            const std::map<std::string, InterpretationResult>& analyses,
                            const AugmentOptions& options, PipelineContext& ctx, const TopicMap& topics) {
    if (records.empty()) throw UsageError("augmentation needs at least one record");
    if (records.size() > options.quota)
        throw UsageError("quota exceeded: " + std::to_string(records.size()) + " generations requested, quota " +
                         std::to_string(options.quota));
    auto cost = estimate_augmentation_cost(records, analyses, options, ctx.assets);
    std::string corpus = corpus_digest(records);
    nlohmann::json cfg = {{"params", to_json(options.params)},
                          {"strategy", to_string(options.strategy)},
                          {"prompt_version", ctx.assets.config().version},
                          {"assets", ctx.assets.digest()},
                          {"topics", topics.digest()}};
    std::string cfg_digest = sha256_hex(cfg.dump());
    std::string run_id = options.run_id.empty() ? sha256_hex(corpus + cfg_digest).substr(0, 16) : options.run_id;
    ctx.completion.run_id = run_id;
    std::string started = ctx.clock.now_iso8601();
    auto& u = ctx.completion.usage;
    std::size_t calls0 = u.calls, prompt0 = u.prompt_tokens, completion0 = u.completion_tokens;

    AugmentRun out;
    out.records.resize(records.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < records.size();) {
            auto it = analyses.find(records[i].id);
            if (it == analyses.end()) {
                AugmentedRecord r;
                r.source_id = records[i].id;
                r.strategy = options.strategy;
                r.id = records[i].id + "-" + (options.strategy == AugmentationStrategy::Novel ? "novel" : "similar");
                r.status = ResultStatus::Failed;
                r.error = "no analysis for record " + records[i].id;
                out.records[i] = std::move(r);
            } else {
                out.records[i] = augment_sentence(records[i], it->second, options, ctx, topics);
            }
        }
    };
    std::size_t n = std::max<std::size_t>(1, std::min(options.concurrency, records.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const auto& a, const auto& b) { return natural_less(a.source_id, b.source_id); });

    std::size_t ok = 0, flagged = 0;
    for (const auto& r : out.records) {
        if (r.status == ResultStatus::Ok) ++ok;
        if (!r.flags.empty()) ++flagged;
    }
    out.manifest = {{"run_id", run_id},
                    {"task", "augment"},
                    {"strategy", to_string(options.strategy)},
                    {"corpus_digest", corpus},
                    {"config_digest", cfg_digest},
                    {"prompt_version", ctx.assets.config().version},
                    {"params", to_json(options.params)},
                    {"provider", ctx.provider.name()},
                    {"quota", options.quota},
                    {"estimate", to_json(cost)},
                    {"started", started},
                    {"finished", ctx.clock.now_iso8601()},
                    {"counts", {{"records", out.records.size()}, {"ok", ok}, {"flagged", flagged}}},
                    {"usage",
                     {{"calls", u.calls - calls0},
                      {"prompt_tokens", u.prompt_tokens - prompt0},
                      {"completion_tokens", u.completion_tokens - completion0}}}};
    return out;
}

std::string augmented_jsonl(const std::vector<AugmentedRecord>& records) {
    std::string out;
    for (const auto& r : records) out += to_json(r).dump() + "\n";
    return out;
}

std::vector<AugmentedRecord> read_augmented(const std::filesystem::path& path) {
    std::vector<AugmentedRecord> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            out.push_back(augmented_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
    return out;
}

nlohmann::json to_json(const DiversityReport& d) {
    return {{"records", d.records},
            {"unique_raw_topics", d.unique_raw_topics},
            {"unique_new_topics", d.unique_new_topics},
            {"same_topic", d.same_topic},
            {"emergent_topics", d.emergent_topics},
            {"let_alone", d.let_alone}};
}

DiversityReport diversity_report(const std::vector<std::string>& original_topics,
                                 const std::vector<AugmentedRecord>& augmented) {
    DiversityReport d;
    std::set<std::string> originals(original_topics.begin(), original_topics.end());
    std::set<std::string> raw, normalized;
    for (const auto& r : augmented) {
        if (r.status != ResultStatus::Ok) continue;
        ++d.records;
        raw.insert(r.new_topic);
        normalized.insert(r.normalized_new_topic);
        if (r.normalized_new_topic == r.normalized_original_topic) ++d.same_topic;
        if (r.contains_let_alone) ++d.let_alone;
    }
    d.unique_raw_topics = raw.size();
    d.unique_new_topics = normalized.size();
    for (const auto& t : normalized)
        if (!originals.count(t)) ++d.emergent_topics;
    return d;
}

std::string render_diversity(const DiversityReport& similar, const DiversityReport& novel) {
    std::ostringstream out;
    auto row = [&](const char* label, std::size_t a, std::size_t b) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-22s %10zu %10zu\n", label, a, b);
        out << buf;
    };
    char head[128];
    std::snprintf(head, sizeof head, "%-22s %10s %10s\n", "", "Similar", "Novel");
    out << head;
    row("Unique raw topics", similar.unique_raw_topics, novel.unique_raw_topics);
    row("Unique new topics", similar.unique_new_topics, novel.unique_new_topics);
    row("Same topic", similar.same_topic, novel.same_topic);
    row("Emergent topics", similar.emergent_topics, novel.emergent_topics);
    row("\"let alone\" count", similar.let_alone, novel.let_alone);
    return out.str();
}

}  // namespace afort
