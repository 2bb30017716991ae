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

#include "afort/afort.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <new>
#include <set>
#include <sstream>

#include "afort/annotator.hpp"
#include "afort/augment.hpp"
#include "afort/backend.hpp"
#include "afort/corpus.hpp"
#include "afort/error.hpp"
#include "afort/evaluate.hpp"
#include "afort/pipeline.hpp"
#include "afort/prompt_kit.hpp"
#include "afort/util.hpp"

using nlohmann::json;

struct afort_corpus {
    std::vector<afort::ArgumentRecord> records;
};

struct afort_assets {
    afort::PromptAssets assets;
};

struct afort_session {
    const afort::PromptAssets* assets = nullptr;
    std::unique_ptr<afort::GenerationProvider> provider;
    std::unique_ptr<afort::ResponseCache> cache;
    std::unique_ptr<afort::RunStore> log;
    std::unique_ptr<afort::Clock> clock;
    afort::CompletionContext completion;
};

struct afort_store {
    afort::SystemClock clock;
    std::unique_ptr<afort::AnnotationStore> store;
};

struct afort_server {
    std::unique_ptr<afort::AnnotatorServer> server;
};

namespace {

thread_local std::string g_last_error;

afort_status status_of(afort::ErrorKind k) {
    switch (k) {
        case afort::ErrorKind::Usage: return AFORT_ERR_USAGE;
        case afort::ErrorKind::Data: return AFORT_ERR_DATA;
        case afort::ErrorKind::Provider: return AFORT_ERR_PROVIDER;
        case afort::ErrorKind::Io: return AFORT_ERR_IO;
        case afort::ErrorKind::Internal: return AFORT_ERR_INTERNAL;
    }
    return AFORT_ERR_INTERNAL;
}

template <class Fn>
afort_status guard(Fn&& fn) {
    g_last_error.clear();
    try {
        fn();
        return AFORT_OK;
    } catch (const afort::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const json::exception& e) {
        g_last_error = std::string("invalid JSON: ") + e.what();
        return AFORT_ERR_DATA;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return AFORT_ERR_IO;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return AFORT_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return AFORT_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (!p) throw afort::UsageError(std::string(what) + " is null");
}

char* dup(std::string_view s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size());
    out[s.size()] = '\0';
    return out;
}

void give(char** out, std::string_view s) {
    if (out) *out = dup(s);
}

json parse_object(const char* text) {
    if (!text || !*text) return json::object();
    auto j = json::parse(text);
    if (!j.is_object()) throw afort::UsageError("expected a JSON object");
    return j;
}

std::string req_str(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty())
        throw afort::UsageError(std::string("missing ") + key);
    return j[key].get<std::string>();
}

afort::Verdict gold_verdict(const afort::ArgumentRecord& r) {
    return r.is_a_fortiori ? afort::Verdict::AF : afort::Verdict::NAF;
}

// A run directory (results.jsonl + manifest.json) or a bare results file.
struct LoadedRun {
    std::vector<afort::InterpretationResult> results;
    json manifest;
    std::string path;
};

LoadedRun load_run(const std::string& path) {
    namespace fs = std::filesystem;
    LoadedRun run;
    run.path = path;
    fs::path results = path, manifest;
    if (fs::is_directory(results)) {
        manifest = results / "manifest.json";
        results /= "results.jsonl";
    } else {
        manifest = results.parent_path() / "manifest.json";
    }
    if (!fs::exists(results)) throw afort::IoError("no results at " + results.string());
    run.results = afort::read_results(results);
    if (fs::exists(manifest)) run.manifest = json::parse(afort::read_file(manifest));
    return run;
}

json source_of(const LoadedRun& run) {
    json s = {{"path", run.path}};
    for (const char* k : {"run_id", "config_digest", "corpus_digest", "task", "regime", "mode", "with_examples"})
        if (run.manifest.is_object() && run.manifest.contains(k)) s[k] = run.manifest[k];
    return s;
}

std::vector<std::string> string_or_array(const json& j, const char* key) {
    if (!j.contains(key)) throw afort::UsageError(std::string("missing ") + key);
    if (j[key].is_string()) return {j[key].get<std::string>()};
    return j[key].get<std::vector<std::string>>();
}

afort::PipelineOptions pipeline_options(const json& o) {
    afort::PipelineOptions opt;
    opt.regime = afort::parse_regime(o.value("regime", std::string("without-info")));
    opt.mode = afort::parse_mode(o.value("mode", std::string("forced")));
    opt.params = afort::params_from_json(o.value("params", json::object()));
    opt.concurrency = o.value("concurrency", std::size_t{4});
    if (opt.concurrency == 0) throw afort::UsageError("concurrency must be at least 1");
    opt.run_id = o.value("run_id", std::string());
    return opt;
}

// ---- evaluation kinds ----------------------------------------------------

json eval_identify(const json& req) {
    std::vector<std::pair<std::string, afort::ConfusionMatrix3>> matrices;
    json sources = json::array();
    if (req.contains("matrix")) {
        afort::ConfusionMatrix3 m;
        auto cells = req["matrix"].get<std::vector<std::vector<std::size_t>>>();
        if (cells.size() != 3) throw afort::DataError("matrix needs 3 rows");
        for (std::size_t i = 0; i < 3; ++i) {
            if (cells[i].size() != 3) throw afort::DataError("matrix needs 3 columns");
            for (std::size_t j = 0; j < 3; ++j) m.cells[i][j] = cells[i][j];
        }
        matrices.emplace_back(req.value("label", std::string("matrix")), m);
    } else {
        auto gold = afort::load_corpus(req_str(req, "gold"));
        std::map<std::string, const afort::ArgumentRecord*> by_id;
        for (const auto& r : gold) by_id[r.id] = &r;
        auto preds = string_or_array(req, "pred");
        std::vector<std::string> labels = req.value("labels", std::vector<std::string>{});
        for (std::size_t i = 0; i < preds.size(); ++i) {
            auto run = load_run(preds[i]);
            std::vector<afort::Verdict> g, p;
            for (const auto& r : run.results) {
                auto it = by_id.find(r.record_id);
                if (it == by_id.end()) throw afort::DataError("result for unknown record " + r.record_id);
                g.push_back(gold_verdict(*it->second));
                p.push_back(r.status == afort::ResultStatus::Ok ? r.verdict : afort::Verdict::Unknown);
            }
            std::string label = i < labels.size() ? labels[i]
                                : run.manifest.value("with_examples", false) ? "with examples"
                                : run.manifest.contains("with_examples")     ? "without examples"
                                                                             : preds[i];
            matrices.emplace_back(label, afort::confusion_matrix(g, p));
            sources.push_back(source_of(run));
        }
    }
    auto convention = req.value("convention", std::string("exclude-unknown")) == "full-gold"
                          ? afort::RecallConvention::FullGold
                          : afort::RecallConvention::ExcludeUnknownPredictions;
    json runs = json::array();
    std::string text;
    std::vector<std::pair<std::string, afort::IdentificationMetrics>> columns;
    for (const auto& [label, m] : matrices) {
        auto metrics = afort::identification_metrics(m, convention);
        columns.emplace_back(label, metrics);
        runs.push_back({{"label", label},
                        {"confusion", afort::to_json(m)},
                        {"metrics", afort::to_json(metrics)},
                        {"metrics_full_gold",
                         afort::to_json(afort::identification_metrics(m, afort::RecallConvention::FullGold))}});
        text += afort::render_confusion(m, label) + "\n";
    }
    text += afort::render_identification(columns);
    return {{"kind", "identify"}, {"runs", runs}, {"text", text}, {"source", sources}};
}

std::unique_ptr<afort::Embedder> make_embedder(const json& req) {
    auto kind = req.value("embedder", std::string("hashed"));
    if (kind == "hashed") return std::make_unique<afort::HashedBowEmbedder>(req.value("dim", std::size_t{1024}));
    if (kind == "live") return std::make_unique<afort::HttpEmbedder>(afort::endpoint_from_env(true));
    throw afort::UsageError("unknown embedder " + kind);
}

json eval_spans(const json& req) {
    auto gold = afort::load_corpus(req_str(req, "gold"));
    auto run = load_run(req_str(req, "pred"));
    auto embedder = make_embedder(req);
    auto e = afort::evaluate_spans(gold, run.results, *embedder);
    return {{"kind", "spans"},
            {"embedder", embedder->name()},
            {"spans", afort::to_json(e)},
            {"text", afort::render_span_table(e)},
            {"source", source_of(run)}};
}

json eval_classes(const json& req) {
    auto gold = afort::load_corpus(req_str(req, "gold"));
    auto run = load_run(req_str(req, "pred"));
    auto r = afort::classification_report(gold, run.results);
    return {{"kind", "classes"},
            {"sentence_type", afort::to_json(r.sentence_type)},
            {"logic_category", afort::to_json(r.logic_category)},
            {"text", afort::render_per_class(r.sentence_type, "Sentence type") + "\n" +
                         afort::render_per_class(r.logic_category, "Logic category")},
            {"source", source_of(run)}};
}

json eval_properties(const json& req) {
    auto gold = afort::load_corpus(req_str(req, "gold"));
    auto run = load_run(req_str(req, "pred"));
    // Score only the records the run covered.
    std::set<std::string> covered;
    for (const auto& r : run.results) covered.insert(r.record_id);
    std::vector<afort::ArgumentRecord> scoped;
    for (const auto& r : gold)
        if (covered.count(r.id)) scoped.push_back(r);
    auto p = afort::property_report(scoped, run.results, req.value("k", std::size_t{10}));
    return {{"kind", "properties"},
            {"properties", afort::to_json(p)},
            {"text", afort::render_property_report(p)},
            {"source", source_of(run)}};
}

// Reads a campaign straight from the store files, without taking the lock,
// so reports work while a server is running.
std::pair<afort::Campaign, std::vector<afort::JudgmentRecord>> read_campaign(const std::filesystem::path& dir,
                                                                            const std::string& id) {
    auto cpath = dir / "campaigns" / (id + ".json");
    if (!std::filesystem::exists(cpath)) throw afort::NotFoundError("unknown campaign " + id);
    auto c = afort::campaign_from_json(json::parse(afort::read_file(cpath)));
    std::vector<afort::JudgmentRecord> js;
    auto jpath = dir / "judgments" / (id + ".jsonl");
    if (std::filesystem::exists(jpath)) {
        std::istringstream in(afort::read_file(jpath));
        std::string line;
        while (std::getline(in, line)) {
            if (afort::trim(line).empty()) continue;
            try {
                js.push_back(afort::judgment_from_json(json::parse(line)));
            } catch (const json::parse_error&) {
                break;
            }
        }
    }
    return {std::move(c), std::move(js)};
}

json eval_judgments(const json& req) {
    std::filesystem::path dir = req_str(req, "store");
    auto summarize = [&](const std::string& id) {
        auto [c, js] = read_campaign(dir, id);
        std::vector<std::string> items;
        for (const auto& i : c.items) items.push_back(i.item_id);
        return std::make_pair(c, afort::judgment_aggregate(js, items));
    };
    auto [ca, a] = summarize(req_str(req, "campaign"));
    auto labels = req.value("labels", std::vector<std::string>{});
    json out = {{"kind", "judgments"}, {"a", afort::to_json(a)}};
    json sources = json::array({{{"campaign", ca.id}, {"run_id", ca.run_id}}});
    if (req.contains("compare")) {
        auto [cb, b] = summarize(req_str(req, "compare"));
        std::string la = labels.size() > 0 ? labels[0] : ca.id;
        std::string lb = labels.size() > 1 ? labels[1] : cb.id;
        out["b"] = afort::to_json(b);
        out["comparison"] = afort::judgment_comparison_json(a, b);
        out["text"] = afort::render_judgment_comparison(a, b, la, lb);
        sources.push_back({{"campaign", cb.id}, {"run_id", cb.run_id}});
    } else {
        out["text"] = afort::render_judgment_summary(a, labels.empty() ? ca.id : labels[0]);
    }
    out["source"] = sources;
    return out;
}

json eval_ttest(const json& req) {
    auto t = afort::paired_t_test(req.at("a").get<std::vector<double>>(), req.at("b").get<std::vector<double>>());
    char buf[160];
    std::snprintf(buf, sizeof buf, "t = %.4f, df = %zu, p = %.4f (two-tailed), mean difference = %.4f\n", t.t, t.df,
                  t.p_two_tailed, t.mean_difference);
    return {{"kind", "ttest"}, {"ttest", afort::to_json(t)}, {"text", buf}, {"source", json::array()}};
}

json eval_grammar(const json& req) {
    std::string url = req.value("url", std::string());
    if (url.empty())
        if (const char* env = std::getenv("AFORT_LANGUAGETOOL_URL")) url = env;
    std::unique_ptr<afort::GrammarChecker> checker;
    if (!url.empty()) checker = std::make_unique<afort::LanguageToolChecker>(url);
    std::vector<std::pair<std::string, afort::GrammarReport>> rows;
    json reports = json::array();
    for (const auto& s : req.at("sources")) {
        std::string label = req_str(s, "label");
        std::string path = req_str(s, "path");
        std::vector<std::string> texts;
        if (s.value("kind", std::string("corpus")) == "augmented") {
            for (const auto& r : afort::read_augmented(path))
                if (r.status == afort::ResultStatus::Ok) texts.push_back(r.text);
        } else {
            for (const auto& r : afort::load_corpus(path)) texts.push_back(r.text);
        }
        auto g = afort::grammar_report(texts, checker.get(), "no grammar server configured (AFORT_LANGUAGETOOL_URL)");
        reports.push_back({{"label", label}, {"report", afort::to_json(g)}});
        rows.emplace_back(label, std::move(g));
    }
    return {{"kind", "grammar"}, {"reports", reports}, {"text", afort::render_grammar(rows)},
            {"source", json::array()}};
}

json eval_diversity(const json& req) {
    auto report = [](const std::string& path) {
        auto recs = afort::read_augmented(path);
        std::vector<std::string> originals;
        for (const auto& r : recs)
            if (r.status == afort::ResultStatus::Ok) originals.push_back(r.normalized_original_topic);
        return afort::diversity_report(originals, recs);
    };
    auto similar = report(req_str(req, "similar"));
    auto novel = report(req_str(req, "novel"));
    return {{"kind", "diversity"},
            {"similar", afort::to_json(similar)},
            {"novel", afort::to_json(novel)},
            {"text", afort::render_diversity(similar, novel)},
            {"source", json::array()}};
}

}  // namespace

extern "C" {

const char* afort_version(void) { return "0.1.0"; }

const char* afort_last_error(void) { return g_last_error.c_str(); }

const char* afort_status_name(afort_status status) {
    switch (status) {
        case AFORT_OK: return "ok";
        case AFORT_ERR_USAGE: return "usage";
        case AFORT_ERR_DATA: return "data";
        case AFORT_ERR_PROVIDER: return "provider";
        case AFORT_ERR_IO: return "io";
        case AFORT_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void afort_string_free(char* s) { std::free(s); }

// ---- corpus ---------------------------------------------------------------

afort_status afort_corpus_load(const char* path, afort_corpus** out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        auto c = std::make_unique<afort_corpus>();
        c->records = afort::load_corpus(path);
        *out = c.release();
    });
}

afort_status afort_corpus_parse(const char* text, afort_corpus** out, char** report) {
    return guard([&] {
        need(text, "text");
        need(out, "out");
        auto parsed = afort::parse_dataset(std::string_view(text));
        json rejects = json::array();
        for (const auto& r : parsed.rejects) rejects.push_back({{"line", r.line}, {"reason", r.reason}});
        auto c = std::make_unique<afort_corpus>();
        c->records = std::move(parsed.records);
        give(report, json{{"rejects", rejects}, {"warnings", parsed.warnings}}.dump());
        *out = c.release();
    });
}

void afort_corpus_free(afort_corpus* corpus) { delete corpus; }

size_t afort_corpus_size(const afort_corpus* corpus) { return corpus ? corpus->records.size() : 0; }

afort_status afort_corpus_summary(const afort_corpus* corpus, char** out) {
    return guard([&] {
        need(corpus, "corpus");
        std::size_t af = 0;
        for (const auto& r : corpus->records) af += r.is_a_fortiori;
        json j = {{"records", corpus->records.size()},
                  {"af", af},
                  {"naf", corpus->records.size() - af},
                  {"digest", afort::corpus_digest(corpus->records)},
                  {"grid", afort::to_json(afort::dataset_stats(corpus->records))}};
        give(out, j.dump());
    });
}

afort_status afort_corpus_render_stats(const afort_corpus* corpus, char** text) {
    return guard([&] {
        need(corpus, "corpus");
        give(text, afort::render_distribution(afort::dataset_stats(corpus->records)));
    });
}

afort_status afort_corpus_canonical(const afort_corpus* corpus, char** jsonl) {
    return guard([&] {
        need(corpus, "corpus");
        give(jsonl, afort::write_canonical(corpus->records));
    });
}

afort_status afort_corpus_record(const afort_corpus* corpus, const char* id, char** out) {
    return guard([&] {
        need(corpus, "corpus");
        need(id, "id");
        for (const auto& r : corpus->records)
            if (r.id == id) return give(out, afort::to_json(r).dump());
        throw afort::NotFoundError(std::string("unknown record ") + id);
    });
}

afort_status afort_corpus_sample(const afort_corpus* corpus, const char* params, char** evaluation_set) {
    return guard([&] {
        need(corpus, "corpus");
        auto p = parse_object(params);
        afort::EvaluationSetParams sp;
        sp.seed = p.value("seed", std::uint64_t{0});
        sp.per_class_quota = p.value("per_class_quota", std::size_t{20});
        sp.per_combo_target = p.value("per_combo_target", std::size_t{5});
        auto set = afort::stratified_sample(corpus->records, sp);
        auto j = afort::to_json(set);
        j["corpus_digest"] = afort::corpus_digest(corpus->records);
        give(evaluation_set, j.dump(2));
    });
}

afort_status afort_corpus_select(const afort_corpus* corpus, const char* selection, afort_corpus** out) {
    return guard([&] {
        need(corpus, "corpus");
        need(selection, "selection");
        need(out, "out");
        auto j = json::parse(selection);
        std::vector<std::string> ids =
            j.is_array() ? j.get<std::vector<std::string>>() : afort::evaluation_set_from_json(j).record_ids;
        std::map<std::string, const afort::ArgumentRecord*> by_id;
        for (const auto& r : corpus->records) by_id[r.id] = &r;
        auto c = std::make_unique<afort_corpus>();
        for (const auto& id : ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw afort::DataError("selected record " + id + " not in corpus");
            c->records.push_back(*it->second);
        }
        *out = c.release();
    });
}

// ---- assets ---------------------------------------------------------------

afort_status afort_assets_load(const char* dir, afort_assets** out) {
    return guard([&] {
        need(dir, "dir");
        need(out, "out");
        auto a = std::make_unique<afort_assets>();
        a->assets = afort::PromptAssets::load(dir);
        *out = a.release();
    });
}

void afort_assets_free(afort_assets* assets) { delete assets; }

afort_status afort_assets_render(const afort_assets* assets, const afort_corpus* corpus, const char* record_id,
                                 const char* request, char** bundle) {
    return guard([&] {
        need(assets, "assets");
        need(corpus, "corpus");
        need(record_id, "record_id");
        auto req = parse_object(request);
        const afort::ArgumentRecord* rec = nullptr;
        for (const auto& r : corpus->records)
            if (r.id == record_id) rec = &r;
        if (!rec) throw afort::NotFoundError(std::string("unknown record ") + record_id);
        auto task = req.value("task", std::string("interpret"));
        afort::PromptBundle b;
        if (task == "interpret")
            b = afort::assemble_interpretation_prompt(
                *rec, afort::parse_regime(req.value("regime", std::string("without-info"))), assets->assets,
                afort::parse_mode(req.value("mode", std::string("forced"))));
        else if (task == "identify")
            b = afort::assemble_identification_prompt(*rec, req.value("with_examples", true), assets->assets);
        else
            throw afort::UsageError("unknown task " + task);
        json sections = json::array();
        for (const auto& s : b.sections) sections.push_back(afort::to_string(s.name));
        give(bundle, json{{"record_id", b.record_id},
                          {"rendered", b.rendered},
                          {"digest", b.digest()},
                          {"token_estimate", b.token_estimate},
                          {"input_tokens", b.input_tokens},
                          {"exemplars", b.exemplar_count},
                          {"asset_version", b.asset_version},
                          {"sections", sections}}
                         .dump());
    });
}

afort_status afort_check_budget(size_t prompt_tokens, size_t input_tokens, size_t reserve_out, size_t window,
                                int* pass) {
    return guard([&] {
        need(pass, "pass");
        *pass = afort::check_budget(prompt_tokens, input_tokens, reserve_out, window).pass ? 1 : 0;
    });
}

// ---- sessions -------------------------------------------------------------

afort_status afort_session_create(const afort_assets* assets, const char* config, afort_session** out) {
    return guard([&] {
        need(assets, "assets");
        need(out, "out");
        auto cfg = parse_object(config);
        auto s = std::make_unique<afort_session>();
        s->assets = &assets->assets;
        auto provider = cfg.value("provider", std::string("mock"));
        if (provider == "mock") {
            auto script = cfg.value("script", std::string());
            if (script.empty()) throw afort::UsageError("mock provider requires a script path");
            s->provider = afort::ScriptedProvider::from_file(script);
        } else if (provider == "echo") {
            s->provider = std::make_unique<afort::EchoProvider>();
        } else if (provider == "live") {
            auto ep = afort::endpoint_from_env();
            if (ep.api_key.empty() && ep.base_url.find("api.openai.com") != std::string::npos)
                throw afort::UsageError("live provider requires AFORT_API_KEY in the environment");
            s->provider = std::make_unique<afort::ChatCompletionProvider>(ep);
        } else {
            throw afort::UsageError("unknown provider " + provider);
        }
        auto clock = cfg.value("clock", std::string(provider == "live" ? "system" : "fixed"));
        if (clock == "fixed")
            s->clock = std::make_unique<afort::FixedClock>();
        else if (clock == "system")
            s->clock = std::make_unique<afort::SystemClock>();
        else
            throw afort::UsageError("unknown clock " + clock);
        if (auto dir = cfg.value("cache_dir", std::string()); !dir.empty())
            s->cache = std::make_unique<afort::ResponseCache>(dir);
        if (auto log = cfg.value("call_log", std::string()); !log.empty())
            s->log = std::make_unique<afort::RunStore>(log);
        s->completion.cache = s->cache.get();
        s->completion.store = s->log.get();
        s->completion.reserve_out = assets->assets.config().reserve_out;
        s->completion.retry.max_retries = cfg.value("max_retries", 3);
        s->completion.retry.base_delay = std::chrono::milliseconds(cfg.value("base_delay_ms", 500));
        *out = s.release();
    });
}

void afort_session_free(afort_session* session) { delete session; }

size_t afort_session_calls(const afort_session* session) {
    return session && session->provider ? session->provider->calls() : 0;
}

afort_status afort_session_run(afort_session* session, const afort_corpus* corpus, const char* options,
                               char** manifest, char** results) {
    return guard([&] {
        need(session, "session");
        need(corpus, "corpus");
        auto o = parse_object(options);
        auto opt = pipeline_options(o);
        afort::PipelineContext ctx{*session->assets, *session->provider, session->completion, *session->clock};
        auto task = o.value("task", std::string("interpret"));
        afort::RunOutput run;
        if (task == "interpret")
            run = afort::run_corpus(corpus->records, opt, ctx);
        else if (task == "identify")
            run = afort::run_identification(corpus->records, o.value("with_examples", true), opt, ctx);
        else
            throw afort::UsageError("unknown task " + task);
        std::string lines;
        for (const auto& r : run.results) {
            auto j = afort::to_json(r);
            j["run_id"] = run.manifest["run_id"];
            j["config_digest"] = run.manifest["config_digest"];
            lines += j.dump() + "\n";
        }
        give(manifest, run.manifest.dump(2));
        give(results, lines);
    });
}

afort_status afort_session_augment(afort_session* session, const afort_corpus* corpus, const char* analyses,
                                   const char* topics, const char* options, char** manifest, char** records) {
    return guard([&] {
        need(session, "session");
        need(corpus, "corpus");
        need(analyses, "analyses");
        need(topics, "topics");
        auto o = parse_object(options);
        std::map<std::string, afort::InterpretationResult> by_id;
        std::istringstream in(analyses);
        std::string line;
        while (std::getline(in, line)) {
            if (afort::trim(line).empty()) continue;
            auto r = afort::interpretation_from_json(json::parse(line));
            by_id[r.record_id] = std::move(r);
        }
        afort::AugmentOptions opt;
        opt.strategy = afort::parse_strategy(o.value("strategy", std::string("similar")));
        opt.params = afort::params_from_json(o.value("params", json::object()));
        opt.concurrency = o.value("concurrency", std::size_t{4});
        opt.quota = o.value("quota", std::size_t{2000});
        opt.run_id = o.value("run_id", std::string());
        auto map = afort::TopicMap::parse(topics);
        afort::PipelineContext ctx{*session->assets, *session->provider, session->completion, *session->clock};
        auto run = afort::run_augmentation(corpus->records, by_id, opt, ctx, map);
        std::string lines;
        for (const auto& r : run.records) {
            auto j = afort::to_json(r);
            j["run_id"] = run.manifest["run_id"];
            j["config_digest"] = run.manifest["config_digest"];
            lines += j.dump() + "\n";
        }
        give(manifest, run.manifest.dump(2));
        give(records, lines);
    });
}

// ---- evaluation -----------------------------------------------------------

afort_status afort_evaluate(const char* kind, const char* request, char** report) {
    return guard([&] {
        need(kind, "kind");
        auto req = parse_object(request);
        std::string k = kind;
        json out;
        if (k == "identify") out = eval_identify(req);
        else if (k == "spans") out = eval_spans(req);
        else if (k == "classes") out = eval_classes(req);
        else if (k == "properties") out = eval_properties(req);
        else if (k == "judgments") out = eval_judgments(req);
        else if (k == "ttest") out = eval_ttest(req);
        else if (k == "grammar") out = eval_grammar(req);
        else if (k == "diversity") out = eval_diversity(req);
        else throw afort::UsageError("unknown evaluation " + k);
        give(report, out.dump(2));
    });
}

// ---- annotation -----------------------------------------------------------

afort_status afort_store_open(const char* dir, afort_store** out) {
    return guard([&] {
        need(dir, "dir");
        need(out, "out");
        auto s = std::make_unique<afort_store>();
        s->store = std::make_unique<afort::AnnotationStore>(dir, s->clock);
        *out = s.release();
    });
}

void afort_store_close(afort_store* store) { delete store; }

afort_status afort_store_create_campaign(afort_store* store, const char* request, char** campaign) {
    return guard([&] {
        need(store, "store");
        auto req = parse_object(request);
        auto set = afort::evaluation_set_from_json(json::parse(afort::read_file(req_str(req, "evaluation_set"))));
        auto records = afort::load_corpus(req_str(req, "corpus"));
        auto run = load_run(req_str(req, "run"));
        auto annotators = req.at("annotators").get<std::vector<std::string>>();
        auto c = afort::build_campaign(req_str(req, "id"), set, records, run.results, annotators,
                                       run.manifest.value("run_id", std::string()));
        c.token = req.value("token", std::string());
        store->store->register_campaign(c);
        give(campaign, afort::to_json(store->store->campaign(c.id)).dump(2));
    });
}

afort_status afort_store_call(afort_store* store, const char* op, const char* request, char** response) {
    return guard([&] {
        need(store, "store");
        need(op, "op");
        give(response, afort::store_call(*store->store, op, parse_object(request)).dump());
    });
}

afort_status afort_server_start(afort_store* store, const char* options, afort_server** out) {
    return guard([&] {
        need(store, "store");
        need(out, "out");
        auto o = parse_object(options);
        afort::ServerOptions so;
        so.host = o.value("host", so.host);
        so.port = o.value("port", so.port);
        so.static_dir = o.value("static_dir", std::string());
        auto s = std::make_unique<afort_server>();
        s->server = std::make_unique<afort::AnnotatorServer>(*store->store, so);
        s->server->start();
        *out = s.release();
    });
}

int afort_server_port(const afort_server* server) { return server ? server->server->port() : -1; }

void afort_server_stop(afort_server* server) {
    if (!server) return;
    server->server->stop();
    delete server;
}

}  // extern "C"
