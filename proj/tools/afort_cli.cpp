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

// afort: command-line front end over the C API.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "afort/afort.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Thrown to unwind with an exit status and a one-line message.
struct Failure {
    afort_status status;
    std::string message;
};

void check(afort_status s) {
    if (s != AFORT_OK) throw Failure{s, afort_last_error()};
}

[[noreturn]] void fail(afort_status s, std::string msg) { throw Failure{s, std::move(msg)}; }

// Owning wrapper for strings returned by the library.
struct Str {
    char* p = nullptr;
    ~Str() { afort_string_free(p); }
    char** out() { return &p; }
    std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    ~Handle() { Free(p); }
    T** out() { return &p; }
};
using Corpus = Handle<afort_corpus, afort_corpus_free>;
using Assets = Handle<afort_assets, afort_assets_free>;
using Session = Handle<afort_session, afort_session_free>;
using Store = Handle<afort_store, afort_store_close>;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(AFORT_ERR_IO, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes `<path>.partial`, then renames. A crash leaves only the .partial.
void emit(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(AFORT_ERR_IO, "cannot write " + tmp.string());
        out << contents;
        if (!out.flush()) fail(AFORT_ERR_IO, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

void same_file_guard(const std::string& input, const std::string& output) {
    std::error_code ec;
    if (fs::exists(output) && fs::equivalent(input, output, ec))
        fail(AFORT_ERR_USAGE, "refusing to overwrite the input corpus " + input);
}

void load_corpus(Corpus& c, const std::string& path, const std::string& evalset) {
    check(afort_corpus_load(path.c_str(), c.out()));
    if (evalset.empty()) return;
    Corpus all;
    std::swap(all.p, c.p);
    auto sel = slurp(evalset);
    check(afort_corpus_select(all.p, sel.c_str(), c.out()));
}

json parse(const Str& s) { return json::parse(s.str()); }

struct ParamFlags {
    double temperature = 0.3, top_p = 1.0, frequency_penalty = 0.0, presence_penalty = 0.0;
    std::size_t window = 16384;
    std::string model;

    void add(CLI::App* app) {
        app->add_option("--temperature", temperature, "Sampling temperature")->capture_default_str();
        app->add_option("--top-p", top_p, "Nucleus sampling mass")->capture_default_str();
        app->add_option("--frequency-penalty", frequency_penalty)->capture_default_str();
        app->add_option("--presence-penalty", presence_penalty)->capture_default_str();
        app->add_option("--window", window, "Model context window in tokens")->capture_default_str();
        app->add_option("--model", model, "Model name (default: AFORT_MODEL or the built-in default)");
    }
    json to_json() const {
        json j = {{"temperature", temperature},
                  {"top_p", top_p},
                  {"frequency_penalty", frequency_penalty},
                  {"presence_penalty", presence_penalty},
                  {"window", window}};
        std::string m = model;
        if (m.empty())
            if (const char* env = std::getenv("AFORT_MODEL")) m = env;
        if (!m.empty()) j["model_name"] = m;
        return j;
    }
};

struct SessionFlags {
    std::string assets = "assets/prompts/v1";
    std::string provider = "mock";
    std::string script;
    std::string cache_dir;
    std::string clock;
    int max_retries = 3;

    void add(CLI::App* app) {
        app->add_option("--assets", assets, "Prompt asset directory")->capture_default_str();
        app->add_option("--provider", provider, "mock, echo or live")
            ->check(CLI::IsMember({"mock", "echo", "live"}))
            ->capture_default_str();
        app->add_option("--script", script, "Scripted responses for the mock provider");
        app->add_option("--cache-dir", cache_dir, "Response cache directory");
        app->add_option("--clock", clock, "fixed or system (default: system for live runs)")
            ->check(CLI::IsMember({"fixed", "system"}));
        app->add_option("--max-retries", max_retries)->capture_default_str();
    }
    json to_json(const fs::path& call_log) const {
        if (provider == "mock" && script.empty()) fail(AFORT_ERR_USAGE, "--provider mock requires --script");
        json j = {{"provider", provider}, {"script", script}, {"cache_dir", cache_dir},
                  {"call_log", call_log.string()}, {"max_retries", max_retries}};
        if (!clock.empty()) j["clock"] = clock;
        return j;
    }
};

// Call log is kept as .partial until the run completes.
fs::path begin_log(const fs::path& out) {
    fs::create_directories(out);
    fs::path log = out / "calls.jsonl.partial";
    fs::remove(log);
    return log;
}

// Digit runs padded so "r10" sorts after "r9".
std::string natural_key(const std::string& id) {
    std::string key, digits;
    auto flush = [&] {
        if (!digits.empty()) key += std::string(20 - std::min<std::size_t>(20, digits.size()), '0') + digits;
        digits.clear();
    };
    for (char ch : id) {
        if (ch >= '0' && ch <= '9') {
            digits += ch;
        } else {
            flush();
            key += ch;
        }
    }
    flush();
    return key;
}

// Workers append in completion order; the final log is ordered by record.
void finish_log(const fs::path& out) {
    fs::path log = out / "calls.jsonl.partial";
    if (!fs::exists(log)) return;
    std::vector<std::pair<std::string, std::string>> lines;
    std::istringstream in(slurp(log.string()));
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) lines.emplace_back(natural_key(json::parse(line).value("record_id", "")), line);
    std::stable_sort(lines.begin(), lines.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string sorted;
    for (const auto& [k, line] : lines) sorted += line + "\n";
    emit(out / "calls.jsonl", sorted);
    fs::remove(log);
}

std::string summary_line(const json& counts) {
    std::ostringstream s;
    s << counts.value("records", 0) << " records";
    if (counts.contains("verdict"))
        s << ": " << counts["verdict"].value("AF", 0) << " AF / " << counts["verdict"].value("NAF", 0) << " NAF / "
          << counts["verdict"].value("Unknown", 0) << " Unknown";
    if (counts.contains("status"))
        s << " (invalid " << counts["status"].value("invalid", 0) << ", failed " << counts["status"].value("failed", 0)
          << ")";
    if (counts.contains("ok")) s << ": ok " << counts.value("ok", 0) << ", flagged " << counts.value("flagged", 0);
    return s.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"afort: a fortiori argument workbench"};
    app.set_config("--config", "", "Key-value configuration file");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(afort_version()));

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse a delimited corpus into canonical JSON lines");
    std::string in_input, in_output = "corpus.jsonl", in_report;
    ingest->add_option("--input", in_input, "Comma or tab separated corpus")->required();
    ingest->add_option("--output", in_output, "Canonical corpus path")->capture_default_str();
    ingest->add_option("--report", in_report, "Write rejected rows and warnings as JSON");

    // stats
    auto* stats = app.add_subcommand("stats", "Class x logic distribution grid");
    std::string st_corpus;
    bool st_json = false;
    stats->add_option("--corpus", st_corpus)->required();
    stats->add_flag("--json", st_json, "Print JSON instead of the table");

    // sample-evalset
    auto* sample = app.add_subcommand("sample-evalset", "Stratified evaluation set");
    std::string sa_corpus, sa_output = "evalset.json";
    std::uint64_t sa_seed = 0;
    std::size_t sa_quota = 20, sa_combo = 5;
    sample->add_option("--corpus", sa_corpus)->required();
    sample->add_option("--output", sa_output)->capture_default_str();
    sample->add_option("--seed", sa_seed)->capture_default_str();
    sample->add_option("--per-class", sa_quota)->capture_default_str();
    sample->add_option("--per-combination", sa_combo)->capture_default_str();

    // run
    auto* run = app.add_subcommand("run", "Interpretation or identification run");
    std::string ru_corpus, ru_evalset, ru_out = "runs/run", ru_regime = "without-info", ru_mode = "forced",
                                       ru_task = "interpret", ru_id;
    bool ru_no_examples = false;
    std::size_t ru_conc = 4;
    ParamFlags ru_params;
    SessionFlags ru_session;
    run->add_option("--corpus", ru_corpus)->required();
    run->add_option("--evalset", ru_evalset, "Restrict to an evaluation set");
    run->add_option("--out", ru_out, "Output directory")->capture_default_str();
    run->add_option("--task", ru_task)->check(CLI::IsMember({"interpret", "identify"}))->capture_default_str();
    run->add_option("--regime", ru_regime)->check(CLI::IsMember({"with-info", "without-info"}))->capture_default_str();
    run->add_option("--mode", ru_mode)->check(CLI::IsMember({"gated", "forced"}))->capture_default_str();
    run->add_flag("--no-examples", ru_no_examples, "Identification without demonstrations");
    run->add_option("--concurrency", ru_conc)->check(CLI::PositiveNumber)->capture_default_str();
    run->add_option("--run-id", ru_id);
    ru_params.add(run);
    ru_session.add(run);

    // augment
    auto* aug = app.add_subcommand("augment", "Generate new sentences from analysed records");
    std::string au_corpus, au_evalset, au_analyses, au_topics = "assets/topics.txt", au_strategy = "similar",
                                                    au_out = "runs/augment", au_id;
    std::size_t au_conc = 4, au_quota = 2000;
    ParamFlags au_params;
    SessionFlags au_session;
    aug->add_option("--corpus", au_corpus)->required();
    aug->add_option("--evalset", au_evalset);
    aug->add_option("--analyses", au_analyses, "Run directory holding the analyses")->required();
    aug->add_option("--topics", au_topics)->capture_default_str();
    aug->add_option("--strategy", au_strategy, "similar or novel")->capture_default_str();
    aug->add_option("--out", au_out)->capture_default_str();
    aug->add_option("--concurrency", au_conc)->check(CLI::PositiveNumber)->capture_default_str();
    aug->add_option("--quota", au_quota, "Maximum generations for this run")->capture_default_str();
    aug->add_option("--run-id", au_id);
    au_params.add(aug);
    au_session.add(aug);

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluation reports");
    eval->require_subcommand(1);
    std::string ev_out;
    eval->add_option("--out", ev_out, "Write the JSON report here");
    std::string ev_gold, ev_embedder = "hashed", ev_convention = "exclude-unknown", ev_store, ev_campaign,
                         ev_compare, ev_url, ev_similar, ev_novel;
    std::vector<std::string> ev_pred, ev_labels, ev_sources;
    std::vector<double> ev_a, ev_b;
    std::size_t ev_k = 10;
    auto* e_id = eval->add_subcommand("identify", "Identification confusion matrix and metrics");
    e_id->add_option("--gold", ev_gold)->required();
    e_id->add_option("--pred", ev_pred, "One or more run directories")->required();
    e_id->add_option("--labels", ev_labels);
    e_id->add_option("--convention", ev_convention, "Recall convention")
        ->check(CLI::IsMember({"exclude-unknown", "full-gold"}))
        ->capture_default_str();
    auto* e_sp = eval->add_subcommand("spans", "Correlate and remnant similarity");
    e_sp->add_option("--gold", ev_gold)->required();
    e_sp->add_option("--pred", ev_pred)->required()->expected(1);
    e_sp->add_option("--embedder", ev_embedder, "hashed or live")->capture_default_str();
    auto* e_cl = eval->add_subcommand("classes", "Sentence type and logic category metrics");
    e_cl->add_option("--gold", ev_gold)->required();
    e_cl->add_option("--pred", ev_pred)->required()->expected(1);
    auto* e_pr = eval->add_subcommand("properties", "Property overlap and frequencies");
    e_pr->add_option("--gold", ev_gold)->required();
    e_pr->add_option("--pred", ev_pred)->required()->expected(1);
    e_pr->add_option("--top", ev_k)->capture_default_str();
    auto* e_ju = eval->add_subcommand("judgments", "Human judgment aggregates");
    e_ju->add_option("--store", ev_store)->required();
    e_ju->add_option("--campaign", ev_campaign)->required();
    e_ju->add_option("--compare", ev_compare, "Second campaign for a paired comparison");
    e_ju->add_option("--labels", ev_labels);
    auto* e_tt = eval->add_subcommand("ttest", "Paired t-test");
    e_tt->add_option("--a", ev_a)->required()->delimiter(',');
    e_tt->add_option("--b", ev_b)->required()->delimiter(',');
    auto* e_gr = eval->add_subcommand("grammar", "Grammar issue counts");
    e_gr->add_option("--source", ev_sources, "label=corpus:path or label=augmented:path")->required();
    e_gr->add_option("--url", ev_url, "LanguageTool server (default: AFORT_LANGUAGETOOL_URL)");
    auto* e_dv = eval->add_subcommand("diversity", "Topic diversity of augmented sets");
    e_dv->add_option("--similar", ev_similar)->required();
    e_dv->add_option("--novel", ev_novel)->required();

    // serve
    auto* serve = app.add_subcommand("serve", "Annotation service");
    std::string se_store = "annotations", se_host = "127.0.0.1", se_static, se_campaign, se_evalset, se_corpus, se_run,
                se_token, se_port_file;
    std::vector<std::string> se_annotators;
    int se_port = 8080;
    bool se_register_only = false;
    serve->add_option("--store", se_store)->capture_default_str();
    serve->add_option("--host", se_host)->capture_default_str();
    serve->add_option("--port", se_port, "0 picks a free port")->capture_default_str();
    serve->add_option("--static-dir", se_static, "UI assets");
    serve->add_option("--port-file", se_port_file, "Write the bound port here");
    serve->add_option("--campaign", se_campaign, "Register this campaign before serving");
    serve->add_option("--evalset", se_evalset);
    serve->add_option("--corpus", se_corpus);
    serve->add_option("--run", se_run, "Run directory whose outputs are judged");
    serve->add_option("--annotators", se_annotators)->delimiter(',');
    serve->add_option("--token", se_token, "Shared campaign token");
    serve->add_flag("--register-only", se_register_only, "Register the campaign and exit");

    // report
    auto* report = app.add_subcommand("report", "Human-readable tables for a run and its reports");
    std::string re_run;
    std::vector<std::string> re_evals;
    report->add_option("--run", re_run, "Run directory")->required();
    report->add_option("--eval", re_evals, "Evaluation report JSON files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }

    try {
        if (*ingest) {
            same_file_guard(in_input, in_output);
            auto text = slurp(in_input);
            Corpus c;
            Str rep, canon, sum;
            check(afort_corpus_parse(text.c_str(), c.out(), rep.out()));
            check(afort_corpus_canonical(c.p, canon.out()));
            check(afort_corpus_summary(c.p, sum.out()));
            emit(in_output, canon.str());
            auto r = parse(rep);
            if (!in_report.empty()) emit(in_report, r.dump(2) + "\n");
            auto s = parse(sum);
            std::cout << s["records"] << " records, " << s["af"] << " AF / " << s["naf"] << " NAF, "
                      << r["rejects"].size() << " rejected rows\n"
                      << "digest " << s["digest"].get<std::string>() << "\n";
            for (const auto& rj : r["rejects"])
                std::cerr << "rejected line " << rj["line"] << ": " << rj["reason"].get<std::string>() << "\n";
        } else if (*stats) {
            Corpus c;
            check(afort_corpus_load(st_corpus.c_str(), c.out()));
            Str out;
            if (st_json) {
                check(afort_corpus_summary(c.p, out.out()));
                std::cout << parse(out).dump(2) << "\n";
            } else {
                check(afort_corpus_render_stats(c.p, out.out()));
                std::cout << out.str();
            }
        } else if (*sample) {
            same_file_guard(sa_corpus, sa_output);
            Corpus c;
            check(afort_corpus_load(sa_corpus.c_str(), c.out()));
            json p = {{"seed", sa_seed}, {"per_class_quota", sa_quota}, {"per_combo_target", sa_combo}};
            Str out;
            check(afort_corpus_sample(c.p, p.dump().c_str(), out.out()));
            emit(sa_output, out.str() + "\n");
            std::cout << parse(out)["record_ids"].size() << " records -> " << sa_output << "\n";
        } else if (*run) {
            Corpus c;
            load_corpus(c, ru_corpus, ru_evalset);
            Assets a;
            check(afort_assets_load(ru_session.assets.c_str(), a.out()));
            fs::path out = ru_out;
            auto log = begin_log(out);
            Session s;
            check(afort_session_create(a.p, ru_session.to_json(log).dump().c_str(), s.out()));
            json o = {{"task", ru_task},       {"regime", ru_regime},          {"mode", ru_mode},
                      {"params", ru_params.to_json()}, {"concurrency", ru_conc}, {"run_id", ru_id},
                      {"with_examples", !ru_no_examples}};
            Str manifest, results;
            check(afort_session_run(s.p, c.p, o.dump().c_str(), manifest.out(), results.out()));
            auto m = parse(manifest);
            m["corpus_path"] = ru_corpus;
            if (!ru_evalset.empty()) m["evaluation_set"] = ru_evalset;
            emit(out / "results.jsonl", results.str());
            emit(out / "manifest.json", m.dump(2) + "\n");
            finish_log(out);
            std::cout << "run " << m["run_id"].get<std::string>() << ": " << summary_line(m["counts"]) << "\n"
                      << "config " << m["config_digest"].get<std::string>() << "\n";
        } else if (*aug) {
            Corpus c;
            load_corpus(c, au_corpus, au_evalset);
            Assets a;
            check(afort_assets_load(au_session.assets.c_str(), a.out()));
            fs::path analyses = au_analyses;
            if (fs::is_directory(analyses)) analyses /= "results.jsonl";
            auto analysis_text = slurp(analyses.string());
            auto topics = slurp(au_topics);
            fs::path out = au_out;
            auto log = begin_log(out);
            Session s;
            check(afort_session_create(a.p, au_session.to_json(log).dump().c_str(), s.out()));
            json o = {{"strategy", au_strategy}, {"params", au_params.to_json()}, {"concurrency", au_conc},
                      {"quota", au_quota},       {"run_id", au_id}};
            Str manifest, records;
            check(afort_session_augment(s.p, c.p, analysis_text.c_str(), topics.c_str(), o.dump().c_str(),
                                        manifest.out(), records.out()));
            auto m = parse(manifest);
            m["analyses"] = analyses.string();
            emit(out / "augmented.jsonl", records.str());
            emit(out / "manifest.json", m.dump(2) + "\n");
            finish_log(out);
            std::cout << "augment " << m["run_id"].get<std::string>() << ": " << summary_line(m["counts"]) << "\n";
        } else if (*eval) {
            std::string kind;
            json req;
            if (*e_id) {
                kind = "identify";
                req = {{"gold", ev_gold}, {"pred", ev_pred}, {"convention", ev_convention}};
                if (!ev_labels.empty()) req["labels"] = ev_labels;
            } else if (*e_sp) {
                kind = "spans";
                req = {{"gold", ev_gold}, {"pred", ev_pred[0]}, {"embedder", ev_embedder}};
            } else if (*e_cl) {
                kind = "classes";
                req = {{"gold", ev_gold}, {"pred", ev_pred[0]}};
            } else if (*e_pr) {
                kind = "properties";
                req = {{"gold", ev_gold}, {"pred", ev_pred[0]}, {"k", ev_k}};
            } else if (*e_ju) {
                kind = "judgments";
                req = {{"store", ev_store}, {"campaign", ev_campaign}};
                if (!ev_compare.empty()) req["compare"] = ev_compare;
                if (!ev_labels.empty()) req["labels"] = ev_labels;
            } else if (*e_tt) {
                kind = "ttest";
                req = {{"a", ev_a}, {"b", ev_b}};
            } else if (*e_gr) {
                kind = "grammar";
                json sources = json::array();
                for (const auto& s : ev_sources) {
                    auto eq = s.find('='), colon = s.find(':');
                    if (eq == std::string::npos || colon == std::string::npos || colon < eq)
                        fail(AFORT_ERR_USAGE, "--source expects label=kind:path, got " + s);
                    sources.push_back({{"label", s.substr(0, eq)},
                                       {"kind", s.substr(eq + 1, colon - eq - 1)},
                                       {"path", s.substr(colon + 1)}});
                }
                req = {{"sources", sources}};
                if (!ev_url.empty()) req["url"] = ev_url;
            } else if (*e_dv) {
                kind = "diversity";
                req = {{"similar", ev_similar}, {"novel", ev_novel}};
            }
            Str rep;
            check(afort_evaluate(kind.c_str(), req.dump().c_str(), rep.out()));
            auto r = parse(rep);
            if (!ev_out.empty()) emit(ev_out, r.dump(2) + "\n");
            std::cout << r["text"].get<std::string>();
        } else if (*serve) {
            Store st;
            check(afort_store_open(se_store.c_str(), st.out()));
            if (!se_campaign.empty()) {
                if (se_evalset.empty() || se_corpus.empty() || se_run.empty() || se_annotators.empty())
                    fail(AFORT_ERR_USAGE, "--campaign needs --evalset, --corpus, --run and --annotators");
                json req = {{"id", se_campaign},   {"evaluation_set", se_evalset}, {"corpus", se_corpus},
                            {"run", se_run},       {"annotators", se_annotators},  {"token", se_token}};
                Str c;
                check(afort_store_create_campaign(st.p, req.dump().c_str(), c.out()));
                std::cout << "campaign " << se_campaign << ": " << parse(c)["items"].size() << " items\n";
            }
            if (se_register_only) return 0;

            // Block the shutdown signals before any server thread exists so
            // only sigwait below sees them.
            sigset_t sigs;
            sigemptyset(&sigs);
            sigaddset(&sigs, SIGINT);
            sigaddset(&sigs, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

            json o = {{"host", se_host}, {"port", se_port}, {"static_dir", se_static}};
            afort_server* srv = nullptr;
            check(afort_server_start(st.p, o.dump().c_str(), &srv));
            int port = afort_server_port(srv);
            if (!se_port_file.empty()) emit(se_port_file, std::to_string(port) + "\n");
            std::cout << "listening on http://" << se_host << ":" << port << std::endl;
            int sig = 0;
            sigwait(&sigs, &sig);
            afort_server_stop(srv);
            std::cout << "stopped" << std::endl;
        } else if (*report) {
            fs::path dir = re_run;
            auto manifest = json::parse(slurp((dir / "manifest.json").string()));
            std::string cfg = manifest.value("config_digest", "");
            std::string run_id = manifest.value("run_id", "");
            std::cout << "Run " << run_id << " (" << manifest.value("task", "") << ")\n"
                      << "  config   " << cfg << "\n"
                      << "  corpus   " << manifest.value("corpus_digest", "") << "\n"
                      << "  provider " << manifest.value("provider", "") << ", prompts "
                      << manifest.value("prompt_version", "") << "\n";
            if (manifest.contains("regime"))
                std::cout << "  regime   " << manifest["regime"].get<std::string>() << ", mode "
                          << manifest.value("mode", "") << "\n";
            if (manifest.contains("counts")) std::cout << "  " << summary_line(manifest["counts"]) << "\n";
            if (manifest.contains("usage"))
                std::cout << "  tokens   " << manifest["usage"].value("prompt_tokens", 0) << " prompt, "
                          << manifest["usage"].value("completion_tokens", 0) << " completion over "
                          << manifest["usage"].value("calls", 0) << " calls\n";
            for (const auto& path : re_evals) {
                auto r = json::parse(slurp(path));
                auto sources = r.value("source", json::array());
                if (sources.is_object()) sources = json::array({sources});
                bool matched = false, checked = false;
                for (const auto& s : sources) {
                    if (s.contains("config_digest")) {
                        checked = true;
                        matched |= s["config_digest"] == cfg;
                    } else if (s.contains("run_id") && !s["run_id"].get<std::string>().empty()) {
                        checked = true;
                        matched |= s["run_id"] == run_id;
                    }
                }
                if (checked && !matched)
                    fail(AFORT_ERR_DATA, "config digest mismatch: " + path + " was not computed from run " + run_id);
                std::cout << "\n== " << r.value("kind", "report") << " (" << path << ")\n"
                          << r.value("text", "");
            }
        }
    } catch (const Failure& f) {
        std::cerr << json{{"error", afort_status_name(f.status)}, {"message", f.message}}.dump() << "\n";
        return f.status == AFORT_ERR_USAGE ? 1 : f.status == AFORT_ERR_PROVIDER ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }
    return 0;
}
