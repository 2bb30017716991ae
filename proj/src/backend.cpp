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

#include "afort/backend.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "afort/util.hpp"
#include "httplib.h"

namespace afort {

// ---------------------------------------------------------------------------
// Parameters

void GenerationParams::validate() const {
    auto range = [](const char* field, double v, double lo, double hi, bool lo_open) {
        bool ok = std::isfinite(v) && v <= hi && (lo_open ? v > lo : v >= lo);
        if (!ok) {
            std::ostringstream msg;
            msg << "parameter " << field << " = " << v << " out of range " << (lo_open ? "(" : "[") << lo << ","
                << hi << "]";
            throw UsageError(msg.str());
        }
    };
    range("temperature", temperature, 0.0, 2.0, false);
    range("top_p", top_p, 0.0, 1.0, true);
    range("frequency_penalty", frequency_penalty, -2.0, 2.0, false);
    range("presence_penalty", presence_penalty, -2.0, 2.0, false);
    if (window == 0) throw UsageError("parameter window must be positive");
    if (model_name.empty()) throw UsageError("parameter model_name must not be empty");
}

std::string GenerationParams::digest() const { return sha256_hex(to_json(*this).dump()); }

GenerationParams make_params(double temperature, double top_p, double frequency_penalty, double presence_penalty,
                             std::size_t window, std::string model_name) {
    GenerationParams p;
    p.temperature = temperature;
    p.top_p = top_p;
    p.frequency_penalty = frequency_penalty;
    p.presence_penalty = presence_penalty;
    p.window = window;
    p.model_name = std::move(model_name);
    p.validate();
    return p;
}

nlohmann::json to_json(const GenerationParams& p) {
    return {{"temperature", p.temperature},
            {"top_p", p.top_p},
            {"frequency_penalty", p.frequency_penalty},
            {"presence_penalty", p.presence_penalty},
            {"window", p.window},
            {"model_name", p.model_name}};
}

GenerationParams params_from_json(const nlohmann::json& j) {
    GenerationParams p;
    try {
        if (j.contains("temperature")) p.temperature = j.at("temperature").get<double>();
        if (j.contains("top_p")) p.top_p = j.at("top_p").get<double>();
        if (j.contains("frequency_penalty")) p.frequency_penalty = j.at("frequency_penalty").get<double>();
        if (j.contains("presence_penalty")) p.presence_penalty = j.at("presence_penalty").get<double>();
        if (j.contains("window")) p.window = j.at("window").get<std::size_t>();
        if (j.contains("model_name")) p.model_name = j.at("model_name").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("malformed generation params: ") + e.what());
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Providers

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
    auto p = std::make_unique<ScriptedProvider>();
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
        if (!j.contains("response")) throw DataError(path.string() + ":" + std::to_string(n) + ": missing response");
        const auto& r = j.at("response");
        std::string raw = r.is_string() ? r.get<std::string>() : r.dump();
        if (j.value("default", false)) {
            p->set_default(raw);
        } else if (j.contains("prompt_digest")) {
            p->add(j.at("prompt_digest").get<std::string>(), raw);
        } else if (j.contains("record_id")) {
            std::string key = j.at("record_id").get<std::string>();
            if (j.contains("task")) key += "/" + j.at("task").get<std::string>();
            p->add(key, raw);
        } else {
            throw DataError(path.string() + ":" + std::to_string(n) + ": entry needs prompt_digest or record_id");
        }
    }
    return p;
}

void ScriptedProvider::add(std::string key, std::string raw_text) { script_[std::move(key)] = std::move(raw_text); }

ProviderReply ScriptedProvider::generate(const ProviderRequest& request) {
    ++calls_;
    for (const std::string& key :
         {request.prompt_digest, request.record_id + "/" + to_string(request.task), request.record_id}) {
        auto it = script_.find(key);
        if (it != script_.end()) return {it->second, "scripted:" + key, estimate_tokens(request.prompt), 0};
    }
    if (default_) return {*default_, "scripted:default", estimate_tokens(request.prompt), 0};
    throw ProviderError("no scripted response for record " + request.record_id + " task " + to_string(request.task));
}

ProviderReply EchoProvider::generate(const ProviderRequest& request) {
    ++calls_;
    nlohmann::json j = {{"verdict", "AF"},
                        {"correlate", "echo"},
                        {"remnant", "echo"},
                        {"correlate_more_likely", true},
                        {"likelihood_rationale", "echo"},
                        {"sentence_type", "Undefined"},
                        {"logic_category", "Undefined"},
                        {"property1", "echo"},
                        {"short_explanation", "Echo."},
                        {"long_explanation", request.prompt}};
    if (request.task == Task::Augment) {
        j["topic"] = "echo";
        j["new_topic"] = "echo";
        j["new_sentence"] = "Echo, let alone echo.";
    }
    return {j.dump(), "echo", estimate_tokens(request.prompt), 0};
}

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw UsageError("base URL needs a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    SplitUrl s;
    s.origin = url.substr(0, slash);
    s.prefix = slash == std::string::npos ? "" : url.substr(slash);
    while (!s.prefix.empty() && s.prefix.back() == '/') s.prefix.pop_back();
    return s;
}

// Posts JSON and classifies failures. Returns the parsed body.
nlohmann::json post_json(const HttpEndpoint& ep, const std::string& path, const nlohmann::json& body,
                         std::string* request_id) {
    auto url = split_url(ep.base_url);
    httplib::Client cli(url.origin);
    cli.set_connection_timeout(ep.timeout_seconds, 0);
    cli.set_read_timeout(ep.timeout_seconds, 0);
    cli.set_write_timeout(ep.timeout_seconds, 0);
    httplib::Headers headers;
    if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);
    auto res = cli.Post(url.prefix + path, headers, body.dump(), "application/json");
    if (!res) throw TransientError("transport error: " + httplib::to_string(res.error()));
    int status = res->status;
    if (status == 401 || status == 403) throw ProviderError("authentication failed (HTTP " + std::to_string(status) + ")");
    if (status == 429 || status >= 500)
        throw TransientError("provider returned HTTP " + std::to_string(status));
    if (status < 200 || status >= 300)
        throw ProviderError("provider returned HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    if (request_id) {
        *request_id = res->get_header_value("x-request-id");
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
        throw ProviderError("provider returned a non-JSON body");
    }
}

nlohmann::json output_schema(Task task) {
    nlohmann::json props = {{"verdict", {{"type", "string"}, {"enum", {"AF", "NAF", "Unknown"}}}}};
    std::vector<std::string> required = {"verdict"};
    if (task != Task::Identify) {
        for (const char* k : {"correlate", "remnant", "likelihood_rationale", "sentence_type", "logic_category",
                              "property1", "property2", "short_explanation", "long_explanation"})
            props[k] = {{"type", "string"}};
        props["correlate_more_likely"] = {{"type", "boolean"}};
        required.insert(required.end(), {"correlate", "remnant", "short_explanation", "long_explanation"});
    }
    if (task == Task::Augment) {
        for (const char* k : {"topic", "new_topic", "new_sentence"}) {
            props[k] = {{"type", "string"}};
            required.push_back(k);
        }
    }
    return {{"type", "object"}, {"properties", props}, {"required", required}};
}

}  // namespace

HttpEndpoint endpoint_from_env(bool embedding) {
    HttpEndpoint ep;
    ep.base_url = env_or("AFORT_BASE_URL", "https://api.openai.com/v1");
    ep.api_key = env_or("AFORT_API_KEY", "");
    ep.model = embedding ? env_or("AFORT_EMBED_MODEL", "text-embedding-ada-002")
                         : env_or("AFORT_MODEL", "gpt-3.5-turbo-16k-0613");
    return ep;
}

ChatCompletionProvider::ChatCompletionProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    split_url(endpoint_.base_url);
}

ProviderReply ChatCompletionProvider::generate(const ProviderRequest& request) {
    ++calls_;
    const auto& p = request.params;
    nlohmann::json body = {
        {"model", endpoint_.model.empty() ? p.model_name : endpoint_.model},
        {"messages", {{{"role", "user"}, {"content", request.prompt}}}},
        {"temperature", p.temperature},
        {"top_p", p.top_p},
        {"frequency_penalty", p.frequency_penalty},
        {"presence_penalty", p.presence_penalty},
        {"functions", {{{"name", "submit_analysis"}, {"parameters", output_schema(request.task)}}}},
        {"function_call", {{"name", "submit_analysis"}}},
    };
    ProviderReply reply;
    auto j = post_json(endpoint_, "/chat/completions", body, &reply.request_id);
    try {
        const auto& msg = j.at("choices").at(0).at("message");
        if (msg.contains("function_call") && msg["function_call"].contains("arguments"))
            reply.raw_text = msg["function_call"]["arguments"].get<std::string>();
        else
            reply.raw_text = msg.value("content", std::string());
        if (reply.request_id.empty()) reply.request_id = j.value("id", std::string());
        if (j.contains("usage")) {
            reply.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            reply.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected chat-completion response: ") + e.what());
    }
    return reply;
}

// ---------------------------------------------------------------------------
// Cache and run store

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::string ResponseCache::key(std::string_view rendered, const GenerationParams& params) {
    std::string material(rendered);
    material += '\x1f';
    material += params.digest();
    return sha256_hex(material);
}

std::optional<ProviderReply> ResponseCache::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto path = dir_ / (key + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
        auto j = nlohmann::json::parse(read_file(path));
        return ProviderReply{j.at("raw_text").get<std::string>(), j.value("request_id", std::string()),
                             j.value("prompt_tokens", std::size_t{0}), j.value("completion_tokens", std::size_t{0})};
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

void ResponseCache::put(const std::string& key, const ProviderReply& reply) {
    std::lock_guard lock(mu_);
    nlohmann::json j = {{"raw_text", reply.raw_text},
                        {"request_id", reply.request_id},
                        {"prompt_tokens", reply.prompt_tokens},
                        {"completion_tokens", reply.completion_tokens}};
    write_file_atomic(dir_ / (key + ".json"), j.dump());
}

RunStore::RunStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw IoError("cannot open run store " + path_.string());
}

void RunStore::append(const nlohmann::json& entry) {
    std::string line = entry.dump() + "\n";
    std::lock_guard lock(mu_);
    out_ << line;
    out_.flush();
    if (!out_) throw IoError("write failed on run store " + path_.string());
}

std::vector<nlohmann::json> RunStore::read(const std::filesystem::path& path) {
    std::vector<nlohmann::json> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ": corrupt line: " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// complete

ModelResponse complete(const PromptBundle& bundle, const GenerationParams& params, GenerationProvider& provider,
                       CompletionContext& ctx) {
    params.validate();
    auto budget = check_budget(bundle, bundle.input_tokens, ctx.reserve_out, params.window);
    if (!budget.pass)
        throw BudgetError("budget violation: requires " + std::to_string(budget.required) + " tokens, window " +
                          std::to_string(budget.window) + ", over by " + std::to_string(budget.overflow));

    ProviderRequest req{bundle.record_id, bundle.task, bundle.rendered, bundle.digest(), params};
    ModelResponse resp;
    resp.meta.provider = provider.name();
    std::string cache_key = ResponseCache::key(bundle.rendered, params);
    std::optional<ProviderReply> reply;
    if (ctx.cache) {
        reply = ctx.cache->get(cache_key);
        resp.meta.cached = reply.has_value();
    }
    if (!reply) {
        auto delay = ctx.retry.base_delay;
        for (int attempt = 0;; ++attempt) {
            resp.meta.attempts = attempt + 1;
            try {
                reply = provider.generate(req);
                break;
            } catch (const TransientError& e) {
                if (attempt >= ctx.retry.max_retries)
                    throw ProviderError("retries exhausted after " + std::to_string(attempt + 1) +
                                        " attempts: " + e.what());
                if (ctx.sleep)
                    ctx.sleep(delay);
                else
                    std::this_thread::sleep_for(delay);
                delay = std::min(delay * 2, ctx.retry.max_delay);
            }
        }
        if (ctx.cache) ctx.cache->put(cache_key, *reply);
    }
    resp.raw_text = reply->raw_text;
    resp.meta.request_id = reply->request_id;
    resp.meta.prompt_tokens = reply->prompt_tokens;
    resp.meta.completion_tokens = reply->completion_tokens;
    ctx.usage.calls++;
    if (resp.meta.cached) ctx.usage.cached++;
    ctx.usage.prompt_tokens += resp.meta.prompt_tokens ? resp.meta.prompt_tokens
                                                       : bundle.token_estimate + bundle.input_tokens;
    ctx.usage.completion_tokens += resp.meta.completion_tokens ? resp.meta.completion_tokens
                                                               : estimate_tokens(resp.raw_text);
    try {
        const auto& phrases = ctx.refusal_phrases.empty() ? default_refusal_phrases() : ctx.refusal_phrases;
        resp.parsed = parse_structured_output(resp.raw_text, bundle.task, phrases);
    } catch (const ParseError& e) {
        resp.parse_error = e.what();
    }
    if (ctx.store) {
        ctx.store->append({{"kind", "call"},
                           {"run_id", ctx.run_id},
                           {"record_id", bundle.record_id},
                           {"task", to_string(bundle.task)},
                           {"prompt_digest", req.prompt_digest},
                           {"params_digest", params.digest()},
                           {"provider", resp.meta.provider},
                           {"request_id", resp.meta.request_id},
                           {"cached", resp.meta.cached},
                           {"attempts", resp.meta.attempts},
                           {"raw_text", resp.raw_text},
                           {"parse_error", resp.parse_error}});
    }
    return resp;
}

// ---------------------------------------------------------------------------
// Structured output

const std::vector<std::string>& default_refusal_phrases() {
    static const std::vector<std::string> phrases = {
        "not possible to determine",
        "cannot be determined",
        "unable to determine",
        "impossible to determine",
    };
    return phrases;
}

namespace {

bool is_refusal(std::string_view text, const std::vector<std::string>& phrases) {
    for (const auto& p : phrases)
        if (icontains(text, p)) return true;
    return false;
}

std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    const auto& v = j.at(key);
    if (!v.is_string()) throw ParseError(std::string("field '") + key + "' is not a string", 0);
    return v.get<std::string>();
}

}  // namespace

StructuredOutput parse_structured_output(std::string_view raw, Task task,
                                         const std::vector<std::string>& refusal_phrases) {
    StructuredOutput out;
    auto refusal = [&] {
        StructuredOutput r;
        r.verdict = Verdict::Unknown;
        r.refusal = true;
        r.long_explanation = std::string(raw);
        return r;
    };
    auto open = raw.find('{');
    if (open == std::string_view::npos) {
        if (is_refusal(raw, refusal_phrases)) return refusal();
        throw ParseError("non-JSON payload", 0);
    }
    auto close = raw.rfind('}');
    std::string_view body =
        close == std::string_view::npos || close < open ? raw.substr(open) : raw.substr(open, close - open + 1);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        if (is_refusal(raw, refusal_phrases)) return refusal();
        std::size_t offset = open + (e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError("malformed JSON at byte offset " + std::to_string(offset), offset);
    }
    if (!j.is_object()) throw ParseError("payload is not a JSON object", open);

    auto verdict_text = opt_string(j, "verdict");
    if (!verdict_text) throw ParseError("missing mandatory field 'verdict'", open);
    if (auto v = parse_verdict(*verdict_text)) {
        out.verdict = *v;
    } else if (is_refusal(*verdict_text, refusal_phrases)) {
        out.verdict = Verdict::Unknown;
        out.refusal = true;
    } else {
        throw ParseError("unrecognized verdict '" + *verdict_text + "'", open);
    }

    out.correlate = opt_string(j, "correlate");
    out.remnant = opt_string(j, "remnant");
    if (j.contains("correlate_more_likely") && !j["correlate_more_likely"].is_null()) {
        const auto& v = j["correlate_more_likely"];
        if (v.is_boolean()) {
            out.correlate_more_likely = v.get<bool>();
        } else if (v.is_string()) {
            auto s = to_lower(trim(v.get<std::string>()));
            if (s == "yes" || s == "true") out.correlate_more_likely = true;
            else if (s == "no" || s == "false") out.correlate_more_likely = false;
        }
    }
    out.likelihood_rationale = opt_string(j, "likelihood_rationale");
    if (auto s = opt_string(j, "sentence_type")) out.sentence_type = parse_sentence_type(trim(*s)).value_or(SentenceType::Undefined);
    if (auto s = opt_string(j, "logic_category")) out.logic_category = parse_logic_category(trim(*s)).value_or(LogicCategory::Undefined);
    out.property1 = opt_string(j, "property1");
    out.property2 = opt_string(j, "property2");
    out.short_explanation = opt_string(j, "short_explanation").value_or("");
    out.long_explanation = opt_string(j, "long_explanation").value_or("");
    out.topic = opt_string(j, "topic");
    out.new_topic = opt_string(j, "new_topic");
    out.new_sentence = opt_string(j, "new_sentence");

    if (out.verdict == Verdict::AF && task != Task::Identify) {
        if (!out.correlate) throw ParseError("missing mandatory field 'correlate'", open);
        if (!out.remnant) throw ParseError("missing mandatory field 'remnant'", open);
    }
    if (task == Task::Augment) {
        for (auto [name, field] : {std::pair{"new_sentence", &out.new_sentence}, std::pair{"topic", &out.topic},
                                   std::pair{"new_topic", &out.new_topic}})
            if (!*field) throw ParseError(std::string("missing mandatory field '") + name + "'", open);
    }
    return out;
}

std::vector<std::string> validate_output(const StructuredOutput& out, Task task) {
    std::vector<std::string> w;
    if (task == Task::Identify || out.refusal) return w;
    if (out.verdict == Verdict::AF || !out.short_explanation.empty()) {
        std::size_t s = count_sentences(out.short_explanation);
        if (s != 1) w.push_back("short_explanation has " + std::to_string(s) + " sentences, expected 1");
        std::size_t l = count_sentences(out.long_explanation);
        if (l > 3) w.push_back("long_explanation has " + std::to_string(l) + " sentences, expected at most 3");
        if (l == 0) w.push_back("long_explanation is empty");
    }
    bool has_property = (out.property1 && !trim(*out.property1).empty()) ||
                        (out.property2 && !trim(*out.property2).empty());
    if (out.verdict == Verdict::AF && !has_property) w.push_back("no property produced");
    return w;
}

// ---------------------------------------------------------------------------
// Embeddings

std::uint64_t HashedBowEmbedder::fnv1a64(std::string_view token) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : token) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<double> HashedBowEmbedder::embed(std::string_view text) {
    auto tokens = normalized_tokens(text);
    if (tokens.empty()) throw DataError("cannot embed empty text");
    std::vector<double> v(dim_, 0.0);
    for (const auto& t : tokens) v[fnv1a64(t) % dim_] += 1.0;
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) { split_url(endpoint_.base_url); }

std::vector<double> HttpEmbedder::embed(std::string_view text) {
    if (trim(text).empty()) throw DataError("cannot embed empty text");
    auto j = post_json(endpoint_, "/embeddings", {{"model", endpoint_.model}, {"input", std::string(text)}}, nullptr);
    std::vector<double> v;
    try {
        v = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected embeddings response: ") + e.what());
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    if (norm == 0) throw ProviderError("embedding provider returned a zero vector");
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size())
        throw DataError("dimension mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0 || nv == 0) throw DataError("cosine of a zero vector");
    double c = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(c, -1.0, 1.0);
}

}  // namespace afort
