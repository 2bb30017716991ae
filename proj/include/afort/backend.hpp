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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afort/error.hpp"
#include "afort/prompt_kit.hpp"
#include "afort/types.hpp"
#include "json.hpp"

namespace afort {

struct GenerationParams {
    double temperature = 0.3;
    double top_p = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    std::size_t window = 16384;
    std::string model_name = "gpt-3.5-turbo-16k-0613";

    // Throws UsageError naming the first out-of-range field.
    void validate() const;
    std::string digest() const;
};

// Validating constructor; the only way the CLI and C API build params.
GenerationParams make_params(double temperature = 0.3, double top_p = 1.0, double frequency_penalty = 0.0,
                             double presence_penalty = 0.0, std::size_t window = 16384,
                             std::string model_name = "gpt-3.5-turbo-16k-0613");
nlohmann::json to_json(const GenerationParams& p);
// Missing keys keep their defaults; the result is validated.
GenerationParams params_from_json(const nlohmann::json& j);

struct ProviderMeta {
    std::string provider;
    std::string request_id;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    int attempts = 0;
    bool cached = false;
};

struct ModelResponse {
    std::string raw_text;
    std::optional<StructuredOutput> parsed;
    std::string parse_error;
    ProviderMeta meta;
};

struct ProviderRequest {
    std::string record_id;
    Task task = Task::Interpret;
    std::string prompt;
    std::string prompt_digest;
    GenerationParams params;
};

struct ProviderReply {
    std::string raw_text;
    std::string request_id;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

// Generation backend. Implementations throw TransientError for retryable
// failures and ProviderError for fatal ones. Must be callable concurrently.
class GenerationProvider {
public:
    virtual ~GenerationProvider() = default;
    virtual std::string name() const = 0;
    virtual ProviderReply generate(const ProviderRequest& request) = 0;
    std::size_t calls() const { return calls_.load(); }

protected:
    std::atomic<std::size_t> calls_{0};
};

// Replays canned responses. Lookup order: prompt digest, then
// "<record_id>/<task>", then "<record_id>", then the default response.
class ScriptedProvider final : public GenerationProvider {
public:
    ScriptedProvider() = default;
    // JSON lines: {"prompt_digest"|"record_id": ..., "task"?: ..., "response": string|object}.
    static std::unique_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

    void add(std::string key, std::string raw_text);
    void set_default(std::string raw_text) { default_ = std::move(raw_text); }
    std::size_t size() const { return script_.size(); }

    std::string name() const override { return "scripted"; }
    ProviderReply generate(const ProviderRequest& request) override;

private:
    std::map<std::string, std::string> script_;
    std::optional<std::string> default_;
};

// Answers every request with a well-formed AF payload whose long
// explanation is the prompt itself. Used to test what reaches the model.
class EchoProvider final : public GenerationProvider {
public:
    std::string name() const override { return "echo"; }
    ProviderReply generate(const ProviderRequest& request) override;
};

struct HttpEndpoint {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string api_key;
    std::string model;
    int timeout_seconds = 60;
};

// Reads AFORT_API_KEY, AFORT_BASE_URL and AFORT_MODEL (embedding
// variants use AFORT_EMBED_MODEL). Missing key is allowed for local servers.
HttpEndpoint endpoint_from_env(bool embedding = false);

// Chat-completion provider speaking the OpenAI-compatible protocol. Asks for
// the payload through a forced function call and falls back to message
// content when the server ignores it.
class ChatCompletionProvider final : public GenerationProvider {
public:
    explicit ChatCompletionProvider(HttpEndpoint endpoint);
    std::string name() const override { return "chat-completion"; }
    ProviderReply generate(const ProviderRequest& request) override;

private:
    HttpEndpoint endpoint_;
};

// Content-addressed response cache: one JSON file per key.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);
    static std::string key(std::string_view rendered, const GenerationParams& params);
    std::optional<ProviderReply> get(const std::string& key) const;
    void put(const std::string& key, const ProviderReply& reply);

private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
};

// Append-only JSON-lines log. Appends are serialized; each line is flushed
// before append returns.
class RunStore {
public:
    explicit RunStore(std::filesystem::path path);
    void append(const nlohmann::json& entry);
    const std::filesystem::path& path() const { return path_; }
    static std::vector<nlohmann::json> read(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::mutex mu_;
    std::ofstream out_;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{8000};
};

// Reported token usage; estimated from the prompt when the provider is silent.
struct TokenUsage {
    std::atomic<std::size_t> calls{0};
    std::atomic<std::size_t> cached{0};
    std::atomic<std::size_t> prompt_tokens{0};
    std::atomic<std::size_t> completion_tokens{0};
};

struct CompletionContext {
    ResponseCache* cache = nullptr;
    RunStore* store = nullptr;
    RetryPolicy retry;
    std::size_t reserve_out = 1600;
    std::string run_id;
    // Replaced in tests to avoid real sleeping.
    std::function<void(std::chrono::milliseconds)> sleep;
    std::vector<std::string> refusal_phrases;
    TokenUsage usage;
};

// Budget check, cache lookup, provider call with backoff, parse, log.
ModelResponse complete(const PromptBundle& bundle, const GenerationParams& params, GenerationProvider& provider,
                       CompletionContext& ctx);

struct ParseError : DataError {
    ParseError(const std::string& what, std::size_t offset) : DataError(what), offset(offset) {}
    std::size_t offset;
};

const std::vector<std::string>& default_refusal_phrases();

// Maps a raw model payload onto StructuredOutput. Throws ParseError.
StructuredOutput parse_structured_output(std::string_view raw, Task task = Task::Interpret,
                                         const std::vector<std::string>& refusal_phrases = default_refusal_phrases());

// Soft constraint checks; violations are reported, never enforced.
std::vector<std::string> validate_output(const StructuredOutput& out, Task task);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    // Unit-length vector. Throws DataError for empty input.
    virtual std::vector<double> embed(std::string_view text) = 0;
};

// Deterministic stub: FNV-1a 64 of each normalized token modulo `dim`
// selects a bucket; bucket counts are L2-normalized.
class HashedBowEmbedder final : public Embedder {
public:
    explicit HashedBowEmbedder(std::size_t dim = 1024) : dim_(dim) {}
    std::string name() const override { return "hashed-bow"; }
    std::vector<double> embed(std::string_view text) override;
    static std::uint64_t fnv1a64(std::string_view token);

private:
    std::size_t dim_;
};

// OpenAI-compatible /embeddings endpoint.
class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(HttpEndpoint endpoint);
    std::string name() const override { return "http-embedding"; }
    std::vector<double> embed(std::string_view text) override;

private:
    HttpEndpoint endpoint_;
};

// Throws DataError on dimension mismatch or a zero vector.
double cosine(const std::vector<double>& u, const std::vector<double>& v);

}  // namespace afort
