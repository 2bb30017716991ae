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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "afort/evaluate.hpp"
#include "afort/util.hpp"
#include "json.hpp"

namespace afort {

struct AnnotationItem {
    std::string item_id;
    std::string text;
    Regime regime = Regime::WithoutExternalInfo;
    // Highlight spans in code points; `spans_source` says whether they are
    // the gold annotation or the prediction.
    std::optional<Span> correlate;
    std::optional<Span> remnant;
    std::string spans_source;
    std::vector<std::string> properties;
    std::string short_explanation;

    std::vector<JudgmentTarget> targets() const;
};

nlohmann::json to_json(const AnnotationItem& i);
AnnotationItem annotation_item_from_json(const nlohmann::json& j);

struct Campaign {
    std::string id;
    std::string evaluation_set_id;
    std::string run_id;
    std::vector<std::string> annotators;
    std::string status = "open";
    // Optional shared token; empty disables the check.
    std::string token;
    std::vector<AnnotationItem> items;
};

nlohmann::json to_json(const Campaign& c);
Campaign campaign_from_json(const nlohmann::json& j);

// Materializes the judged items: each evaluation-set record paired with its
// result from the run being judged.
Campaign build_campaign(std::string id, const EvaluationSet& set, const std::vector<ArgumentRecord>& records,
                        const std::vector<InterpretationResult>& results, std::vector<std::string> annotators,
                        std::string run_id);

struct JudgmentInput {
    JudgmentTarget target;
    Criterion criterion;
    bool value;
};

// Directory store: campaigns/<id>.json (immutable item lists) and
// judgments/<id>.jsonl (append-only). Holds an exclusive lock file while
// open. Thread-safe.
class AnnotationStore {
public:
    AnnotationStore(std::filesystem::path dir, Clock& clock);
    ~AnnotationStore();
    AnnotationStore(const AnnotationStore&) = delete;
    AnnotationStore& operator=(const AnnotationStore&) = delete;

    // Registers a campaign; an existing campaign with a different item list
    // is a DataError.
    void register_campaign(const Campaign& c);
    std::vector<std::string> campaign_ids() const;
    const Campaign& campaign(const std::string& id) const;

    // Item order for one annotator, seeded by campaign and annotator id.
    std::vector<std::string> annotator_order(const std::string& campaign_id, const std::string& annotator) const;
    std::optional<AnnotationItem> next_task(const std::string& campaign_id, const std::string& annotator) const;
    std::vector<JudgmentRecord> submit(const std::string& campaign_id, const std::string& annotator,
                                       const std::string& item_id, const std::vector<JudgmentInput>& judgments);
    std::vector<JudgmentRecord> judgments(const std::string& campaign_id) const;
    nlohmann::json progress(const std::string& campaign_id) const;
    nlohmann::json aggregate(const std::string& campaign_id) const;
    std::optional<AnnotationItem> item(const std::string& item_id, const std::string& campaign_id = {}) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    void check_annotator(const Campaign& c, const std::string& annotator) const;
    std::filesystem::path judgment_path(const std::string& id) const;

    std::filesystem::path dir_;
    Clock& clock_;
    mutable std::shared_mutex mu_;
    std::map<std::string, Campaign> campaigns_;
    std::map<std::string, std::vector<JudgmentRecord>> judgments_;
    int lock_fd_ = -1;
};

// JSON-level form of the store operations, shared by the HTTP routes and
// the C API. op: campaigns, next, submit, progress, aggregate, item.
nlohmann::json store_call(AnnotationStore& store, std::string_view op, const nlohmann::json& request);

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path static_dir;  // optional UI assets
};

// HTTP front end for an AnnotationStore.
class AnnotatorServer {
public:
    AnnotatorServer(AnnotationStore& store, ServerOptions options);
    ~AnnotatorServer();
    // Binds and starts serving on a background thread. Throws IoError when
    // the port is unavailable.
    void start();
    int port() const { return port_; }
    void stop();
    // Blocks until stop() is called from elsewhere.
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    AnnotationStore& store_;
    ServerOptions options_;
    int port_ = 0;
};

}  // namespace afort
