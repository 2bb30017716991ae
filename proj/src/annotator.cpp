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

#include "afort/annotator.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <set>
#include <sstream>

#include "afort/error.hpp"
#include "httplib.h"

namespace afort {

std::vector<JudgmentTarget> AnnotationItem::targets() const {
    std::vector<JudgmentTarget> t;
    if (!properties.empty()) t.push_back(JudgmentTarget::Property1);
    if (properties.size() > 1) t.push_back(JudgmentTarget::Property2);
    if (!short_explanation.empty()) t.push_back(JudgmentTarget::ShortExplanation);
    return t;
}

nlohmann::json to_json(const AnnotationItem& i) {
    auto span = [](const std::optional<Span>& s) {
        return s ? nlohmann::json{{"start", s->start}, {"end", s->end}} : nlohmann::json();
    };
    nlohmann::json criteria = nlohmann::json::object();
    for (auto t : i.targets()) {
        nlohmann::json list = nlohmann::json::array();
        for (auto c : {Criterion::Novelty, Criterion::Relevance, Criterion::LogicalValidity, Criterion::Completeness,
                       Criterion::Pertinence})
            if (criterion_applies(t, c)) list.push_back(to_string(c));
        criteria[to_string(t)] = list;
    }
    return {{"item_id", i.item_id},
            {"text", i.text},
            {"regime", to_string(i.regime)},
            {"correlate", span(i.correlate)},
            {"remnant", span(i.remnant)},
            {"spans_source", i.spans_source},
            {"properties", i.properties},
            {"short_explanation", i.short_explanation},
            {"criteria", criteria}};
}

AnnotationItem annotation_item_from_json(const nlohmann::json& j) {
    AnnotationItem i;
    auto span = [](const nlohmann::json& s) -> std::optional<Span> {
        if (s.is_null()) return std::nullopt;
        return Span{s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()};
    };
    i.item_id = j.at("item_id").get<std::string>();
    i.text = j.at("text").get<std::string>();
    i.regime = parse_regime(j.value("regime", std::string("without-info")));
    if (j.contains("correlate")) i.correlate = span(j["correlate"]);
    if (j.contains("remnant")) i.remnant = span(j["remnant"]);
    i.spans_source = j.value("spans_source", std::string());
    i.properties = j.value("properties", std::vector<std::string>{});
    i.short_explanation = j.value("short_explanation", std::string());
    return i;
}

nlohmann::json to_json(const Campaign& c) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& i : c.items) items.push_back(to_json(i));
    return {{"id", c.id},
            {"evaluation_set_id", c.evaluation_set_id},
            {"run_id", c.run_id},
            {"annotators", c.annotators},
            {"status", c.status},
            {"token", c.token},
            {"items", items}};
}

Campaign campaign_from_json(const nlohmann::json& j) {
    Campaign c;
    try {
        c.id = j.at("id").get<std::string>();
        c.evaluation_set_id = j.value("evaluation_set_id", std::string());
        c.run_id = j.value("run_id", std::string());
        c.annotators = j.at("annotators").get<std::vector<std::string>>();
        c.status = j.value("status", std::string("open"));
        c.token = j.value("token", std::string());
        for (const auto& i : j.at("items")) c.items.push_back(annotation_item_from_json(i));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed campaign: ") + e.what());
    }
    if (c.id.empty() || c.id.find('/') != std::string::npos) throw DataError("invalid campaign id '" + c.id + "'");
    if (c.annotators.empty()) throw DataError("campaign " + c.id + " has no annotators");
    return c;
}

Campaign build_campaign(std::string id, const EvaluationSet& set, const std::vector<ArgumentRecord>& records,
                        const std::vector<InterpretationResult>& results, std::vector<std::string> annotators,
                        std::string run_id) {
    std::map<std::string, const ArgumentRecord*> rec;
    for (const auto& r : records) rec[r.id] = &r;
    std::map<std::string, const InterpretationResult*> res;
    for (const auto& r : results) res[r.record_id] = &r;
    Campaign c;
    c.id = std::move(id);
    c.evaluation_set_id = sha256_hex(to_json(set).dump()).substr(0, 16);
    c.run_id = std::move(run_id);
    c.annotators = std::move(annotators);
    for (const auto& item_id : set.record_ids) {
        auto r = rec.find(item_id);
        if (r == rec.end()) throw DataError("evaluation set item " + item_id + " missing from corpus");
        AnnotationItem item;
        item.item_id = item_id;
        item.text = r->second->text;
        auto p = res.find(item_id);
        if (p != res.end()) {
            item.regime = p->second->regime;
            item.properties = p->second->properties;
            item.short_explanation = p->second->short_explanation;
        }
        if (r->second->correlate && r->second->remnant) {
            item.correlate = r->second->correlate;
            item.remnant = r->second->remnant;
            item.spans_source = "gold";
        } else if (p != res.end() && p->second->correlate && p->second->remnant) {
            auto cs = utf8_find(item.text, *p->second->correlate);
            auto rs = utf8_find(item.text, *p->second->remnant);
            if (cs != std::string::npos && rs != std::string::npos) {
                item.correlate = Span{cs, cs + utf8_length(*p->second->correlate)};
                item.remnant = Span{rs, rs + utf8_length(*p->second->remnant)};
                item.spans_source = "prediction";
            }
        }
        c.items.push_back(std::move(item));
    }
    if (c.annotators.empty()) throw UsageError("campaign needs at least one annotator");
    return c;
}

// ---------------------------------------------------------------------------
// Store

AnnotationStore::AnnotationStore(std::filesystem::path dir, Clock& clock) : dir_(std::move(dir)), clock_(clock) {
    std::error_code ec;
    std::filesystem::create_directories(dir_ / "campaigns", ec);
    std::filesystem::create_directories(dir_ / "judgments", ec);
    if (ec) throw IoError("cannot create store " + dir_.string() + ": " + ec.message());
    auto lock_path = dir_ / "store.lock";
    lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (lock_fd_ < 0) throw IoError("cannot open " + lock_path.string() + ": " + std::strerror(errno));
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(lock_fd_);
        lock_fd_ = -1;
        throw IoError("store lock conflict: " + dir_.string() + " is in use by another process");
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir_ / "campaigns")) {
        if (entry.path().extension() != ".json") continue;
        Campaign c;
        try {
            c = campaign_from_json(nlohmann::json::parse(read_file(entry.path())));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(entry.path().string() + ": " + e.what());
        }
        auto id = c.id;
        campaigns_[id] = std::move(c);
        auto& js = judgments_[id];
        auto jp = judgment_path(id);
        if (std::filesystem::exists(jp)) {
            std::istringstream in(read_file(jp));
            std::string line;
            while (std::getline(in, line)) {
                if (trim(line).empty()) continue;
                try {
                    js.push_back(judgment_from_json(nlohmann::json::parse(line)));
                } catch (const nlohmann::json::parse_error&) {
                    // A torn final line from a crash mid-append; earlier lines are intact.
                    break;
                }
            }
        }
    }
}

AnnotationStore::~AnnotationStore() {
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
    }
}

std::filesystem::path AnnotationStore::judgment_path(const std::string& id) const {
    return dir_ / "judgments" / (id + ".jsonl");
}

void AnnotationStore::register_campaign(const Campaign& c) {
    std::unique_lock lock(mu_);
    auto it = campaigns_.find(c.id);
    if (it != campaigns_.end()) {
        auto ids = [](const Campaign& x) {
            std::vector<std::string> v;
            for (const auto& i : x.items) v.push_back(i.item_id);
            return v;
        };
        if (ids(it->second) != ids(c))
            throw DataError("campaign " + c.id + " already exists with a different item list");
        return;
    }
    std::set<std::string> seen;
    for (const auto& i : c.items)
        if (!seen.insert(i.item_id).second) throw DataError("campaign " + c.id + ": duplicate item " + i.item_id);
    write_file_atomic(dir_ / "campaigns" / (c.id + ".json"), to_json(c).dump(2) + "\n");
    campaigns_[c.id] = c;
    judgments_[c.id];
}

std::vector<std::string> AnnotationStore::campaign_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, c] : campaigns_) out.push_back(id);
    return out;
}

const Campaign& AnnotationStore::campaign(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = campaigns_.find(id);
    if (it == campaigns_.end()) throw NotFoundError("unknown campaign " + id);
    return it->second;
}

void AnnotationStore::check_annotator(const Campaign& c, const std::string& annotator) const {
    if (std::find(c.annotators.begin(), c.annotators.end(), annotator) == c.annotators.end())
        throw NotFoundError("annotator " + annotator + " is not on the roster of campaign " + c.id);
}

std::vector<std::string> AnnotationStore::annotator_order(const std::string& campaign_id,
                                                          const std::string& annotator) const {
    const auto& c = campaign(campaign_id);
    check_annotator(c, annotator);
    std::vector<std::string> ids;
    for (const auto& i : c.items) ids.push_back(i.item_id);
    seeded_shuffle(ids, derive_seed(derive_seed(0, campaign_id), annotator));
    return ids;
}

std::optional<AnnotationItem> AnnotationStore::next_task(const std::string& campaign_id,
                                                         const std::string& annotator) const {
    auto order = annotator_order(campaign_id, annotator);
    std::shared_lock lock(mu_);
    std::set<std::string> judged;
    for (const auto& j : judgments_.at(campaign_id))
        if (j.annotator == annotator) judged.insert(j.item_id);
    const auto& c = campaigns_.at(campaign_id);
    for (const auto& id : order) {
        if (judged.count(id)) continue;
        for (const auto& i : c.items)
            if (i.item_id == id) return i;
    }
    return std::nullopt;
}

std::vector<JudgmentRecord> AnnotationStore::submit(const std::string& campaign_id, const std::string& annotator,
                                                    const std::string& item_id,
                                                    const std::vector<JudgmentInput>& judgments) {
    const auto& c = campaign(campaign_id);
    check_annotator(c, annotator);
    const AnnotationItem* item = nullptr;
    for (const auto& i : c.items)
        if (i.item_id == item_id) item = &i;
    if (!item) throw NotFoundError("unknown item " + item_id + " in campaign " + campaign_id);
    if (judgments.empty()) throw UsageError("submission without judgments");
    auto targets = item->targets();
    for (const auto& j : judgments) {
        if (std::find(targets.begin(), targets.end(), j.target) == targets.end())
            throw DataError(std::string("item ") + item_id + " has no " + to_string(j.target));
        if (!criterion_applies(j.target, j.criterion))
            throw DataError(std::string("criterion ") + to_string(j.criterion) + " does not apply to " +
                            to_string(j.target));
    }

    std::unique_lock lock(mu_);
    auto& store = judgments_[campaign_id];
    std::vector<JudgmentRecord> out;
    std::string payload;
    std::string now = clock_.now_iso8601();
    for (const auto& in : judgments) {
        std::uint64_t version = 0;
        for (const auto& j : store)
            if (j.annotator == annotator && j.item_id == item_id && j.target == in.target &&
                j.criterion == in.criterion)
                version = std::max(version, j.version);
        for (const auto& j : out)
            if (j.target == in.target && j.criterion == in.criterion) version = std::max(version, j.version);
        JudgmentRecord r{annotator, item_id, in.target, in.criterion, in.value, version + 1, now};
        payload += to_json(r).dump() + "\n";
        out.push_back(r);
    }
    // One write per submission keeps it all-or-nothing on disk.
    auto path = judgment_path(campaign_id);
    int fd = ::open(path.c_str(), O_CREAT | O_WRONLY | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
    ssize_t n = ::write(fd, payload.data(), payload.size());
    bool ok = n == static_cast<ssize_t>(payload.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw IoError("append failed on " + path.string());
    store.insert(store.end(), out.begin(), out.end());
    return out;
}

std::vector<JudgmentRecord> AnnotationStore::judgments(const std::string& campaign_id) const {
    campaign(campaign_id);
    std::shared_lock lock(mu_);
    return judgments_.at(campaign_id);
}

nlohmann::json AnnotationStore::progress(const std::string& campaign_id) const {
    const auto& c = campaign(campaign_id);
    auto js = judgments(campaign_id);
    nlohmann::json per = nlohmann::json::object();
    for (const auto& a : c.annotators) {
        std::set<std::string> judged;
        for (const auto& j : js)
            if (j.annotator == a) judged.insert(j.item_id);
        per[a] = {{"judged", judged.size()},
                  {"total", c.items.size()},
                  {"fraction", c.items.empty() ? 0.0 : double(judged.size()) / double(c.items.size())}};
    }
    return {{"campaign", campaign_id}, {"items", c.items.size()}, {"annotators", per}};
}

nlohmann::json AnnotationStore::aggregate(const std::string& campaign_id) const {
    const auto& c = campaign(campaign_id);
    std::vector<std::string> ids;
    for (const auto& i : c.items) ids.push_back(i.item_id);
    auto summary = judgment_aggregate(judgments(campaign_id), ids);
    auto j = to_json(summary);
    j["campaign"] = campaign_id;
    j["run_id"] = c.run_id;
    j["progress"] = progress(campaign_id);
    j["agreement_note"] = "inter-annotator agreement is an extension; the source study reports none";
    return j;
}

std::optional<AnnotationItem> AnnotationStore::item(const std::string& item_id, const std::string& campaign_id) const {
    std::shared_lock lock(mu_);
    for (const auto& [id, c] : campaigns_) {
        if (!campaign_id.empty() && id != campaign_id) continue;
        for (const auto& i : c.items)
            if (i.item_id == item_id) return i;
    }
    return std::nullopt;
}

nlohmann::json store_call(AnnotationStore& store, std::string_view op, const nlohmann::json& request) {
    auto str = [&](const char* key) {
        if (!request.contains(key) || !request[key].is_string() || request[key].get<std::string>().empty())
            throw UsageError(std::string("missing ") + key + " parameter");
        return request[key].get<std::string>();
    };
    if (op == "campaigns") return {{"campaigns", store.campaign_ids()}};
    if (op == "next") {
        auto id = str("campaign");
        auto annotator = str("annotator");
        auto task = store.next_task(id, annotator);
        auto progress = store.progress(id)["annotators"][annotator];
        if (!task) return {{"done", true}, {"progress", progress}};
        return {{"done", false}, {"task", to_json(*task)}, {"progress", progress}};
    }
    if (op == "submit") {
        auto id = str("campaign");
        if (!request.contains("judgments") || !request["judgments"].is_array())
            throw UsageError("missing judgments array");
        std::vector<JudgmentInput> inputs;
        for (const auto& j : request["judgments"]) {
            auto t = parse_target(j.at("target").get<std::string>());
            auto c = parse_criterion(j.at("criterion").get<std::string>());
            if (!t) throw DataError("unknown target " + j.at("target").get<std::string>());
            if (!c) throw DataError("unknown criterion " + j.at("criterion").get<std::string>());
            if (!j.at("value").is_boolean()) throw DataError("judgment values must be boolean");
            inputs.push_back({*t, *c, j.at("value").get<bool>()});
        }
        auto stored = store.submit(id, str("annotator"), str("item_id"), inputs);
        nlohmann::json out = nlohmann::json::array();
        for (const auto& s : stored)
            out.push_back(
                {{"target", to_string(s.target)}, {"criterion", to_string(s.criterion)}, {"version", s.version}});
        return {{"stored", out}};
    }
    if (op == "progress") return store.progress(str("campaign"));
    if (op == "aggregate") return store.aggregate(str("campaign"));
    if (op == "item") {
        auto id = str("item_id");
        auto item = store.item(id, request.value("campaign", std::string()));
        if (!item) throw NotFoundError("unknown item " + id);
        return to_json(*item);
    }
    throw UsageError("unknown store operation " + std::string(op));
}

// ---------------------------------------------------------------------------
// HTTP

struct AnnotatorServer::Impl {
    httplib::Server server;
    std::thread thread;
    std::mutex mu;
    std::condition_variable cv;
    bool stopped = false;
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::exception& e) {
    int status = 500;
    std::string kind = "internal";
    if (dynamic_cast<const NotFoundError*>(&e)) {
        status = 404;
        kind = "not_found";
    } else if (auto err = dynamic_cast<const Error*>(&e)) {
        status = err->kind() == ErrorKind::Usage || err->kind() == ErrorKind::Data ? 400 : 500;
        kind = to_string(err->kind());
    } else if (dynamic_cast<const nlohmann::json::exception*>(&e)) {
        status = 400;
        kind = "data";
    }
    send_json(res, status, {{"error", e.what()}, {"kind", kind}});
}

}  // namespace

AnnotatorServer::AnnotatorServer(AnnotationStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>()), store_(store), options_(std::move(options)) {
    auto& srv = impl_->server;
    auto guarded = [](auto fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const std::exception& e) {
                send_error(res, e);
            }
        };
    };
    auto authorize = [this](const std::string& campaign_id, const httplib::Request& req) {
        const auto& c = store_.campaign(campaign_id);
        if (c.token.empty()) return true;
        std::string given = req.get_header_value("X-Campaign-Token");
        if (given.empty()) given = req.get_param_value("token");
        return given == c.token;
    };
    auto denied = [](httplib::Response& res) {
        send_json(res, 401, {{"error", "missing or wrong campaign token"}, {"kind", "auth"}});
    };

    srv.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    }));
    srv.Get("/api/campaigns", guarded([this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, store_call(store_, "campaigns", nlohmann::json::object()));
    }));
    auto campaign_route = [=, this](const char* op) {
        return guarded([=, this](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            if (!authorize(id, req)) return denied(res);
            nlohmann::json body = req.method == "POST" ? nlohmann::json::parse(req.body) : nlohmann::json::object();
            if (!body.is_object()) throw DataError("request body must be a JSON object");
            for (const auto& [k, v] : req.params) body[k] = v;
            body["campaign"] = id;
            send_json(res, 200, store_call(store_, op, body));
        });
    };
    srv.Get(R"(/api/campaigns/([^/]+)/next)", campaign_route("next"));
    srv.Post(R"(/api/campaigns/([^/]+)/judgments)", campaign_route("submit"));
    srv.Get(R"(/api/campaigns/([^/]+)/aggregate)", campaign_route("aggregate"));
    srv.Get(R"(/api/campaigns/([^/]+)/progress)", campaign_route("progress"));
    srv.Get(R"(/api/items/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body = {{"item_id", std::string(req.matches[1])}};
        if (req.has_param("campaign")) body["campaign"] = req.get_param_value("campaign");
        send_json(res, 200, store_call(store_, "item", body));
    }));
    if (!options_.static_dir.empty()) {
        if (!srv.set_mount_point("/", options_.static_dir.string()))
            throw IoError("static directory not found: " + options_.static_dir.string());
    }
}

AnnotatorServer::~AnnotatorServer() { stop(); }

void AnnotatorServer::start() {
    auto& srv = impl_->server;
    srv.set_socket_options([](int sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (options_.port == 0) {
        port_ = srv.bind_to_any_port(options_.host);
        if (port_ < 0) throw IoError("cannot bind " + options_.host);
    } else {
        if (!srv.bind_to_port(options_.host, options_.port))
            throw IoError("port in use: " + options_.host + ":" + std::to_string(options_.port));
        port_ = options_.port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    srv.wait_until_ready();
}

void AnnotatorServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
    {
        std::lock_guard lock(impl_->mu);
        impl_->stopped = true;
    }
    impl_->cv.notify_all();
}

void AnnotatorServer::wait() {
    std::unique_lock lock(impl_->mu);
    impl_->cv.wait(lock, [this] { return impl_->stopped; });
}

}  // namespace afort
