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

/*
 * C interface to the afort library.
 *
 * Handles are opaque. Every fallible call returns an afort_status; on
 * failure afort_last_error() describes the problem on the calling thread.
 * Structured values cross the boundary as UTF-8 JSON. Strings returned
 * through `char**` out parameters are owned by the caller and released
 * with afort_string_free().
 */
#ifndef AFORT_AFORT_H
#define AFORT_AFORT_H

#include <stddef.h>

#if defined(_WIN32)
#define AFORT_API __declspec(dllexport)
#else
#define AFORT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values match the CLI exit codes for the first three kinds. */
typedef enum afort_status {
    AFORT_OK = 0,
    AFORT_ERR_USAGE = 1,
    AFORT_ERR_DATA = 2,
    AFORT_ERR_PROVIDER = 3,
    AFORT_ERR_IO = 4,
    AFORT_ERR_INTERNAL = 5
} afort_status;

typedef struct afort_corpus afort_corpus;
typedef struct afort_assets afort_assets;
typedef struct afort_session afort_session;
typedef struct afort_store afort_store;
typedef struct afort_server afort_server;

AFORT_API const char* afort_version(void);
/* Message of the last failure on this thread; "" if none. */
AFORT_API const char* afort_last_error(void);
/* Short name of a status: "ok", "usage", "data", ... */
AFORT_API const char* afort_status_name(afort_status status);
AFORT_API void afort_string_free(char* s);

/* ---- corpus ---------------------------------------------------------- */

/* Canonical .jsonl or delimited (comma/tab) file. */
AFORT_API afort_status afort_corpus_load(const char* path, afort_corpus** out);
/* Delimited text; `report` (optional) receives {"rejects": [...], "warnings": [...]}. */
AFORT_API afort_status afort_corpus_parse(const char* text, afort_corpus** out, char** report);
AFORT_API void afort_corpus_free(afort_corpus* corpus);
AFORT_API size_t afort_corpus_size(const afort_corpus* corpus);
/* {"records", "af", "naf", "digest", "grid"} */
AFORT_API afort_status afort_corpus_summary(const afort_corpus* corpus, char** json);
/* Class x logic grid as a text table. */
AFORT_API afort_status afort_corpus_render_stats(const afort_corpus* corpus, char** text);
AFORT_API afort_status afort_corpus_canonical(const afort_corpus* corpus, char** jsonl);
AFORT_API afort_status afort_corpus_record(const afort_corpus* corpus, const char* id, char** json);
/* params: {"seed", "per_class_quota", "per_combo_target"}; all optional. */
AFORT_API afort_status afort_corpus_sample(const afort_corpus* corpus, const char* params, char** evaluation_set);
/* `selection` is an evaluation set object or an array of record ids. */
AFORT_API afort_status afort_corpus_select(const afort_corpus* corpus, const char* selection, afort_corpus** out);

/* ---- prompt assets --------------------------------------------------- */

AFORT_API afort_status afort_assets_load(const char* dir, afort_assets** out);
AFORT_API void afort_assets_free(afort_assets* assets);
/* request: {"task": "interpret"|"identify", "regime", "mode", "with_examples"}.
 * Returns the bundle: {"rendered", "digest", "token_estimate", "input_tokens", "sections"}. */
AFORT_API afort_status afort_assets_render(const afort_assets* assets, const afort_corpus* corpus,
                                           const char* record_id, const char* request, char** bundle);
/* The window inequality used by prompt assembly; `pass` receives 1 or 0. */
AFORT_API afort_status afort_check_budget(size_t prompt_tokens, size_t input_tokens, size_t reserve_out,
                                          size_t window, int* pass);

/* ---- sessions -------------------------------------------------------- */

/*
 * A session binds assets to a provider, an optional response cache and an
 * optional call log. config:
 *   {"provider": "mock"|"echo"|"live", "script": path, "cache_dir": path,
 *    "call_log": path, "clock": "fixed"|"system", "max_retries": n,
 *    "base_delay_ms": n}
 * Live sessions read AFORT_API_KEY, AFORT_BASE_URL and AFORT_MODEL.
 * `assets` must outlive the session.
 */
AFORT_API afort_status afort_session_create(const afort_assets* assets, const char* config, afort_session** out);
AFORT_API void afort_session_free(afort_session* session);
AFORT_API size_t afort_session_calls(const afort_session* session);
/*
 * options: {"task": "interpret"|"identify", "regime", "mode", "params": {...},
 *           "concurrency", "run_id", "with_examples"}
 * Results come back as JSON lines, each tagged with run_id and config_digest.
 */
AFORT_API afort_status afort_session_run(afort_session* session, const afort_corpus* corpus, const char* options,
                                         char** manifest, char** results);
/*
 * analyses: JSON lines from a run. topics: topic table text.
 * options: {"strategy", "params", "concurrency", "quota", "run_id"}
 */
AFORT_API afort_status afort_session_augment(afort_session* session, const afort_corpus* corpus,
                                             const char* analyses, const char* topics, const char* options,
                                             char** manifest, char** records);

/* ---- evaluation ------------------------------------------------------ */

/*
 * kind: "identify", "spans", "classes", "properties", "judgments", "ttest",
 * "grammar", "diversity". The request carries file paths or inline values
 * (see the README). The report holds the JSON figures, a "text" rendering
 * and a "source" block with the run and config digests it was computed
 * from.
 */
AFORT_API afort_status afort_evaluate(const char* kind, const char* request, char** report);

/* ---- annotation ------------------------------------------------------ */

/* Fails with AFORT_ERR_IO when another process holds the store. */
AFORT_API afort_status afort_store_open(const char* dir, afort_store** out);
AFORT_API void afort_store_close(afort_store* store);
/*
 * request: {"id", "evaluation_set": path, "corpus": path, "run": dir,
 *           "annotators": [...], "token"}
 * Builds and registers the campaign; returns it.
 */
AFORT_API afort_status afort_store_create_campaign(afort_store* store, const char* request, char** campaign);
/*
 * Headless access to the annotation operations. op: "campaigns", "next",
 * "submit", "progress", "aggregate", "item". Request and response bodies
 * match the HTTP routes.
 */
AFORT_API afort_status afort_store_call(afort_store* store, const char* op, const char* request, char** response);

/* options: {"host", "port", "static_dir"}; port 0 picks a free port. */
AFORT_API afort_status afort_server_start(afort_store* store, const char* options, afort_server** out);
AFORT_API int afort_server_port(const afort_server* server);
/* Stops serving and releases the handle. */
AFORT_API void afort_server_stop(afort_server* server);

#ifdef __cplusplus
}
#endif

#endif /* AFORT_AFORT_H */
