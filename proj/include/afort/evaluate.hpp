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

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "afort/backend.hpp"
#include "afort/corpus.hpp"
#include "afort/types.hpp"
#include "json.hpp"

namespace afort {

// ---------------------------------------------------------------------------
// Identification

// cells[pred][gold], both indexed AF=0, NAF=1, Unknown=2.
struct ConfusionMatrix3 {
    std::array<std::array<std::size_t, 3>, 3> cells{};

    std::size_t at(Verdict pred, Verdict gold) const { return cells[int(pred)][int(gold)]; }
    std::size_t pred_total(Verdict v) const;
    std::size_t gold_total(Verdict v) const;
    std::size_t total() const;
};

ConfusionMatrix3 confusion_matrix(const std::vector<Verdict>& gold, const std::vector<Verdict>& pred);
// Expands a matrix back into aligned label lists (row-major order).
std::pair<std::vector<Verdict>, std::vector<Verdict>> expand_matrix(const ConfusionMatrix3& m);

enum class RecallConvention { FullGold, ExcludeUnknownPredictions };
const char* to_string(RecallConvention c) noexcept;

struct ClassMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::size_t precision_denominator = 0;
    std::size_t recall_denominator = 0;
    std::size_t support = 0;
    // "precision_undefined", "recall_undefined" when a denominator is 0.
    std::vector<std::string> flags;
};

struct IdentificationMetrics {
    RecallConvention convention = RecallConvention::ExcludeUnknownPredictions;
    double macro_accuracy = 0;
    ClassMetrics af;
    ClassMetrics naf;
};

IdentificationMetrics identification_metrics(const ConfusionMatrix3& m,
                                             RecallConvention convention = RecallConvention::ExcludeUnknownPredictions);

nlohmann::json to_json(const ClassMetrics& c);
nlohmann::json to_json(const ConfusionMatrix3& m);
nlohmann::json to_json(const IdentificationMetrics& m);
std::string render_confusion(const ConfusionMatrix3& m, const std::string& title);
std::string render_identification(const std::vector<std::pair<std::string, IdentificationMetrics>>& columns);

// ---------------------------------------------------------------------------
// Spans and similarity

// |multiset(tokens(gold)) ∩ multiset(tokens(pred))| / |tokens(gold)|.
// Throws DataError for a gold span without tokens.
double exact_word_match(std::string_view gold, std::string_view pred);

struct SpanScore {
    double cosine_similarity = 0;
    double exact_word_match = 0;
    // "empty_prediction" when the prediction has no tokens.
    std::vector<std::string> flags;
};

SpanScore span_scores(std::string_view gold, std::string_view pred, Embedder& embedder);

struct SimilarityStats {
    std::size_t n = 0;
    double mean = 0, median = 0, std = 0, min = 0, q25 = 0, q75 = 0, max = 0;
};

// Sample standard deviation; quantiles interpolate linearly at q*(n-1).
SimilarityStats similarity_summary(const std::vector<double>& values);
double quantile_sorted(const std::vector<double>& sorted, double q);
nlohmann::json to_json(const SimilarityStats& s);

struct SpanEvaluation {
    std::vector<std::string> record_ids;
    std::vector<double> correlate_similarity, remnant_similarity;
    std::vector<double> correlate_exact, remnant_exact;
    std::size_t empty_predictions = 0;
    std::size_t skipped = 0;
};

// Scores every result whose record carries both gold spans.
SpanEvaluation evaluate_spans(const std::vector<ArgumentRecord>& records,
                              const std::vector<InterpretationResult>& results, Embedder& embedder);
nlohmann::json to_json(const SpanEvaluation& e);
std::string render_span_table(const SpanEvaluation& e);

// ---------------------------------------------------------------------------
// Classification

struct PerClassReport {
    std::vector<std::string> classes;
    std::vector<ClassMetrics> metrics;
    double accuracy = 0;
    double macro_f1 = 0;
    std::size_t n = 0;
};

// `classes` fixes the row order; classes seen in the data but missing from
// it are appended in sorted order.
PerClassReport per_class_metrics(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                                 std::vector<std::string> classes = {});
nlohmann::json to_json(const PerClassReport& r);
std::string render_per_class(const PerClassReport& r, const std::string& title);

struct ClassificationReport {
    PerClassReport sentence_type;
    PerClassReport logic_category;
};

ClassificationReport classification_report(const std::vector<ArgumentRecord>& records,
                                           const std::vector<InterpretationResult>& results);

// ---------------------------------------------------------------------------
// Significance

struct TTestResult {
    double t = 0;
    std::size_t df = 0;
    double p_two_tailed = 1;
    double mean_difference = 0;
};

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);
nlohmann::json to_json(const TTestResult& t);

// ---------------------------------------------------------------------------
// Grammar

struct GrammarIssue {
    std::string rule_id;
    std::string category;
    std::string type;  // Spelling, Whitespace, Apostrophe, Capitalization, ...
    std::string message;
};

class GrammarChecker {
public:
    virtual ~GrammarChecker() = default;
    virtual std::vector<GrammarIssue> check(std::string_view text) = 0;
};

// LanguageTool-compatible HTTP server: POST <base>/v2/check.
class LanguageToolChecker final : public GrammarChecker {
public:
    explicit LanguageToolChecker(std::string base_url, std::string language = "en-US", int timeout_seconds = 30);
    std::vector<GrammarIssue> check(std::string_view text) override;

private:
    std::string base_url_;
    std::string language_;
    int timeout_;
};

// Maps a LanguageTool rule onto the error types used in reports.
std::string grammar_issue_type(std::string_view rule_id, std::string_view category_id);

struct GrammarReport {
    bool skipped = false;
    std::string skip_reason;
    std::size_t texts = 0;
    std::size_t entries_with_errors = 0;
    std::size_t issues = 0;
    std::map<std::string, std::size_t> type_counts;
};

// checker == nullptr yields a skipped report.
GrammarReport grammar_report(const std::vector<std::string>& texts, GrammarChecker* checker,
                             std::string skip_reason = "no grammar checker configured");
nlohmann::json to_json(const GrammarReport& g);
std::string render_grammar(const std::vector<std::pair<std::string, GrammarReport>>& rows);

// ---------------------------------------------------------------------------
// Properties

struct FrequencyRow {
    std::string property;
    std::size_t gold = 0;
    std::size_t predicted = 0;
};

struct PropertyReport {
    std::size_t records = 0;
    std::size_t distinct_predicted = 0;
    std::size_t unseen = 0;
    std::size_t copied = 0;
    std::size_t at_least_one_match = 0;
    std::size_t exact_pair_matches = 0;
    std::size_t no_prediction = 0;
    // Per gold sentence type, ranked by gold frequency.
    std::map<std::string, std::vector<FrequencyRow>> top_k;
};

// Properties match case-insensitively after trimming. Results are aligned
// to records by id; records without a result count as no prediction.
PropertyReport property_report(const std::vector<ArgumentRecord>& records,
                               const std::vector<InterpretationResult>& results, std::size_t k = 10);
nlohmann::json to_json(const PropertyReport& p);
std::string render_property_report(const PropertyReport& p);

// ---------------------------------------------------------------------------
// Human judgments

enum class JudgmentTarget { Property1, Property2, ShortExplanation };
enum class Criterion { Novelty, Relevance, LogicalValidity, Completeness, Pertinence };
const char* to_string(JudgmentTarget t) noexcept;
const char* to_string(Criterion c) noexcept;
std::optional<JudgmentTarget> parse_target(std::string_view s);
std::optional<Criterion> parse_criterion(std::string_view s);
// Properties take novelty/relevance; explanations take the other three.
bool criterion_applies(JudgmentTarget t, Criterion c);

struct JudgmentRecord {
    std::string annotator;
    std::string item_id;
    JudgmentTarget target = JudgmentTarget::Property1;
    Criterion criterion = Criterion::Novelty;
    bool value = false;
    std::uint64_t version = 1;
    std::string timestamp;
};

nlohmann::json to_json(const JudgmentRecord& j);
JudgmentRecord judgment_from_json(const nlohmann::json& j);

// Keeps, per (annotator, item, target, criterion), the highest version;
// equal versions resolve to the later entry.
std::vector<JudgmentRecord> latest_judgments(const std::vector<JudgmentRecord>& store);

struct Agreement {
    std::size_t pairs = 0;  // judgments compared
    double percent = 0;
    std::optional<double> kappa;  // absent with fewer than two annotators
};

struct JudgmentSummary {
    std::size_t items = 0;
    std::size_t annotators = 0;
    // Sentence level (denominator: items).
    std::size_t sentences_all_properties_good = 0;
    std::size_t sentences_at_least_one_good = 0;
    std::size_t sentences_all_properties_neither = 0;
    // Property level (denominator: 2 * items).
    std::size_t property_slots = 0;
    std::size_t properties_novel_relevant = 0;
    std::size_t properties_relevant_not_novel = 0;
    std::size_t properties_novel_not_relevant = 0;
    std::size_t properties_neither = 0;
    // Explanations keyed by the pass pattern of (validity, completeness,
    // pertinence), e.g. "110".
    std::map<std::string, std::size_t> explanation_patterns;
    std::map<std::string, std::size_t> criterion_true;
    std::map<std::string, Agreement> agreement;
    // Pairwise phi coefficients between criteria over consensus values.
    std::map<std::string, std::optional<double>> phi;
    // Per-item indicator vectors, aligned to `item_ids`, for paired tests.
    std::vector<std::string> item_ids;
    std::map<std::string, std::vector<double>> per_item;
};

// Majority consensus per (item, target, criterion); ties count as false.
JudgmentSummary judgment_aggregate(const std::vector<JudgmentRecord>& store, const std::vector<std::string>& items);
nlohmann::json to_json(const JudgmentSummary& s);

// Two-column comparison (e.g. with vs without external information) with
// paired t-test p-values over items present in both summaries.
std::string render_judgment_comparison(const JudgmentSummary& a, const JudgmentSummary& b, const std::string& a_label,
                                       const std::string& b_label);
// Single-column form of the same rows plus the agreement figures.
std::string render_judgment_summary(const JudgmentSummary& s, const std::string& label);
nlohmann::json judgment_comparison_json(const JudgmentSummary& a, const JudgmentSummary& b);

double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b);
std::optional<double> phi_coefficient(const std::vector<bool>& a, const std::vector<bool>& b);

}  // namespace afort
