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

#include "afort/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "afort/error.hpp"
#include "afort/util.hpp"
#include "httplib.h"

namespace afort {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string pad(std::string s, std::size_t w, bool right = false) {
    std::size_t len = utf8_length(s);
    if (len >= w) return s;
    return right ? std::string(w - len, ' ') + s : s + std::string(w - len, ' ');
}

double safe_div(std::size_t num, std::size_t den) { return den ? double(num) / double(den) : 0.0; }

double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

constexpr Verdict kVerdicts[] = {Verdict::AF, Verdict::NAF, Verdict::Unknown};

}  // namespace

// ---------------------------------------------------------------------------
// Identification

std::size_t ConfusionMatrix3::pred_total(Verdict v) const {
    std::size_t s = 0;
    for (auto g : kVerdicts) s += at(v, g);
    return s;
}

std::size_t ConfusionMatrix3::gold_total(Verdict v) const {
    std::size_t s = 0;
    for (auto p : kVerdicts) s += at(p, v);
    return s;
}

std::size_t ConfusionMatrix3::total() const {
    std::size_t s = 0;
    for (const auto& row : cells) s += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return s;
}

ConfusionMatrix3 confusion_matrix(const std::vector<Verdict>& gold, const std::vector<Verdict>& pred) {
    if (gold.size() != pred.size())
        throw DataError("length mismatch: " + std::to_string(gold.size()) + " gold vs " +
                        std::to_string(pred.size()) + " predicted labels");
    ConfusionMatrix3 m;
    for (std::size_t i = 0; i < gold.size(); ++i) ++m.cells[int(pred[i])][int(gold[i])];
    return m;
}

std::pair<std::vector<Verdict>, std::vector<Verdict>> expand_matrix(const ConfusionMatrix3& m) {
    std::vector<Verdict> gold, pred;
    for (auto p : kVerdicts)
        for (auto g : kVerdicts)
            for (std::size_t i = 0; i < m.at(p, g); ++i) {
                gold.push_back(g);
                pred.push_back(p);
            }
    return {gold, pred};
}

const char* to_string(RecallConvention c) noexcept {
    return c == RecallConvention::FullGold ? "full_gold" : "exclude_unknown_predictions";
}

IdentificationMetrics identification_metrics(const ConfusionMatrix3& m, RecallConvention convention) {
    IdentificationMetrics out;
    out.convention = convention;
    std::size_t total = m.total();
    out.macro_accuracy = safe_div(m.at(Verdict::AF, Verdict::AF) + m.at(Verdict::NAF, Verdict::NAF), total);
    auto one = [&](Verdict c) {
        ClassMetrics k;
        std::size_t tp = m.at(c, c);
        k.support = m.gold_total(c);
        k.precision_denominator = m.pred_total(c);
        k.recall_denominator = convention == RecallConvention::FullGold ? k.support
                                                                        : k.support - m.at(Verdict::Unknown, c);
        if (!k.precision_denominator) k.flags.push_back("precision_undefined");
        if (!k.recall_denominator) k.flags.push_back("recall_undefined");
        k.precision = safe_div(tp, k.precision_denominator);
        k.recall = safe_div(tp, k.recall_denominator);
        k.f1 = f1_of(k.precision, k.recall);
        // One-vs-rest: everything not predicted c and not gold c is a true negative.
        std::size_t fp = k.precision_denominator - tp;
        std::size_t fn = k.support - tp;
        k.accuracy = safe_div(total - fp - fn, total);
        return k;
    };
    out.af = one(Verdict::AF);
    out.naf = one(Verdict::NAF);
    return out;
}

nlohmann::json to_json(const ClassMetrics& c) {
    return {{"accuracy", c.accuracy},
            {"precision", c.precision},
            {"recall", c.recall},
            {"f1", c.f1},
            {"precision_denominator", c.precision_denominator},
            {"recall_denominator", c.recall_denominator},
            {"support", c.support},
            {"flags", c.flags}};
}

nlohmann::json to_json(const ConfusionMatrix3& m) {
    nlohmann::json rows = nlohmann::json::object();
    for (auto p : kVerdicts) {
        nlohmann::json row = nlohmann::json::object();
        for (auto g : kVerdicts) row[to_string(g)] = m.at(p, g);
        rows[to_string(p)] = row;
    }
    return {{"layout", "rows=prediction, columns=gold"},
            {"cells", rows},
            {"gold_totals", {{"AF", m.gold_total(Verdict::AF)}, {"NAF", m.gold_total(Verdict::NAF)},
                             {"Unknown", m.gold_total(Verdict::Unknown)}}},
            {"total", m.total()}};
}

nlohmann::json to_json(const IdentificationMetrics& m) {
    return {{"recall_convention", to_string(m.convention)},
            {"macro_accuracy", m.macro_accuracy},
            {"AF", to_json(m.af)},
            {"NAF", to_json(m.naf)}};
}

std::string render_confusion(const ConfusionMatrix3& m, const std::string& title) {
    std::ostringstream out;
    out << title << "\n";
    out << pad("Prediction \\ Gold", 20) << pad("AF", 8, true) << pad("NAF", 8, true) << pad("Unknown", 9, true)
        << "\n";
    for (auto p : kVerdicts) {
        out << pad(to_string(p), 20);
        for (auto g : kVerdicts) out << pad(std::to_string(m.at(p, g)), g == Verdict::Unknown ? 9 : 8, true);
        out << "\n";
    }
    out << pad("Total", 20);
    for (auto g : kVerdicts) out << pad(std::to_string(m.gold_total(g)), g == Verdict::Unknown ? 9 : 8, true);
    out << "\n";
    return out.str();
}

std::string render_identification(const std::vector<std::pair<std::string, IdentificationMetrics>>& columns) {
    std::ostringstream out;
    out << pad("", 22);
    for (const auto& [label, m] : columns) out << pad(label, 24, true);
    out << "\n";
    auto row = [&](const std::string& name, auto getter) {
        out << pad(name, 22);
        for (const auto& [label, m] : columns) out << pad(fmt("%.4f", getter(m)), 24, true);
        out << "\n";
    };
    row("Macro accuracy", [](const IdentificationMetrics& m) { return m.macro_accuracy; });
    row("Precision AF", [](const IdentificationMetrics& m) { return m.af.precision; });
    row("Precision NAF", [](const IdentificationMetrics& m) { return m.naf.precision; });
    row("Recall AF", [](const IdentificationMetrics& m) { return m.af.recall; });
    row("Recall NAF", [](const IdentificationMetrics& m) { return m.naf.recall; });
    row("F1 AF", [](const IdentificationMetrics& m) { return m.af.f1; });
    row("F1 NAF", [](const IdentificationMetrics& m) { return m.naf.f1; });
    if (!columns.empty()) out << "recall convention: " << to_string(columns.front().second.convention) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Spans

double exact_word_match(std::string_view gold, std::string_view pred) {
    auto g = normalized_tokens(gold);
    if (g.empty()) throw DataError("gold span has no tokens");
    auto p = normalized_tokens(pred);
    std::map<std::string, std::size_t> counts;
    for (const auto& t : p) ++counts[t];
    std::size_t hit = 0;
    for (const auto& t : g) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++hit;
        }
    }
    return double(hit) / double(g.size());
}

SpanScore span_scores(std::string_view gold, std::string_view pred, Embedder& embedder) {
    SpanScore s;
    double exact = exact_word_match(gold, pred);
    if (normalized_tokens(pred).empty()) {
        s.flags.push_back("empty_prediction");
        return s;
    }
    s.exact_word_match = exact;
    s.cosine_similarity = cosine(embedder.embed(gold), embedder.embed(pred));
    return s;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw DataError("quantile of an empty list");
    double pos = q * double(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - double(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

SimilarityStats similarity_summary(const std::vector<double>& values) {
    if (values.empty()) throw DataError("similarity summary of an empty list");
    SimilarityStats s;
    s.n = values.size();
    std::vector<double> v = values;
    std::sort(v.begin(), v.end());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    if (v.size() > 1) {
        double ss = 0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / double(v.size() - 1));
    }
    s.min = v.front();
    s.max = v.back();
    s.q25 = quantile_sorted(v, 0.25);
    s.median = quantile_sorted(v, 0.5);
    s.q75 = quantile_sorted(v, 0.75);
    return s;
}

nlohmann::json to_json(const SimilarityStats& s) {
    return {{"n", s.n},         {"mean", s.mean}, {"median", s.median}, {"std", s.std},
            {"min", s.min},     {"q25", s.q25},   {"q75", s.q75},       {"max", s.max},
            {"std_kind", "sample"}, {"quantiles", "linear interpolation at q*(n-1)"}};
}

SpanEvaluation evaluate_spans(const std::vector<ArgumentRecord>& records,
                              const std::vector<InterpretationResult>& results, Embedder& embedder) {
    std::map<std::string, const InterpretationResult*> by_id;
    for (const auto& r : results) by_id[r.record_id] = &r;
    SpanEvaluation e;
    for (const auto& rec : records) {
        auto it = by_id.find(rec.id);
        if (it == by_id.end() || !rec.correlate || !rec.remnant || it->second->status != ResultStatus::Ok) {
            ++e.skipped;
            continue;
        }
        const auto& res = *it->second;
        auto c = span_scores(rec.correlate_text(), res.correlate.value_or(""), embedder);
        auto r = span_scores(rec.remnant_text(), res.remnant.value_or(""), embedder);
        if (!c.flags.empty() || !r.flags.empty()) ++e.empty_predictions;
        e.record_ids.push_back(rec.id);
        e.correlate_similarity.push_back(c.cosine_similarity);
        e.correlate_exact.push_back(c.exact_word_match);
        e.remnant_similarity.push_back(r.cosine_similarity);
        e.remnant_exact.push_back(r.exact_word_match);
    }
    return e;
}

nlohmann::json to_json(const SpanEvaluation& e) {
    nlohmann::json j = {{"scored", e.record_ids.size()},
                        {"skipped", e.skipped},
                        {"empty_predictions", e.empty_predictions}};
    if (!e.record_ids.empty()) {
        j["correlate_similarity"] = to_json(similarity_summary(e.correlate_similarity));
        j["remnant_similarity"] = to_json(similarity_summary(e.remnant_similarity));
        j["correlate_exact_match"] = to_json(similarity_summary(e.correlate_exact));
        j["remnant_exact_match"] = to_json(similarity_summary(e.remnant_exact));
    }
    return j;
}

std::string render_span_table(const SpanEvaluation& e) {
    std::ostringstream out;
    out << pad("", 34) << pad("Mean", 8, true) << pad("Median", 8, true) << pad("Std", 8, true) << "\n";
    if (e.record_ids.empty()) {
        out << "(no scored records)\n";
        return out.str();
    }
    auto row = [&](const char* name, const std::vector<double>& v) {
        auto s = similarity_summary(v);
        out << pad(name, 34) << pad(fmt("%.4f", s.mean), 8, true) << pad(fmt("%.4f", s.median), 8, true)
            << pad(fmt("%.4f", s.std), 8, true) << "\n";
    };
    row("Correlate cosine similarity", e.correlate_similarity);
    row("Remnant cosine similarity", e.remnant_similarity);
    row("Correlate exact word match", e.correlate_exact);
    row("Remnant exact word match", e.remnant_exact);
    out << "scored " << e.record_ids.size() << ", skipped " << e.skipped << ", empty predictions "
        << e.empty_predictions << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Classification

PerClassReport per_class_metrics(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                                 std::vector<std::string> classes) {
    if (gold.size() != pred.size())
        throw DataError("length mismatch: " + std::to_string(gold.size()) + " gold vs " +
                        std::to_string(pred.size()) + " predicted labels");
    std::set<std::string> seen(gold.begin(), gold.end());
    seen.insert(pred.begin(), pred.end());
    for (const auto& c : seen)
        if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
    PerClassReport r;
    r.n = gold.size();
    r.classes = classes;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
    r.accuracy = safe_div(correct, gold.size());
    double f1_sum = 0;
    for (const auto& c : classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            bool g = gold[i] == c, p = pred[i] == c;
            tp += g && p;
            fp += !g && p;
            fn += g && !p;
        }
        ClassMetrics k;
        k.support = tp + fn;
        k.precision_denominator = tp + fp;
        k.recall_denominator = tp + fn;
        if (!k.precision_denominator) k.flags.push_back("precision_undefined");
        if (!k.recall_denominator) k.flags.push_back("recall_undefined");
        k.precision = safe_div(tp, tp + fp);
        k.recall = safe_div(tp, tp + fn);
        k.f1 = f1_of(k.precision, k.recall);
        k.accuracy = safe_div(gold.size() - fp - fn, gold.size());
        f1_sum += k.f1;
        r.metrics.push_back(k);
    }
    r.macro_f1 = classes.empty() ? 0.0 : f1_sum / double(classes.size());
    return r;
}

nlohmann::json to_json(const PerClassReport& r) {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t i = 0; i < r.classes.size(); ++i) per[r.classes[i]] = to_json(r.metrics[i]);
    return {{"n", r.n}, {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"classes", per}};
}

std::string render_per_class(const PerClassReport& r, const std::string& title) {
    std::ostringstream out;
    out << title << "\n"
        << pad("Class", 12) << pad("Accuracy", 10, true) << pad("Precision", 11, true) << pad("Recall", 10, true)
        << pad("F1", 10, true) << pad("Support", 9, true) << "\n";
    for (std::size_t i = 0; i < r.classes.size(); ++i) {
        const auto& m = r.metrics[i];
        out << pad(r.classes[i], 12) << pad(fmt("%.4f", m.accuracy), 10, true)
            << pad(fmt("%.4f", m.precision), 11, true) << pad(fmt("%.4f", m.recall), 10, true)
            << pad(fmt("%.4f", m.f1), 10, true) << pad(std::to_string(m.support), 9, true) << "\n";
    }
    out << "overall accuracy " << fmt("%.4f", r.accuracy) << ", macro F1 " << fmt("%.4f", r.macro_f1) << "\n";
    return out.str();
}

ClassificationReport classification_report(const std::vector<ArgumentRecord>& records,
                                           const std::vector<InterpretationResult>& results) {
    std::map<std::string, const ArgumentRecord*> by_id;
    for (const auto& r : records) by_id[r.id] = &r;
    std::vector<std::string> gt, pt, gl, pl;
    for (const auto& res : results) {
        auto it = by_id.find(res.record_id);
        if (it == by_id.end() || res.status != ResultStatus::Ok) continue;
        gt.push_back(to_string(it->second->sentence_class));
        pt.push_back(to_string(res.sentence_type));
        gl.push_back(to_string(it->second->logic));
        pl.push_back(to_string(res.logic_category));
    }
    ClassificationReport c;
    std::vector<std::string> types, logics;
    for (auto t : kSentenceTypes) types.push_back(to_string(t));
    for (auto l : kLogicCategories) logics.push_back(to_string(l));
    c.sentence_type = per_class_metrics(gt, pt, types);
    c.logic_category = per_class_metrics(gl, pl, logics);
    return c;
}

// ---------------------------------------------------------------------------
// Significance

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw DataError("paired t-test needs equal lengths, got " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
    if (a.size() < 2) throw DataError("paired t-test needs at least 2 pairs");
    std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double mean = std::accumulate(d.begin(), d.end(), 0.0) / double(n);
    double ss = 0;
    for (double x : d) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / double(n - 1));
    TTestResult r;
    r.df = n - 1;
    r.mean_difference = mean;
    if (sd == 0) {
        r.t = mean == 0 ? 0.0 : std::copysign(INFINITY, mean);
        r.p_two_tailed = mean == 0 ? 1.0 : 0.0;
        return r;
    }
    r.t = mean / (sd / std::sqrt(double(n)));
    boost::math::students_t dist(double(r.df));
    r.p_two_tailed = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
    return r;
}

nlohmann::json to_json(const TTestResult& t) {
    nlohmann::json tj = std::isfinite(t.t) ? nlohmann::json(t.t) : nlohmann::json(t.t > 0 ? "inf" : "-inf");
    return {{"t", tj}, {"df", t.df}, {"p_two_tailed", t.p_two_tailed}, {"mean_difference", t.mean_difference}};
}

// ---------------------------------------------------------------------------
// Grammar

std::string grammar_issue_type(std::string_view rule_id, std::string_view category_id) {
    std::string rule = to_lower(rule_id);
    std::string cat = to_lower(category_id);
    if (rule.find("whitespace") != std::string::npos || rule.find("space") != std::string::npos) return "Whitespace";
    if (rule.find("apos") != std::string::npos) return "Apostrophe";
    if (cat == "typos" || rule.find("spell") != std::string::npos || rule.find("morfologik") != std::string::npos)
        return "Spelling";
    if (cat == "casing" || rule.find("upper") != std::string::npos || rule.find("lower") != std::string::npos)
        return "Capitalization";
    if (cat == "punctuation") return "Punctuation";
    if (cat == "grammar") return "Grammar";
    if (cat == "typography") return "Typography";
    if (cat == "style" || cat == "redundancy") return "Style";
    return category_id.empty() ? "Other" : std::string(category_id);
}

LanguageToolChecker::LanguageToolChecker(std::string base_url, std::string language, int timeout_seconds)
    : base_url_(std::move(base_url)), language_(std::move(language)), timeout_(timeout_seconds) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::vector<GrammarIssue> LanguageToolChecker::check(std::string_view text) {
    auto scheme = base_url_.find("://");
    if (scheme == std::string::npos) throw UsageError("grammar checker URL needs a scheme: " + base_url_);
    auto slash = base_url_.find('/', scheme + 3);
    std::string origin = base_url_.substr(0, slash);
    std::string prefix = slash == std::string::npos ? "" : base_url_.substr(slash);
    httplib::Client cli(origin);
    cli.set_connection_timeout(timeout_, 0);
    cli.set_read_timeout(timeout_, 0);
    httplib::Params form{{"text", std::string(text)}, {"language", language_}};
    auto res = cli.Post(prefix + "/v2/check", form);
    if (!res) throw TransientError("grammar checker unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ProviderError("grammar checker returned HTTP " + std::to_string(res->status));
    std::vector<GrammarIssue> out;
    try {
        auto j = nlohmann::json::parse(res->body);
        for (const auto& m : j.at("matches")) {
            GrammarIssue g;
            const auto& rule = m.at("rule");
            g.rule_id = rule.value("id", std::string());
            std::string cat_id;
            if (rule.contains("category")) {
                cat_id = rule["category"].value("id", std::string());
                g.category = rule["category"].value("name", cat_id);
            }
            g.type = grammar_issue_type(g.rule_id, cat_id);
            g.message = m.value("message", std::string());
            out.push_back(std::move(g));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected grammar checker response: ") + e.what());
    }
    return out;
}

GrammarReport grammar_report(const std::vector<std::string>& texts, GrammarChecker* checker,
                             std::string skip_reason) {
    GrammarReport r;
    r.texts = texts.size();
    if (!checker) {
        r.skipped = true;
        r.skip_reason = std::move(skip_reason);
        return r;
    }
    for (const auto& t : texts) {
        auto issues = checker->check(t);
        if (!issues.empty()) ++r.entries_with_errors;
        r.issues += issues.size();
        for (const auto& i : issues) ++r.type_counts[i.type];
    }
    return r;
}

nlohmann::json to_json(const GrammarReport& g) {
    nlohmann::json j = {{"texts", g.texts},
                        {"entries_with_errors", g.entries_with_errors},
                        {"issues", g.issues},
                        {"error_type_counts", g.type_counts}};
    if (g.skipped) {
        j["status"] = "skipped";
        j["reason"] = g.skip_reason;
    } else {
        j["status"] = "checked";
    }
    return j;
}

std::string render_grammar(const std::vector<std::pair<std::string, GrammarReport>>& rows) {
    std::ostringstream out;
    out << pad("Source", 40) << pad("Entries with errors", 21, true) << "  Common error types\n";
    for (const auto& [label, g] : rows) {
        out << pad(label, 40);
        if (g.skipped) {
            out << pad("skipped", 21, true) << "  " << g.skip_reason << "\n";
            continue;
        }
        std::vector<std::pair<std::string, std::size_t>> types(g.type_counts.begin(), g.type_counts.end());
        std::stable_sort(types.begin(), types.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        out << pad(std::to_string(g.entries_with_errors), 21, true) << "  ";
        for (std::size_t i = 0; i < types.size() && i < 3; ++i)
            out << (i ? ", " : "") << types[i].first << ": " << types[i].second;
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Properties

namespace {

std::string prop_key(std::string_view s) { return to_lower(trim(s)); }

}  // namespace

PropertyReport property_report(const std::vector<ArgumentRecord>& records,
                               const std::vector<InterpretationResult>& results, std::size_t k) {
    std::map<std::string, const InterpretationResult*> by_id;
    for (const auto& r : results) by_id[r.record_id] = &r;
    std::set<std::string> gold_all, pred_all;
    for (const auto& rec : records)
        for (const auto& p : rec.properties())
            if (!prop_key(p).empty()) gold_all.insert(prop_key(p));

    PropertyReport rep;
    // type -> property key -> (display, gold count, predicted count)
    std::map<std::string, std::map<std::string, FrequencyRow>> freq;
    for (const auto& rec : records) {
        ++rep.records;
        std::set<std::string> gold, pred;
        for (const auto& p : rec.properties())
            if (!prop_key(p).empty()) gold.insert(prop_key(p));
        auto it = by_id.find(rec.id);
        if (it != by_id.end())
            for (const auto& p : it->second->properties)
                if (!prop_key(p).empty()) pred.insert(prop_key(p));
        auto& table = freq[to_string(rec.sentence_class)];
        for (const auto& p : rec.properties()) {
            if (prop_key(p).empty()) continue;
            auto& row = table[prop_key(p)];
            if (row.property.empty()) row.property = trim(p);
            ++row.gold;
        }
        if (it != by_id.end())
            for (const auto& p : it->second->properties) {
                if (prop_key(p).empty()) continue;
                auto& row = table[prop_key(p)];
                if (row.property.empty()) row.property = trim(p);
                ++row.predicted;
            }
        pred_all.insert(pred.begin(), pred.end());
        if (pred.empty()) {
            ++rep.no_prediction;
            continue;
        }
        std::size_t matched = 0;
        for (const auto& g : gold) matched += pred.count(g);
        if (matched > 0) ++rep.at_least_one_match;
        if (!gold.empty() && matched == gold.size()) ++rep.exact_pair_matches;
    }
    rep.distinct_predicted = pred_all.size();
    for (const auto& p : pred_all) (gold_all.count(p) ? rep.copied : rep.unseen) += 1;
    for (auto& [type, table] : freq) {
        std::vector<FrequencyRow> rows;
        for (auto& [key, row] : table) rows.push_back(row);
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return a.gold != b.gold ? a.gold > b.gold : a.predicted > b.predicted;
        });
        if (rows.size() > k) rows.resize(k);
        rep.top_k[type] = std::move(rows);
    }
    return rep;
}

nlohmann::json to_json(const PropertyReport& p) {
    nlohmann::json top = nlohmann::json::object();
    for (const auto& [type, rows] : p.top_k) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) arr.push_back({{"property", r.property}, {"gold", r.gold}, {"predicted", r.predicted}});
        top[type] = arr;
    }
    return {{"records", p.records},
            {"distinct_predicted", p.distinct_predicted},
            {"unseen", p.unseen},
            {"copied", p.copied},
            {"at_least_one_match", p.at_least_one_match},
            {"exact_pair_matches", p.exact_pair_matches},
            {"no_prediction", p.no_prediction},
            {"top_k", top}};
}

std::string render_property_report(const PropertyReport& p) {
    std::ostringstream out;
    out << "Distinct predicted properties      " << p.distinct_predicted << "\n"
        << "  absent from the gold annotations " << p.unseen << "\n"
        << "  copied from the gold annotations " << p.copied << "\n"
        << "Entries with at least one match    " << p.at_least_one_match << "/" << p.records << "\n"
        << "Entries with every gold property   " << p.exact_pair_matches << "/" << p.records << "\n"
        << "Entries without a property         " << p.no_prediction << "\n";
    for (const auto& [type, rows] : p.top_k) {
        out << "\n" << type << "\n" << pad("Rank", 6) << pad("Property", 36) << pad("Gold", 8, true)
            << pad("Predicted", 11, true) << "\n";
        for (std::size_t i = 0; i < rows.size(); ++i)
            out << pad(std::to_string(i + 1), 6) << pad(rows[i].property, 36)
                << pad(std::to_string(rows[i].gold), 8, true) << pad(std::to_string(rows[i].predicted), 11, true)
                << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Judgments

namespace {

constexpr std::pair<JudgmentTarget, const char*> kTargets[] = {
    {JudgmentTarget::Property1, "property1"},
    {JudgmentTarget::Property2, "property2"},
    {JudgmentTarget::ShortExplanation, "short_explanation"},
};

constexpr std::pair<Criterion, const char*> kCriteria[] = {
    {Criterion::Novelty, "novelty"},
    {Criterion::Relevance, "relevance"},
    {Criterion::LogicalValidity, "logical_validity"},
    {Criterion::Completeness, "completeness"},
    {Criterion::Pertinence, "pertinence"},
};

}  // namespace

const char* to_string(JudgmentTarget t) noexcept {
    for (const auto& [k, v] : kTargets)
        if (k == t) return v;
    return "?";
}

const char* to_string(Criterion c) noexcept {
    for (const auto& [k, v] : kCriteria)
        if (k == c) return v;
    return "?";
}

std::optional<JudgmentTarget> parse_target(std::string_view s) {
    for (const auto& [k, v] : kTargets)
        if (s == v) return k;
    return std::nullopt;
}

std::optional<Criterion> parse_criterion(std::string_view s) {
    for (const auto& [k, v] : kCriteria)
        if (s == v) return k;
    return std::nullopt;
}

bool criterion_applies(JudgmentTarget t, Criterion c) {
    bool property_criterion = c == Criterion::Novelty || c == Criterion::Relevance;
    return (t == JudgmentTarget::ShortExplanation) != property_criterion;
}

nlohmann::json to_json(const JudgmentRecord& j) {
    return {{"annotator", j.annotator}, {"item_id", j.item_id},   {"target", to_string(j.target)},
            {"criterion", to_string(j.criterion)}, {"value", j.value}, {"version", j.version},
            {"timestamp", j.timestamp}};
}

JudgmentRecord judgment_from_json(const nlohmann::json& j) {
    JudgmentRecord r;
    try {
        r.annotator = j.at("annotator").get<std::string>();
        r.item_id = j.at("item_id").get<std::string>();
        auto t = parse_target(j.at("target").get<std::string>());
        auto c = parse_criterion(j.at("criterion").get<std::string>());
        if (!t) throw DataError("unknown judgment target '" + j.at("target").get<std::string>() + "'");
        if (!c) throw DataError("unknown criterion '" + j.at("criterion").get<std::string>() + "'");
        if (!criterion_applies(*t, *c))
            throw DataError(std::string("criterion ") + to_string(*c) + " does not apply to " + to_string(*t));
        r.target = *t;
        r.criterion = *c;
        r.value = j.at("value").get<bool>();
        r.version = j.value("version", std::uint64_t{1});
        r.timestamp = j.value("timestamp", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed judgment: ") + e.what());
    }
    if (r.annotator.empty()) throw DataError("judgment without annotator");
    return r;
}

std::vector<JudgmentRecord> latest_judgments(const std::vector<JudgmentRecord>& store) {
    using Key = std::tuple<std::string, std::string, int, int>;
    std::map<Key, std::size_t> best;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& j = store[i];
        Key k{j.annotator, j.item_id, int(j.target), int(j.criterion)};
        auto it = best.find(k);
        if (it == best.end() || store[it->second].version <= j.version) best[k] = i;
    }
    std::vector<std::size_t> idx;
    for (const auto& [k, i] : best) idx.push_back(i);
    std::sort(idx.begin(), idx.end());
    std::vector<JudgmentRecord> out;
    for (auto i : idx) out.push_back(store[i]);
    return out;
}

double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size() || a.empty()) throw DataError("kappa needs two equal, nonempty label lists");
    double n = double(a.size());
    double agree = 0, a1 = 0, b1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        agree += a[i] == b[i];
        a1 += a[i];
        b1 += b[i];
    }
    double po = agree / n;
    double pe = (a1 / n) * (b1 / n) + (1 - a1 / n) * (1 - b1 / n);
    // Both raters constant and identical: agreement is perfect by definition.
    if (pe >= 1.0) return po == 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1 - pe);
}

std::optional<double> phi_coefficient(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size()) throw DataError("phi needs equal-length lists");
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && b[i]) ++n11;
        else if (a[i]) ++n10;
        else if (b[i]) ++n01;
        else ++n00;
    }
    double den = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00);
    if (den == 0) return std::nullopt;
    return (n11 * n00 - n10 * n01) / std::sqrt(den);
}

namespace {

const char* kPatternKeys[] = {"100", "110", "011", "101", "111"};
const char* kPatternLabels[] = {
    "Explanations passing the first criterion only",
    "Explanations passing the first and second but not the third",
    "Explanations passing the second and third but not the first",
    "Explanations passing the first and third but not the second",
    "Explanations passing all three criteria",
};

}  // namespace

JudgmentSummary judgment_aggregate(const std::vector<JudgmentRecord>& store, const std::vector<std::string>& items) {
    auto latest = latest_judgments(store);
    JudgmentSummary s;
    s.items = items.size();
    s.item_ids = items;
    s.property_slots = 2 * items.size();
    std::set<std::string> item_set(items.begin(), items.end());

    // (item, target, criterion) -> annotator -> value
    using Cell = std::tuple<std::string, int, int>;
    std::map<Cell, std::map<std::string, bool>> votes;
    std::set<std::string> annotators;
    for (const auto& j : latest) {
        if (!item_set.count(j.item_id)) continue;
        votes[{j.item_id, int(j.target), int(j.criterion)}][j.annotator] = j.value;
        annotators.insert(j.annotator);
    }
    s.annotators = annotators.size();
    auto consensus = [&](const std::string& item, JudgmentTarget t, Criterion c) -> std::optional<bool> {
        auto it = votes.find({item, int(t), int(c)});
        if (it == votes.end() || it->second.empty()) return std::nullopt;
        std::size_t yes = 0;
        for (const auto& [a, v] : it->second) yes += v;
        return 2 * yes > it->second.size();
    };

    for (const char* k : {"sentences_all_properties_good", "sentences_at_least_one_good",
                          "sentences_all_properties_neither", "properties_novel_relevant",
                          "properties_relevant_not_novel", "properties_novel_not_relevant", "properties_neither"})
        s.per_item[k] = std::vector<double>(items.size(), 0.0);
    for (const char* k : kPatternKeys) s.per_item[std::string("explanation_") + k] = std::vector<double>(items.size(), 0.0);
    for (const auto& [c, name] : kCriteria) s.criterion_true[name] = 0;

    std::map<std::string, std::vector<bool>> crit_values;  // explanation criteria, items with all three
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        std::size_t present = 0, good = 0, neither = 0;
        for (auto t : {JudgmentTarget::Property1, JudgmentTarget::Property2}) {
            auto nov = consensus(item, t, Criterion::Novelty);
            auto rel = consensus(item, t, Criterion::Relevance);
            if (!nov && !rel) continue;
            ++present;
            bool n = nov.value_or(false), r = rel.value_or(false);
            s.criterion_true["novelty"] += n;
            s.criterion_true["relevance"] += r;
            const char* key = n && r ? "properties_novel_relevant"
                              : r    ? "properties_relevant_not_novel"
                              : n    ? "properties_novel_not_relevant"
                                     : "properties_neither";
            s.per_item[key][i] += 1;
            good += n && r;
            neither += !n && !r;
        }
        if (present > 0 && good == present) s.per_item["sentences_all_properties_good"][i] = 1;
        if (good > 0) s.per_item["sentences_at_least_one_good"][i] = 1;
        if (present > 0 && neither == present) s.per_item["sentences_all_properties_neither"][i] = 1;

        auto v = consensus(item, JudgmentTarget::ShortExplanation, Criterion::LogicalValidity);
        auto c = consensus(item, JudgmentTarget::ShortExplanation, Criterion::Completeness);
        auto p = consensus(item, JudgmentTarget::ShortExplanation, Criterion::Pertinence);
        if (v || c || p) {
            bool bv = v.value_or(false), bc = c.value_or(false), bp = p.value_or(false);
            s.criterion_true["logical_validity"] += bv;
            s.criterion_true["completeness"] += bc;
            s.criterion_true["pertinence"] += bp;
            std::string pattern = std::string(bv ? "1" : "0") + (bc ? "1" : "0") + (bp ? "1" : "0");
            ++s.explanation_patterns[pattern];
            auto it = s.per_item.find("explanation_" + pattern);
            if (it != s.per_item.end()) it->second[i] = 1;
            crit_values["logical_validity"].push_back(bv);
            crit_values["completeness"].push_back(bc);
            crit_values["pertinence"].push_back(bp);
        }
    }
    auto total = [&](const char* k) {
        return static_cast<std::size_t>(std::accumulate(s.per_item[k].begin(), s.per_item[k].end(), 0.0));
    };
    s.sentences_all_properties_good = total("sentences_all_properties_good");
    s.sentences_at_least_one_good = total("sentences_at_least_one_good");
    s.sentences_all_properties_neither = total("sentences_all_properties_neither");
    s.properties_novel_relevant = total("properties_novel_relevant");
    s.properties_relevant_not_novel = total("properties_relevant_not_novel");
    s.properties_novel_not_relevant = total("properties_novel_not_relevant");
    s.properties_neither = total("properties_neither");

    if (!crit_values.empty()) {
        const char* names[] = {"logical_validity", "completeness", "pertinence"};
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b)
                s.phi[std::string(names[a]) + "~" + names[b]] = phi_coefficient(crit_values[names[a]], crit_values[names[b]]);
    }

    // Agreement: every annotator pair, over cells both judged.
    std::vector<std::string> ann(annotators.begin(), annotators.end());
    for (const auto& [c, cname] : kCriteria) {
        Agreement ag;
        std::vector<bool> xa, xb;
        for (std::size_t a = 0; a < ann.size(); ++a)
            for (std::size_t b = a + 1; b < ann.size(); ++b)
                for (const auto& [cell, by] : votes) {
                    if (std::get<2>(cell) != int(c)) continue;
                    auto ia = by.find(ann[a]), ib = by.find(ann[b]);
                    if (ia == by.end() || ib == by.end()) continue;
                    xa.push_back(ia->second);
                    xb.push_back(ib->second);
                }
        ag.pairs = xa.size();
        if (!xa.empty()) {
            std::size_t same = 0;
            for (std::size_t i = 0; i < xa.size(); ++i) same += xa[i] == xb[i];
            ag.percent = double(same) / double(xa.size());
            ag.kappa = cohen_kappa(xa, xb);
        }
        s.agreement[cname] = ag;
    }
    return s;
}

nlohmann::json to_json(const JudgmentSummary& s) {
    nlohmann::json agreement = nlohmann::json::object();
    for (const auto& [k, a] : s.agreement)
        agreement[k] = {{"pairs", a.pairs},
                        {"percent", a.pairs ? nlohmann::json(a.percent) : nlohmann::json()},
                        {"kappa", a.kappa ? nlohmann::json(*a.kappa) : nlohmann::json()}};
    nlohmann::json phi = nlohmann::json::object();
    for (const auto& [k, v] : s.phi) phi[k] = v ? nlohmann::json(*v) : nlohmann::json();
    return {{"items", s.items},
            {"annotators", s.annotators},
            {"sentence_level",
             {{"all_properties_novel_and_relevant", s.sentences_all_properties_good},
              {"at_least_one_novel_and_relevant", s.sentences_at_least_one_good},
              {"all_properties_neither", s.sentences_all_properties_neither},
              {"denominator", s.items}}},
            {"property_level",
             {{"novel_and_relevant", s.properties_novel_relevant},
              {"relevant_not_novel", s.properties_relevant_not_novel},
              {"novel_not_relevant", s.properties_novel_not_relevant},
              {"neither", s.properties_neither},
              {"denominator", s.property_slots}}},
            {"explanation_patterns", s.explanation_patterns},
            {"criterion_true", s.criterion_true},
            {"agreement", agreement},
            {"phi", phi},
            {"consensus", "majority; ties count as false"}};
}

namespace {

struct ComparisonRow {
    std::string label;
    std::string key;
    std::size_t a = 0, b = 0;
    std::size_t denominator = 0;  // 0 = plain count
    std::size_t b_denominator = 0;
};

std::vector<ComparisonRow> comparison_rows(const JudgmentSummary& a, const JudgmentSummary& b) {
    auto pat = [](const JudgmentSummary& s, const char* k) {
        auto it = s.explanation_patterns.find(k);
        return it == s.explanation_patterns.end() ? std::size_t{0} : it->second;
    };
    std::vector<ComparisonRow> rows = {
        {"Sentences with both properties novel and relevant", "sentences_all_properties_good",
         a.sentences_all_properties_good, b.sentences_all_properties_good, a.items, b.items},
        {"Sentences with at least one property novel and relevant", "sentences_at_least_one_good",
         a.sentences_at_least_one_good, b.sentences_at_least_one_good, a.items, b.items},
        {"Sentences with both properties neither novel nor relevant", "sentences_all_properties_neither",
         a.sentences_all_properties_neither, b.sentences_all_properties_neither, a.items, b.items},
        {"Properties both novel and relevant", "properties_novel_relevant", a.properties_novel_relevant,
         b.properties_novel_relevant, a.property_slots, b.property_slots},
        {"Properties relevant but not novel", "properties_relevant_not_novel", a.properties_relevant_not_novel,
         b.properties_relevant_not_novel, a.property_slots, b.property_slots},
        {"Properties novel but not relevant", "properties_novel_not_relevant", a.properties_novel_not_relevant,
         b.properties_novel_not_relevant, a.property_slots, b.property_slots},
        {"Properties neither novel nor relevant", "properties_neither", a.properties_neither, b.properties_neither,
         a.property_slots, b.property_slots},
    };
    for (std::size_t i = 0; i < std::size(kPatternKeys); ++i)
        rows.push_back({kPatternLabels[i], std::string("explanation_") + kPatternKeys[i], pat(a, kPatternKeys[i]),
                        pat(b, kPatternKeys[i]), 0, 0});
    return rows;
}

// Paired vectors over items present in both summaries.
std::optional<TTestResult> row_test(const JudgmentSummary& a, const JudgmentSummary& b, const std::string& key) {
    std::map<std::string, std::size_t> ib;
    for (std::size_t i = 0; i < b.item_ids.size(); ++i) ib[b.item_ids[i]] = i;
    std::vector<double> xa, xb;
    const auto& va = a.per_item.at(key);
    const auto& vb = b.per_item.at(key);
    for (std::size_t i = 0; i < a.item_ids.size(); ++i) {
        auto it = ib.find(a.item_ids[i]);
        if (it == ib.end()) continue;
        xa.push_back(va[i]);
        xb.push_back(vb[it->second]);
    }
    if (xa.size() < 2) return std::nullopt;
    bool all_same = true;
    for (std::size_t i = 0; i < xa.size(); ++i) all_same &= xa[i] == xb[i];
    if (all_same) return std::nullopt;
    return paired_t_test(xa, xb);
}

}  // namespace

nlohmann::json judgment_comparison_json(const JudgmentSummary& a, const JudgmentSummary& b) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : comparison_rows(a, b)) {
        auto t = row_test(a, b, r.key);
        rows.push_back({{"row", r.label},
                        {"key", r.key},
                        {"a", r.a},
                        {"b", r.b},
                        {"denominator", r.denominator ? nlohmann::json(r.denominator) : nlohmann::json()},
                        {"b_denominator", r.b_denominator ? nlohmann::json(r.b_denominator) : nlohmann::json()},
                        {"t_test", t ? to_json(*t) : nlohmann::json()}});
    }
    return rows;
}

std::string render_judgment_comparison(const JudgmentSummary& a, const JudgmentSummary& b, const std::string& a_label,
                                       const std::string& b_label) {
    std::ostringstream out;
    out << pad("", 62) << pad(a_label, 16, true) << pad(b_label, 16, true) << pad("p-value", 12, true) << "\n";
    for (const auto& r : comparison_rows(a, b)) {
        auto cell = [&](std::size_t v, std::size_t den) {
            return den ? std::to_string(v) + "/" + std::to_string(den) : std::to_string(v);
        };
        auto t = row_test(a, b, r.key);
        std::string p = t ? fmt("%.4g", t->p_two_tailed) : "N/A";
        out << pad(r.label, 62) << pad(cell(r.a, r.denominator), 16, true)
            << pad(cell(r.b, r.b_denominator), 16, true)
            << pad(p, 12, true) << "\n";
    }
    return out.str();
}

std::string render_judgment_summary(const JudgmentSummary& s, const std::string& label) {
    std::ostringstream out;
    out << pad("", 62) << pad(label, 16, true) << "\n";
    for (const auto& r : comparison_rows(s, s))
        out << pad(r.label, 62)
            << pad(r.denominator ? std::to_string(r.a) + "/" + std::to_string(r.denominator) : std::to_string(r.a), 16,
                   true)
            << "\n";
    for (const auto& [k, a] : s.agreement) {
        out << pad("Agreement (" + k + ")", 62)
            << pad(a.pairs ? fmt("%.4f", a.percent) + (a.kappa ? " k=" + fmt("%.3f", *a.kappa) : "") : "N/A", 16, true)
            << "\n";
    }
    return out.str();
}

}  // namespace afort
