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

#include "afort/corpus.hpp"

#include "afort/error.hpp"
#include "afort/util.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace afort {

using nlohmann::json;

const char* to_string(SentenceType t) noexcept {
    switch (t) {
        case SentenceType::RE: return "RE";
        case SentenceType::PC: return "PC";
        case SentenceType::QU: return "QU";
        case SentenceType::SP: return "SP";
        case SentenceType::Undefined: return "Undefined";
    }
    return "Undefined";
}

const char* to_string(LogicCategory l) noexcept {
    switch (l) {
        case LogicCategory::NS: return "NS";
        case LogicCategory::NR: return "NR";
        case LogicCategory::PS: return "PS";
        case LogicCategory::PR: return "PR";
        case LogicCategory::Undefined: return "Undefined";
    }
    return "Undefined";
}

std::optional<SentenceType> parse_sentence_type(std::string_view raw) {
    auto s = to_lower(trim(raw));
    if (s.empty() || s == "undefined" || s == "none") return SentenceType::Undefined;
    if (s == "re" || s == "resource allocation") return SentenceType::RE;
    if (s == "pc" || s == "precondition") return SentenceType::PC;
    if (s == "qu" || s == "quantity" || s == "quantitative") return SentenceType::QU;
    if (s == "sp" || s == "specificity") return SentenceType::SP;
    return std::nullopt;
}

std::optional<LogicCategory> parse_logic_category(std::string_view raw) {
    auto s = to_lower(trim(raw));
    if (s.empty() || s == "undefined" || s == "none") return LogicCategory::Undefined;
    if (s == "ns" || s == "negative simple") return LogicCategory::NS;
    if (s == "nr" || s == "negative reverse" || s == "negative reversed") return LogicCategory::NR;
    if (s == "ps" || s == "positive simple") return LogicCategory::PS;
    if (s == "pr" || s == "positive reverse" || s == "positive reversed") return LogicCategory::PR;
    return std::nullopt;
}

std::size_t index_of(SentenceType t) noexcept {
    for (std::size_t i = 0; i < kSentenceTypes.size(); ++i)
        if (kSentenceTypes[i] == t) return i;
    return kSentenceTypes.size() - 1;
}

std::size_t index_of(LogicCategory l) noexcept {
    for (std::size_t i = 0; i < kLogicCategories.size(); ++i)
        if (kLogicCategories[i] == l) return i;
    return kLogicCategories.size() - 1;
}

std::string ArgumentRecord::correlate_text() const {
    return correlate ? utf8_substr(text, correlate->start, correlate->end) : std::string{};
}

std::string ArgumentRecord::remnant_text() const {
    return remnant ? utf8_substr(text, remnant->start, remnant->end) : std::string{};
}

std::vector<std::string> ArgumentRecord::properties() const {
    std::vector<std::string> out;
    if (prop1 && !trim(*prop1).empty()) out.push_back(*prop1);
    if (prop2 && !trim(*prop2).empty()) out.push_back(*prop2);
    return out;
}

std::optional<ArgumentRecord::SwappedReading> ArgumentRecord::swapped_reading() const {
    if (is_a_fortiori || !correlate || !remnant) return std::nullopt;
    return SwappedReading{remnant_text(), correlate_text()};
}

namespace {

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

std::optional<Span> span_from(const json& j, const char* s, const char* e) {
    if (!j.contains(s) || j.at(s).is_null()) return std::nullopt;
    return Span{j.at(s).get<std::size_t>(), j.at(e).get<std::size_t>()};
}

}  // namespace

json to_json(const ArgumentRecord& r) {
    json j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["cor_start"] = r.correlate ? json(r.correlate->start) : json(nullptr);
    j["cor_end"] = r.correlate ? json(r.correlate->end) : json(nullptr);
    j["rem_start"] = r.remnant ? json(r.remnant->start) : json(nullptr);
    j["rem_end"] = r.remnant ? json(r.remnant->end) : json(nullptr);
    j["is_a_fortiori"] = r.is_a_fortiori;
    j["prop1"] = opt_json(r.prop1);
    j["prop2"] = opt_json(r.prop2);
    j["logic"] = to_string(r.logic);
    j["class"] = to_string(r.sentence_class);
    j["metaphor"] = r.metaphor;
    j["additive"] = r.additive;
    j["comment"] = opt_json(r.comment);
    return j;
}

ArgumentRecord record_from_json(const json& j) {
    ArgumentRecord r;
    r.id = j.at("id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.correlate = span_from(j, "cor_start", "cor_end");
    r.remnant = span_from(j, "rem_start", "rem_end");
    r.is_a_fortiori = j.at("is_a_fortiori").get<bool>();
    r.prop1 = opt_string(j, "prop1");
    r.prop2 = opt_string(j, "prop2");
    auto logic = parse_logic_category(j.at("logic").get<std::string>());
    auto cls = parse_sentence_type(j.at("class").get<std::string>());
    if (!logic || !cls) throw DataError("record " + r.id + ": unknown taxonomy label");
    r.logic = *logic;
    r.sentence_class = *cls;
    r.metaphor = j.value("metaphor", false);
    r.additive = j.value("additive", false);
    r.comment = opt_string(j, "comment");
    return r;
}

namespace {

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

// RFC 4180 style reader: quoted fields may hold delimiters, doubled quotes
// and newlines.
class CsvReader {
public:
    CsvReader(std::string_view text, char delim) : text_(text), delim_(delim) {}

    std::optional<CsvRow> next() {
        if (pos_ >= text_.size()) return std::nullopt;
        CsvRow row;
        row.line = line_;
        std::string field;
        bool quoted = false;
        bool field_started_quoted = false;
        while (pos_ < text_.size()) {
            char c = text_[pos_++];
            if (quoted) {
                if (c == '"') {
                    if (pos_ < text_.size() && text_[pos_] == '"') {
                        field.push_back('"');
                        ++pos_;
                    } else {
                        quoted = false;
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(c);
                }
                continue;
            }
            if (c == '"' && field.empty() && !field_started_quoted) {
                quoted = true;
                field_started_quoted = true;
            } else if (c == delim_) {
                row.fields.push_back(std::move(field));
                field.clear();
                field_started_quoted = false;
            } else if (c == '\r') {
                continue;
            } else if (c == '\n') {
                ++line_;
                break;
            } else {
                field.push_back(c);
            }
        }
        row.fields.push_back(std::move(field));
        return row;
    }

private:
    std::string_view text_;
    char delim_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

char detect_delimiter(std::string_view text) {
    auto eol = text.find('\n');
    auto header = text.substr(0, eol);
    std::size_t commas = 0, tabs = 0;
    bool quoted = false;
    for (char c : header) {
        if (c == '"') quoted = !quoted;
        if (quoted) continue;
        if (c == ',') ++commas;
        if (c == '\t') ++tabs;
    }
    return tabs > commas ? '\t' : ',';
}

struct RowError {
    std::string reason;
};

std::optional<std::size_t> parse_index(const std::string& raw) {
    auto s = trim(raw);
    if (s.empty()) return std::nullopt;
    // Spreadsheet exports sometimes write integers as "12.0".
    if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw RowError{"malformed index '" + s + "'"};
    return v;
}

bool parse_flag(const std::string& raw, const char* column) {
    auto s = to_lower(trim(raw));
    if (s.empty() || s == "no" || s == "n" || s == "false" || s == "0") return false;
    if (s == "yes" || s == "y" || s == "true" || s == "1") return true;
    throw RowError{std::string("malformed ") + column + " value '" + trim(raw) + "'"};
}

std::optional<std::string> optional_text(const std::string& raw) {
    if (trim(raw).empty()) return std::nullopt;
    return raw;
}

std::optional<Span> parse_span(const std::string& s, const std::string& e, std::size_t len, const char* name) {
    auto start = parse_index(s);
    auto end = parse_index(e);
    if (!start && !end) return std::nullopt;
    if (!start || !end) throw RowError{std::string("incomplete ") + name + " span"};
    if (*start > *end || *end > len) throw RowError{"span out of bounds"};
    if (*start == *end) throw RowError{std::string("empty ") + name + " span"};
    return Span{*start, *end};
}

}  // namespace

ParseResult parse_dataset(std::string_view text, DelimiterSpec format) {
    ParseResult result;
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF)
        text.remove_prefix(3);
    result.delimiter = format.delimiter ? format.delimiter : detect_delimiter(text);
    CsvReader reader(text, result.delimiter);

    auto header = reader.next();
    if (!header) throw DataError("schema error: empty input, no header row");
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header->fields.size(); ++i) column[to_lower(trim(header->fields[i]))] = i;
    std::vector<std::size_t> idx;
    for (const char* name : kCorpusColumns) {
        auto it = column.find(to_lower(name));
        if (it == column.end()) throw DataError(std::string("schema error: missing column '") + name + "'");
        idx.push_back(it->second);
    }
    auto id_it = column.find("id");
    const std::size_t width = header->fields.size();

    std::size_t row_number = 0;
    while (auto row = reader.next()) {
        if (row->fields.size() == 1 && trim(row->fields[0]).empty()) continue;  // blank line
        ++row_number;
        try {
            if (row->fields.size() != width)
                throw RowError{"field count mismatch: expected " + std::to_string(width) + ", got " +
                               std::to_string(row->fields.size())};
            auto f = [&](std::size_t k) -> const std::string& { return row->fields[idx[k]]; };
            ArgumentRecord r;
            r.id = id_it != column.end() ? trim(row->fields[id_it->second]) : std::to_string(row_number);
            if (r.id.empty()) r.id = std::to_string(row_number);
            r.text = f(0);
            const auto len = utf8_length(r.text);
            r.correlate = parse_span(f(1), f(2), len, "correlate");
            r.remnant = parse_span(f(3), f(4), len, "remnant");
            r.is_a_fortiori = !parse_flag(f(5), "NAF");
            r.prop1 = optional_text(f(6));
            r.prop2 = optional_text(f(7));
            auto logic = parse_logic_category(f(8));
            if (!logic) throw RowError{"unknown logic label '" + trim(f(8)) + "'"};
            auto cls = parse_sentence_type(f(9));
            if (!cls) throw RowError{"unknown class label '" + trim(f(9)) + "'"};
            r.logic = *logic;
            r.sentence_class = *cls;
            r.metaphor = parse_flag(f(10), "metaphor");
            r.additive = parse_flag(f(11), "additive");
            r.comment = optional_text(f(12));

            if ((r.logic == LogicCategory::Undefined) != (r.sentence_class == SentenceType::Undefined))
                result.warnings.push_back("record " + r.id + ": taxonomy Undefined in only one dimension (logic=" +
                                          to_string(r.logic) + ", class=" + to_string(r.sentence_class) + ")");
            if (r.is_a_fortiori && (!r.correlate || !r.remnant))
                result.warnings.push_back("record " + r.id + ": a fortiori row without correlate/remnant spans");
            result.records.push_back(std::move(r));
        } catch (const RowError& e) {
            result.rejects.push_back({row->line, e.reason});
        }
    }
    return result;
}

ParseResult parse_dataset(std::istream& in, DelimiterSpec format) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str(), format);
}

namespace {

std::string quote_field(std::string_view v, char delim) {
    bool needs = v.find_first_of(std::string{'"', '\n', '\r', delim}) != std::string_view::npos ||
                 (!v.empty() && (v.front() == ' ' || v.back() == ' '));
    if (!needs) return std::string(v);
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string write_delimited(const std::vector<ArgumentRecord>& records, char delim) {
    std::ostringstream out;
    out << "id";
    for (const char* c : kCorpusColumns) out << delim << c;
    out << '\n';
    auto idx = [](const std::optional<Span>& s, bool start) {
        return s ? std::to_string(start ? s->start : s->end) : std::string{};
    };
    for (const auto& r : records) {
        out << quote_field(r.id, delim) << delim << quote_field(r.text, delim) << delim << idx(r.correlate, true)
            << delim << idx(r.correlate, false) << delim << idx(r.remnant, true) << delim
            << idx(r.remnant, false) << delim << (r.is_a_fortiori ? "No" : "Yes") << delim
            << quote_field(r.prop1.value_or(""), delim) << delim << quote_field(r.prop2.value_or(""), delim)
            << delim << to_string(r.logic) << delim << to_string(r.sentence_class) << delim
            << (r.metaphor ? "Yes" : "No") << delim << (r.additive ? "Yes" : "No") << delim
            << quote_field(r.comment.value_or(""), delim) << '\n';
    }
    return out.str();
}

std::string write_canonical(const std::vector<ArgumentRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<ArgumentRecord> read_canonical(std::string_view jsonl) {
    std::vector<ArgumentRecord> out;
    std::size_t line_no = 0;
    for (const auto& line : split(jsonl, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError("canonical corpus line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<ArgumentRecord> load_corpus(const std::string& path) {
    auto text = read_file(path);
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return read_canonical(text);
    auto parsed = parse_dataset(text);
    if (!parsed.rejects.empty())
        throw DataError(path + ": " + std::to_string(parsed.rejects.size()) + " rejected rows (first at line " +
                        std::to_string(parsed.rejects.front().line) + ": " + parsed.rejects.front().reason + ")");
    return std::move(parsed.records);
}

std::string corpus_digest(const std::vector<ArgumentRecord>& records) {
    return sha256_hex(write_canonical(records));
}

std::size_t DistributionTable::logic_total(LogicCategory l) const {
    std::size_t n = 0;
    for (auto v : cells[index_of(l)]) n += v;
    return n;
}

std::size_t DistributionTable::class_total(SentenceType t) const {
    std::size_t n = 0;
    for (const auto& row : cells) n += row[index_of(t)];
    return n;
}

std::size_t DistributionTable::total() const {
    std::size_t n = 0;
    for (const auto& row : cells)
        for (auto v : row) n += v;
    return n;
}

DistributionTable dataset_stats(const std::vector<ArgumentRecord>& records) {
    DistributionTable t;
    for (const auto& r : records) ++t.cells[index_of(r.logic)][index_of(r.sentence_class)];
    return t;
}

std::string render_distribution(const DistributionTable& t) {
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-10s", "Logic");
    out << buf;
    for (auto c : kSentenceTypes) {
        std::snprintf(buf, sizeof buf, "%10s", to_string(c));
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%10s\n", "Total");
    out << buf;
    for (auto l : kLogicCategories) {
        std::snprintf(buf, sizeof buf, "%-10s", to_string(l));
        out << buf;
        for (auto c : kSentenceTypes) {
            std::snprintf(buf, sizeof buf, "%10zu", t.count(l, c));
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "%10zu\n", t.logic_total(l));
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%-10s", "Total");
    out << buf;
    for (auto c : kSentenceTypes) {
        std::snprintf(buf, sizeof buf, "%10zu", t.class_total(c));
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%10zu\n", t.total());
    out << buf;
    return out.str();
}

json to_json(const DistributionTable& t) {
    json j;
    json grid = json::object();
    for (auto l : kLogicCategories) {
        json row = json::object();
        for (auto c : kSentenceTypes) row[to_string(c)] = t.count(l, c);
        grid[to_string(l)] = row;
    }
    j["grid"] = grid;
    json classes = json::object(), logic = json::object();
    for (auto c : kSentenceTypes) classes[to_string(c)] = t.class_total(c);
    for (auto l : kLogicCategories) logic[to_string(l)] = t.logic_total(l);
    j["class_totals"] = classes;
    j["logic_totals"] = logic;
    j["total"] = t.total();
    return j;
}

json to_json(const EvaluationSet& set) {
    return json{{"record_ids", set.record_ids},
                {"seed", set.seed},
                {"per_class_quota", set.per_class_quota},
                {"per_combo_target", set.per_combo_target}};
}

EvaluationSet evaluation_set_from_json(const json& j) {
    EvaluationSet s;
    s.record_ids = j.at("record_ids").get<std::vector<std::string>>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.per_class_quota = j.value("per_class_quota", std::size_t{20});
    s.per_combo_target = j.value("per_combo_target", std::size_t{5});
    return s;
}

EvaluationSet stratified_sample(const std::vector<ArgumentRecord>& records, const EvaluationSetParams& params) {
    EvaluationSet set;
    set.seed = params.seed;
    set.per_class_quota = params.per_class_quota;
    set.per_combo_target = params.per_combo_target;

    for (auto cls : kSentenceTypes) {
        // Per logic category, record ids in seeded order. Sorting first makes
        // the draw independent of input row order.
        std::array<std::vector<std::string>, 5> groups;
        std::size_t class_size = 0;
        for (const auto& r : records)
            if (r.sentence_class == cls) {
                groups[index_of(r.logic)].push_back(r.id);
                ++class_size;
            }
        if (class_size < params.per_class_quota)
            throw DataError(std::string("insufficient records for class ") + to_string(cls) + ": have " +
                            std::to_string(class_size) + ", quota " + std::to_string(params.per_class_quota));
        for (std::size_t li = 0; li < groups.size(); ++li) {
            auto& g = groups[li];
            std::sort(g.begin(), g.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
            seeded_shuffle(g, derive_seed(params.seed, std::string(to_string(cls)) + "/" +
                                                          to_string(kLogicCategories[li])));
        }

        std::array<std::size_t, 5> taken{};
        std::size_t total = 0;
        for (std::size_t li = 0; li < groups.size(); ++li) {
            taken[li] = std::min(params.per_combo_target, groups[li].size());
            total += taken[li];
        }
        if (total > params.per_class_quota)
            throw DataError(std::string("per-combination targets exceed the quota for class ") + to_string(cls) +
                            ": " + std::to_string(total) + " > " + std::to_string(params.per_class_quota));

        std::size_t shortfall = params.per_class_quota - total;
        if (shortfall > 0) {
            std::array<std::size_t, 5> remaining{};
            std::size_t remaining_total = 0;
            for (std::size_t li = 0; li < groups.size(); ++li) {
                remaining[li] = groups[li].size() - taken[li];
                remaining_total += remaining[li];
            }
            // Largest remainder apportionment over remaining counts.
            std::array<std::size_t, 5> extra{};
            std::size_t assigned = 0;
            std::vector<std::pair<double, std::size_t>> fractions;  // (fraction, logic index)
            for (std::size_t li = 0; li < groups.size(); ++li) {
                if (remaining[li] == 0) continue;
                const double exact = static_cast<double>(shortfall) * static_cast<double>(remaining[li]) /
                                     static_cast<double>(remaining_total);
                extra[li] = static_cast<std::size_t>(exact);
                assigned += extra[li];
                fractions.emplace_back(exact - static_cast<double>(extra[li]), li);
            }
            // Seeded tie order, then stable sort by descending fraction.
            seeded_shuffle(fractions, derive_seed(params.seed, std::string("ties/") + to_string(cls)));
            std::stable_sort(fractions.begin(), fractions.end(),
                             [](const auto& a, const auto& b) { return a.first > b.first; });
            for (std::size_t k = 0; assigned < shortfall && k < fractions.size(); ++k) {
                auto li = fractions[k].second;
                if (extra[li] < remaining[li]) {
                    ++extra[li];
                    ++assigned;
                }
            }
            for (std::size_t li = 0; li < groups.size(); ++li) taken[li] += extra[li];
        }
        for (std::size_t li = 0; li < groups.size(); ++li)
            for (std::size_t k = 0; k < taken[li]; ++k) set.record_ids.push_back(groups[li][k]);
    }
    return set;
}

}  // namespace afort
