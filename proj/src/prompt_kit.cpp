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

#include "afort/prompt_kit.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "afort/error.hpp"
#include "afort/util.hpp"
#include "json.hpp"

namespace afort {

namespace {

constexpr std::pair<SectionName, const char*> kSectionNames[] = {
    {SectionName::Role, "Role"},
    {SectionName::TaskDescription, "TaskDescription"},
    {SectionName::Class, "Class"},
    {SectionName::Logic, "Logic"},
    {SectionName::NormalizeShortExplanation, "NormalizeShortExplanation"},
    {SectionName::CommonProperties, "CommonProperties"},
    {SectionName::Examples, "Examples"},
    {SectionName::CoT, "CoT"},
    {SectionName::ExternalInfo, "ExternalInfo"},
    {SectionName::AugmentStrategy, "AugmentStrategy"},
    {SectionName::FinalPrompt, "FinalPrompt"},
};

std::string section_key(SectionName name, std::string_view variant) {
    std::string key = to_string(name);
    if (!variant.empty()) {
        key += '.';
        key += variant;
    }
    return key;
}

PromptSection parse_section_text(SectionName name, std::string_view text) {
    PromptSection s{name, {}, {}};
    std::string_view rest = text;
    if (rest.rfind("@refs:", 0) == 0) {
        auto nl = rest.find('\n');
        std::string_view line = rest.substr(6, nl == std::string_view::npos ? rest.size() - 6 : nl - 6);
        for (const auto& part : split(line, ',')) {
            std::string ref = trim(part);
            if (ref.empty()) continue;
            auto parsed = parse_section_name(ref);
            if (!parsed) throw DataError("prompt asset " + std::string(to_string(name)) +
                                         ": unknown section reference '" + ref + "'");
            s.references.push_back(*parsed);
        }
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    }
    std::string body(rest);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    s.body = std::move(body);
    return s;
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

FewShotExample exemplar_from_json(const nlohmann::json& j) {
    FewShotExample e;
    auto get = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty())
            throw DataError(std::string("exemplar missing field '") + key + "'");
        return j.at(key).get<std::string>();
    };
    e.sentence = get("sentence");
    e.correlate = get("correlate");
    e.remnant = get("remnant");
    e.likelihood = get("likelihood");
    e.property1 = get("property1");
    e.property2 = get("property2");
    e.short_explanation = get("short_explanation");
    e.long_explanation = get("long_explanation");
    return e;
}

std::string render_exemplars(const std::vector<FewShotExample>& examples) {
    std::ostringstream out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& e = examples[i];
        if (i) out << '\n';
        out << "Example " << i + 1 << ":\n"
            << "Sentence: " << e.sentence << '\n'
            << "Correlate: " << e.correlate << '\n'
            << "Remnant: " << e.remnant << '\n'
            << "Likelihood: " << e.likelihood << '\n'
            << "Property1: " << e.property1 << '\n'
            << "Property2: " << e.property2 << '\n'
            << "Short Explanation: " << e.short_explanation << '\n'
            << "Long Explanation: " << e.long_explanation << '\n';
    }
    return out.str();
}

std::string dquote(std::string_view s) { return "\"" + std::string(s) + "\""; }

struct CotHints {
    std::string gate;
    std::string step1;
    std::string step2;
    std::string step3;
};

CotHints interpretation_hints(const ArgumentRecord& r, Regime regime, Mode mode) {
    CotHints h;
    h.gate = mode == Mode::Forced
                 ? "Complete all four steps even when the verdict is not AF."
                 : "If the verdict is not AF, stop after recording it and leave the remaining fields empty.";
    if (regime != Regime::WithExternalInfo) return h;
    if (r.correlate || r.remnant) {
        h.step1 = " Suggestion from the annotators:";
        if (r.correlate) h.step1 += " correlate " + dquote(r.correlate_text());
        if (r.correlate && r.remnant) h.step1 += ",";
        if (r.remnant) h.step1 += " remnant " + dquote(r.remnant_text());
        h.step1 += ".";
    }
    if (r.logic != LogicCategory::Undefined)
        h.step2 = std::string(" Suggestion from the annotators: logic category ") + to_string(r.logic) + ".";
    auto props = r.properties();
    if (!props.empty()) {
        h.step3 = " Suggestion from the annotators: ";
        h.step3 += props.size() == 1 ? "property " : "properties ";
        for (std::size_t i = 0; i < props.size(); ++i) {
            if (i) h.step3 += " and ";
            h.step3 += dquote(props[i]);
        }
        h.step3 += ".";
    }
    return h;
}

std::string fill_cot(std::string body, const CotHints& h) {
    body = replace_all(std::move(body), "{{gate_instruction}}", h.gate);
    body = replace_all(std::move(body), "{{step1_hint}}", h.step1);
    body = replace_all(std::move(body), "{{step2_hint}}", h.step2);
    body = replace_all(std::move(body), "{{step3_hint}}", h.step3);
    return body;
}

// Renders, estimates and checks a bundle whose sections are already filled.
// `sentence_slot` is substituted only into the final section.
void finish_bundle(PromptBundle& b, std::string_view sentence, const PromptAssets& assets,
                   const std::map<std::string, std::string>& slots) {
    std::set<SectionName> present;
    for (const auto& s : b.sections) present.insert(s.name);
    for (const auto& s : b.sections) {
        for (auto ref : s.references) {
            if (!present.count(ref))
                throw DataError(std::string("dangling cross-reference: ") + to_string(s.name) + " -> " +
                                to_string(ref));
        }
    }
    auto render = [&](std::string_view sentence_text) {
        std::string out;
        for (const auto& s : b.sections) {
            std::string body = s.body;
            for (const auto& [k, v] : slots) body = replace_all(std::move(body), "{{" + k + "}}", v);
            body = replace_all(std::move(body), "{{sentence}}", sentence_text);
            out += "## ";
            out += to_string(s.name);
            out += '\n';
            out += body;
            out += "\n\n";
        }
        return out;
    };
    b.token_estimate = estimate_tokens(render(""));
    b.input_tokens = estimate_tokens(sentence);
    b.rendered = render(sentence);
    b.asset_version = assets.config().version;
    auto check = check_budget(b, b.input_tokens, assets.config().reserve_out, assets.config().window);
    if (!check.pass) {
        throw BudgetError("budget violation: prompt " + std::to_string(b.token_estimate) + " + input " +
                          std::to_string(b.input_tokens) + " + reserve " +
                          std::to_string(assets.config().reserve_out) + " exceeds window " +
                          std::to_string(check.window) + " by " + std::to_string(check.overflow));
    }
}

PromptSection with_body(const PromptSection& base, std::string body) {
    PromptSection s = base;
    s.body = std::move(body);
    return s;
}

PromptSection examples_section(const PromptAssets& assets) {
    if (assets.exemplars().empty()) throw DataError("no few-shot exemplars loaded");
    PromptSection s{SectionName::Examples, {}, {}};
    if (assets.has_section(SectionName::Examples)) s = assets.section(SectionName::Examples);
    std::string body = s.body;
    if (!body.empty()) body += "\n\n";
    body += render_exemplars(assets.exemplars());
    while (!body.empty() && body.back() == '\n') body.pop_back();
    s.body = std::move(body);
    return s;
}

}  // namespace

const char* to_string(SectionName n) noexcept {
    for (const auto& [k, v] : kSectionNames)
        if (k == n) return v;
    return "?";
}

std::optional<SectionName> parse_section_name(std::string_view s) {
    for (const auto& [k, v] : kSectionNames)
        if (s == v) return k;
    return std::nullopt;
}

std::string PromptBundle::digest() const { return sha256_hex(rendered); }

// ---------------------------------------------------------------------------
// Templates

bool ExplanationTemplate::uses_p() const { return pattern.find("{P}") != std::string::npos; }

std::string render_template(const ExplanationTemplate& tmpl, std::string_view x, std::string_view y,
                            std::optional<std::string_view> p, const std::vector<std::size_t>& choices) {
    if (tmpl.uses_p() && (!p || trim(*p).empty()))
        throw UsageError(std::string("template ") + to_string(tmpl.sentence_type) + std::to_string(tmpl.number) +
                         " needs a property P");
    const std::string& pat = tmpl.pattern;
    std::string out;
    std::size_t group = 0;
    for (std::size_t i = 0; i < pat.size();) {
        char c = pat[i];
        if (c == '{') {
            auto close = pat.find('}', i);
            if (close == std::string::npos) throw DataError("unterminated placeholder in template: " + pat);
            std::string name = pat.substr(i + 1, close - i - 1);
            if (name == "X") {
                out += x;
            } else if (name == "Y") {
                out += y;
            } else if (name == "P") {
                out += *p;
            } else if (name.rfind("Y^", 0) == 0) {
                std::string ys = trim(y);
                auto sp = ys.find(' ');
                if (sp == std::string::npos)
                    out += ys + " " + name.substr(2);
                else
                    out += ys.substr(0, sp) + " " + name.substr(2) + ys.substr(sp);
            } else {
                throw DataError("unknown placeholder {" + name + "} in template");
            }
            i = close + 1;
        } else if (c == '[') {
            auto close = pat.find(']', i);
            if (close == std::string::npos) throw DataError("unterminated alternation in template: " + pat);
            auto alts = split(std::string_view(pat).substr(i + 1, close - i - 1), '|');
            std::size_t pick = group < choices.size() ? choices[group] : 0;
            if (pick >= alts.size())
                throw UsageError("template choice " + std::to_string(pick) + " out of range for group " +
                                 std::to_string(group));
            out += alts[pick];
            ++group;
            i = close + 1;
        } else {
            out += c;
            ++i;
        }
    }
    // Collapse runs of spaces left by empty substitutions.
    std::string collapsed;
    for (char ch : out) {
        if (ch == ' ' && !collapsed.empty() && collapsed.back() == ' ') continue;
        collapsed += ch;
    }
    collapsed = trim(collapsed);
    collapsed = replace_all(std::move(collapsed), " ,", ",");
    collapsed = replace_all(std::move(collapsed), " .", ".");
    if (!collapsed.empty() && collapsed[0] >= 'a' && collapsed[0] <= 'z') collapsed[0] = char(collapsed[0] - 32);
    return collapsed;
}

std::vector<ExplanationTemplate> parse_templates(std::string_view body) {
    static const std::regex line_re(R"(^(QU|RE|SP|PC)(\d+):\s*(.+?)\s*$)");
    std::vector<ExplanationTemplate> out;
    for (const auto& line : split(body, '\n')) {
        std::smatch m;
        std::string l = trim(line);
        if (!std::regex_match(l, m, line_re)) continue;
        ExplanationTemplate t;
        t.sentence_type = *parse_sentence_type(m[1].str());
        t.number = std::stoi(m[2].str());
        t.pattern = m[3].str();
        if (t.pattern.find("{X}") == std::string::npos ||
            (t.pattern.find("{Y}") == std::string::npos && t.pattern.find("{Y^") == std::string::npos))
            throw DataError("template " + m[1].str() + m[2].str() + " lacks an X or Y placeholder");
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Assets

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    for (const auto& raw : split(text, '\n')) {
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("config line without '=': " + line);
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

PromptAssets PromptAssets::load(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("prompt asset directory not found: " + dir.string());
    PromptAssets a;
    if (fs::exists(dir / "prompt.conf")) {
        auto kv = parse_key_values(read_file(dir / "prompt.conf"));
        try {
            if (kv.count("version")) a.config_.version = kv["version"];
            if (kv.count("window")) a.config_.window = std::stoull(kv["window"]);
            if (kv.count("reserve_out")) a.config_.reserve_out = std::stoull(kv["reserve_out"]);
            if (kv.count("seed")) a.config_.seed = std::stoull(kv["seed"]);
        } catch (const std::logic_error&) {
            throw DataError("prompt.conf: malformed numeric value");
        }
        if (kv.count("exemplars")) a.config_.exemplar_file = kv["exemplars"];
        if (kv.count("identification_examples")) a.config_.identification_file = kv["identification_examples"];
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::string stem = f.stem().string();
        auto dot = stem.find('.');
        std::string base = stem.substr(0, dot);
        std::string variant = dot == std::string::npos ? "" : stem.substr(dot + 1);
        auto name = parse_section_name(base);
        if (!name) continue;
        a.sections_[section_key(*name, variant)] = parse_section_text(*name, read_file(f));
    }
    if (fs::exists(dir / a.config_.exemplar_file)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(dir / a.config_.exemplar_file));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("exemplar file: ") + e.what());
        }
        for (const auto& e : j) a.exemplars_.push_back(exemplar_from_json(e));
    }
    if (fs::exists(dir / a.config_.identification_file)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(dir / a.config_.identification_file));
            for (const auto& e : j)
                a.identification_.push_back({e.at("sentence").get<std::string>(), e.at("is_a_fortiori").get<bool>()});
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("identification example file: ") + e.what());
        }
    }
    if (a.has_section(SectionName::NormalizeShortExplanation))
        a.templates_ = parse_templates(a.section(SectionName::NormalizeShortExplanation).body);
    return a;
}

const PromptSection& PromptAssets::section(SectionName name, std::string_view variant) const {
    if (!variant.empty()) {
        auto it = sections_.find(section_key(name, variant));
        if (it != sections_.end()) return it->second;
    }
    auto it = sections_.find(section_key(name, {}));
    if (it == sections_.end())
        throw DataError(std::string("prompt section missing: ") + section_key(name, variant));
    return it->second;
}

bool PromptAssets::has_section(SectionName name, std::string_view variant) const {
    if (!variant.empty() && sections_.count(section_key(name, variant))) return true;
    return sections_.count(section_key(name, {})) > 0;
}

void PromptAssets::set_section(SectionName name, std::string_view variant, PromptSection section) {
    section.name = name;
    sections_[section_key(name, variant)] = std::move(section);
    if (name == SectionName::NormalizeShortExplanation && variant.empty())
        templates_ = parse_templates(sections_[section_key(name, {})].body);
}

std::string PromptAssets::digest() const {
    std::string acc = "version=" + config_.version + "\nwindow=" + std::to_string(config_.window) +
                      "\nreserve_out=" + std::to_string(config_.reserve_out) + "\nseed=" + std::to_string(config_.seed) +
                      "\n";
    for (const auto& [key, s] : sections_) {
        acc += "[" + key + "]";
        for (auto r : s.references) acc += std::string(to_string(r)) + ",";
        acc += "\n" + s.body + "\n";
    }
    acc += render_exemplars(exemplars_);
    for (const auto& e : identification_) acc += (e.is_a_fortiori ? "AF:" : "NAF:") + e.sentence + "\n";
    return sha256_hex(acc);
}

// ---------------------------------------------------------------------------
// Budget

std::size_t estimate_tokens(std::string_view text) { return (utf8_length(text) + 3) / 4; }

BudgetCheck check_budget(std::size_t prompt_tokens, std::size_t input_len, std::size_t reserve_out,
                         std::size_t window) {
    BudgetCheck c;
    c.required = prompt_tokens + input_len + reserve_out;
    c.window = window;
    c.pass = c.required <= window;
    c.overflow = c.pass ? 0 : c.required - window;
    return c;
}

BudgetCheck check_budget(const PromptBundle& bundle, std::size_t input_len, std::size_t reserve_out,
                         std::size_t window) {
    return check_budget(bundle.token_estimate, input_len, reserve_out, window);
}

// ---------------------------------------------------------------------------
// Assembly

PromptBundle assemble_interpretation_prompt(const ArgumentRecord& record, Regime regime, const PromptAssets& assets,
                                            Mode mode) {
    PromptBundle b;
    b.record_id = record.id;
    b.task = Task::Interpret;
    b.regime = regime;
    b.sections.push_back(assets.section(SectionName::Role));
    b.sections.push_back(assets.section(SectionName::TaskDescription));
    b.sections.push_back(assets.section(SectionName::Class));
    b.sections.push_back(assets.section(SectionName::Logic));
    b.sections.push_back(assets.section(SectionName::NormalizeShortExplanation));
    b.sections.push_back(assets.section(SectionName::CommonProperties));
    b.sections.push_back(examples_section(assets));
    b.exemplar_count = assets.exemplars().size();
    const auto& cot = assets.section(SectionName::CoT);
    b.sections.push_back(with_body(cot, fill_cot(cot.body, interpretation_hints(record, regime, mode))));
    if (regime == Regime::WithExternalInfo) b.sections.push_back(assets.section(SectionName::ExternalInfo));
    b.sections.push_back(assets.section(SectionName::FinalPrompt));
    finish_bundle(b, record.text, assets, {});
    return b;
}

PromptBundle assemble_identification_prompt(const ArgumentRecord& record, bool with_examples,
                                            const PromptAssets& assets) {
    constexpr std::size_t kPositive = 7;
    constexpr std::size_t kNegative = 3;
    PromptBundle b;
    b.record_id = record.id;
    b.task = Task::Identify;
    b.regime = Regime::WithoutExternalInfo;
    b.sections.push_back(assets.section(SectionName::Role));
    b.sections.push_back(assets.section(SectionName::TaskDescription, "identify"));
    if (with_examples) {
        std::vector<IdentificationExample> pos, neg;
        for (const auto& e : assets.identification_examples()) (e.is_a_fortiori ? pos : neg).push_back(e);
        if (pos.size() < kPositive || neg.size() < kNegative)
            throw DataError("insufficient example pool: need " + std::to_string(kPositive) + " AF and " +
                            std::to_string(kNegative) + " NAF, have " + std::to_string(pos.size()) + " and " +
                            std::to_string(neg.size()));
        std::uint64_t seed = assets.config().seed;
        seeded_shuffle(pos, derive_seed(seed, "identify-positive"));
        seeded_shuffle(neg, derive_seed(seed, "identify-negative"));
        std::vector<IdentificationExample> chosen(pos.begin(), pos.begin() + kPositive);
        chosen.insert(chosen.end(), neg.begin(), neg.begin() + kNegative);
        seeded_shuffle(chosen, derive_seed(seed, "identify-order"));
        std::string body;
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            if (i) body += "\n\n";
            body += "Demonstration " + std::to_string(i + 1) + ":\nSentence: " + chosen[i].sentence +
                    "\nLabel: " + (chosen[i].is_a_fortiori ? "AF" : "NAF");
        }
        b.sections.push_back({SectionName::Examples, body, {}});
        b.exemplar_count = chosen.size();
    }
    b.sections.push_back(assets.section(SectionName::FinalPrompt, "identify"));
    finish_bundle(b, record.text, assets, {});
    return b;
}

PromptBundle assemble_augmentation_prompt(const ArgumentRecord& record, const InterpretationResult& analysis,
                                          AugmentationStrategy strategy, const PromptAssets& assets) {
    const std::string variant = to_string(strategy);
    if (!assets.has_section(SectionName::AugmentStrategy, variant))
        throw DataError("prompt section missing: AugmentStrategy." + variant);
    PromptBundle b;
    b.record_id = record.id;
    b.task = Task::Augment;
    b.regime = Regime::WithoutExternalInfo;
    b.sections.push_back(assets.section(SectionName::Role));
    b.sections.push_back(assets.section(SectionName::TaskDescription, "augment"));
    b.sections.push_back(assets.section(SectionName::Class));
    b.sections.push_back(assets.section(SectionName::Logic));
    b.sections.push_back(assets.section(SectionName::NormalizeShortExplanation));
    b.sections.push_back(assets.section(SectionName::CommonProperties));
    b.sections.push_back(examples_section(assets));
    b.exemplar_count = assets.exemplars().size();
    const auto& cot = assets.section(SectionName::CoT);
    CotHints hints;
    hints.gate = "The new sentence must be an a fortiori argument, so its verdict is AF.";
    b.sections.push_back(with_body(cot, fill_cot(cot.body, hints)));
    b.sections.push_back(assets.section(SectionName::AugmentStrategy, variant));
    b.sections.push_back(assets.section(SectionName::FinalPrompt, "augment"));

    nlohmann::json a;
    a["correlate"] = analysis.correlate.value_or("");
    a["remnant"] = analysis.remnant.value_or("");
    a["sentence_type"] = to_string(analysis.sentence_type);
    a["logic_category"] = to_string(analysis.logic_category);
    a["properties"] = analysis.properties;
    a["short_explanation"] = analysis.short_explanation;
    finish_bundle(b, record.text, assets, {{"analysis", a.dump()}});
    return b;
}

PromptBundle assemble_augmentation_prompt(const ArgumentRecord& record, const InterpretationResult& analysis,
                                          std::string_view strategy, const PromptAssets& assets) {
    return assemble_augmentation_prompt(record, analysis, parse_strategy(strategy), assets);
}

std::vector<std::string> leak_sentinels(const ArgumentRecord& record, const PromptAssets& assets) {
    std::string static_text;
    for (auto name : {SectionName::Role, SectionName::TaskDescription, SectionName::Class, SectionName::Logic,
                      SectionName::NormalizeShortExplanation, SectionName::CommonProperties, SectionName::Examples,
                      SectionName::CoT, SectionName::FinalPrompt}) {
        if (assets.has_section(name)) static_text += assets.section(name).body + "\n";
    }
    static_text += render_exemplars(assets.exemplars());
    std::vector<std::string> candidates;
    if (record.correlate) candidates.push_back(record.correlate_text());
    if (record.remnant) candidates.push_back(record.remnant_text());
    for (const auto& p : record.properties()) candidates.push_back(p);
    if (record.comment) candidates.push_back(*record.comment);
    std::vector<std::string> out;
    for (auto& c : candidates) {
        c = trim(c);
        if (c.empty()) continue;
        if (icontains(record.text, c) || icontains(static_text, c)) continue;
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
}

}  // namespace afort
