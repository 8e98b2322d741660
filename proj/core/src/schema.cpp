#include "ruleforge/schema.hpp"

#include <array>
#include <regex>
#include <set>

#include "ruleforge/util.hpp"

namespace ruleforge::schema {

namespace {

const std::set<std::string> kRuleTypes = {
    "obligation",   "prohibition",   "permission",
    "exemption",    "definition-application", "safe-harbor",
    "procedure",    "clarification", "deeming",
    "condition-precedent", "other"};

const std::set<std::string> kCrossRefTypes = {
    "CFR", "Rule", "Form", "USC", "Release", "Regulation", "Note", "Other"};

const std::set<std::string> kZones = {"ET", "EST", "EDT"};

const std::set<std::string> kDateEvents = {"adopted", "amended", "rescinded",
                                           "note"};

const std::set<std::string> kScopes = {"section", "part", "act",
                                       "context-dependent"};

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

// Decode context: records unknown fields on the root extraction and the
// first structural mismatch. Value-level problems (bad enums, empty
// required strings, out-of-range scores) are deferred to validation.
struct Ctx {
    SectionExtraction* root = nullptr;
    std::string err_path;
    std::string err_msg;
    bool ok = true;

    bool fail(const std::string& path, const std::string& msg) {
        if (ok) {
            err_path = path;
            err_msg = msg;
            ok = false;
        }
        return false;
    }

    void note_unknown(const std::string& path) {
        if (root) root->unknown_field_paths.push_back(path);
    }
};

void scan_unknown(const ordered_json& j, const std::string& path,
                  std::initializer_list<const char*> known, Ctx& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool found = false;
        for (const char* k : known) {
            if (it.key() == k) {
                found = true;
                break;
            }
        }
        if (!found) ctx.note_unknown(join_path(path, it.key()));
    }
}

// Missing and null both read as empty; validation owns the required check.
bool get_string(const ordered_json& j, const char* key, const std::string& path,
                std::string& out, Ctx& ctx) {
    out.clear();
    if (!j.contains(key) || j.at(key).is_null()) return true;
    const auto& v = j.at(key);
    if (!v.is_string()) return ctx.fail(join_path(path, key), "expected string");
    out = v.get<std::string>();
    return true;
}

bool get_opt_string(const ordered_json& j, const char* key,
                    const std::string& path, std::optional<std::string>& out,
                    Ctx& ctx) {
    out.reset();
    if (!j.contains(key) || j.at(key).is_null()) return true;
    const auto& v = j.at(key);
    if (!v.is_string()) return ctx.fail(join_path(path, key), "expected string");
    out = v.get<std::string>();
    return true;
}

bool decode_cross_ref(const ordered_json& j, const std::string& path,
                      CrossRef& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"type", "cite", "summary"}, ctx);
    return get_string(j, "type", path, out.type, ctx) &&
           get_string(j, "cite", path, out.cite, ctx) &&
           get_opt_string(j, "summary", path, out.summary, ctx);
}

bool decode_cross_ref_list(const ordered_json& j, const std::string& path,
                           std::optional<std::vector<CrossRef>>& out, Ctx& ctx) {
    out.reset();
    if (!j.contains("cross_references") || j.at("cross_references").is_null()) {
        return true;
    }
    const auto& v = j.at("cross_references");
    if (!v.is_array()) {
        return ctx.fail(join_path(path, "cross_references"), "expected array");
    }
    std::vector<CrossRef> list;
    for (std::size_t i = 0; i < v.size(); ++i) {
        CrossRef ref;
        if (!decode_cross_ref(v[i], index_path(join_path(path, "cross_references"), i),
                              ref, ctx)) {
            return false;
        }
        list.push_back(std::move(ref));
    }
    out = std::move(list);
    return true;
}

bool decode_time_window(const ordered_json& j, const std::string& path,
                        TimeWindow& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"start", "end", "zone"}, ctx);
    return get_opt_string(j, "start", path, out.start, ctx) &&
           get_opt_string(j, "end", path, out.end, ctx) &&
           get_opt_string(j, "zone", path, out.zone, ctx);
}

bool decode_constraint(const ordered_json& j, const std::string& path,
                       Constraint& out, Ctx& ctx) {
    if (j.is_string()) {  // tolerated shorthand
        out.text = j.get<std::string>();
        return true;
    }
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"text", "applies_to"}, ctx);
    return get_string(j, "text", path, out.text, ctx) &&
           get_opt_string(j, "applies_to", path, out.applies_to, ctx);
}

bool decode_condition(const ordered_json& j, const std::string& path,
                      Condition& out, Ctx& ctx) {
    if (j.is_string()) {
        out.trigger = j.get<std::string>();
        return true;
    }
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"trigger", "time_window", "cross_references"}, ctx);
    if (!get_string(j, "trigger", path, out.trigger, ctx)) return false;
    if (j.contains("time_window") && !j.at("time_window").is_null()) {
        TimeWindow tw;
        if (!decode_time_window(j.at("time_window"), join_path(path, "time_window"),
                                tw, ctx)) {
            return false;
        }
        out.time_window = std::move(tw);
    }
    return decode_cross_ref_list(j, path, out.cross_references, ctx);
}

bool decode_exception(const ordered_json& j, const std::string& path,
                      ExceptionItem& out, Ctx& ctx) {
    if (j.is_string()) {
        out.text = j.get<std::string>();
        return true;
    }
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"text", "cross_references"}, ctx);
    return get_string(j, "text", path, out.text, ctx) &&
           decode_cross_ref_list(j, path, out.cross_references, ctx);
}

bool decode_penalty(const ordered_json& j, const std::string& path,
                    PenaltyItem& out, Ctx& ctx) {
    if (j.is_string()) {
        out.text = j.get<std::string>();
        return true;
    }
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"text", "cross_references"}, ctx);
    return get_string(j, "text", path, out.text, ctx) &&
           decode_cross_ref_list(j, path, out.cross_references, ctx);
}

template <typename T, typename Fn>
bool decode_array(const ordered_json& j, const std::string& path,
                  std::vector<T>& out, Ctx& ctx, Fn item_decoder) {
    if (!j.is_array()) return ctx.fail(path, "expected array");
    for (std::size_t i = 0; i < j.size(); ++i) {
        T item{};
        if (!item_decoder(j[i], index_path(path, i), item, ctx)) return false;
        out.push_back(std::move(item));
    }
    return true;
}

bool decode_statement(const ordered_json& j, const std::string& path,
                      Statement& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path,
                 {"action", "action_object", "method", "constraints",
                  "conditions", "exceptions", "penalties_or_consequences",
                  "purpose", "verbatim"},
                 ctx);
    if (!get_string(j, "action", path, out.action, ctx)) return false;
    if (!get_opt_string(j, "action_object", path, out.action_object, ctx)) return false;
    if (!get_opt_string(j, "method", path, out.method, ctx)) return false;

    if (j.contains("constraints") && !j.at("constraints").is_null()) {
        std::vector<Constraint> list;
        if (!decode_array(j.at("constraints"), join_path(path, "constraints"),
                          list, ctx, decode_constraint)) {
            return false;
        }
        out.constraints = std::move(list);
    }
    if (j.contains("conditions") && !j.at("conditions").is_null()) {
        std::vector<Condition> list;
        if (!decode_array(j.at("conditions"), join_path(path, "conditions"), list,
                          ctx, decode_condition)) {
            return false;
        }
        out.conditions = std::move(list);
    }
    if (j.contains("exceptions") && !j.at("exceptions").is_null()) {
        std::vector<ExceptionItem> list;
        if (!decode_array(j.at("exceptions"), join_path(path, "exceptions"), list,
                          ctx, decode_exception)) {
            return false;
        }
        out.exceptions = std::move(list);
    }
    if (j.contains("penalties_or_consequences") &&
        !j.at("penalties_or_consequences").is_null()) {
        std::vector<PenaltyItem> list;
        if (!decode_array(j.at("penalties_or_consequences"),
                          join_path(path, "penalties_or_consequences"), list, ctx,
                          decode_penalty)) {
            return false;
        }
        out.penalties_or_consequences = std::move(list);
    }
    if (!get_opt_string(j, "purpose", path, out.purpose, ctx)) return false;
    return get_string(j, "verbatim", path, out.verbatim, ctx);
}

bool decode_rule_type(const ordered_json& j, const std::string& path,
                      RuleType& out, Ctx& ctx) {
    if (j.is_string()) {  // scalar wire form used by repair outputs
        out.type = j.get<std::string>();
        return true;
    }
    if (!j.is_object()) return ctx.fail(path, "expected object or string");
    scan_unknown(j, path, {"type", "other_label"}, ctx);
    return get_string(j, "type", path, out.type, ctx) &&
           get_opt_string(j, "other_label", path, out.other_label, ctx);
}

bool decode_target(const ordered_json& j, const std::string& path, Target& out,
                   Ctx& ctx) {
    if (j.is_string()) {
        out.role = j.get<std::string>();
        return true;
    }
    if (!j.is_object()) return ctx.fail(path, "expected object or string");
    scan_unknown(j, path, {"role", "qualifiers"}, ctx);
    return get_string(j, "role", path, out.role, ctx) &&
           get_opt_string(j, "qualifiers", path, out.qualifiers, ctx);
}

bool decode_citations(const ordered_json& j, const std::string& path,
                      Citations& out, Ctx& ctx) {
    if (j.is_string()) {
        out.text = {j.get<std::string>()};
        out.scalar_form = true;
        return true;
    }
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_string()) {
                return ctx.fail(index_path(path, i), "expected string");
            }
            out.text.push_back(j[i].get<std::string>());
        }
        return true;
    }
    if (!j.is_object()) return ctx.fail(path, "expected string, array, or object");
    scan_unknown(j, path, {"text"}, ctx);
    if (!j.contains("text") || j.at("text").is_null()) return true;
    const auto& t = j.at("text");
    if (t.is_string()) {
        out.text = {t.get<std::string>()};
        out.scalar_form = true;
        return true;
    }
    if (t.is_array()) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!t[i].is_string()) {
                return ctx.fail(index_path(join_path(path, "text"), i),
                                "expected string");
            }
            out.text.push_back(t[i].get<std::string>());
        }
        return true;
    }
    return ctx.fail(join_path(path, "text"), "expected string or array");
}

bool decode_metric_map(const ordered_json& j, const std::string& path,
                       std::vector<MetricEntry>& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        MetricEntry m;
        m.name = it.key();
        std::string mpath = join_path(path, it.key());
        if (v.is_number()) {  // tolerated shorthand: bare score
            m.score = v.get<double>();
        } else if (v.is_object()) {
            scan_unknown(v, mpath, {"Score", "Justification"}, ctx);
            if (!v.contains("Score") || !v.at("Score").is_number()) {
                return ctx.fail(join_path(mpath, "Score"), "expected number");
            }
            m.score = v.at("Score").get<double>();
            std::string just;
            if (!get_string(v, "Justification", mpath, just, ctx)) return false;
            m.justification = std::move(just);
        } else {
            return ctx.fail(mpath, "expected object or number");
        }
        out.push_back(std::move(m));
    }
    return true;
}

bool decode_judge_score(const ordered_json& j, const std::string& path,
                        JudgeScore& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"step1", "step2", "step3", "Final", "Notes"}, ctx);
    for (const char* step : {"step1", "step2", "step3"}) {
        if (!j.contains(step) || j.at(step).is_null()) continue;
        std::vector<MetricEntry> entries;
        if (!decode_metric_map(j.at(step), join_path(path, step), entries, ctx)) {
            return false;
        }
        if (std::string(step) == "step1") out.step1 = std::move(entries);
        else if (std::string(step) == "step2") out.step2 = std::move(entries);
        else out.step3 = std::move(entries);
    }
    if (j.contains("Final") && !j.at("Final").is_null()) {
        if (!j.at("Final").is_number()) {
            return ctx.fail(join_path(path, "Final"), "expected number");
        }
        out.final_score = j.at("Final").get<double>();
    }
    return get_opt_string(j, "Notes", path, out.notes, ctx);
}

bool decode_rule_unit(const ordered_json& j, const std::string& path,
                      RuleUnit& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path,
                 {"rule_id", "label", "rule_type", "targets", "statement",
                  "citations", "judge_score", "examples"},
                 ctx);
    if (!get_string(j, "rule_id", path, out.rule_id, ctx)) return false;
    if (!get_string(j, "label", path, out.label, ctx)) return false;
    if (j.contains("rule_type") && !j.at("rule_type").is_null()) {
        if (!decode_rule_type(j.at("rule_type"), join_path(path, "rule_type"),
                              out.rule_type, ctx)) {
            return false;
        }
    }
    if (j.contains("targets") && !j.at("targets").is_null()) {
        if (!decode_array(j.at("targets"), join_path(path, "targets"),
                          out.targets, ctx, decode_target)) {
            return false;
        }
    }
    if (j.contains("statement") && !j.at("statement").is_null()) {
        if (!decode_statement(j.at("statement"), join_path(path, "statement"),
                              out.statement, ctx)) {
            return false;
        }
        out.statement_present = true;
    } else {
        out.statement_present = false;
    }
    if (j.contains("citations") && !j.at("citations").is_null()) {
        Citations c;
        if (!decode_citations(j.at("citations"), join_path(path, "citations"), c,
                              ctx)) {
            return false;
        }
        out.citations = std::move(c);
    }
    if (j.contains("judge_score") && !j.at("judge_score").is_null()) {
        JudgeScore s;
        if (!decode_judge_score(j.at("judge_score"), join_path(path, "judge_score"),
                                s, ctx)) {
            return false;
        }
        out.judge_score = std::move(s);
    }
    if (j.contains("examples") && !j.at("examples").is_null()) {
        const auto& ex = j.at("examples");
        if (!ex.is_array()) {
            return ctx.fail(join_path(path, "examples"), "expected array");
        }
        std::vector<std::string> list;
        for (std::size_t i = 0; i < ex.size(); ++i) {
            if (!ex[i].is_string()) {
                return ctx.fail(index_path(join_path(path, "examples"), i),
                                "expected string");
            }
            list.push_back(ex[i].get<std::string>());
        }
        out.examples = std::move(list);
    }
    return true;
}

bool decode_effective_date(const ordered_json& j, const std::string& path,
                           EffectiveDate& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"event", "date", "fr_citation"}, ctx);
    return get_string(j, "event", path, out.event, ctx) &&
           get_string(j, "date", path, out.date, ctx) &&
           get_opt_string(j, "fr_citation", path, out.fr_citation, ctx);
}

bool decode_section_meta(const ordered_json& j, const std::string& path,
                         SectionMeta& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path,
                 {"schema_version", "section_cite", "title", "effective_dates",
                  "notes", "x_extensions"},
                 ctx);
    if (j.contains("schema_version") && !j.at("schema_version").is_null()) {
        if (!j.at("schema_version").is_string()) {
            return ctx.fail(join_path(path, "schema_version"), "expected string");
        }
        out.schema_version = j.at("schema_version").get<std::string>();
    }
    if (!get_string(j, "section_cite", path, out.section_cite, ctx)) return false;
    if (!get_string(j, "title", path, out.title, ctx)) return false;
    if (j.contains("effective_dates") && !j.at("effective_dates").is_null()) {
        std::vector<EffectiveDate> dates;
        if (!decode_array(j.at("effective_dates"),
                          join_path(path, "effective_dates"), dates, ctx,
                          decode_effective_date)) {
            return false;
        }
        out.effective_dates = std::move(dates);
    }
    if (!get_opt_string(j, "notes", path, out.notes, ctx)) return false;
    if (j.contains("x_extensions") && !j.at("x_extensions").is_null()) {
        if (!j.at("x_extensions").is_object()) {
            return ctx.fail(join_path(path, "x_extensions"), "expected object");
        }
        out.x_extensions = j.at("x_extensions");
    }
    return true;
}

bool decode_definition(const ordered_json& j, const std::string& path,
                       DefinitionEntry& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail(path, "expected object");
    scan_unknown(j, path, {"term", "text", "scope", "cross_references"}, ctx);
    return get_string(j, "term", path, out.term, ctx) &&
           get_string(j, "text", path, out.text, ctx) &&
           get_opt_string(j, "scope", path, out.scope, ctx) &&
           decode_cross_ref_list(j, path, out.cross_references, ctx);
}

bool decode_extraction(const ordered_json& j, SectionExtraction& out, Ctx& ctx) {
    if (!j.is_object()) return ctx.fail("", "top-level value is not an object");
    ctx.root = &out;
    scan_unknown(j, "", {"section_meta", "definitions", "extracted_rules"}, ctx);

    if (j.contains("section_meta") && !j.at("section_meta").is_null()) {
        if (!decode_section_meta(j.at("section_meta"), "section_meta",
                                 out.section_meta, ctx)) {
            return false;
        }
        out.section_meta_present = true;
    } else {
        out.section_meta_present = false;
    }
    if (j.contains("definitions") && !j.at("definitions").is_null()) {
        std::vector<DefinitionEntry> defs;
        if (!decode_array(j.at("definitions"), "definitions", defs, ctx,
                          decode_definition)) {
            return false;
        }
        out.definitions = std::move(defs);
    }
    if (j.contains("extracted_rules") && !j.at("extracted_rules").is_null()) {
        if (!decode_array(j.at("extracted_rules"), "extracted_rules",
                          out.extracted_rules, ctx, decode_rule_unit)) {
            return false;
        }
        out.extracted_rules_present = true;
    } else {
        out.extracted_rules_present = false;
    }
    return true;
}

std::string make_snippet(const std::string& text) {
    std::string s = util::trim(text);
    if (s.size() > 160) s = s.substr(0, 160) + "...";
    return s;
}

}  // namespace

std::string extract_json_payload(const std::string& text) {
    std::string s = util::trim(text);

    if (util::starts_with(s, "```")) {
        auto first_nl = s.find('\n');
        if (first_nl != std::string::npos) {
            auto closing = s.rfind("```");
            if (closing != std::string::npos && closing > first_nl) {
                s = util::trim(s.substr(first_nl + 1, closing - first_nl - 1));
            } else {
                s = util::trim(s.substr(first_nl + 1));
            }
        }
    }
    if (s == "null") return s;

    auto obj_begin = s.find('{');
    auto arr_begin = s.find('[');
    if (obj_begin != std::string::npos &&
        (arr_begin == std::string::npos || obj_begin < arr_begin)) {
        auto end = s.rfind('}');
        if (end != std::string::npos && end > obj_begin) {
            return s.substr(obj_begin, end - obj_begin + 1);
        }
    } else if (arr_begin != std::string::npos) {
        auto end = s.rfind(']');
        if (end != std::string::npos && end > arr_begin) {
            return s.substr(arr_begin, end - arr_begin + 1);
        }
    }
    return s;
}

ParseResult parse_extraction(const std::string& model_text) {
    ParseResult result;
    std::string payload = extract_json_payload(model_text);
    if (payload == "null") {
        result.kind = ParseKind::null_marker;
        return result;
    }

    ordered_json j = ordered_json::parse(payload, nullptr, false);
    if (j.is_discarded()) {
        result.kind = ParseKind::error;
        result.error_message = "model output is not valid JSON";
        result.snippet = make_snippet(model_text);
        return result;
    }
    if (j.is_null()) {
        result.kind = ParseKind::null_marker;
        return result;
    }

    Ctx ctx;
    if (!decode_extraction(j, result.extraction, ctx)) {
        result.kind = ParseKind::error;
        result.error_path = ctx.err_path;
        result.error_message = ctx.err_msg;
        result.snippet = make_snippet(payload);
        return result;
    }
    result.kind = ParseKind::extraction;
    return result;
}

bool try_parse_section_meta(const std::string& text, SectionMeta& out,
                            std::string& error) {
    std::string payload = extract_json_payload(text);
    ordered_json j = ordered_json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        error = "not a JSON object";
        return false;
    }
    // Accept both a bare metadata object and {"section_meta": {...}}.
    const ordered_json* target = &j;
    if (j.contains("section_meta") && j.at("section_meta").is_object()) {
        target = &j.at("section_meta");
    }
    Ctx ctx;
    out = SectionMeta{};
    if (!decode_section_meta(*target, "section_meta", out, ctx)) {
        error = ctx.err_path + ": " + ctx.err_msg;
        return false;
    }
    return true;
}

bool try_parse_definitions(const std::string& text,
                           std::vector<DefinitionEntry>& out, std::string& error) {
    std::string payload = extract_json_payload(text);
    ordered_json j = ordered_json::parse(payload, nullptr, false);
    if (j.is_discarded()) {
        error = "not valid JSON";
        return false;
    }
    const ordered_json* arr = nullptr;
    if (j.is_array()) {
        arr = &j;
    } else if (j.is_object() && j.contains("definitions") &&
               j.at("definitions").is_array()) {
        arr = &j.at("definitions");
    } else {
        error = "expected a definitions array";
        return false;
    }
    Ctx ctx;
    out.clear();
    if (!decode_array(*arr, "definitions", out, ctx, decode_definition)) {
        error = ctx.err_path + ": " + ctx.err_msg;
        return false;
    }
    return true;
}

bool try_parse_rule_unit(const std::string& text, RuleUnit& out,
                         std::string& error) {
    std::string payload = extract_json_payload(text);
    ordered_json j = ordered_json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        error = "not a JSON object";
        return false;
    }
    Ctx ctx;
    out = RuleUnit{};
    if (!decode_rule_unit(j, "rule_unit", out, ctx)) {
        error = ctx.err_path + ": " + ctx.err_msg;
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void ValidationReport::add_violation(std::string path, std::string rule,
                                     std::string message) {
    ok = false;
    violations.push_back({std::move(path), std::move(rule), std::move(message)});
}

void ValidationReport::add_warning(std::string path, std::string message) {
    warnings.push_back({std::move(path), std::move(message)});
}

namespace {

void check_cross_refs(const std::optional<std::vector<CrossRef>>& refs,
                      const std::string& path, ValidationReport& report) {
    if (!refs) return;
    for (std::size_t i = 0; i < refs->size(); ++i) {
        const auto& r = (*refs)[i];
        std::string p = index_path(path, i);
        if (!kCrossRefTypes.count(r.type)) {
            report.add_violation(p + ".type", "enum",
                                 "'" + r.type + "' is not a cross-reference type");
        }
        if (r.cite.empty()) {
            report.add_violation(p + ".cite", "required", "cite must be non-empty");
        }
    }
}

void check_metric_entries(const std::optional<std::vector<MetricEntry>>& step,
                          const std::string& path, ValidationReport& report) {
    if (!step) return;
    for (const auto& m : *step) {
        if (m.score < 0.0 || m.score > 5.0) {
            report.add_violation(join_path(path, m.name) + ".Score",
                                 "score_bounds",
                                 "score must be within [0,5]");
        }
    }
}

const std::array<const char*, 6> kNegationTokens = {"not",     "no",  "never",
                                                    "neither", "nor", "cannot"};

bool contains_negation_token(const std::string& normalized) {
    for (const char* tok : kNegationTokens) {
        std::string needle = std::string(" ") + tok + " ";
        std::string padded = " " + normalized + " ";
        if (padded.find(needle) != std::string::npos) return true;
    }
    return false;
}

// Prompt lint: a positive action verb while the source span negates it
// ("deemed" vs "...is not deemed...") is a likely dropped negation.
void negation_lint(const RuleUnit& r, const std::string& path,
                   ValidationReport& report) {
    if (r.statement.action.empty() || r.statement.verbatim.empty()) return;
    std::string action =
        util::to_lower(util::normalize_whitespace(r.statement.action));
    if (contains_negation_token(action)) return;

    auto first_space = action.find(' ');
    std::string head =
        first_space == std::string::npos ? action : action.substr(0, first_space);
    if (head.empty()) return;

    std::string verbatim =
        util::to_lower(util::normalize_whitespace(r.statement.verbatim));
    std::string head_escaped;
    for (char c : head) {
        if (!std::isalnum(static_cast<unsigned char>(c))) head_escaped += '\\';
        head_escaped += c;
    }
    std::regex near_negation("\\b(not|no|never|cannot)\\s+(\\S+\\s+){0,2}" +
                             head_escaped);
    if (std::regex_search(verbatim, near_negation)) {
        report.add_warning(
            join_path(path, "statement.action"),
            "action '" + r.statement.action +
                "' may drop a negation present in the source span");
    }
}

void verbatim_lint(const Statement& st, const std::string& path,
                   const std::optional<std::string>& section_content,
                   ValidationReport& report) {
    if (!section_content || st.verbatim.empty()) return;
    std::string needle = util::normalize_whitespace(st.verbatim);
    std::string haystack = util::normalize_whitespace(*section_content);
    if (!needle.empty() && haystack.find(needle) == std::string::npos) {
        report.add_warning(join_path(path, "verbatim"),
                           "verbatim is not a whitespace-normalized substring "
                           "of the section content");
    }
}

void validate_rule_unit_impl(const RuleUnit& r, const std::string& path,
                             const std::optional<std::string>& section_content,
                             ValidationReport& report) {
    if (r.rule_id.empty()) {
        report.add_violation(join_path(path, "rule_id"), "required",
                             "rule_id must be non-empty");
    }
    if (r.label.empty()) {
        report.add_violation(join_path(path, "label"), "required",
                             "label must be non-empty");
    }
    if (!kRuleTypes.count(r.rule_type.type)) {
        report.add_violation(join_path(path, "rule_type.type"), "enum",
                             "'" + r.rule_type.type + "' is not a rule type");
    }
    if (r.rule_type.type == "other" &&
        (!r.rule_type.other_label || r.rule_type.other_label->empty())) {
        report.add_violation(join_path(path, "rule_type.other_label"),
                             "conditional_required",
                             "other_label is required when type is 'other'");
    }
    if (r.targets.empty()) {
        report.add_violation(join_path(path, "targets"), "non_empty",
                             "targets must contain at least one entry");
    }
    for (std::size_t i = 0; i < r.targets.size(); ++i) {
        if (r.targets[i].role.empty()) {
            report.add_violation(index_path(join_path(path, "targets"), i) + ".role",
                                 "required", "role must be non-empty");
        }
    }
    if (!r.statement_present) {
        report.add_violation(join_path(path, "statement"), "required",
                             "statement is required");
        return;  // nested checks are meaningless without it
    }
    const std::string spath = join_path(path, "statement");
    if (r.statement.action.empty()) {
        report.add_violation(join_path(spath, "action"), "required",
                             "action must be non-empty");
    }
    if (r.statement.verbatim.empty()) {
        report.add_violation(join_path(spath, "verbatim"), "required",
                             "verbatim must be non-empty");
    }
    for (const char* arr : {"constraints", "conditions", "exceptions"}) {
        bool present = (std::string(arr) == "constraints" && r.statement.constraints) ||
                       (std::string(arr) == "conditions" && r.statement.conditions) ||
                       (std::string(arr) == "exceptions" && r.statement.exceptions);
        if (!present) {
            report.add_violation(join_path(spath, arr), "required_array",
                                 std::string(arr) +
                                     " must be present (empty list when absent)");
        }
    }
    if (r.statement.constraints) {
        for (std::size_t i = 0; i < r.statement.constraints->size(); ++i) {
            if ((*r.statement.constraints)[i].text.empty()) {
                report.add_violation(
                    index_path(join_path(spath, "constraints"), i) + ".text",
                    "required", "text must be non-empty");
            }
        }
    }
    if (r.statement.conditions) {
        for (std::size_t i = 0; i < r.statement.conditions->size(); ++i) {
            const auto& c = (*r.statement.conditions)[i];
            std::string cpath = index_path(join_path(spath, "conditions"), i);
            if (c.trigger.empty()) {
                report.add_violation(cpath + ".trigger", "required",
                                     "trigger must be non-empty");
            }
            if (c.time_window && c.time_window->zone &&
                !kZones.count(*c.time_window->zone)) {
                report.add_violation(cpath + ".time_window.zone", "enum",
                                     "'" + *c.time_window->zone +
                                         "' is not a time zone value");
            }
            check_cross_refs(c.cross_references, cpath + ".cross_references",
                             report);
        }
    }
    if (r.statement.exceptions) {
        for (std::size_t i = 0; i < r.statement.exceptions->size(); ++i) {
            const auto& x = (*r.statement.exceptions)[i];
            std::string xpath = index_path(join_path(spath, "exceptions"), i);
            if (x.text.empty()) {
                report.add_violation(xpath + ".text", "required",
                                     "text must be non-empty");
            }
            check_cross_refs(x.cross_references, xpath + ".cross_references",
                             report);
        }
    }
    if (r.statement.penalties_or_consequences) {
        for (std::size_t i = 0; i < r.statement.penalties_or_consequences->size();
             ++i) {
            const auto& p = (*r.statement.penalties_or_consequences)[i];
            std::string ppath =
                index_path(join_path(spath, "penalties_or_consequences"), i);
            if (p.text.empty()) {
                report.add_violation(ppath + ".text", "required",
                                     "text must be non-empty");
            }
            check_cross_refs(p.cross_references, ppath + ".cross_references",
                             report);
        }
    }
    if (r.judge_score) {
        const std::string jpath = join_path(path, "judge_score");
        check_metric_entries(r.judge_score->step1, join_path(jpath, "step1"),
                             report);
        check_metric_entries(r.judge_score->step2, join_path(jpath, "step2"),
                             report);
        check_metric_entries(r.judge_score->step3, join_path(jpath, "step3"),
                             report);
        if (r.judge_score->final_score &&
            (*r.judge_score->final_score < 0.0 ||
             *r.judge_score->final_score > 5.0)) {
            report.add_violation(join_path(jpath, "Final"), "score_bounds",
                                 "score must be within [0,5]");
        }
    }
    verbatim_lint(r.statement, spath, section_content, report);
}

}  // namespace

ValidationReport validate_extraction(
    const SectionExtraction& e, const std::optional<std::string>& section_content,
    const ValidationOptions& options) {
    ValidationReport report;

    for (const auto& path : e.unknown_field_paths) {
        if (options.strict_unknown_fields) {
            report.add_violation(path, "additional_properties",
                                 "field is not part of the schema");
        } else {
            report.add_warning(path, "unknown field stripped");
        }
    }

    if (!e.section_meta_present) {
        report.add_violation("section_meta", "required", "section_meta is required");
    } else {
        if (e.section_meta.section_cite.empty()) {
            report.add_violation("section_meta.section_cite", "required",
                                 "section_cite must be non-empty");
        }
        if (e.section_meta.title.empty()) {
            report.add_violation("section_meta.title", "required",
                                 "title must be non-empty");
        }
        if (e.section_meta.effective_dates) {
            for (std::size_t i = 0; i < e.section_meta.effective_dates->size();
                 ++i) {
                const auto& d = (*e.section_meta.effective_dates)[i];
                std::string dpath =
                    index_path("section_meta.effective_dates", i);
                if (!kDateEvents.count(d.event)) {
                    report.add_violation(dpath + ".event", "enum",
                                         "'" + d.event +
                                             "' is not an effective-date event");
                }
                if (d.date.empty()) {
                    report.add_violation(dpath + ".date", "required",
                                         "date must be non-empty");
                }
            }
        }
    }

    if (e.definitions) {
        for (std::size_t i = 0; i < e.definitions->size(); ++i) {
            const auto& d = (*e.definitions)[i];
            std::string dpath = index_path("definitions", i);
            if (d.term.empty()) {
                report.add_violation(dpath + ".term", "required",
                                     "term must be non-empty");
            }
            if (d.text.empty()) {
                report.add_violation(dpath + ".text", "required",
                                     "text must be non-empty");
            }
            if (d.scope && !kScopes.count(*d.scope)) {
                report.add_violation(dpath + ".scope", "enum",
                                     "'" + *d.scope + "' is not a scope value");
            }
            check_cross_refs(d.cross_references, dpath + ".cross_references",
                             report);
        }
    }

    if (!e.extracted_rules_present) {
        report.add_violation("extracted_rules", "required",
                             "extracted_rules must be present (may be empty)");
    }
    std::set<std::string> seen_ids;
    for (std::size_t i = 0; i < e.extracted_rules.size(); ++i) {
        const auto& r = e.extracted_rules[i];
        std::string rpath = index_path("extracted_rules", i);
        if (!r.rule_id.empty() && !seen_ids.insert(r.rule_id).second) {
            report.add_violation(rpath + ".rule_id", "unique",
                                 "duplicate rule_id '" + r.rule_id + "'");
        }
        validate_rule_unit_impl(r, rpath, section_content, report);
    }
    return report;
}

ValidationReport validate_rule_unit(
    const RuleUnit& r, const std::optional<std::string>& section_content,
    const std::string& path_prefix) {
    ValidationReport report;
    std::string path = path_prefix.empty() ? "rule_unit" : path_prefix;
    validate_rule_unit_impl(r, path, section_content, report);
    negation_lint(r, path, report);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

ordered_json cross_ref_to_json(const CrossRef& r) {
    ordered_json j;
    j["type"] = r.type;
    j["cite"] = r.cite;
    if (r.summary) j["summary"] = *r.summary;
    return j;
}

ordered_json cross_refs_to_json(const std::vector<CrossRef>& refs) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : refs) arr.push_back(cross_ref_to_json(r));
    return arr;
}

ordered_json statement_to_json(const Statement& s) {
    ordered_json j;
    j["action"] = s.action;
    if (s.action_object) j["action_object"] = *s.action_object;
    if (s.method) j["method"] = *s.method;

    ordered_json constraints = ordered_json::array();
    if (s.constraints) {
        for (const auto& c : *s.constraints) {
            ordered_json cj;
            cj["text"] = c.text;
            if (c.applies_to) cj["applies_to"] = *c.applies_to;
            constraints.push_back(std::move(cj));
        }
    }
    j["constraints"] = std::move(constraints);

    ordered_json conditions = ordered_json::array();
    if (s.conditions) {
        for (const auto& c : *s.conditions) {
            ordered_json cj;
            cj["trigger"] = c.trigger;
            if (c.time_window) {
                ordered_json tw;
                if (c.time_window->start) tw["start"] = *c.time_window->start;
                if (c.time_window->end) tw["end"] = *c.time_window->end;
                if (c.time_window->zone) tw["zone"] = *c.time_window->zone;
                cj["time_window"] = std::move(tw);
            }
            if (c.cross_references) {
                cj["cross_references"] = cross_refs_to_json(*c.cross_references);
            }
            conditions.push_back(std::move(cj));
        }
    }
    j["conditions"] = std::move(conditions);

    ordered_json exceptions = ordered_json::array();
    if (s.exceptions) {
        for (const auto& x : *s.exceptions) {
            ordered_json xj;
            xj["text"] = x.text;
            if (x.cross_references) {
                xj["cross_references"] = cross_refs_to_json(*x.cross_references);
            }
            exceptions.push_back(std::move(xj));
        }
    }
    j["exceptions"] = std::move(exceptions);

    if (s.penalties_or_consequences) {
        ordered_json pens = ordered_json::array();
        for (const auto& p : *s.penalties_or_consequences) {
            ordered_json pj;
            pj["text"] = p.text;
            if (p.cross_references) {
                pj["cross_references"] = cross_refs_to_json(*p.cross_references);
            }
            pens.push_back(std::move(pj));
        }
        j["penalties_or_consequences"] = std::move(pens);
    } else {
        j["penalties_or_consequences"] = nullptr;  // explicit-null wire field
    }
    if (s.purpose) j["purpose"] = *s.purpose;
    j["verbatim"] = s.verbatim;
    return j;
}

ordered_json metric_map_to_json(const std::vector<MetricEntry>& entries) {
    ordered_json j = ordered_json::object();
    for (const auto& m : entries) {
        ordered_json mj;
        mj["Score"] = m.score;
        mj["Justification"] = m.justification;
        j[m.name] = std::move(mj);
    }
    return j;
}

}  // namespace

ordered_json to_json(const SectionMeta& m) {
    ordered_json j;
    j["schema_version"] = m.schema_version;
    j["section_cite"] = m.section_cite;
    j["title"] = m.title;
    if (m.effective_dates) {
        ordered_json dates = ordered_json::array();
        for (const auto& d : *m.effective_dates) {
            ordered_json dj;
            dj["event"] = d.event;
            dj["date"] = d.date;
            if (d.fr_citation) dj["fr_citation"] = *d.fr_citation;
            dates.push_back(std::move(dj));
        }
        j["effective_dates"] = std::move(dates);
    }
    if (m.notes) j["notes"] = *m.notes;
    if (m.x_extensions) j["x_extensions"] = *m.x_extensions;
    return j;
}

ordered_json to_json(const DefinitionEntry& d) {
    ordered_json j;
    j["term"] = d.term;
    j["text"] = d.text;
    if (d.scope) j["scope"] = *d.scope;
    if (d.cross_references) {
        j["cross_references"] = cross_refs_to_json(*d.cross_references);
    }
    return j;
}

ordered_json definitions_to_json(const std::vector<DefinitionEntry>& defs) {
    ordered_json arr = ordered_json::array();
    for (const auto& d : defs) arr.push_back(to_json(d));
    return arr;
}

ordered_json to_json(const RuleUnit& r) {
    ordered_json j;
    j["rule_id"] = r.rule_id;
    j["label"] = r.label;
    ordered_json rt;
    rt["type"] = r.rule_type.type;
    if (r.rule_type.other_label) rt["other_label"] = *r.rule_type.other_label;
    j["rule_type"] = std::move(rt);
    ordered_json targets = ordered_json::array();
    for (const auto& t : r.targets) {
        ordered_json tj;
        tj["role"] = t.role;
        if (t.qualifiers) tj["qualifiers"] = *t.qualifiers;
        targets.push_back(std::move(tj));
    }
    j["targets"] = std::move(targets);
    j["statement"] = statement_to_json(r.statement);
    if (r.citations) {
        ordered_json cj;
        if (r.citations->scalar_form && r.citations->text.size() == 1) {
            cj["text"] = r.citations->text.front();
        } else {
            cj["text"] = r.citations->text;
        }
        j["citations"] = std::move(cj);
    }
    if (r.judge_score) {
        ordered_json sj;
        if (r.judge_score->step1) sj["step1"] = metric_map_to_json(*r.judge_score->step1);
        if (r.judge_score->step2) sj["step2"] = metric_map_to_json(*r.judge_score->step2);
        if (r.judge_score->step3) sj["step3"] = metric_map_to_json(*r.judge_score->step3);
        if (r.judge_score->final_score) sj["Final"] = *r.judge_score->final_score;
        if (r.judge_score->notes) sj["Notes"] = *r.judge_score->notes;
        j["judge_score"] = std::move(sj);
    }
    if (r.examples) j["examples"] = *r.examples;
    return j;
}

ordered_json to_json(const SectionExtraction& e) {
    ordered_json j;
    j["section_meta"] = to_json(e.section_meta);
    if (e.definitions) j["definitions"] = definitions_to_json(*e.definitions);
    ordered_json rules = ordered_json::array();
    for (const auto& r : e.extracted_rules) rules.push_back(to_json(r));
    j["extracted_rules"] = std::move(rules);
    return j;
}

std::string serialize(const SectionExtraction& e, int indent) {
    return to_json(e).dump(indent);
}

}  // namespace ruleforge::schema
