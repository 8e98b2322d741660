#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ruleforge::schema {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Domain types mirroring the extraction schema. All types are plain value
// types; strings hold enum members verbatim so validation can report the
// offending token.
// ---------------------------------------------------------------------------

struct CrossRef {
    std::string type;  // CFR | Rule | Form | USC | Release | Regulation | Note | Other
    std::string cite;
    std::optional<std::string> summary;

    bool operator==(const CrossRef&) const = default;
};

struct TimeWindow {
    std::optional<std::string> start;
    std::optional<std::string> end;
    std::optional<std::string> zone;  // ET | EST | EDT

    bool operator==(const TimeWindow&) const = default;
};

struct Constraint {
    std::string text;
    std::optional<std::string> applies_to;

    bool operator==(const Constraint&) const = default;
};

struct Condition {
    std::string trigger;
    std::optional<TimeWindow> time_window;
    std::optional<std::vector<CrossRef>> cross_references;

    bool operator==(const Condition&) const = default;
};

struct ExceptionItem {
    std::string text;
    std::optional<std::vector<CrossRef>> cross_references;

    bool operator==(const ExceptionItem&) const = default;
};

struct PenaltyItem {
    std::string text;
    std::optional<std::vector<CrossRef>> cross_references;

    bool operator==(const PenaltyItem&) const = default;
};

/// Citation text; accepts both the scalar and the list wire form.
struct Citations {
    std::vector<std::string> text;
    bool scalar_form = false;

    bool operator==(const Citations& o) const { return text == o.text; }
};

struct EffectiveDate {
    std::string event;  // adopted | amended | rescinded | note
    std::string date;
    std::optional<std::string> fr_citation;

    bool operator==(const EffectiveDate&) const = default;
};

struct SectionMeta {
    std::string schema_version = "1.0.0";
    std::string section_cite;
    std::string title;
    std::optional<std::vector<EffectiveDate>> effective_dates;
    std::optional<std::string> notes;
    std::optional<ordered_json> x_extensions;

    bool operator==(const SectionMeta&) const = default;
};

struct DefinitionEntry {
    std::string term;
    std::string text;
    std::optional<std::string> scope;  // section | part | act | context-dependent
    std::optional<std::vector<CrossRef>> cross_references;

    bool operator==(const DefinitionEntry&) const = default;
};

struct RuleType {
    std::string type;
    std::optional<std::string> other_label;

    bool operator==(const RuleType&) const = default;
};

struct Target {
    std::string role;
    std::optional<std::string> qualifiers;

    bool operator==(const Target&) const = default;
};

struct Statement {
    std::string action;
    std::optional<std::string> action_object;
    std::optional<std::string> method;
    std::optional<std::vector<Constraint>> constraints;
    std::optional<std::vector<Condition>> conditions;
    std::optional<std::vector<ExceptionItem>> exceptions;
    std::optional<std::vector<PenaltyItem>> penalties_or_consequences;
    std::optional<std::string> purpose;
    std::string verbatim;

    bool operator==(const Statement&) const = default;
};

struct MetricEntry {
    std::string name;
    double score = 0.0;
    std::string justification;

    bool operator==(const MetricEntry&) const = default;
};

struct JudgeScore {
    std::optional<std::vector<MetricEntry>> step1;
    std::optional<std::vector<MetricEntry>> step2;
    std::optional<std::vector<MetricEntry>> step3;
    std::optional<double> final_score;
    std::optional<std::string> notes;

    bool operator==(const JudgeScore&) const = default;
};

struct RuleUnit {
    std::string rule_id;
    std::string label;
    RuleType rule_type;
    std::vector<Target> targets;
    Statement statement;
    bool statement_present = true;
    std::optional<Citations> citations;
    std::optional<JudgeScore> judge_score;
    std::optional<std::vector<std::string>> examples;

    bool operator==(const RuleUnit&) const = default;
};

struct SectionExtraction {
    SectionMeta section_meta;
    std::optional<std::vector<DefinitionEntry>> definitions;
    std::vector<RuleUnit> extracted_rules;
    bool section_meta_present = true;
    bool extracted_rules_present = true;

    /// Dotted paths of fields the decoder did not recognize; validation
    /// turns these into strict-schema findings. Not serialized.
    std::vector<std::string> unknown_field_paths;

    bool operator==(const SectionExtraction& o) const {
        return section_meta == o.section_meta && definitions == o.definitions &&
               extracted_rules == o.extracted_rules;
    }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

enum class ParseKind { extraction, null_marker, error };

struct ParseResult {
    ParseKind kind = ParseKind::error;
    SectionExtraction extraction;
    std::string error_message;
    std::string error_path;
    std::string snippet;  // offending input excerpt on error
};

/// Strips code fences and surrounding prose, maps the literal `null` to
/// the null-marker, and decodes the outermost JSON object.
ParseResult parse_extraction(const std::string& model_text);

/// Stage-fragment decoders used by the repair loop. Return false with a
/// message instead of throwing; partial output is unspecified on failure.
bool try_parse_section_meta(const std::string& text, SectionMeta& out,
                            std::string& error);
bool try_parse_definitions(const std::string& text,
                           std::vector<DefinitionEntry>& out, std::string& error);
bool try_parse_rule_unit(const std::string& text, RuleUnit& out,
                         std::string& error);

/// Trims fences/prose down to the JSON payload (object or array), or the
/// literal "null". Exposed for reuse by judge/bench response parsing.
std::string extract_json_payload(const std::string& text);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    std::string path;
    std::string rule;
    std::string message;
};

struct ValidationWarning {
    std::string path;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;
    std::vector<ValidationWarning> warnings;

    void add_violation(std::string path, std::string rule, std::string message);
    void add_warning(std::string path, std::string message);
};

struct ValidationOptions {
    /// Strict: unknown fields are violations. Tolerant: warnings only.
    bool strict_unknown_fields = true;
};

/// Checks every structural invariant; never throws. When the paired
/// section content is supplied, verbatim spans are checked as
/// whitespace-normalized substrings (warning, not violation).
ValidationReport validate_extraction(
    const SectionExtraction& e,
    const std::optional<std::string>& section_content = std::nullopt,
    const ValidationOptions& options = {});

/// RuleUnit-scoped subset of validate_extraction plus the negation lint
/// on the action field.
ValidationReport validate_rule_unit(
    const RuleUnit& r,
    const std::optional<std::string>& section_content = std::nullopt,
    const std::string& path_prefix = "");

// ---------------------------------------------------------------------------
// Canonical serialization (keys as in the wire schema; optional absent
// fields omitted, except penalties_or_consequences which serializes null).
// ---------------------------------------------------------------------------

ordered_json to_json(const SectionMeta& m);
ordered_json to_json(const DefinitionEntry& d);
ordered_json to_json(const RuleUnit& r);
ordered_json to_json(const SectionExtraction& e);
ordered_json definitions_to_json(const std::vector<DefinitionEntry>& defs);

std::string serialize(const SectionExtraction& e, int indent = -1);

}  // namespace ruleforge::schema
