#include "ruleforge/judge.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "ruleforge/schema.hpp"

namespace ruleforge::judge {

using nlohmann::ordered_json;

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::metadata: return "metadata";
        case Stage::definitions: return "definitions";
        case Stage::rules: return "rules";
    }
    return "unknown";
}

Stage stage_from_name(const std::string& name) {
    if (name == "metadata") return Stage::metadata;
    if (name == "definitions") return Stage::definitions;
    if (name == "rules") return Stage::rules;
    throw Error("unknown stage: " + name);
}

const CriterionSet& criterion_set(Stage stage) {
    static const CriterionSet metadata{
        Stage::metadata,
        {"Completeness", "Fidelity to Source Text", "Non-Hallucination",
         "Title Quality", "Precision of Citations and Dates",
         "Reasonable Population of Optional Fields"}};
    static const CriterionSet definitions{
        Stage::definitions,
        {"Completeness", "Fidelity to Source Text",
         "No Hallucination or Fabrication", "Precision and Formatting",
         "Quality of Terms"}};
    static const CriterionSet rules{
        Stage::rules,
        {"Completeness", "Conciseness", "Accuracy", "Consistency",
         "Fidelity to Source Text", "Neutrality", "Actionability",
         "Non-Hallucination"}};
    switch (stage) {
        case Stage::metadata: return metadata;
        case Stage::definitions: return definitions;
        case Stage::rules: return rules;
    }
    return metadata;
}

TriggerStrategy TriggerStrategy::average(double theta) {
    TriggerStrategy s;
    s.mode = TriggerMode::average;
    s.theta = theta;
    return s;
}

TriggerStrategy TriggerStrategy::per_criterion(double min_raw) {
    TriggerStrategy s;
    s.mode = TriggerMode::per_criterion;
    s.min_raw = min_raw;
    return s;
}

std::pair<double, double> aggregate_scores(
    const std::vector<CriterionScore>& scores) {
    if (scores.empty()) {
        throw ContractError("aggregate_scores requires a non-empty score list");
    }
    double sum = 0.0;
    for (const auto& s : scores) sum += s.score;
    double raw = sum / static_cast<double>(scores.size());
    return {raw, raw / 5.0};
}

bool should_regenerate(const JudgeReport& report, const TriggerStrategy& strategy) {
    if (strategy.mode == TriggerMode::average) {
        return report.normalized_avg < strategy.theta;
    }
    return std::any_of(report.scores.begin(), report.scores.end(),
                       [&](const CriterionScore& s) {
                           return s.score < strategy.min_raw;
                       });
}

namespace {

llm::TemplateId judge_template(Stage stage) {
    switch (stage) {
        case Stage::metadata: return llm::TemplateId::judge_meta;
        case Stage::definitions: return llm::TemplateId::judge_defs;
        case Stage::rules: return llm::TemplateId::judge_rules;
    }
    return llm::TemplateId::judge_meta;
}

struct RawMetric {
    double score = 0.0;
    std::string justification;
    bool not_applicable = false;
};

bool read_metric(const ordered_json& v, RawMetric& out) {
    auto read_score = [&](const ordered_json& s) {
        if (s.is_number()) {
            out.score = s.get<double>();
            return true;
        }
        if (s.is_null()) {
            out.not_applicable = true;
            return true;
        }
        if (s.is_string()) {
            std::string folded = util::fold_key(s.get<std::string>());
            if (folded == "na" || folded == "notapplicable") {
                out.not_applicable = true;
                return true;
            }
            try {
                out.score = std::stod(s.get<std::string>());
                return true;
            } catch (...) {
                return false;
            }
        }
        return false;
    };

    if (v.is_number() || v.is_string() || v.is_null()) {
        return read_score(v);
    }
    if (!v.is_object()) return false;
    if (!v.contains("Score")) return false;
    if (!read_score(v.at("Score"))) return false;
    if (v.contains("Justification") && v.at("Justification").is_string()) {
        out.justification = v.at("Justification").get<std::string>();
    }
    return true;
}

}  // namespace

std::vector<CriterionScore> parse_judge_response(Stage stage,
                                                 const std::string& response) {
    const auto& set = criterion_set(stage);
    std::string payload = schema::extract_json_payload(response);
    ordered_json j = ordered_json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw JudgeParseError("judge output is not a JSON object");
    }

    // Tolerant key matching: exact folded match first, then a unique
    // prefix in either direction ("Fidelity" -> "Fidelity to Source Text").
    std::vector<std::pair<std::string, RawMetric>> folded;
    for (auto it = j.begin(); it != j.end(); ++it) {
        RawMetric m;
        if (!read_metric(it.value(), m)) {
            throw JudgeParseError("judge criterion '" + it.key() +
                                  "' has no usable score");
        }
        folded.emplace_back(util::fold_key(it.key()), std::move(m));
    }

    std::vector<bool> consumed(folded.size(), false);
    std::vector<CriterionScore> scores;
    for (const auto& name : set.names) {
        std::string want = util::fold_key(name);
        int found = -1;
        for (std::size_t i = 0; i < folded.size(); ++i) {
            if (!consumed[i] && folded[i].first == want) {
                found = static_cast<int>(i);
                break;
            }
        }
        if (found < 0) {
            int candidate = -1;
            int candidates = 0;
            for (std::size_t i = 0; i < folded.size(); ++i) {
                if (consumed[i]) continue;
                const std::string& key = folded[i].first;
                if (util::starts_with(want, key) || util::starts_with(key, want)) {
                    candidate = static_cast<int>(i);
                    ++candidates;
                }
            }
            if (candidates == 1) found = candidate;
        }
        if (found < 0) {
            throw JudgeParseError("judge output is missing criterion '" + name +
                                  "'");
        }
        consumed[static_cast<std::size_t>(found)] = true;

        const RawMetric& m = folded[static_cast<std::size_t>(found)].second;
        CriterionScore cs;
        cs.name = name;
        cs.score = m.not_applicable ? 5.0 : m.score;  // N/A counts as 5
        cs.justification = m.justification;
        scores.push_back(std::move(cs));
    }
    return scores;
}

JudgeReport evaluate_stage(Stage stage, const std::string& source_text,
                           const std::string& fragment_text,
                           llm::ChatBackend& judge_backend,
                           const TriggerStrategy& strategy,
                           const llm::CallContext& base_ctx) {
    llm::CallContext ctx = base_ctx;
    ctx.template_id = judge_template(stage);

    std::string prompt =
        llm::render(ctx.template_id, {source_text, fragment_text});

    std::string response = judge_backend.complete(prompt, ctx);

    JudgeReport report;
    report.stage = stage;
    try {
        report.scores = parse_judge_response(stage, response);
    } catch (const JudgeParseError&) {
        // One silent re-ask; a transport-level event, not a repair attempt.
        response = judge_backend.complete(prompt, ctx);
        report.scores = parse_judge_response(stage, response);
    }
    report.critique_text = response;
    auto [raw, normalized] = aggregate_scores(report.scores);
    report.raw_avg = raw;
    report.normalized_avg = normalized;
    report.passed = !should_regenerate(report, strategy);
    return report;
}

JudgeReport aggregate_unit_reports(const std::vector<JudgeReport>& unit_reports,
                                   const TriggerStrategy& strategy) {
    if (unit_reports.empty()) {
        throw ContractError("aggregate_unit_reports requires at least one report");
    }
    const auto& set = criterion_set(Stage::rules);
    JudgeReport out;
    out.stage = Stage::rules;
    for (std::size_t c = 0; c < set.names.size(); ++c) {
        CriterionScore cs;
        cs.name = set.names[c];
        double sum = 0.0;
        for (const auto& r : unit_reports) sum += r.scores.at(c).score;
        cs.score = sum / static_cast<double>(unit_reports.size());
        out.scores.push_back(std::move(cs));
    }
    double raw_sum = 0.0;
    for (const auto& r : unit_reports) raw_sum += r.raw_avg;
    out.raw_avg = raw_sum / static_cast<double>(unit_reports.size());
    out.normalized_avg = out.raw_avg / 5.0;

    std::string critique;
    for (const auto& r : unit_reports) {
        if (!critique.empty()) critique += "\n\n";
        critique += r.critique_text;
    }
    out.critique_text = std::move(critique);

    if (strategy.mode == TriggerMode::average) {
        out.passed = out.normalized_avg >= strategy.theta;
    } else {
        out.passed = std::all_of(unit_reports.begin(), unit_reports.end(),
                                 [](const JudgeReport& r) { return r.passed; });
    }
    return out;
}

}  // namespace ruleforge::judge
