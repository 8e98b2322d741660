#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ruleforge/llm.hpp"
#include "ruleforge/util.hpp"

namespace ruleforge::judge {

enum class Stage { metadata, definitions, rules };

const char* stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

/// Fixed criterion lists per evaluation stage: 6 for metadata, 5 for
/// definitions, 8 for rule units. Report order follows this order.
struct CriterionSet {
    Stage stage;
    std::vector<std::string> names;
};

const CriterionSet& criterion_set(Stage stage);

struct CriterionScore {
    std::string name;
    double score = 0.0;  // [0,5]
    std::string justification;
};

struct JudgeReport {
    Stage stage = Stage::metadata;
    std::vector<CriterionScore> scores;  // one per criterion, set order
    double raw_avg = 0.0;
    double normalized_avg = 0.0;  // raw_avg / 5
    bool passed = false;
    std::string critique_text;  // full judge output, fed back to repair
};

enum class TriggerMode { average, per_criterion };

/// Regeneration decision rule: average-below-theta, or any single
/// criterion below a raw floor.
struct TriggerStrategy {
    TriggerMode mode = TriggerMode::average;
    double theta = 0.90;
    double min_raw = 4.0;

    static TriggerStrategy average(double theta = 0.90);
    static TriggerStrategy per_criterion(double min_raw = 4.0);
};

struct JudgeParseError : Error {
    using Error::Error;
};

/// Unweighted mean and its /5 normalization, full precision.
/// Throws ContractError on an empty score list.
std::pair<double, double> aggregate_scores(const std::vector<CriterionScore>& scores);

bool should_regenerate(const JudgeReport& report, const TriggerStrategy& strategy);

/// Renders the stage's judge prompt, calls the judge backend, and parses
/// one score per criterion. A criterion the judge marks not-applicable is
/// recorded as 5. One silent re-ask on unparseable output, then
/// JudgeParseError.
JudgeReport evaluate_stage(Stage stage, const std::string& source_text,
                           const std::string& fragment_text,
                           llm::ChatBackend& judge_backend,
                           const TriggerStrategy& strategy,
                           const llm::CallContext& ctx);

/// Parses a judge response without any backend interaction (exposed for
/// tests and replay tooling). Throws JudgeParseError.
std::vector<CriterionScore> parse_judge_response(Stage stage,
                                                 const std::string& response);

/// Stage-level report for a multi-unit rules pass: per-criterion means
/// across units, raw/normalized means, passed per strategy.
JudgeReport aggregate_unit_reports(const std::vector<JudgeReport>& unit_reports,
                                   const TriggerStrategy& strategy);

}  // namespace ruleforge::judge
