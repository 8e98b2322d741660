#include <doctest.h>

#include <json.hpp>

#include "helpers.hpp"
#include "ruleforge/judge.hpp"
#include "ruleforge/util.hpp"

using namespace ruleforge;
using judge::Stage;
using nlohmann::json;

TEST_CASE("criterion sets carry the exact stage criteria") {
    const auto& meta = judge::criterion_set(Stage::metadata);
    REQUIRE(meta.names.size() == 6);
    CHECK(meta.names[0] == "Completeness");
    CHECK(meta.names[1] == "Fidelity to Source Text");
    CHECK(meta.names[2] == "Non-Hallucination");
    CHECK(meta.names[3] == "Title Quality");
    CHECK(meta.names[4] == "Precision of Citations and Dates");
    CHECK(meta.names[5] == "Reasonable Population of Optional Fields");

    const auto& defs = judge::criterion_set(Stage::definitions);
    REQUIRE(defs.names.size() == 5);
    CHECK(defs.names[2] == "No Hallucination or Fabrication");
    CHECK(defs.names[3] == "Precision and Formatting");
    CHECK(defs.names[4] == "Quality of Terms");

    const auto& rules = judge::criterion_set(Stage::rules);
    REQUIRE(rules.names.size() == 8);
    CHECK(rules.names == std::vector<std::string>{
                             "Completeness", "Conciseness", "Accuracy",
                             "Consistency", "Fidelity to Source Text",
                             "Neutrality", "Actionability", "Non-Hallucination"});
}

TEST_CASE("aggregate_scores: the golden failing vector averages to 0.55") {
    std::vector<judge::CriterionScore> scores;
    for (double v : {2.0, 3.0, 2.0, 4.0, 2.0, 4.0, 2.0, 3.0}) {
        scores.push_back({"c", v, ""});
    }
    auto [raw, normalized] = judge::aggregate_scores(scores);
    CHECK(raw == 2.75);
    CHECK(normalized == 0.55);
}

TEST_CASE("aggregate_scores trivia") {
    std::vector<judge::CriterionScore> fives(5, {"c", 5.0, ""});
    auto [raw, normalized] = judge::aggregate_scores(fives);
    CHECK(raw == 5.0);
    CHECK(normalized == 1.0);

    std::vector<judge::CriterionScore> mid = {{"a", 0.0, ""}, {"b", 5.0, ""}};
    auto [raw2, normalized2] = judge::aggregate_scores(mid);
    CHECK(raw2 == 2.5);
    CHECK(normalized2 == 0.5);

    CHECK_THROWS_AS(judge::aggregate_scores({}), ContractError);
}

TEST_CASE("should_regenerate under both trigger modes") {
    judge::JudgeReport report;
    report.stage = Stage::rules;
    for (double v : {5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 3.0}) {
        report.scores.push_back({"c", v, ""});
    }
    auto [raw, normalized] = judge::aggregate_scores(report.scores);
    report.raw_avg = raw;
    report.normalized_avg = normalized;  // 0.95

    CHECK(!judge::should_regenerate(report, judge::TriggerStrategy::average(0.90)));
    CHECK(judge::should_regenerate(report,
                                   judge::TriggerStrategy::per_criterion(4.0)));

    // The golden failing vector triggers the average rule.
    judge::JudgeReport failing;
    for (double v : {2.0, 3.0, 2.0, 4.0, 2.0, 4.0, 2.0, 3.0}) {
        failing.scores.push_back({"c", v, ""});
    }
    auto [raw2, norm2] = judge::aggregate_scores(failing.scores);
    failing.raw_avg = raw2;
    failing.normalized_avg = norm2;
    CHECK(judge::should_regenerate(failing, judge::TriggerStrategy::average(0.90)));
}

TEST_CASE("parse_judge_response tolerates shorthand keys and orders output") {
    // Key styles from judge transcripts: shorthand "Fidelity",
    // underscore "Non_hallucination".
    std::string response = R"({
        "Completeness": {"Score": 2, "Justification": "a"},
        "Conciseness": {"Score": 3, "Justification": "b"},
        "Accuracy": {"Score": 2, "Justification": "c"},
        "Consistency": {"Score": 4, "Justification": "d"},
        "Fidelity": {"Score": 2, "Justification": "e"},
        "Neutrality": {"Score": 4, "Justification": "f"},
        "Actionability": {"Score": 2, "Justification": "g"},
        "Non_hallucination": {"Score": 3, "Justification": "h"}
    })";
    auto scores = judge::parse_judge_response(Stage::rules, response);
    REQUIRE(scores.size() == 8);
    std::vector<double> values;
    for (const auto& s : scores) values.push_back(s.score);
    CHECK(values == std::vector<double>{2, 3, 2, 4, 2, 4, 2, 3});
    // Output order follows the criterion set, not the response.
    CHECK(scores[4].name == "Fidelity to Source Text");
    CHECK(scores[7].name == "Non-Hallucination");
}

TEST_CASE("not-applicable criteria are recorded as 5") {
    std::string response = R"({
        "Completeness": {"Score": 4, "Justification": "a"},
        "Fidelity to Source Text": {"Score": "N/A", "Justification": "empty"},
        "No Hallucination or Fabrication": {"Score": null, "Justification": ""},
        "Precision and Formatting": {"Score": 4, "Justification": "c"},
        "Quality of Terms": {"Score": 4, "Justification": "d"}
    })";
    auto scores = judge::parse_judge_response(Stage::definitions, response);
    CHECK(scores[1].score == 5.0);
    CHECK(scores[2].score == 5.0);
}

TEST_CASE("missing criterion raises a judge parse error") {
    std::string response = R"({"Completeness": {"Score": 5, "Justification": ""}})";
    CHECK_THROWS_AS(judge::parse_judge_response(Stage::metadata, response),
                    judge::JudgeParseError);
    CHECK_THROWS_AS(judge::parse_judge_response(Stage::metadata, "not json"),
                    judge::JudgeParseError);
}

TEST_CASE("evaluate_stage re-asks once on malformed judge output") {
    llm::ScriptedFixture fixture;
    fixture.entries["*:judge_meta:0"] = "garbled output";
    fixture.entries["*:judge_meta:1"] =
        testutil::make_judge_response(Stage::metadata, 4.5);
    llm::ScriptedBackend backend(fixture);

    llm::CallContext ctx;
    ctx.section_fingerprint = "fp";
    auto report =
        judge::evaluate_stage(Stage::metadata, "src", "{}", backend,
                              judge::TriggerStrategy::average(0.90), ctx);
    CHECK(report.raw_avg == 4.5);
    CHECK(report.normalized_avg == 0.9);
    CHECK(report.passed);  // 0.90 >= 0.90
    CHECK(backend.call_count() == 2);  // the re-ask is a transport event
}

TEST_CASE("evaluate_stage fails after two unusable judge outputs") {
    llm::ScriptedFixture fixture;
    fixture.entries["*:judge_meta:0"] = "garbled";
    fixture.entries["*:judge_meta:1"] = "still garbled";
    llm::ScriptedBackend backend(fixture);
    llm::CallContext ctx;
    CHECK_THROWS_AS(
        judge::evaluate_stage(Stage::metadata, "src", "{}", backend,
                              judge::TriggerStrategy::average(0.90), ctx),
        judge::JudgeParseError);
}

TEST_CASE("evaluate_stage preserves the full judge output as critique") {
    llm::ScriptedFixture fixture;
    std::string response = testutil::make_judge_response(Stage::rules, 4.0);
    fixture.entries["*:judge_rules:0"] = response;
    llm::ScriptedBackend backend(fixture);
    llm::CallContext ctx;
    auto report = judge::evaluate_stage(Stage::rules, "src", "{}", backend,
                                        judge::TriggerStrategy::average(0.90), ctx);
    CHECK(report.critique_text == response);
    CHECK(report.raw_avg == 4.0);
    CHECK(report.normalized_avg == 0.8);
    CHECK(!report.passed);
}

TEST_CASE("aggregate_unit_reports averages units with equal weight") {
    auto make_unit_report = [](double score, const judge::TriggerStrategy& strategy) {
        judge::JudgeReport r;
        r.stage = Stage::rules;
        for (const auto& name : judge::criterion_set(Stage::rules).names) {
            r.scores.push_back({name, score, ""});
        }
        auto [raw, normalized] = judge::aggregate_scores(r.scores);
        r.raw_avg = raw;
        r.normalized_avg = normalized;
        r.passed = !judge::should_regenerate(r, strategy);
        return r;
    };

    auto avg = judge::TriggerStrategy::average(0.90);
    auto agg = judge::aggregate_unit_reports(
        {make_unit_report(4.0, avg), make_unit_report(5.0, avg)}, avg);
    CHECK(agg.raw_avg == 4.5);
    CHECK(agg.normalized_avg == 0.9);
    CHECK(agg.passed);  // mean crosses theta even though one unit is below

    auto individual = judge::TriggerStrategy::per_criterion(4.0);
    auto agg_individual = judge::aggregate_unit_reports(
        {make_unit_report(4.0, individual), make_unit_report(5.0, individual)},
        individual);
    CHECK(agg_individual.passed);  // no criterion below 4 anywhere

    auto agg_fail = judge::aggregate_unit_reports(
        {make_unit_report(3.0, individual), make_unit_report(5.0, individual)},
        individual);
    CHECK(!agg_fail.passed);
}

TEST_CASE("trigger divergence: both disagreement directions occur") {
    // avg passes, per-criterion fails
    judge::JudgeReport spike;
    for (double v : {5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 3.0}) {
        spike.scores.push_back({"c", v, ""});
    }
    auto [r1, n1] = judge::aggregate_scores(spike.scores);
    spike.raw_avg = r1;
    spike.normalized_avg = n1;
    CHECK(!judge::should_regenerate(spike, judge::TriggerStrategy::average(0.90)));
    CHECK(judge::should_regenerate(spike,
                                   judge::TriggerStrategy::per_criterion(4.0)));

    // per-criterion passes, avg fails (all 4s: normalized 0.8)
    judge::JudgeReport flat;
    for (int i = 0; i < 8; ++i) flat.scores.push_back({"c", 4.0, ""});
    auto [r2, n2] = judge::aggregate_scores(flat.scores);
    flat.raw_avg = r2;
    flat.normalized_avg = n2;
    CHECK(judge::should_regenerate(flat, judge::TriggerStrategy::average(0.90)));
    CHECK(!judge::should_regenerate(flat,
                                    judge::TriggerStrategy::per_criterion(4.0)));
}
