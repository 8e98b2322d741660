#include <doctest.h>

#include <json.hpp>

#include "helpers.hpp"
#include "ruleforge/ingest.hpp"
#include "ruleforge/pipeline.hpp"
#include "ruleforge/schema.hpp"
#include "ruleforge/util.hpp"

using namespace ruleforge;
using judge::Stage;
using nlohmann::json;

namespace {

pipeline::PipelineConfig test_config(int max_retries = 3) {
    pipeline::PipelineConfig cfg;
    cfg.max_retries = max_retries;
    cfg.worker_cap = 2;
    cfg.extractor_backend.model_name = "scripted-extractor";
    cfg.judge_backend.model_name = "scripted-judge";
    return cfg;
}

ingest::SectionDoc golden_section() {
    auto raw = ingest::RawDocument::from_file(
        testutil::fixture_path("hipaa_164306.md"));
    auto doc = ingest::normalize(raw);
    auto sections = ingest::segment(doc, ingest::SegmentationRules::defaults());
    REQUIRE(sections.size() == 1);
    return sections[0];
}

llm::ScriptedFixture golden_fixture() {
    return llm::ScriptedFixture::from_file(
        testutil::fixture_path("hipaa_164306_replay.json"));
}

}  // namespace

TEST_CASE("golden replay: fail at 0.55, repair once, pass at 0.90") {
    auto section = golden_section();
    llm::ScriptedBackend extractor(golden_fixture(), "scripted-extractor");
    llm::ScriptedBackend judge_backend(golden_fixture(), "scripted-judge");

    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config());

    REQUIRE(result.status == pipeline::SectionStatus::extracted);
    REQUIRE(result.stage_outcomes.size() == 3);

    const auto& rules = result.stage_outcomes[2];
    CHECK(rules.stage == Stage::rules);
    REQUIRE(rules.attempts.size() == 2);
    CHECK(rules.attempts[0].report.raw_avg == 2.75);
    CHECK(rules.attempts[0].report.normalized_avg == 0.55);
    CHECK(!rules.attempts[0].report.passed);
    CHECK(rules.attempts[1].report.raw_avg == 4.5);
    CHECK(rules.attempts[1].report.normalized_avg == 0.90);
    CHECK(rules.attempts[1].report.passed);
    CHECK(rules.best_index == 1);
    CHECK(rules.best_normalized == 0.90);
    CHECK(rules.passed);

    // Exactly one regeneration; metadata and definitions pass immediately.
    CHECK(result.generation_calls == 2);
    CHECK(result.judge_calls == 4);

    // The committed extraction equals the corrected golden object.
    auto expected = schema::parse_extraction(util::read_file(
        testutil::fixture_path("extraction_164306_corrected.json")));
    REQUIRE(expected.kind == schema::ParseKind::extraction);
    REQUIRE(result.extraction.has_value());
    CHECK(*result.extraction == expected.extraction);
}

TEST_CASE("stage loop stops early when the first judgment passes") {
    auto section = testutil::make_section("## § 2.1 T\nThe target must act.\n");
    auto fixture = testutil::make_stage_sequence_fixture(section.fingerprint,
                                                         section.content, {0.95});
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config());
    REQUIRE(result.status == pipeline::SectionStatus::extracted);
    const auto& rules = result.stage_outcomes[2];
    CHECK(rules.attempts.size() == 1);
    CHECK(rules.passed);
    CHECK(result.generation_calls == 1);  // no regeneration at all
    CHECK(result.judge_calls == 3);
}

TEST_CASE("stage loop commits the best of three failing attempts") {
    auto section = testutil::make_section("## § 2.2 T\nThe target must act.\n");
    auto fixture = testutil::make_stage_sequence_fixture(
        section.fingerprint, section.content, {0.50, 0.70, 0.60});
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto cfg = test_config(3);
    auto result = pipeline::run_section(section, extractor, judge_backend, cfg);

    const auto& rules = result.stage_outcomes[2];
    REQUIRE(rules.attempts.size() == 3);
    CHECK(rules.best_index == 1);
    CHECK(rules.best_normalized == doctest::Approx(0.70));
    CHECK(!rules.passed);
    CHECK(rules.committed_fragment == rules.attempts[1].fragment);
    // Regeneration skipped on the final iteration: two regens, not three.
    CHECK(result.generation_calls == 1 + 2);
    CHECK(result.judge_calls == 3 + 2);  // 1 meta + 1 defs + 3 rules...

    // Committed fragment carries attempt 1's repaired label.
    CHECK(rules.committed_fragment.find("attempt 1") != std::string::npos);
}

TEST_CASE("r=0 commits as-is without judging") {
    auto section = testutil::make_section("## § 2.3 T\nThe target must act.\n");
    llm::ScriptedFixture fixture;
    fixture.entries[section.fingerprint + ":generate:0"] =
        testutil::make_extraction_json(section.content);
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config(0));
    REQUIRE(result.status == pipeline::SectionStatus::extracted);
    CHECK(result.generation_calls == 1);
    CHECK(result.judge_calls == 0);
    for (const auto& outcome : result.stage_outcomes) {
        CHECK(outcome.attempts.empty());
        CHECK(!outcome.passed);
    }
}

TEST_CASE("null generation short-circuits the section") {
    auto section = testutil::make_section("## § 2.4 T\nPreamble only.\n");
    llm::ScriptedFixture fixture;
    fixture.entries[section.fingerprint + ":generate:0"] = "null";
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config());
    CHECK(result.status == pipeline::SectionStatus::skipped_null);
    CHECK(result.generation_calls == 1);
    CHECK(result.judge_calls == 0);
    CHECK(result.stage_outcomes.empty());
}

TEST_CASE("unparseable initial generation retries once on the metadata budget") {
    auto section = testutil::make_section("## § 2.5 T\nThe target must act.\n");
    auto fixture = testutil::make_stage_sequence_fixture(section.fingerprint,
                                                         section.content, {0.95});
    fixture.entries[section.fingerprint + ":generate:0"] = "garbage not json";
    fixture.entries[section.fingerprint + ":generate:1"] =
        testutil::make_extraction_json(section.content);
    // The synthetic zero attempt occupies metadata attempt 0; judged
    // attempts then start at index 1.
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config());
    REQUIRE(result.status == pipeline::SectionStatus::extracted);
    CHECK(result.generation_calls == 2);

    const auto& meta = result.stage_outcomes[0];
    REQUIRE(meta.attempts.size() >= 2);
    CHECK(meta.attempts[0].synthetic_zero);
    CHECK(meta.attempts[0].report.normalized_avg == 0.0);
    CHECK(meta.attempts[0].report.critique_text ==
          "output was not valid structured data");
    CHECK(meta.attempts[1].attempt_index == 1);
    CHECK(meta.best_index == 1);
}

TEST_CASE("unparseable generation twice fails the section") {
    auto section = testutil::make_section("## § 2.6 T\nText.\n");
    llm::ScriptedFixture fixture;
    fixture.entries[section.fingerprint + ":generate:0"] = "garbage";
    fixture.entries[section.fingerprint + ":generate:1"] = "more garbage";
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config());
    CHECK(result.status == pipeline::SectionStatus::failed);
    CHECK(result.generation_calls == 2);
    CHECK(result.judge_calls == 0);
}

TEST_CASE("backend errors mark the section failed without aborting") {
    auto section = testutil::make_section("## § 2.7 T\nText.\n");
    llm::ScriptedBackend extractor(llm::ScriptedFixture{}, "x");  // empty fixture
    llm::ScriptedBackend judge_backend(llm::ScriptedFixture{}, "j");
    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config());
    CHECK(result.status == pipeline::SectionStatus::failed);
    CHECK(result.backend_failure);
    CHECK(!result.error_message.empty());
}

TEST_CASE("run_document preserves ordinal order across workers") {
    std::string text =
        "## § 3.1 One\nThe target must act.\n\n"
        "## § 3.2 Two\nThe target must act.\n\n"
        "## § 3.3 Three\nThe target must act.\n";
    llm::ScriptedFixture fixture;
    fixture.entries["*:generate:0"] = testutil::make_extraction_json("shared");
    fixture.entries["*:judge_meta:0"] =
        testutil::make_judge_response(Stage::metadata, 5.0);
    fixture.entries["*:judge_defs:0"] =
        testutil::make_judge_response(Stage::definitions, 5.0);
    fixture.entries["*:judge_rules:0"] =
        testutil::make_judge_response(Stage::rules, 5.0);
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto raw = ingest::RawDocument::from_text(text);
    std::vector<ingest::SectionDoc> sections;
    auto run = pipeline::run_document(raw, ingest::SegmentationRules::defaults(),
                                      test_config(), extractor, judge_backend, {},
                                      &sections);

    REQUIRE(sections.size() == 3);
    REQUIRE(run.results.size() == 3);
    CHECK(run.totals.extracted == 3);
    for (std::size_t i = 0; i < run.results.size(); ++i) {
        CHECK(run.results[i].ordinal == i);
    }
}

TEST_CASE("one null section among three is counted separately") {
    std::string text =
        "## § 4.1 One\nThe target must act.\n\n"
        "## § 4.2 Two\nTable of contents only.\n\n"
        "## § 4.3 Three\nThe target must act.\n";
    auto raw = ingest::RawDocument::from_text(text);
    auto doc = ingest::normalize(raw);
    auto sections = ingest::segment(doc, ingest::SegmentationRules::defaults());
    REQUIRE(sections.size() == 3);

    llm::ScriptedFixture fixture;
    fixture.entries["*:generate:0"] = testutil::make_extraction_json("shared");
    fixture.entries[sections[1].fingerprint + ":generate:0"] = "null";
    fixture.entries["*:judge_meta:0"] =
        testutil::make_judge_response(Stage::metadata, 5.0);
    fixture.entries["*:judge_defs:0"] =
        testutil::make_judge_response(Stage::definitions, 5.0);
    fixture.entries["*:judge_rules:0"] =
        testutil::make_judge_response(Stage::rules, 5.0);
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto run = pipeline::run_sections(sections, test_config(), extractor,
                                      judge_backend);
    CHECK(run.totals.extracted == 2);
    CHECK(run.totals.skipped_null == 1);
    CHECK(run.totals.failed == 0);
    CHECK(run.results[1].status == pipeline::SectionStatus::skipped_null);
}

TEST_CASE("already_done sections are skipped without backend calls") {
    auto section = testutil::make_section("## § 5.1 T\nThe target must act.\n");
    llm::ScriptedBackend extractor(llm::ScriptedFixture{}, "x");
    llm::ScriptedBackend judge_backend(llm::ScriptedFixture{}, "j");

    pipeline::RunHooks hooks;
    hooks.already_done = [](const std::string&) { return true; };
    auto run = pipeline::run_sections({section}, test_config(), extractor,
                                      judge_backend, hooks);
    CHECK(run.totals.resumed == 1);
    CHECK(run.results.empty());
    CHECK(extractor.call_count() == 0);
    CHECK(judge_backend.call_count() == 0);
}

TEST_CASE("identical fixture and config produce identical extractions") {
    auto section = testutil::make_section("## § 6.1 T\nThe target must act.\n");
    auto fixture = testutil::make_stage_sequence_fixture(
        section.fingerprint, section.content, {0.5, 0.95});

    auto run_once = [&]() {
        llm::ScriptedBackend extractor(fixture, "x");
        llm::ScriptedBackend judge_backend(fixture, "j");
        auto result = pipeline::run_section(section, extractor, judge_backend,
                                            test_config());
        REQUIRE(result.extraction.has_value());
        return schema::serialize(*result.extraction);
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("stages execute strictly in order within a section") {
    auto section = testutil::make_section("## § 7.1 T\nThe target must act.\n");
    auto fixture = testutil::make_stage_sequence_fixture(section.fingerprint,
                                                         section.content, {0.95});
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    std::vector<std::string> stage_sequence;
    auto sink = [&](const llm::Transcript& t) {
        stage_sequence.push_back(t.context.stage);
    };
    extractor.set_transcript_sink(sink);
    judge_backend.set_transcript_sink(sink);

    pipeline::run_section(section, extractor, judge_backend, test_config());

    long last_meta = -1, first_defs = -1, first_rules = -1;
    for (std::size_t i = 0; i < stage_sequence.size(); ++i) {
        if (stage_sequence[i] == "metadata") last_meta = static_cast<long>(i);
        if (stage_sequence[i] == "definitions" && first_defs < 0) {
            first_defs = static_cast<long>(i);
        }
        if (stage_sequence[i] == "rules" && first_rules < 0) {
            first_rules = static_cast<long>(i);
        }
    }
    REQUIRE(last_meta >= 0);
    REQUIRE(first_defs >= 0);
    REQUIRE(first_rules >= 0);
    // Every metadata transcript precedes the first definitions transcript,
    // which precedes the first rules transcript.
    CHECK(last_meta < first_defs);
    CHECK(first_defs < first_rules);
}

TEST_CASE("budget bounds hold across retry levels") {
    for (int r = 0; r <= 3; ++r) {
        auto section = testutil::make_section("## § 8." + std::to_string(r) +
                                              " T\nThe target must act.\n");
        // Never-passing judge: exercises the full budget.
        auto fixture = testutil::make_stage_sequence_fixture(
            section.fingerprint, section.content, {0.5, 0.5, 0.5, 0.5});
        for (int t = 0; t < 4; ++t) {
            fixture.entries[section.fingerprint + ":judge_meta:" +
                            std::to_string(t)] =
                testutil::make_judge_response(Stage::metadata, 2.0);
            fixture.entries[section.fingerprint + ":judge_defs:" +
                            std::to_string(t)] =
                testutil::make_judge_response(Stage::definitions, 2.0);
            fixture.entries[section.fingerprint + ":regen_meta:" +
                            std::to_string(t)] =
                R"({"section_cite":"1.1","title":"T2"})";
            fixture.entries[section.fingerprint + ":regen_defs:" +
                            std::to_string(t)] = R"({"definitions":[]})";
        }
        llm::ScriptedBackend extractor(fixture, "x");
        llm::ScriptedBackend judge_backend(fixture, "j");

        auto result = pipeline::run_section(section, extractor, judge_backend,
                                            test_config(r));
        CHECK(result.generation_calls <= 1 + 3 * r);
        CHECK(result.judge_calls <= 3 * r);
        for (const auto& outcome : result.stage_outcomes) {
            for (const auto& attempt : outcome.attempts) {
                CHECK(attempt.attempt_index < r);
            }
        }
    }
}

TEST_CASE("unusable judge output scores the attempt 0 and the loop continues") {
    auto section = testutil::make_section("## § 9.1 T\nThe target must act.\n");
    auto fixture = testutil::make_stage_sequence_fixture(section.fingerprint,
                                                         section.content, {0.95});
    // Metadata judge: garbled twice (initial + re-ask) -> attempt scored 0,
    // regeneration, then a clean pass.
    fixture.entries[section.fingerprint + ":judge_meta:0"] = "garbled";
    fixture.entries[section.fingerprint + ":judge_meta:1"] = "garbled again";
    fixture.entries[section.fingerprint + ":judge_meta:2"] =
        testutil::make_judge_response(Stage::metadata, 5.0);
    fixture.entries[section.fingerprint + ":regen_meta:0"] =
        R"({"section_cite":"1.1","title":"Repaired"})";
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config());
    REQUIRE(result.status == pipeline::SectionStatus::extracted);
    const auto& meta = result.stage_outcomes[0];
    REQUIRE(meta.attempts.size() == 2);
    CHECK(meta.attempts[0].synthetic_zero);
    CHECK(meta.attempts[0].report.normalized_avg == 0.0);
    CHECK(!meta.attempts[0].report.passed);
    CHECK(meta.attempts[1].report.passed);
    CHECK(meta.best_index == 1);
    // The repaired metadata is the committed fragment.
    CHECK(result.extraction->section_meta.title == "Repaired");
}

TEST_CASE("rules stage repairs only the failing units") {
    auto section = testutil::make_section("## § 9.2 T\nThe target must act.\n");

    // Two rule units; unit R1 passes, unit R2 fails then passes.
    json good = json::parse(testutil::make_extraction_json(section.content, "R1"))
                    ["extracted_rules"][0];
    json bad = good;
    bad["rule_id"] = "R2";
    bad["label"] = "Vague label";
    json extraction = {
        {"section_meta", {{"section_cite", "1.1"}, {"title", "T"}}},
        {"definitions", json::array()},
        {"extracted_rules", json::array({good, bad})}};

    json repaired = bad;
    repaired["label"] = "A precise label for the second requirement";

    llm::ScriptedFixture fixture;
    const std::string fp = section.fingerprint;
    fixture.entries[fp + ":generate:0"] = extraction.dump();
    fixture.entries[fp + ":judge_meta:0"] =
        testutil::make_judge_response(Stage::metadata, 5.0);
    fixture.entries[fp + ":judge_defs:0"] =
        testutil::make_judge_response(Stage::definitions, 5.0);
    // Attempt 0: unit order R1 then R2.
    fixture.entries[fp + ":judge_rules:0"] =
        testutil::make_judge_response(Stage::rules, 5.0);
    fixture.entries[fp + ":judge_rules:1"] =
        testutil::make_judge_response(Stage::rules, 2.0);
    // Attempt 1 re-judges both units (R1 unchanged, R2 repaired).
    fixture.entries[fp + ":judge_rules:2"] =
        testutil::make_judge_response(Stage::rules, 5.0);
    fixture.entries[fp + ":judge_rules:3"] =
        testutil::make_judge_response(Stage::rules, 5.0);
    fixture.entries[fp + ":regen_rules:0"] = repaired.dump();
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    auto result =
        pipeline::run_section(section, extractor, judge_backend, test_config());
    REQUIRE(result.status == pipeline::SectionStatus::extracted);

    const auto& rules = result.stage_outcomes[2];
    REQUIRE(rules.attempts.size() == 2);
    // Attempt 0 aggregate: (5.0 + 2.0) / 2 = 3.5 raw, 0.7 normalized.
    CHECK(rules.attempts[0].report.normalized_avg == doctest::Approx(0.7));
    CHECK(rules.attempts[1].report.normalized_avg == doctest::Approx(1.0));
    CHECK(rules.passed);
    // Only the failing unit consumed a regeneration (one regen_rules entry).
    CHECK(result.generation_calls == 2);
    // A judging pass covers all units but counts once.
    CHECK(result.judge_calls == 4);

    REQUIRE(result.extraction->extracted_rules.size() == 2);
    CHECK(result.extraction->extracted_rules[0].rule_id == "R1");
    CHECK(result.extraction->extracted_rules[0].label ==
          good["label"].get<std::string>());
    CHECK(result.extraction->extracted_rules[1].label ==
          "A precise label for the second requirement");
}

TEST_CASE("the golden replay fixture resolves its scripted keys") {
    auto section = golden_section();
    auto fixture = golden_fixture();

    auto initial = llm::scripted_lookup(fixture, section.fingerprint,
                                        llm::TemplateId::generate, 0);
    CHECK(initial.find("RULE-008") != std::string::npos);
    CHECK(initial.find("\"clarification\"") != std::string::npos);

    auto failing = llm::scripted_lookup(fixture, section.fingerprint,
                                        llm::TemplateId::judge_rules, 0);
    auto failing_scores = judge::parse_judge_response(Stage::rules, failing);
    auto [raw, normalized] = judge::aggregate_scores(failing_scores);
    CHECK(raw == 2.75);
    CHECK(normalized == 0.55);

    auto corrected = llm::scripted_lookup(fixture, section.fingerprint,
                                          llm::TemplateId::regen_rules, 0);
    CHECK(corrected.find("definition-application") != std::string::npos);

    auto passing = llm::scripted_lookup(fixture, section.fingerprint,
                                        llm::TemplateId::judge_rules, 1);
    auto passing_scores = judge::parse_judge_response(Stage::rules, passing);
    auto [raw2, normalized2] = judge::aggregate_scores(passing_scores);
    CHECK(raw2 == 4.5);
    CHECK(normalized2 == 0.90);
}

TEST_CASE("a persistence failure drains workers and surfaces as an error") {
    std::vector<ingest::SectionDoc> sections;
    llm::ScriptedFixture fixture;
    fixture.entries["*:generate:0"] = "null";
    for (int i = 0; i < 4; ++i) {
        sections.push_back(testutil::make_section(
            "## § 10." + std::to_string(i) + " T\nBody.\n",
            "10." + std::to_string(i), static_cast<std::size_t>(i)));
    }
    llm::ScriptedBackend extractor(fixture, "x");
    llm::ScriptedBackend judge_backend(fixture, "j");

    pipeline::RunHooks hooks;
    int persisted = 0;
    hooks.on_result = [&](const pipeline::SectionResult&) {
        if (++persisted == 2) throw StoreError("disk full");
    };
    CHECK_THROWS_AS(pipeline::run_sections(sections, test_config(), extractor,
                                           judge_backend, hooks),
                    StoreError);
    CHECK(persisted == 2);  // no further commits after the failure
}
