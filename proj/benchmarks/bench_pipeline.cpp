#include <benchmark/benchmark.h>

#include <string>

#include <json.hpp>

#include "ruleforge/judge.hpp"
#include "ruleforge/llm.hpp"
#include "ruleforge/pipeline.hpp"
#include "ruleforge/schema.hpp"
#include "ruleforge/sha256.hpp"

using namespace ruleforge;
using nlohmann::json;

namespace {

std::string judge_response(judge::Stage stage, double score) {
    json j = json::object();
    for (const auto& name : judge::criterion_set(stage).names) {
        j[name] = {{"Score", score}, {"Justification", "bench"}};
    }
    return j.dump();
}

std::string extraction_json(const std::string& content) {
    json rule = {
        {"rule_id", "R1"},
        {"label", "The entity must act on the requirement"},
        {"rule_type", {{"type", "obligation"}}},
        {"targets", {{{"role", "entity"}}}},
        {"statement",
         {{"action", "act"},
          {"constraints", json::array()},
          {"conditions", json::array()},
          {"exceptions", json::array()},
          {"penalties_or_consequences", nullptr},
          {"verbatim", content.substr(0, 16)}}},
    };
    return json{{"section_meta", {{"section_cite", "1.1"}, {"title", "T"}}},
                {"definitions", json::array()},
                {"extracted_rules", json::array({rule})}}
        .dump();
}

}  // namespace

static void ParseExtraction(benchmark::State& state) {
    std::string text = extraction_json("The entity must act promptly.");
    for (auto _ : state) {
        auto parsed = schema::parse_extraction(text);
        benchmark::DoNotOptimize(parsed.kind);
    }
}
BENCHMARK(ParseExtraction);

static void ValidateExtraction(benchmark::State& state) {
    auto parsed =
        schema::parse_extraction(extraction_json("The entity must act promptly."));
    for (auto _ : state) {
        auto report = schema::validate_extraction(parsed.extraction);
        benchmark::DoNotOptimize(report.ok);
    }
}
BENCHMARK(ValidateExtraction);

// Whole-section replay against a canned all-pass backend measures the
// orchestration overhead without any model latency.
static void ScriptedSectionReplay(benchmark::State& state) {
    std::string content = "## § 1.1 T\nThe entity must act promptly.\n";
    ingest::SectionDoc section;
    section.section_id = "1.1";
    section.content = content;
    section.span_end = content.size();
    section.fingerprint = sha256_hex(content);

    llm::ScriptedFixture fixture;
    fixture.entries["*:generate:0"] = extraction_json(content);
    fixture.entries["*:judge_meta:0"] = judge_response(judge::Stage::metadata, 5);
    fixture.entries["*:judge_defs:0"] =
        judge_response(judge::Stage::definitions, 5);
    fixture.entries["*:judge_rules:0"] = judge_response(judge::Stage::rules, 5);

    pipeline::PipelineConfig cfg;
    cfg.worker_cap = 1;

    for (auto _ : state) {
        llm::ScriptedBackend extractor(fixture, "x");
        llm::ScriptedBackend judge_backend(fixture, "j");
        auto result =
            pipeline::run_section(section, extractor, judge_backend, cfg);
        benchmark::DoNotOptimize(result.status);
    }
}
BENCHMARK(ScriptedSectionReplay);
