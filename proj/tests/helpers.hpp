#pragma once

// Shared builders for scripted fixtures and synthetic sections.

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleforge/ingest.hpp"
#include "ruleforge/judge.hpp"
#include "ruleforge/llm.hpp"
#include "ruleforge/sha256.hpp"

namespace testutil {

using nlohmann::json;

inline std::string fixture_path(const std::string& name) {
    return std::string(RULEFORGE_FIXTURE_DIR) + "/" + name;
}

inline std::string temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("ruleforge-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline ruleforge::ingest::SectionDoc make_section(const std::string& content,
                                                  const std::string& id = "1.1",
                                                  std::size_t ordinal = 0) {
    ruleforge::ingest::SectionDoc s;
    s.section_id = id;
    s.heading = "§ " + id;
    s.content = content;
    s.span_begin = 0;
    s.span_end = content.size();
    s.fingerprint = ruleforge::sha256_hex(content);
    s.ordinal = ordinal;
    return s;
}

/// One-rule extraction whose verbatim is a substring of `content`.
inline std::string make_extraction_json(const std::string& content,
                                        const std::string& rule_id = "R1") {
    json rule = {
        {"rule_id", rule_id},
        {"label", "The target must act on the requirement"},
        {"rule_type", {{"type", "obligation"}}},
        {"targets", {{{"role", "target"}}}},
        {"statement",
         {{"action", "act"},
          {"constraints", json::array()},
          {"conditions", json::array()},
          {"exceptions", json::array()},
          {"penalties_or_consequences", nullptr},
          {"verbatim", content.substr(0, std::min<std::size_t>(24, content.size()))}}},
    };
    json e = {{"section_meta", {{"section_cite", "1.1"}, {"title", "Test"}}},
              {"definitions", json::array()},
              {"extracted_rules", json::array({rule})}};
    return e.dump(2);
}

/// Judge response scoring every criterion of the stage the same value.
inline std::string make_judge_response(ruleforge::judge::Stage stage,
                                       double score) {
    json j = json::object();
    for (const auto& name : ruleforge::judge::criterion_set(stage).names) {
        j[name] = {{"Score", score}, {"Justification", "scripted"}};
    }
    return j.dump();
}

/// Judge response with an explicit per-criterion vector.
inline std::string make_judge_response(ruleforge::judge::Stage stage,
                                       const std::vector<double>& scores) {
    json j = json::object();
    const auto& names = ruleforge::judge::criterion_set(stage).names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        j[names[i]] = {{"Score", scores.at(i)}, {"Justification", "scripted"}};
    }
    return j.dump();
}

/// Scripted fixture for a single section: passing metadata/definitions
/// judges, a rules-judge score sequence (normalized values), and rule
/// regenerations for every non-final attempt.
inline ruleforge::llm::ScriptedFixture make_stage_sequence_fixture(
    const std::string& fp, const std::string& content,
    const std::vector<double>& rules_normalized, int max_attempts = 8) {
    using ruleforge::judge::Stage;
    ruleforge::llm::ScriptedFixture fixture;
    fixture.entries[fp + ":generate:0"] = make_extraction_json(content);
    fixture.entries[fp + ":judge_meta:0"] =
        make_judge_response(Stage::metadata, 5.0);
    fixture.entries[fp + ":judge_defs:0"] =
        make_judge_response(Stage::definitions, 5.0);
    for (std::size_t t = 0; t < rules_normalized.size(); ++t) {
        fixture.entries[fp + ":judge_rules:" + std::to_string(t)] =
            make_judge_response(Stage::rules, rules_normalized[t] * 5.0);
    }
    // Extra entries so longer budgets never run dry.
    for (int t = static_cast<int>(rules_normalized.size()); t < max_attempts; ++t) {
        fixture.entries[fp + ":judge_rules:" + std::to_string(t)] =
            make_judge_response(Stage::rules, rules_normalized.back() * 5.0);
    }
    json unit = json::parse(make_extraction_json(content))["extracted_rules"][0];
    for (int t = 0; t < max_attempts; ++t) {
        json repaired = unit;
        repaired["label"] =
            std::string("The target must act on the requirement, attempt ") +
            std::to_string(t + 1);
        fixture.entries[fp + ":regen_rules:" + std::to_string(t)] =
            repaired.dump(2);
    }
    return fixture;
}

}  // namespace testutil
