#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ruleforge/ingest.hpp"
#include "ruleforge/judge.hpp"
#include "ruleforge/llm.hpp"
#include "ruleforge/schema.hpp"

namespace ruleforge::pipeline {

/// Orchestration knobs. The stage order is fixed: metadata, then
/// definitions, then rule units, each repairing on verified context.
struct PipelineConfig {
    double theta = 0.90;
    int max_retries = 3;  // r: maximum judged attempts per stage
    judge::TriggerMode trigger_mode = judge::TriggerMode::average;
    double min_raw = 4.0;  // per-criterion trigger floor
    std::string domain_label = "regulatory documents";
    int worker_cap = 2;
    llm::BackendConfig extractor_backend;
    llm::BackendConfig judge_backend;

    judge::TriggerStrategy trigger() const;
    void check() const;  // throws ContractError on invalid values
};

/// One judged attempt of a stage loop. `fragment` is the serialized
/// stage fragment that was judged; for the rules stage `unit_reports`
/// carries the per-rule-unit reports behind the aggregate.
struct AttemptRecord {
    int attempt_index = 0;
    std::string fragment;
    judge::JudgeReport report;
    std::vector<judge::JudgeReport> unit_reports;
    bool generation_call = false;  // fragment came from a generation/regeneration
    bool synthetic_zero = false;   // unparseable output scored 0 without a judge call
};

struct StageOutcome {
    judge::Stage stage = judge::Stage::metadata;
    std::vector<AttemptRecord> attempts;
    int best_index = -1;
    double best_normalized = 0.0;
    bool passed = false;
    std::string committed_fragment;
};

enum class SectionStatus { extracted, skipped_null, failed };

const char* status_name(SectionStatus status);

struct SectionResult {
    std::string section_fingerprint;
    std::string section_id;
    std::size_t ordinal = 0;
    SectionStatus status = SectionStatus::failed;
    std::optional<schema::SectionExtraction> extraction;
    std::vector<StageOutcome> stage_outcomes;
    int generation_calls = 0;  // generation/regeneration passes, <= 1 + 3r
    int judge_calls = 0;       // judging passes, <= 3r
    std::chrono::milliseconds wall_time{0};
    std::string error_message;
    bool backend_failure = false;  // failed on transport, not content
    schema::ValidationReport validation;
};

struct RunTotals {
    int extracted = 0;
    int skipped_null = 0;
    int failed = 0;
    int resumed = 0;
};

struct RunResult {
    std::vector<SectionResult> results;  // ordinal order, resumed sections omitted
    RunTotals totals;
};

struct StageCounters {
    int generation = 0;
    int judge = 0;
};

/// Judge/repair loop for one stage: up to r judged attempts, early stop
/// on pass, regeneration skipped on the final iteration, best attempt
/// committed back into `ext`.
StageOutcome run_stage_loop(judge::Stage stage, const ingest::SectionDoc& section,
                            schema::SectionExtraction& ext,
                            llm::ChatBackend& extractor,
                            llm::ChatBackend& judge_backend,
                            const PipelineConfig& cfg, StageCounters& counters,
                            std::optional<AttemptRecord> preseed = std::nullopt);

/// Full per-section pipeline: initial generation, null filtering, the
/// three stage loops in order, and final validation. Backend failures
/// mark the section failed; they never propagate.
SectionResult run_section(const ingest::SectionDoc& section,
                          llm::ChatBackend& extractor,
                          llm::ChatBackend& judge_backend,
                          const PipelineConfig& cfg);

struct RunHooks {
    /// Resume filter: sections answering true are skipped entirely.
    std::function<bool(const std::string& fingerprint)> already_done;
    /// Order-restoring sink, called in ordinal order under a single writer.
    std::function<void(const SectionResult&)> on_result;
    /// Cooperative cancellation: no new sections start once set.
    std::atomic<bool>* cancel = nullptr;
};

/// Fans sections out to at most worker_cap concurrent run_section calls
/// and collects results in ordinal order.
RunResult run_sections(const std::vector<ingest::SectionDoc>& sections,
                       const PipelineConfig& cfg, llm::ChatBackend& extractor,
                       llm::ChatBackend& judge_backend, const RunHooks& hooks = {});

/// ingest -> segment -> run_sections. Ingest errors abort before any
/// backend call. Segmented sections are returned through `sections_out`
/// when provided (for persistence).
RunResult run_document(const ingest::RawDocument& doc,
                       const ingest::SegmentationRules& rules,
                       const PipelineConfig& cfg, llm::ChatBackend& extractor,
                       llm::ChatBackend& judge_backend, const RunHooks& hooks = {},
                       std::vector<ingest::SectionDoc>* sections_out = nullptr);

}  // namespace ruleforge::pipeline
