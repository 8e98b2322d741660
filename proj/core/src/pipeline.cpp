#include "ruleforge/pipeline.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <thread>
#include <variant>

namespace ruleforge::pipeline {

namespace {

constexpr const char* kUnparseableCritique = "output was not valid structured data";

judge::JudgeReport zero_report(judge::Stage stage) {
    judge::JudgeReport report;
    report.stage = stage;
    for (const auto& name : judge::criterion_set(stage).names) {
        report.scores.push_back({name, 0.0, ""});
    }
    report.raw_avg = 0.0;
    report.normalized_avg = 0.0;
    report.passed = false;
    report.critique_text = kUnparseableCritique;
    return report;
}

// Typed working fragment per stage; attempts additionally keep the
// serialized text for the audit trail.
using Fragment = std::variant<schema::SectionMeta,
                              std::vector<schema::DefinitionEntry>,
                              std::vector<schema::RuleUnit>>;

std::string fragment_text(const Fragment& fragment) {
    if (std::holds_alternative<schema::SectionMeta>(fragment)) {
        return schema::to_json(std::get<schema::SectionMeta>(fragment)).dump(2);
    }
    if (std::holds_alternative<std::vector<schema::DefinitionEntry>>(fragment)) {
        return schema::definitions_to_json(
                   std::get<std::vector<schema::DefinitionEntry>>(fragment))
            .dump(2);
    }
    const auto& units = std::get<std::vector<schema::RuleUnit>>(fragment);
    auto arr = schema::ordered_json::array();
    for (const auto& u : units) arr.push_back(schema::to_json(u));
    return arr.dump(2);
}

Fragment initial_fragment(judge::Stage stage, const schema::SectionExtraction& ext) {
    switch (stage) {
        case judge::Stage::metadata:
            return ext.section_meta;
        case judge::Stage::definitions:
            return ext.definitions.value_or(std::vector<schema::DefinitionEntry>{});
        case judge::Stage::rules:
            return ext.extracted_rules;
    }
    return ext.section_meta;
}

void commit_fragment(judge::Stage stage, const Fragment& fragment,
                     schema::SectionExtraction& ext) {
    switch (stage) {
        case judge::Stage::metadata:
            ext.section_meta = std::get<schema::SectionMeta>(fragment);
            ext.section_meta_present = true;
            break;
        case judge::Stage::definitions:
            ext.definitions = std::get<std::vector<schema::DefinitionEntry>>(fragment);
            break;
        case judge::Stage::rules:
            ext.extracted_rules = std::get<std::vector<schema::RuleUnit>>(fragment);
            ext.extracted_rules_present = true;
            break;
    }
}

llm::TemplateId regen_template(judge::Stage stage) {
    switch (stage) {
        case judge::Stage::metadata: return llm::TemplateId::regen_meta;
        case judge::Stage::definitions: return llm::TemplateId::regen_defs;
        case judge::Stage::rules: return llm::TemplateId::regen_rules;
    }
    return llm::TemplateId::regen_meta;
}

}  // namespace

judge::TriggerStrategy PipelineConfig::trigger() const {
    if (trigger_mode == judge::TriggerMode::average) {
        return judge::TriggerStrategy::average(theta);
    }
    return judge::TriggerStrategy::per_criterion(min_raw);
}

void PipelineConfig::check() const {
    if (max_retries < 0) throw ContractError("max_retries must be >= 0");
    if (theta <= 0.0 || theta > 1.0) {
        throw ContractError("theta must lie in (0,1]");
    }
    if (worker_cap < 1) throw ContractError("worker_cap must be >= 1");
}

const char* status_name(SectionStatus status) {
    switch (status) {
        case SectionStatus::extracted: return "extracted";
        case SectionStatus::skipped_null: return "skipped_null";
        case SectionStatus::failed: return "failed";
    }
    return "unknown";
}

StageOutcome run_stage_loop(judge::Stage stage, const ingest::SectionDoc& section,
                            schema::SectionExtraction& ext,
                            llm::ChatBackend& extractor,
                            llm::ChatBackend& judge_backend,
                            const PipelineConfig& cfg, StageCounters& counters,
                            std::optional<AttemptRecord> preseed) {
    const judge::TriggerStrategy strategy = cfg.trigger();

    StageOutcome outcome;
    outcome.stage = stage;

    Fragment current = initial_fragment(stage, ext);

    // Rules stage with nothing to judge: commit as-is, vacuously passed.
    if (stage == judge::Stage::rules &&
        std::get<std::vector<schema::RuleUnit>>(current).empty()) {
        outcome.passed = true;
        outcome.committed_fragment = fragment_text(current);
        commit_fragment(stage, current, ext);
        return outcome;
    }

    int attempt_index = 0;
    if (preseed) {
        // A synthetic zero-score attempt charged to this stage's budget
        // (unparseable initial generation).
        preseed->attempt_index = attempt_index++;
        outcome.attempts.push_back(std::move(*preseed));
    }

    // Parsed fragments per attempt; attempts without one (unparseable
    // output, unscorable judgment) are never committed.
    std::vector<std::optional<Fragment>> parsed_attempts(outcome.attempts.size());

    bool next_from_generation = preseed.has_value();
    std::string pending_parse_failure;  // non-empty: current attempt is synthetic
    bool have_pending_failure = false;

    while (attempt_index < cfg.max_retries) {
        AttemptRecord attempt;
        attempt.attempt_index = attempt_index;
        attempt.generation_call =
            next_from_generation || (stage == judge::Stage::metadata &&
                                     attempt_index == 0 && !preseed);

        if (have_pending_failure) {
            attempt.fragment = pending_parse_failure;
            attempt.synthetic_zero = true;
            attempt.report = zero_report(stage);
            parsed_attempts.emplace_back(std::nullopt);
        } else {
            attempt.fragment = fragment_text(current);
            llm::CallContext ctx;
            ctx.section_fingerprint = section.fingerprint;
            ctx.stage = judge::stage_name(stage);
            ctx.attempt_index = attempt_index;

            try {
                if (stage == judge::Stage::rules) {
                    const auto& units =
                        std::get<std::vector<schema::RuleUnit>>(current);
                    std::vector<judge::JudgeReport> unit_reports;
                    for (const auto& unit : units) {
                        unit_reports.push_back(judge::evaluate_stage(
                            stage, section.content, schema::to_json(unit).dump(2),
                            judge_backend, strategy, ctx));
                    }
                    attempt.unit_reports = unit_reports;
                    attempt.report =
                        judge::aggregate_unit_reports(unit_reports, strategy);
                } else {
                    attempt.report = judge::evaluate_stage(
                        stage, section.content, attempt.fragment, judge_backend,
                        strategy, ctx);
                }
                ++counters.judge;
                parsed_attempts.emplace_back(current);
            } catch (const judge::JudgeParseError&) {
                // Judge output unusable after the silent re-ask: the
                // attempt is scored 0 and the loop moves on.
                ++counters.judge;
                attempt.unit_reports.clear();
                attempt.synthetic_zero = true;
                attempt.report = zero_report(stage);
                attempt.report.critique_text =
                    "judge output was not parseable after one re-ask";
                parsed_attempts.emplace_back(std::nullopt);
            }
        }

        bool is_synthetic = attempt.synthetic_zero;
        double normalized = attempt.report.normalized_avg;
        bool stage_passed = !is_synthetic && attempt.report.passed;

        // Best-of-r: strictly-greater keeps the earliest among equals;
        // synthetic attempts are never committable.
        if (!is_synthetic &&
            (outcome.best_index < 0 || normalized > outcome.best_normalized)) {
            outcome.best_index = attempt_index;
            outcome.best_normalized = normalized;
        }

        outcome.attempts.push_back(std::move(attempt));

        if (stage_passed) {
            outcome.passed = true;
            break;
        }
        ++attempt_index;
        if (attempt_index >= cfg.max_retries) {
            break;  // final iteration: a regeneration would never be judged
        }

        // Regenerate: the whole fragment for metadata/definitions, only
        // the failing units for the rules stage.
        const AttemptRecord& last = outcome.attempts.back();
        have_pending_failure = false;
        pending_parse_failure.clear();

        llm::CallContext regen_ctx;
        regen_ctx.section_fingerprint = section.fingerprint;
        regen_ctx.template_id = regen_template(stage);
        regen_ctx.stage = judge::stage_name(stage);
        regen_ctx.attempt_index = attempt_index;

        if (stage == judge::Stage::rules) {
            auto units = std::get<std::vector<schema::RuleUnit>>(current);
            bool any_regen = false;
            for (std::size_t i = 0; i < units.size(); ++i) {
                bool unit_failing =
                    last.synthetic_zero ||
                    judge::should_regenerate(last.unit_reports.at(i), strategy);
                if (!unit_failing) continue;
                std::string critique = last.synthetic_zero
                                           ? last.report.critique_text
                                           : last.unit_reports.at(i).critique_text;
                std::string prompt = llm::render(
                    regen_template(stage),
                    {section.content, schema::to_json(units[i]).dump(2), critique});
                std::string response = extractor.complete(prompt, regen_ctx);
                any_regen = true;
                schema::RuleUnit repaired;
                std::string parse_error;
                if (schema::try_parse_rule_unit(response, repaired, parse_error)) {
                    units[i] = std::move(repaired);
                }
                // On a parse failure the previous unit stays in place and
                // is simply re-judged next attempt.
            }
            if (any_regen) ++counters.generation;
            current = std::move(units);
            next_from_generation = true;
        } else {
            std::string prompt = llm::render(
                regen_template(stage),
                {section.content, last.fragment, last.report.critique_text});
            std::string response = extractor.complete(prompt, regen_ctx);
            ++counters.generation;

            std::string parse_error;
            if (stage == judge::Stage::metadata) {
                schema::SectionMeta repaired;
                if (schema::try_parse_section_meta(response, repaired, parse_error)) {
                    current = std::move(repaired);
                } else {
                    have_pending_failure = true;
                    pending_parse_failure = response;
                }
            } else {
                std::vector<schema::DefinitionEntry> repaired;
                if (schema::try_parse_definitions(response, repaired, parse_error)) {
                    current = std::move(repaired);
                } else {
                    have_pending_failure = true;
                    pending_parse_failure = response;
                }
            }
            next_from_generation = true;
        }
    }

    // Commit the best parseable attempt (Algorithm: best-of-r).
    if (outcome.best_index >= 0) {
        const auto& best_parsed =
            parsed_attempts[static_cast<std::size_t>(outcome.best_index)];
        if (best_parsed) {
            outcome.committed_fragment =
                outcome.attempts[static_cast<std::size_t>(outcome.best_index)]
                    .fragment;
            commit_fragment(stage, *best_parsed, ext);
            return outcome;
        }
    }
    // r == 0 (no judged attempts) or nothing parseable: commit as-is.
    outcome.committed_fragment = fragment_text(initial_fragment(stage, ext));
    return outcome;
}

SectionResult run_section(const ingest::SectionDoc& section,
                          llm::ChatBackend& extractor,
                          llm::ChatBackend& judge_backend,
                          const PipelineConfig& cfg) {
    cfg.check();

    SectionResult result;
    result.section_fingerprint = section.fingerprint;
    result.section_id = section.section_id;
    result.ordinal = section.ordinal;

    auto start = std::chrono::steady_clock::now();
    auto finish = [&](SectionStatus status) {
        result.status = status;
        result.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);
        return result;
    };

    try {
        llm::CallContext gen_ctx;
        gen_ctx.section_fingerprint = section.fingerprint;
        gen_ctx.template_id = llm::TemplateId::generate;
        gen_ctx.stage = "generate";

        std::string gen_prompt = llm::render(
            llm::TemplateId::generate, {cfg.domain_label, section.content});
        std::string gen_text = extractor.complete(gen_prompt, gen_ctx);
        ++result.generation_calls;

        schema::ParseResult parsed = schema::parse_extraction(gen_text);
        std::optional<AttemptRecord> preseed;

        if (parsed.kind == schema::ParseKind::null_marker) {
            return finish(SectionStatus::skipped_null);
        }
        if (parsed.kind == schema::ParseKind::error) {
            if (cfg.max_retries < 1) {
                result.error_message =
                    "initial generation unparseable (no retry budget): " +
                    parsed.error_message;
                return finish(SectionStatus::failed);
            }
            // One retry, charged to the metadata stage budget.
            gen_ctx.attempt_index = 1;
            std::string retry_text = extractor.complete(gen_prompt, gen_ctx);
            ++result.generation_calls;
            schema::ParseResult retry = schema::parse_extraction(retry_text);
            if (retry.kind == schema::ParseKind::null_marker) {
                return finish(SectionStatus::skipped_null);
            }
            if (retry.kind == schema::ParseKind::error) {
                result.error_message =
                    "initial generation unparseable after retry: " +
                    retry.error_message;
                return finish(SectionStatus::failed);
            }
            parsed = std::move(retry);

            AttemptRecord synthetic;
            synthetic.fragment = gen_text;
            synthetic.synthetic_zero = true;
            synthetic.generation_call = true;
            synthetic.report = zero_report(judge::Stage::metadata);
            preseed = std::move(synthetic);
        }

        schema::SectionExtraction ext = std::move(parsed.extraction);

        StageCounters counters;
        for (judge::Stage stage : {judge::Stage::metadata, judge::Stage::definitions,
                                   judge::Stage::rules}) {
            std::optional<AttemptRecord> seed;
            if (stage == judge::Stage::metadata) seed = std::move(preseed);
            result.stage_outcomes.push_back(
                run_stage_loop(stage, section, ext, extractor, judge_backend, cfg,
                               counters, std::move(seed)));
        }
        result.generation_calls += counters.generation;
        result.judge_calls += counters.judge;

        result.validation = schema::validate_extraction(ext, section.content);
        result.extraction = std::move(ext);
        if (!result.validation.ok) {
            result.error_message = "final extraction failed validation";
            return finish(SectionStatus::failed);
        }
        return finish(SectionStatus::extracted);
    } catch (const BackendError& e) {
        result.error_message = e.what();
        result.backend_failure = true;
        return finish(SectionStatus::failed);
    } catch (const Error& e) {
        result.error_message = e.what();
        return finish(SectionStatus::failed);
    }
}

RunResult run_sections(const std::vector<ingest::SectionDoc>& sections,
                       const PipelineConfig& cfg, llm::ChatBackend& extractor,
                       llm::ChatBackend& judge_backend, const RunHooks& hooks) {
    cfg.check();

    struct Slot {
        SectionResult result;
        bool resumed = false;
    };

    RunResult run;
    std::mutex mu;
    std::map<std::size_t, Slot> pending;
    std::size_t next_commit = 0;
    std::atomic<std::size_t> next_index{0};
    std::atomic<bool> abort{false};
    std::exception_ptr first_error;

    auto commit_ready = [&]() {
        // Caller holds mu. Flush slots in ordinal order; resumed sections
        // only bump the counter, they were persisted by an earlier run.
        if (abort.load()) return;  // a failed commit freezes the stream
        auto it = pending.find(next_commit);
        while (it != pending.end()) {
            Slot& slot = it->second;
            if (slot.resumed) {
                ++run.totals.resumed;
            } else {
                if (hooks.on_result) hooks.on_result(slot.result);
                switch (slot.result.status) {
                    case SectionStatus::extracted: ++run.totals.extracted; break;
                    case SectionStatus::skipped_null: ++run.totals.skipped_null; break;
                    case SectionStatus::failed: ++run.totals.failed; break;
                }
                run.results.push_back(std::move(slot.result));
            }
            pending.erase(it);
            ++next_commit;
            it = pending.find(next_commit);
        }
    };

    auto worker = [&]() {
        for (;;) {
            if (abort.load() || (hooks.cancel && hooks.cancel->load())) return;
            std::size_t i = next_index.fetch_add(1);
            if (i >= sections.size()) return;
            const auto& section = sections[i];

            Slot slot;
            if (hooks.already_done && hooks.already_done(section.fingerprint)) {
                slot.resumed = true;
                slot.result.section_fingerprint = section.fingerprint;
                slot.result.ordinal = section.ordinal;
            } else {
                slot.result = run_section(section, extractor, judge_backend, cfg);
            }
            std::lock_guard<std::mutex> lock(mu);
            pending.emplace(i, std::move(slot));
            try {
                commit_ready();
            } catch (...) {
                // Persistence failure: freeze the commit stream and stop.
                // Already-persisted files stay intact and resumable.
                if (!first_error) first_error = std::current_exception();
                abort.store(true);
                return;
            }
        }
    };

    int workers = std::max(1, std::min<int>(cfg.worker_cap,
                                            static_cast<int>(sections.size())));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (first_error) std::rethrow_exception(first_error);
    return run;
}

RunResult run_document(const ingest::RawDocument& doc,
                       const ingest::SegmentationRules& rules,
                       const PipelineConfig& cfg, llm::ChatBackend& extractor,
                       llm::ChatBackend& judge_backend, const RunHooks& hooks,
                       std::vector<ingest::SectionDoc>* sections_out) {
    ingest::NormalizedDoc normalized = ingest::normalize(doc);
    std::vector<ingest::SectionDoc> sections = ingest::segment(normalized, rules);
    if (sections_out) *sections_out = sections;
    return run_sections(sections, cfg, extractor, judge_backend, hooks);
}

}  // namespace ruleforge::pipeline
