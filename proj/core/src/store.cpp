#include "ruleforge/store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ruleforge/sha256.hpp"
#include "ruleforge/util.hpp"
#include "ruleforge/version.hpp"

namespace ruleforge::store {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> read_jsonl(const std::string& path) {
    std::vector<std::string> lines;
    std::ifstream in(path, std::ios::binary);
    if (!in) return lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

nlohmann::ordered_json config_snapshot(const pipeline::PipelineConfig& cfg) {
    auto backend = [](const llm::BackendConfig& b) {
        ordered_json j;
        j["base_url"] = b.base_url;
        j["model_name"] = b.model_name;
        j["api_key_env"] = b.api_key_env;  // variable name only, never the value
        j["temperature"] = b.temperature;
        j["top_p"] = b.top_p;
        j["max_tokens"] = b.max_tokens;
        j["transport_retries"] = b.transport_retries;
        return j;
    };
    ordered_json j;
    j["theta"] = cfg.theta;
    j["max_retries"] = cfg.max_retries;
    j["trigger"] = cfg.trigger_mode == judge::TriggerMode::average ? "avg"
                                                                   : "individual";
    j["min_raw"] = cfg.min_raw;
    j["domain_label"] = cfg.domain_label;
    j["stage_order"] = {"metadata", "definitions", "rules"};
    j["extractor"] = backend(cfg.extractor_backend);
    j["judge"] = backend(cfg.judge_backend);
    return j;
}

namespace {

std::string path_in(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

void diff_json(const ordered_json& a, const ordered_json& b,
               const std::string& prefix, std::vector<std::string>& out) {
    if (a.is_object() && b.is_object()) {
        for (auto it = a.begin(); it != a.end(); ++it) {
            std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
            if (!b.contains(it.key())) {
                out.push_back(key + " (removed)");
            } else {
                diff_json(it.value(), b.at(it.key()), key, out);
            }
        }
        for (auto it = b.begin(); it != b.end(); ++it) {
            if (!a.contains(it.key())) {
                out.push_back((prefix.empty() ? it.key() : prefix + "." + it.key()) +
                              " (added)");
            }
        }
        return;
    }
    if (a != b) {
        out.push_back(prefix + ": " + a.dump() + " -> " + b.dump());
    }
}

ordered_json attempt_to_json(const pipeline::SectionResult& result,
                             const pipeline::StageOutcome& outcome,
                             const pipeline::AttemptRecord& attempt) {
    ordered_json j;
    j["fingerprint"] = result.section_fingerprint;
    j["section_id"] = result.section_id;
    j["ordinal"] = result.ordinal;
    j["stage"] = judge::stage_name(outcome.stage);
    j["attempt_index"] = attempt.attempt_index;
    j["generation_call"] = attempt.generation_call;
    j["synthetic_zero"] = attempt.synthetic_zero;
    j["raw_avg"] = attempt.report.raw_avg;
    j["normalized_avg"] = attempt.report.normalized_avg;
    j["passed"] = attempt.report.passed && !attempt.synthetic_zero;
    j["committed"] = attempt.attempt_index == outcome.best_index;
    ordered_json scores = ordered_json::array();
    for (const auto& s : attempt.report.scores) {
        ordered_json sj;
        sj["name"] = s.name;
        sj["score"] = s.score;
        if (!s.justification.empty()) sj["justification"] = s.justification;
        scores.push_back(std::move(sj));
    }
    j["scores"] = std::move(scores);
    if (!attempt.unit_reports.empty()) {
        ordered_json units = ordered_json::array();
        for (const auto& u : attempt.unit_reports) {
            ordered_json uj;
            uj["raw_avg"] = u.raw_avg;
            uj["normalized_avg"] = u.normalized_avg;
            ordered_json us = ordered_json::array();
            for (const auto& s : u.scores) {
                us.push_back({{"name", s.name}, {"score", s.score}});
            }
            uj["scores"] = std::move(us);
            units.push_back(std::move(uj));
        }
        j["units"] = std::move(units);
    }
    return j;
}

}  // namespace

Run Run::open(const std::string& dir, const pipeline::PipelineConfig& cfg,
              const std::string& doc_hash, std::size_t section_count) {
    Run run;
    run.dir_ = dir;
    run.doc_hash_ = doc_hash;
    run.section_count_ = section_count;
    run.config_snapshot_ = config_snapshot(cfg);
    run.run_id_ =
        sha256_hex(doc_hash + "\x1f" + run.config_snapshot_.dump()).substr(0, 12);

    const std::string manifest_path = path_in(dir, "manifest.json");
    if (fs::exists(manifest_path)) {
        ordered_json manifest;
        try {
            manifest = ordered_json::parse(util::read_file(manifest_path));
        } catch (const std::exception& e) {
            throw StoreError("cannot read manifest on resume: " +
                             std::string(e.what()));
        }

        std::vector<std::string> diffs;
        diff_json(manifest.value("config", ordered_json::object()),
                  run.config_snapshot_, "", diffs);
        if (manifest.value("doc_hash", std::string()) != doc_hash) {
            diffs.push_back("doc_hash: " +
                            manifest.value("doc_hash", std::string()) + " -> " +
                            doc_hash);
        }
        if (!diffs.empty()) {
            std::string msg = "refusing to resume: config differs from manifest:";
            for (const auto& d : diffs) msg += "\n  " + d;
            throw StoreError(msg);
        }

        run.resumed_ = true;
        run.created_at_ = manifest.value("created_at", util::iso_timestamp_now());

        // Final records: extraction lines, plus terminal attempt lines
        // for skipped/failed sections.
        for (const auto& line : read_jsonl(path_in(dir, "extractions.jsonl"))) {
            auto j = json::parse(line, nullptr, false);
            if (j.is_object() && j.contains("fingerprint")) {
                run.done_.insert(j["fingerprint"].get<std::string>());
            }
        }
        for (const auto& line : read_jsonl(path_in(dir, "attempts.jsonl"))) {
            auto j = json::parse(line, nullptr, false);
            if (!j.is_object()) continue;
            std::string outcome = j.value("outcome", std::string());
            if (outcome == "null" || outcome == "failed") {
                run.done_.insert(j.value("fingerprint", std::string()));
            }
        }
        return run;
    }

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StoreError("cannot create run directory: " + dir);

    run.created_at_ = util::iso_timestamp_now();
    ordered_json manifest;
    manifest["run_id"] = run.run_id_;
    manifest["tool_version"] = kVersion;
    manifest["status"] = "running";
    manifest["doc_hash"] = doc_hash;
    manifest["section_count"] = section_count;
    manifest["config"] = run.config_snapshot_;
    manifest["totals"] = {{"extracted", 0}, {"skipped_null", 0}, {"failed", 0}};
    manifest["created_at"] = run.created_at_;
    util::write_file(manifest_path, manifest.dump(2) + "\n");
    return run;
}

bool Run::already_done(const std::string& fingerprint) const {
    return done_.count(fingerprint) != 0;
}

void Run::write_sections(const std::vector<ingest::SectionDoc>& sections) {
    const std::string path = path_in(dir_, "sections.jsonl");
    if (fs::exists(path)) {
        // Resume keeps the original section set; refuse if segmentation
        // now yields different fingerprints (e.g. changed delimiters).
        std::vector<std::string> persisted;
        for (const auto& line : read_jsonl(path)) {
            persisted.push_back(ingest::section_from_jsonl(line).fingerprint);
        }
        std::vector<std::string> fresh;
        fresh.reserve(sections.size());
        for (const auto& s : sections) fresh.push_back(s.fingerprint);
        if (persisted != fresh) {
            throw StoreError(
                "refusing to resume: the section set differs from "
                "sections.jsonl (segmentation rules changed?)");
        }
        return;
    }
    std::string blob;
    for (const auto& s : sections) {
        blob += ingest::section_to_jsonl(s);
        blob += '\n';
    }
    util::write_file(path, blob);
}

void Run::append_section_result(const pipeline::SectionResult& result) {
    std::lock_guard<std::mutex> lock(*write_mu_);
    if (done_.count(result.section_fingerprint)) {
        throw StoreError("duplicate section result for fingerprint " +
                         result.section_fingerprint);
    }
    done_.insert(result.section_fingerprint);

    const std::string attempts_path = path_in(dir_, "attempts.jsonl");

    if (result.status == pipeline::SectionStatus::skipped_null) {
        ordered_json j;
        j["fingerprint"] = result.section_fingerprint;
        j["section_id"] = result.section_id;
        j["ordinal"] = result.ordinal;
        j["stage"] = "generate";
        j["outcome"] = "null";
        j["generation_calls"] = result.generation_calls;
        util::append_line(attempts_path, j.dump());
        return;
    }

    for (const auto& outcome : result.stage_outcomes) {
        for (const auto& attempt : outcome.attempts) {
            util::append_line(attempts_path,
                              attempt_to_json(result, outcome, attempt).dump());
        }
    }

    if (result.status == pipeline::SectionStatus::failed) {
        ordered_json j;
        j["fingerprint"] = result.section_fingerprint;
        j["section_id"] = result.section_id;
        j["ordinal"] = result.ordinal;
        j["stage"] = "section";
        j["outcome"] = "failed";
        j["error"] = result.error_message;
        j["generation_calls"] = result.generation_calls;
        j["judge_calls"] = result.judge_calls;
        util::append_line(attempts_path, j.dump());
        return;
    }

    // Extracted: the extraction line is the terminal record.
    ordered_json j;
    j["fingerprint"] = result.section_fingerprint;
    j["section_id"] = result.section_id;
    j["ordinal"] = result.ordinal;
    ordered_json best;
    for (const auto& outcome : result.stage_outcomes) {
        best[judge::stage_name(outcome.stage)] = outcome.best_normalized;
    }
    j["stage_best_normalized"] = std::move(best);
    j["generation_calls"] = result.generation_calls;
    j["judge_calls"] = result.judge_calls;
    j["extraction"] = schema::to_json(*result.extraction);
    util::append_line(path_in(dir_, "extractions.jsonl"), j.dump());
}

llm::TranscriptSink Run::transcript_sink() {
    auto mu = write_mu_;
    auto seq = transcript_seq_;
    std::string path = path_in(dir_, "transcripts.jsonl");
    return [mu, seq, path](const llm::Transcript& t) {
        ordered_json j;
        j["seq"] = (*seq);
        j["ts"] = util::iso_timestamp_now();
        j["request_fingerprint"] = t.request_fingerprint;
        j["template"] = t.template_name;
        j["model"] = t.model_name;
        j["section_fingerprint"] = t.context.section_fingerprint;
        j["stage"] = t.context.stage;
        j["attempt_index"] = t.context.attempt_index;
        j["latency_ms"] = t.latency.count();
        if (t.token_usage) {
            j["tokens"] = {{"prompt", t.token_usage->prompt_tokens},
                           {"completion", t.token_usage->completion_tokens}};
        }
        if (t.error) j["error"] = t.error_message;
        j["prompt"] = t.prompt_text;
        j["response"] = t.response_text;
        std::lock_guard<std::mutex> lock(*mu);
        ++(*seq);
        util::append_line(path, j.dump());
    };
}

void Run::finalize() {
    std::lock_guard<std::mutex> lock(*write_mu_);

    // Totals recomputed from the persisted records, never from memory.
    std::size_t extracted =
        read_jsonl(path_in(dir_, "extractions.jsonl")).size();
    std::size_t skipped = 0, failed = 0;
    for (const auto& line : read_jsonl(path_in(dir_, "attempts.jsonl"))) {
        auto j = json::parse(line, nullptr, false);
        if (!j.is_object()) continue;
        std::string outcome = j.value("outcome", std::string());
        if (outcome == "null") ++skipped;
        if (outcome == "failed") ++failed;
    }

    ScoreReport report = compute_score_report(dir_);

    ordered_json manifest;
    manifest["run_id"] = run_id_;
    manifest["tool_version"] = kVersion;
    manifest["status"] = "complete";
    manifest["doc_hash"] = doc_hash_;
    manifest["section_count"] = section_count_;
    manifest["config"] = config_snapshot_;
    manifest["totals"] = {{"extracted", extracted},
                          {"skipped_null", skipped},
                          {"failed", failed}};
    auto stage_mean = [](const StageMeans& m) -> ordered_json {
        if (!m.available) return nullptr;
        return m.stage_avg;
    };
    manifest["stage_means"] = {{"metadata", stage_mean(report.metadata)},
                               {"definitions", stage_mean(report.definitions)},
                               {"rules", stage_mean(report.rules)}};
    if (report.overall_available) {
        manifest["overall_mean"] = report.overall;
    } else {
        manifest["overall_mean"] = nullptr;
    }
    manifest["created_at"] = created_at_;
    manifest["finished_at"] = util::iso_timestamp_now();
    util::write_file(path_in(dir_, "manifest.json"), manifest.dump(2) + "\n");
}

std::vector<RuleSetEntry> load_rule_set(const std::string& run_dir) {
    std::vector<RuleSetEntry> entries;
    auto lines = read_jsonl(path_in(run_dir, "extractions.jsonl"));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto j = json::parse(lines[i], nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("extraction")) {
            throw StoreError("corrupt extraction record at line " +
                             std::to_string(i + 1));
        }
        schema::ParseResult parsed =
            schema::parse_extraction(j["extraction"].dump());
        if (parsed.kind != schema::ParseKind::extraction) {
            throw StoreError("corrupt extraction record at line " +
                             std::to_string(i + 1) + ": " + parsed.error_message);
        }
        std::vector<RuleSetEntry> section_entries;
        for (const auto& rule : parsed.extraction.extracted_rules) {
            RuleSetEntry e;
            e.rule = rule;
            e.section_fingerprint = j.value("fingerprint", std::string());
            e.section_id = j.value("section_id", std::string());
            e.ordinal = j.value("ordinal", std::size_t(0));
            section_entries.push_back(std::move(e));
        }
        std::stable_sort(section_entries.begin(), section_entries.end(),
                         [](const RuleSetEntry& a, const RuleSetEntry& b) {
                             return a.rule.rule_id < b.rule.rule_id;
                         });
        for (auto& e : section_entries) entries.push_back(std::move(e));
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RuleSetEntry& a, const RuleSetEntry& b) {
                         return a.ordinal < b.ordinal;
                     });
    return entries;
}

namespace {

struct StageAccumulator {
    std::map<std::string, double> criterion_sums;
    double raw_sum = 0.0;
    std::size_t sections = 0;
};

StageMeans make_means(judge::Stage stage, const StageAccumulator& acc) {
    StageMeans m;
    if (acc.sections == 0) return m;
    m.available = true;
    m.section_count = acc.sections;
    m.stage_avg = acc.raw_sum / static_cast<double>(acc.sections);
    for (const auto& name : judge::criterion_set(stage).names) {
        auto it = acc.criterion_sums.find(name);
        double mean = it == acc.criterion_sums.end()
                          ? 0.0
                          : it->second / static_cast<double>(acc.sections);
        m.per_criterion.emplace_back(name, mean);
    }
    return m;
}

}  // namespace

ScoreReport compute_score_report(const std::string& run_dir) {
    std::map<std::string, StageAccumulator> acc;
    for (const auto& line : read_jsonl(path_in(run_dir, "attempts.jsonl"))) {
        auto j = json::parse(line, nullptr, false);
        if (!j.is_object() || !j.value("committed", false)) continue;
        if (j.value("synthetic_zero", false)) continue;
        std::string stage = j.value("stage", std::string());
        auto& a = acc[stage];
        a.raw_sum += j.value("raw_avg", 0.0);
        ++a.sections;
        for (const auto& s : j.value("scores", json::array())) {
            a.criterion_sums[s.value("name", std::string())] +=
                s.value("score", 0.0);
        }
    }

    ScoreReport report;
    report.metadata = make_means(judge::Stage::metadata, acc["metadata"]);
    report.definitions = make_means(judge::Stage::definitions, acc["definitions"]);
    report.rules = make_means(judge::Stage::rules, acc["rules"]);

    double sum = 0.0;
    int available = 0;
    for (const StageMeans* m :
         {&report.metadata, &report.definitions, &report.rules}) {
        if (m->available) {
            sum += m->stage_avg;
            ++available;
        }
    }
    if (available > 0) {
        report.overall_available = true;
        report.overall = sum / available;
    }
    return report;
}

ScoreReport render_score_report(const std::string& run_dir) {
    ScoreReport report = compute_score_report(run_dir);

    auto stage_rows = [](const char* name, judge::Stage stage,
                         const StageMeans& m, std::string& csv, std::string& md) {
        if (!m.available) {
            csv += std::string(name) + ",(stage average),n/a\n";
            md += std::string("| ") + name + " | (stage average) | n/a |\n";
            return;
        }
        for (const auto& [criterion, mean] : m.per_criterion) {
            csv += std::string(name) + "," + criterion + "," +
                   util::format_fixed(mean, 2) + "\n";
            md += std::string("| ") + name + " | " + criterion + " | " +
                  util::format_fixed(mean, 2) + " |\n";
        }
        csv += std::string(name) + ",(stage average)," +
               util::format_fixed(m.stage_avg, 2) + "\n";
        md += std::string("| ") + name + " | (stage average) | " +
              util::format_fixed(m.stage_avg, 2) + " |\n";
        (void)stage;
    };

    std::string csv = "stage,criterion,mean_raw_score\n";
    std::string md = "# Score report\n\n| Stage | Criterion | Mean (0-5) |\n"
                     "|---|---|---|\n";
    stage_rows("metadata", judge::Stage::metadata, report.metadata, csv, md);
    stage_rows("definitions", judge::Stage::definitions, report.definitions, csv,
               md);
    stage_rows("rules", judge::Stage::rules, report.rules, csv, md);
    if (report.overall_available) {
        csv += "overall,(mean of stage averages)," +
               util::format_fixed(report.overall, 2) + "\n";
        md += "| overall | (mean of stage averages) | " +
              util::format_fixed(report.overall, 2) + " |\n";
    } else {
        csv += "overall,(mean of stage averages),n/a\n";
        md += "| overall | (mean of stage averages) | n/a |\n";
    }

    util::write_file(path_in(run_dir, "report.csv"), csv);
    util::write_file(path_in(run_dir, "report.md"), md);
    return report;
}

}  // namespace ruleforge::store
