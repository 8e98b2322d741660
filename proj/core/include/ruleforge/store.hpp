#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ruleforge/ingest.hpp"
#include "ruleforge/llm.hpp"
#include "ruleforge/pipeline.hpp"
#include "ruleforge/schema.hpp"

namespace ruleforge::store {

/// Run directory layout:
///   manifest.json, sections.jsonl, extractions.jsonl, attempts.jsonl,
///   transcripts.jsonl, report.csv, report.md
/// All record streams are append-only JSONL; extractions.jsonl carries no
/// timestamps so identical runs are byte-identical.
class Run {
public:
    /// Creates a new run directory or resumes an existing one. On resume
    /// the config snapshot must match; mismatches refuse with a diff
    /// naming every changed key.
    static Run open(const std::string& dir, const pipeline::PipelineConfig& cfg,
                    const std::string& doc_hash, std::size_t section_count);

    const std::string& dir() const { return dir_; }
    const std::string& run_id() const { return run_id_; }
    bool resumed() const { return resumed_; }

    /// Fingerprints with persisted final records (skipped on resume).
    bool already_done(const std::string& fingerprint) const;
    std::size_t resume_index_size() const { return done_.size(); }

    /// Writes sections.jsonl once; a resumed run verifies the section set.
    void write_sections(const std::vector<ingest::SectionDoc>& sections);

    /// Appends one extraction line (extracted results) plus the full
    /// attempt audit. Duplicate fingerprints are rejected.
    void append_section_result(const pipeline::SectionResult& result);

    /// Thread-safe sink for backend transcripts.
    llm::TranscriptSink transcript_sink();

    /// Recomputes totals from the persisted records and closes the
    /// manifest. Totals always sum to the section count.
    void finalize();

private:
    Run() = default;

    std::string dir_;
    std::string run_id_;
    bool resumed_ = false;
    std::set<std::string> done_;
    std::shared_ptr<std::mutex> write_mu_ = std::make_shared<std::mutex>();
    std::shared_ptr<long> transcript_seq_ = std::make_shared<long>(0);
    std::string doc_hash_;
    std::size_t section_count_ = 0;
    nlohmann::ordered_json config_snapshot_;
    std::string created_at_;
};

/// Redacted, comparable snapshot of every semantic config knob.
nlohmann::ordered_json config_snapshot(const pipeline::PipelineConfig& cfg);

struct RuleSetEntry {
    schema::RuleUnit rule;
    std::string section_fingerprint;
    std::string section_id;
    std::size_t ordinal = 0;
};

/// Flattens all extracted RuleUnits with their provenance, ordered by
/// (section ordinal, rule_id). Throws StoreError naming the line number
/// on a corrupt record.
std::vector<RuleSetEntry> load_rule_set(const std::string& run_dir);

struct StageMeans {
    bool available = false;  // false: no judged items (reported n/a)
    double stage_avg = 0.0;  // 1-5 display scale, full precision here
    std::vector<std::pair<std::string, double>> per_criterion;
    std::size_t section_count = 0;
};

struct ScoreReport {
    StageMeans metadata;
    StageMeans definitions;
    StageMeans rules;
    bool overall_available = false;
    double overall = 0.0;  // unweighted mean of available stage averages
};

/// Per-criterion means over committed (best) attempts only.
ScoreReport compute_score_report(const std::string& run_dir);

/// compute_score_report plus report.csv / report.md in the run directory.
ScoreReport render_score_report(const std::string& run_dir);

/// Reads a whole JSONL file; returns one string per non-empty line.
std::vector<std::string> read_jsonl(const std::string& path);

}  // namespace ruleforge::store
