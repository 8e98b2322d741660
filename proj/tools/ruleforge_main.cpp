// ruleforge CLI: ingest, extract, report, validate, and the compliance-QA
// bench subcommands. Exit codes: 0 ok, 1 usage, 2 validation findings,
// 3 backend failure, 4 I/O error.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ruleforge/config.hpp"
#include "ruleforge/sha256.hpp"
#include "ruleforge/ingest.hpp"
#include "ruleforge/llm.hpp"
#include "ruleforge/pipeline.hpp"
#include "ruleforge/ragbench.hpp"
#include "ruleforge/schema.hpp"
#include "ruleforge/store.hpp"
#include "ruleforge/util.hpp"
#include "ruleforge/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace ruleforge;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kValidation = 2;
constexpr int kBackend = 3;
constexpr int kIo = 4;

std::atomic<bool> g_cancel{false};

void handle_sigint(int) { g_cancel.store(true); }

bool use_color() {
    if (std::getenv("NO_COLOR")) return false;
    return isatty(fileno(stdout));
}

std::string paint(const std::string& text, const char* code) {
    if (!use_color()) return text;
    return std::string("\033[") + code + "m" + text + "\033[0m";
}

struct CommonOpts {
    std::string config_path;
    bool json_summary = false;
};

KeyValueConfig load_config(const std::string& path) {
    if (path.empty()) return KeyValueConfig{};
    return KeyValueConfig::from_file(path);
}

// Fans items out to a small worker pool; results land at their index so
// output order stays deterministic.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& body) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                body(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

// Optional document metadata overrides applied to every section.
void apply_doc_meta(const KeyValueConfig& cfg,
                    std::vector<ingest::SectionDoc>& sections) {
    auto title = cfg.get("ingest.doc_title");
    auto version = cfg.get("ingest.doc_version");
    auto effective = cfg.get("ingest.doc_effective_date");
    if (!title && !version && !effective) return;
    for (auto& s : sections) {
        if (title) s.doc_meta.title = *title;
        if (version) s.doc_meta.version = *version;
        if (effective) s.doc_meta.effective_date = *effective;
    }
}

ingest::SegmentationRules segmentation_rules(const KeyValueConfig& cfg) {
    ingest::SegmentationRules rules = ingest::SegmentationRules::defaults();
    auto keys = cfg.keys_with_prefix("ingest.delimiter.");
    if (!keys.empty()) {
        rules.delimiter_patterns.clear();
        for (const auto& k : keys) {
            rules.delimiter_patterns.push_back(*cfg.get(k));
        }
    }
    if (auto levels = cfg.get("ingest.heading_levels")) {
        rules.heading_levels.clear();
        for (int lvl : cfg.get_int_list("ingest.heading_levels", {})) {
            rules.heading_levels.push_back(lvl);
        }
    }
    std::string fallback = cfg.get_or("ingest.fallback", "single_section");
    if (fallback == "error") {
        rules.fallback = ingest::SegmentFallback::error;
    } else if (fallback == "single_section") {
        rules.fallback = ingest::SegmentFallback::single_section;
    } else {
        throw Error("ingest.fallback must be single_section or error");
    }
    return rules;
}

llm::BackendConfig backend_config(const KeyValueConfig& cfg,
                                  const std::string& prefix,
                                  double default_temperature) {
    llm::BackendConfig b;
    b.base_url = cfg.get_or(prefix + ".base_url", "http://localhost:8080");
    b.model_name = cfg.get_or(prefix + ".model_name", prefix + "-model");
    b.api_key_env = cfg.get_or(prefix + ".api_key_env", "");
    b.temperature = cfg.get_double(prefix + ".temperature", default_temperature);
    b.top_p = cfg.get_double(prefix + ".top_p", 0.95);
    b.max_tokens = cfg.get_int(prefix + ".max_tokens", 4096);
    b.timeout = std::chrono::milliseconds(
        cfg.get_int(prefix + ".timeout_ms", 60000));
    b.transport_retries = cfg.get_int(prefix + ".transport_retries", 2);
    b.max_in_flight = cfg.get_int(prefix + ".max_in_flight", 4);
    return b;
}

pipeline::PipelineConfig pipeline_config(const KeyValueConfig& cfg) {
    pipeline::PipelineConfig p;
    p.theta = cfg.get_double("pipeline.theta", 0.90);
    p.max_retries = cfg.get_int("pipeline.max_retries", 3);
    std::string trigger = cfg.get_or("pipeline.trigger", "avg");
    if (trigger == "avg" || trigger == "average") {
        p.trigger_mode = judge::TriggerMode::average;
    } else if (trigger == "individual" || trigger == "per_criterion") {
        p.trigger_mode = judge::TriggerMode::per_criterion;
    } else {
        throw Error("pipeline.trigger must be avg or individual");
    }
    p.min_raw = cfg.get_double("pipeline.min_raw", 4.0);
    p.domain_label = cfg.get_or("pipeline.domain_label", "regulatory documents");
    p.worker_cap = cfg.get_int("pipeline.worker_cap", 2);
    p.extractor_backend = backend_config(cfg, "extractor", 0.1);
    p.judge_backend = backend_config(cfg, "judge", 0.1);
    return p;
}

struct Backends {
    std::unique_ptr<llm::ChatBackend> extractor;
    std::unique_ptr<llm::ChatBackend> judge;

    long total_calls() const {
        return (extractor ? extractor->call_count() : 0) +
               (judge && judge.get() != extractor.get() ? judge->call_count() : 0);
    }
};

Backends make_backends(const pipeline::PipelineConfig& cfg,
                       const std::string& mock_fixture) {
    Backends b;
    if (!mock_fixture.empty()) {
        auto fixture = llm::ScriptedFixture::from_file(mock_fixture);
        b.extractor = std::make_unique<llm::ScriptedBackend>(
            fixture, cfg.extractor_backend.model_name);
        b.judge = std::make_unique<llm::ScriptedBackend>(
            fixture, cfg.judge_backend.model_name);
    } else {
        b.extractor = std::make_unique<llm::HttpChatBackend>(cfg.extractor_backend);
        b.judge = std::make_unique<llm::HttpChatBackend>(cfg.judge_backend);
    }
    return b;
}

void print_summary_line(const CommonOpts& opts, const ordered_json& summary,
                        const std::string& text) {
    if (opts.json_summary) {
        std::printf("%s\n", summary.dump().c_str());
    } else {
        std::printf("%s\n", text.c_str());
    }
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& doc_path, const std::string& out_dir,
               const CommonOpts& opts) {
    auto cfg = load_config(opts.config_path);
    auto rules = segmentation_rules(cfg);

    auto raw = ingest::RawDocument::from_file(doc_path);
    auto normalized = ingest::normalize(raw);
    auto sections = ingest::segment(normalized, rules);
    apply_doc_meta(cfg, sections);

    fs::create_directories(out_dir);
    std::string blob;
    for (const auto& s : sections) {
        blob += ingest::section_to_jsonl(s);
        blob += '\n';
    }
    util::write_file((fs::path(out_dir) / "sections.jsonl").string(), blob);

    ordered_json summary;
    summary["command"] = "ingest";
    summary["doc_hash"] = raw.doc_hash;
    summary["sections"] = sections.size();
    summary["cleanup"] = normalized.cleanup_log;
    summary["out"] = out_dir;
    print_summary_line(opts, summary,
                       "ingest: " + std::to_string(sections.size()) +
                           " sections, doc " + raw.doc_hash.substr(0, 12) +
                           " -> " + out_dir + "/sections.jsonl");
    return kOk;
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

int cmd_extract(const std::string& input, const std::string& out_dir,
                const std::string& mock_fixture, const CommonOpts& opts,
                const std::optional<double>& theta_flag,
                const std::optional<int>& retries_flag,
                const std::string& trigger_flag, const std::string& domain_flag,
                const std::optional<int>& workers_flag) {
    auto file_cfg = load_config(opts.config_path);
    if (theta_flag) file_cfg.set("pipeline.theta", std::to_string(*theta_flag));
    if (retries_flag) {
        file_cfg.set("pipeline.max_retries", std::to_string(*retries_flag));
    }
    if (!trigger_flag.empty()) file_cfg.set("pipeline.trigger", trigger_flag);
    if (!domain_flag.empty()) file_cfg.set("pipeline.domain_label", domain_flag);
    if (workers_flag) {
        file_cfg.set("pipeline.worker_cap", std::to_string(*workers_flag));
    }

    pipeline::PipelineConfig cfg = pipeline_config(file_cfg);
    cfg.check();

    // Input: a raw document or a pre-segmented sections.jsonl.
    std::vector<ingest::SectionDoc> sections;
    std::string doc_hash;
    if (input.size() > 6 && input.substr(input.size() - 6) == ".jsonl") {
        std::string content = util::read_file(input);
        doc_hash = sha256_hex(content);
        for (const auto& line : store::read_jsonl(input)) {
            sections.push_back(ingest::section_from_jsonl(line));
        }
    } else {
        auto raw = ingest::RawDocument::from_file(input);
        doc_hash = raw.doc_hash;
        auto normalized = ingest::normalize(raw);
        sections = ingest::segment(normalized, segmentation_rules(file_cfg));
        apply_doc_meta(file_cfg, sections);
    }

    store::Run run = store::Run::open(out_dir, cfg, doc_hash, sections.size());
    run.write_sections(sections);

    Backends backends = make_backends(cfg, mock_fixture);
    backends.extractor->set_transcript_sink(run.transcript_sink());
    backends.judge->set_transcript_sink(run.transcript_sink());

    pipeline::RunHooks hooks;
    hooks.already_done = [&run](const std::string& fp) {
        return run.already_done(fp);
    };
    hooks.on_result = [&run](const pipeline::SectionResult& r) {
        run.append_section_result(r);
    };
    hooks.cancel = &g_cancel;

    pipeline::RunResult result = pipeline::run_sections(
        sections, cfg, *backends.extractor, *backends.judge, hooks);

    if (g_cancel.load()) {
        std::fprintf(stderr, "interrupted; run directory is resumable: %s\n",
                     out_dir.c_str());
        return 130;
    }

    run.finalize();
    store::render_score_report(out_dir);

    bool any_backend_failure = false;
    bool any_failure = result.totals.failed > 0;
    for (const auto& r : result.results) {
        if (r.status == pipeline::SectionStatus::failed && r.backend_failure) {
            any_backend_failure = true;
        }
    }

    ordered_json summary;
    summary["command"] = "extract";
    summary["run_id"] = run.run_id();
    summary["out"] = out_dir;
    summary["extracted"] = result.totals.extracted;
    summary["skipped_null"] = result.totals.skipped_null;
    summary["failed"] = result.totals.failed;
    summary["resumed"] = result.totals.resumed;
    summary["backend_calls"] = backends.total_calls();
    print_summary_line(
        opts, summary,
        "extract: " + std::to_string(result.totals.extracted) + " extracted, " +
            std::to_string(result.totals.skipped_null) + " null, " +
            std::to_string(result.totals.failed) + " failed, " +
            std::to_string(result.totals.resumed) + " resumed -> " + out_dir);

    if (any_backend_failure) return kBackend;
    if (any_failure) return kValidation;
    return kOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& run_dir, const CommonOpts& opts) {
    store::ScoreReport report = store::render_score_report(run_dir);

    auto stage_text = [](const char* name, const store::StageMeans& m) {
        if (!m.available) return std::string(name) + "=n/a";
        return std::string(name) + "=" + util::format_fixed(m.stage_avg, 2);
    };

    ordered_json summary;
    summary["command"] = "report";
    summary["run_dir"] = run_dir;
    summary["metadata"] =
        report.metadata.available ? json(report.metadata.stage_avg) : json();
    summary["definitions"] = report.definitions.available
                                 ? json(report.definitions.stage_avg)
                                 : json();
    summary["rules"] =
        report.rules.available ? json(report.rules.stage_avg) : json();
    summary["overall"] =
        report.overall_available ? json(report.overall) : json();

    std::string overall = report.overall_available
                              ? util::format_fixed(report.overall, 2)
                              : std::string("n/a");
    print_summary_line(opts, summary,
                       "report: " + stage_text("metadata", report.metadata) +
                           " " + stage_text("definitions", report.definitions) +
                           " " + stage_text("rules", report.rules) +
                           " overall=" + overall + " -> " + run_dir +
                           "/report.csv");
    return kOk;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int validate_one(const std::string& text, const std::string& label,
                 bool tolerant, int& violations_total) {
    schema::ParseResult parsed = schema::parse_extraction(text);
    schema::ValidationReport report;
    if (parsed.kind == schema::ParseKind::null_marker) {
        std::printf("%s: null-marker (non-actionable)\n", label.c_str());
        return kOk;
    }
    // A bare RuleUnit object decodes as an extraction with neither
    // section_meta nor extracted_rules; treat it as a rule-unit file.
    bool bare_rule_unit =
        parsed.kind == schema::ParseKind::extraction &&
        !parsed.extraction.section_meta_present &&
        !parsed.extraction.extracted_rules_present &&
        !parsed.extraction.definitions.has_value();
    if (parsed.kind == schema::ParseKind::error || bare_rule_unit) {
        schema::RuleUnit unit;
        std::string err;
        if (schema::try_parse_rule_unit(text, unit, err) &&
            (!unit.rule_id.empty() || unit.statement_present)) {
            report = schema::validate_rule_unit(unit);
        } else if (parsed.kind == schema::ParseKind::error) {
            std::printf("%s: parse error at %s: %s\n", label.c_str(),
                        parsed.error_path.c_str(), parsed.error_message.c_str());
            ++violations_total;
            return kValidation;
        } else {
            schema::ValidationOptions options;
            options.strict_unknown_fields = !tolerant;
            report = schema::validate_extraction(parsed.extraction, std::nullopt,
                                                 options);
        }
    } else {
        schema::ValidationOptions options;
        options.strict_unknown_fields = !tolerant;
        report = schema::validate_extraction(parsed.extraction, std::nullopt,
                                             options);
    }
    for (const auto& v : report.violations) {
        std::printf("%s: %s  [%s] %s\n", label.c_str(),
                    paint("violation", "31").c_str(), v.path.c_str(),
                    v.message.c_str());
    }
    for (const auto& w : report.warnings) {
        std::printf("%s: %s  [%s] %s\n", label.c_str(),
                    paint("warning", "33").c_str(), w.path.c_str(),
                    w.message.c_str());
    }
    violations_total += static_cast<int>(report.violations.size());
    return report.ok ? kOk : kValidation;
}

int cmd_validate(const std::string& path, bool tolerant, const CommonOpts& opts) {
    int violations_total = 0;
    int rc = kOk;
    if (path.size() > 6 && path.substr(path.size() - 6) == ".jsonl") {
        auto lines = store::read_jsonl(path);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            std::string candidate = lines[i];
            auto j = json::parse(candidate, nullptr, false);
            if (j.is_object() && j.contains("extraction")) {
                candidate = j["extraction"].dump();
            }
            int one = validate_one(candidate, path + ":" + std::to_string(i + 1),
                                   tolerant, violations_total);
            if (one != kOk) rc = one;
        }
    } else {
        rc = validate_one(util::read_file(path), path, tolerant, violations_total);
    }

    ordered_json summary;
    summary["command"] = "validate";
    summary["file"] = path;
    summary["violations"] = violations_total;
    print_summary_line(opts, summary,
                       violations_total == 0
                           ? "validate: " + paint("ok", "32") + " " + path
                           : "validate: " +
                                 std::to_string(violations_total) +
                                 " violation(s) in " + path);
    return rc;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

std::vector<ingest::SectionDoc> load_sections_file(const std::string& path) {
    std::vector<ingest::SectionDoc> sections;
    for (const auto& line : store::read_jsonl(path)) {
        sections.push_back(ingest::section_from_jsonl(line));
    }
    return sections;
}

std::shared_ptr<bench::EmbeddingProvider> make_embedding_provider(
    const KeyValueConfig& cfg) {
    std::string url = cfg.get_or("bench.embed_url", "");
    if (url.empty()) {
        return std::make_shared<bench::HashedTfidfEmbedding>(
            cfg.get_int("bench.embed_buckets", 1024));
    }
    return std::make_shared<bench::HttpEmbeddingProvider>(
        url, cfg.get_or("bench.embed_model", "embedding-model"),
        cfg.get_or("bench.embed_api_key_env", ""));
}

std::unique_ptr<llm::ChatBackend> make_bench_backend(
    const KeyValueConfig& cfg, const std::string& prefix,
    double default_temperature, const std::string& mock_fixture) {
    if (!mock_fixture.empty()) {
        return std::make_unique<llm::ScriptedBackend>(
            llm::ScriptedFixture::from_file(mock_fixture), prefix + "-scripted");
    }
    return std::make_unique<llm::HttpChatBackend>(
        backend_config(cfg, prefix, default_temperature));
}

int cmd_bench_questions(const std::string& sections_path,
                        const std::string& out_dir, int per_section,
                        const std::string& mock_fixture, const CommonOpts& opts) {
    auto cfg = load_config(opts.config_path);
    bench::BenchConfig bcfg;
    bcfg.questions_per_section =
        per_section > 0 ? per_section
                        : cfg.get_int("bench.questions_per_section", 4);
    bcfg.question_temperature = cfg.get_double("bench.question_temperature", 0.8);
    bcfg.check();

    auto sections = load_sections_file(sections_path);
    auto backend = make_bench_backend(cfg, "question_gen",
                                      bcfg.question_temperature, mock_fixture);

    std::vector<std::string> warnings;
    auto items = bench::generate_questions(sections, bcfg.questions_per_section,
                                           *backend, &warnings);
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    fs::create_directories(out_dir);
    std::string blob;
    for (const auto& q : items) {
        ordered_json j;
        j["id"] = q.id;
        j["question"] = q.question;
        j["source_section"] = q.source_section;
        blob += j.dump() + "\n";
    }
    util::write_file((fs::path(out_dir) / "questions.jsonl").string(), blob);

    ordered_json summary;
    summary["command"] = "bench questions";
    summary["questions"] = items.size();
    summary["warnings"] = warnings.size();
    print_summary_line(opts, summary,
                       "bench questions: " + std::to_string(items.size()) +
                           " questions -> " + out_dir + "/questions.jsonl");
    return kOk;
}

std::vector<bench::RuleDocText> load_rule_docs(const std::string& rules_path) {
    std::vector<bench::RuleDocText> docs;
    if (fs::is_directory(rules_path)) {
        for (const auto& entry : store::load_rule_set(rules_path)) {
            docs.push_back(
                bench::serialize_rule(entry.rule, entry.section_fingerprint));
        }
        return docs;
    }
    // Flat adapter: any JSONL with id + text fields indexes directly.
    auto lines = store::read_jsonl(rules_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto j = json::parse(lines[i], nullptr, false);
        if (!j.is_object()) {
            throw StoreError("flat rule file line " + std::to_string(i + 1) +
                             " is not a JSON object");
        }
        bench::RuleDocText doc;
        doc.rule_id = j.value("rule_id", j.value("id", std::string()));
        doc.rendered_text = j.value("text", std::string());
        doc.provenance = j.value("source", std::string());
        if (doc.rule_id.empty() || doc.rendered_text.empty()) {
            throw StoreError("flat rule file line " + std::to_string(i + 1) +
                             " needs id and text fields");
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

int cmd_bench_index(const std::string& rules_path, const std::string& out_dir,
                    const CommonOpts& opts) {
    auto cfg = load_config(opts.config_path);
    auto docs = load_rule_docs(rules_path);
    auto provider = make_embedding_provider(cfg);
    auto index = bench::build_index(docs, provider);

    fs::create_directories(out_dir);
    std::string blob;
    for (const auto& e : index.entries) {
        ordered_json j;
        j["rule_id"] = e.doc.rule_id;
        j["text"] = e.doc.rendered_text;
        j["source"] = e.doc.provenance;
        blob += j.dump() + "\n";
    }
    util::write_file((fs::path(out_dir) / "index.jsonl").string(), blob);

    ordered_json summary;
    summary["command"] = "bench index";
    summary["rules"] = index.entries.size();
    summary["provider"] = index.provider_tag;
    summary["dimension"] = index.dimension;
    print_summary_line(opts, summary,
                       "bench index: " + std::to_string(index.entries.size()) +
                           " rules, provider " + index.provider_tag + " -> " +
                           out_dir + "/index.jsonl");
    return kOk;
}

std::vector<bench::QaItem> load_questions(const std::string& path) {
    std::vector<bench::QaItem> items;
    for (const auto& line : store::read_jsonl(path)) {
        auto j = json::parse(line);
        bench::QaItem q;
        q.id = j.value("id", std::string());
        q.question = j.value("question", std::string());
        q.source_section = j.value("source_section", std::string());
        items.push_back(std::move(q));
    }
    return items;
}

int cmd_bench_answer(const std::string& index_path,
                     const std::string& questions_path, int k_flag,
                     const std::string& system_name, const std::string& out_dir,
                     const std::string& mock_fixture, const CommonOpts& opts) {
    auto cfg = load_config(opts.config_path);
    auto docs = load_rule_docs(index_path);
    auto provider = make_embedding_provider(cfg);
    auto index = bench::build_index(docs, provider);
    auto questions = load_questions(questions_path);
    auto backend = make_bench_backend(cfg, "answer", 0.1, mock_fixture);

    // Explicit --k answers one depth; otherwise the configured sweep runs.
    std::vector<int> depths = k_flag > 0
                                  ? std::vector<int>{k_flag}
                                  : cfg.get_int_list("bench.retrieval_depths",
                                                     {1, 5, 10});
    bench::BenchConfig bcfg;
    bcfg.retrieval_depths = depths;
    bcfg.check();

    fs::create_directories(out_dir);
    int failed = 0;
    std::vector<std::string> out_files;
    for (int k : depths) {
        std::vector<bench::AnswerRecord> records(questions.size());
        parallel_for(questions.size(), cfg.get_int("bench.worker_cap", 2),
                     [&](std::size_t i) {
                         records[i] = bench::answer_question(questions[i], index,
                                                             k, *backend);
                     });
        std::string blob;
        for (const auto& record : records) {
            if (record.failed) ++failed;
            ordered_json j;
            j["question_id"] = record.question_id;
            j["question"] = record.question;
            j["k"] = record.k;
            j["answer"] = record.answer;
            j["retrieved_rule_ids"] = record.retrieved_rule_ids;
            j["failed"] = record.failed;
            if (record.failed) j["error"] = record.error;
            blob += j.dump() + "\n";
        }
        std::string out_file =
            "answers." + system_name + "." + std::to_string(k) + ".jsonl";
        util::write_file((fs::path(out_dir) / out_file).string(), blob);
        out_files.push_back(out_file);
    }

    ordered_json summary;
    summary["command"] = "bench answer";
    summary["answers"] = questions.size() * depths.size();
    summary["failed"] = failed;
    summary["out"] = out_files;
    std::string names;
    for (const auto& f : out_files) names += (names.empty() ? "" : ", ") + f;
    print_summary_line(opts, summary,
                       "bench answer: " + std::to_string(questions.size()) +
                           " questions x " + std::to_string(depths.size()) +
                           " depth(s) (" + std::to_string(failed) +
                           " failed) -> " + out_dir + "/{" + names + "}");
    return !questions.empty() &&
                   failed == static_cast<int>(questions.size() * depths.size())
               ? kBackend
               : kOk;
}

std::map<std::string, std::pair<std::string, bool>> load_answers(
    const std::string& path, int& k_out) {
    std::map<std::string, std::pair<std::string, bool>> answers;
    for (const auto& line : store::read_jsonl(path)) {
        auto j = json::parse(line);
        answers[j.value("question_id", std::string())] = {
            j.value("answer", std::string()), j.value("failed", false)};
        k_out = j.value("k", k_out);
    }
    return answers;
}

const char* ordering_name(bench::Ordering o) {
    return o == bench::Ordering::AB ? "AB" : "BA";
}

int cmd_bench_judge(const std::string& questions_path,
                    const std::string& answers_a_path,
                    const std::string& answers_b_path, const std::string& out_dir,
                    const std::string& mock_fixture, const CommonOpts& opts) {
    auto cfg = load_config(opts.config_path);
    auto questions = load_questions(questions_path);
    int k_a = 0, k_b = 0;
    auto answers_a = load_answers(answers_a_path, k_a);
    auto answers_b = load_answers(answers_b_path, k_b);
    auto backend = make_bench_backend(cfg, "pairwise", 0.1, mock_fixture);

    fs::create_directories(out_dir);

    struct PairSlot {
        bool judged = false;
        bench::PairVerdict ab, ba;
        std::vector<std::string> warnings;
    };
    std::vector<PairSlot> slots(questions.size());
    int skipped = 0;
    std::vector<std::size_t> runnable;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        auto ita = answers_a.find(questions[i].id);
        auto itb = answers_b.find(questions[i].id);
        if (ita == answers_a.end() || itb == answers_b.end() ||
            ita->second.second || itb->second.second) {
            ++skipped;  // failed answers are excluded from pairing
            continue;
        }
        runnable.push_back(i);
    }
    parallel_for(runnable.size(), cfg.get_int("bench.worker_cap", 2),
                 [&](std::size_t slot_index) {
                     std::size_t i = runnable[slot_index];
                     const auto& q = questions[i];
                     auto [ab, ba] = bench::pairwise_judge(
                         q, answers_a.at(q.id).first, answers_b.at(q.id).first,
                         *backend, k_a, &slots[i].warnings);
                     slots[i].ab = std::move(ab);
                     slots[i].ba = std::move(ba);
                     slots[i].judged = true;
                 });

    std::string blob;
    int judged = 0;
    for (const auto& slot : slots) {
        for (const auto& w : slot.warnings) {
            std::fprintf(stderr, "warning: %s\n", w.c_str());
        }
        if (!slot.judged) continue;
        ++judged;
        for (const auto* v : {&slot.ab, &slot.ba}) {
            ordered_json j;
            j["question_id"] = v->question_id;
            j["ordering"] = ordering_name(v->ordering);
            j["depth"] = v->depth;
            ordered_json winners;
            for (const auto& [criterion, winner] : v->winners) {
                winners[criterion] = winner == bench::Winner::A   ? "A"
                                     : winner == bench::Winner::B ? "B"
                                                                  : "tie";
            }
            j["winners"] = std::move(winners);
            blob += j.dump() + "\n";
        }
    }

    // Appends so several depths can accumulate into one verdict file.
    std::string verdicts_path = (fs::path(out_dir) / "verdicts.jsonl").string();
    std::string existing;
    if (fs::exists(verdicts_path)) existing = util::read_file(verdicts_path);
    util::write_file(verdicts_path, existing + blob);

    ordered_json summary;
    summary["command"] = "bench judge";
    summary["pairs_judged"] = judged;
    summary["pairs_skipped"] = skipped;
    summary["depth"] = k_a;
    print_summary_line(opts, summary,
                       "bench judge: " + std::to_string(judged) +
                           " pairs judged (x2 orderings), " +
                           std::to_string(skipped) + " skipped -> " +
                           verdicts_path);
    return kOk;
}

int cmd_bench_report(const std::string& bench_dir, const CommonOpts& opts) {
    std::vector<bench::PairVerdict> verdicts;
    std::set<int> depth_set;
    auto path = (fs::path(bench_dir) / "verdicts.jsonl").string();
    for (const auto& line : store::read_jsonl(path)) {
        auto j = json::parse(line);
        bench::PairVerdict v;
        v.question_id = j.value("question_id", std::string());
        v.ordering = j.value("ordering", std::string("AB")) == "AB"
                         ? bench::Ordering::AB
                         : bench::Ordering::BA;
        v.depth = j.value("depth", 0);
        depth_set.insert(v.depth);
        for (const auto& name : bench::pairwise_criteria()) {
            std::string w = j["winners"].value(name, std::string("tie"));
            bench::Winner winner = w == "A"   ? bench::Winner::A
                                   : w == "B" ? bench::Winner::B
                                              : bench::Winner::tie;
            v.winners.emplace_back(name, winner);
        }
        verdicts.push_back(std::move(v));
    }
    if (verdicts.empty()) {
        std::fprintf(stderr, "no verdicts found in %s\n", path.c_str());
        return kIo;
    }

    std::vector<int> depths(depth_set.begin(), depth_set.end());
    auto table = bench::compute_win_table(verdicts, depths);
    std::string csv = bench::win_table_csv(table);
    util::write_file((fs::path(bench_dir) / "wintable.csv").string(), csv);

    ordered_json summary;
    summary["command"] = "bench report";
    for (int depth : depths) {
        summary["aggregated"]["k=" + std::to_string(depth)] =
            table.aggregated.at(depth);
    }
    std::string text = "bench report:";
    for (int depth : depths) {
        text += " k=" + std::to_string(depth) + " aggregated " +
                util::format_fixed(table.aggregated.at(depth), 2) + "%;";
    }
    print_summary_line(opts, summary, text + " -> " + bench_dir + "/wintable.csv");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_sigint);

    CLI::App app{"ruleforge: schema-constrained regulatory rule extraction "
                 "with judge-guided repair"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonOpts opts;
    app.fallthrough();
    app.add_option("--config", opts.config_path, "key=value config file");
    app.add_flag("--json", opts.json_summary, "machine-readable summary line");

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "normalize and segment a document");
    ingest_cmd->fallthrough();
    std::string ingest_doc, ingest_out = "ingest-out";
    ingest_cmd->add_option("doc", ingest_doc, "input .md/.txt document")->required();
    ingest_cmd->add_option("--out", ingest_out, "output directory")->required();

    // extract
    auto* extract_cmd =
        app.add_subcommand("extract", "run the extraction + judge/repair pipeline");
    extract_cmd->fallthrough();
    std::string extract_input, extract_out, extract_mock, extract_trigger,
        extract_domain;
    std::optional<double> extract_theta;
    std::optional<int> extract_retries, extract_workers;
    extract_cmd->add_option("input", extract_input,
                            "document or sections.jsonl")->required();
    extract_cmd->add_option("--out", extract_out, "run directory")->required();
    extract_cmd->add_option("--mock", extract_mock,
                            "scripted backend fixture (JSON)");
    extract_cmd->add_option("--theta", extract_theta, "acceptance threshold");
    extract_cmd->add_option("--max-retries", extract_retries,
                            "judged attempts per stage");
    extract_cmd->add_option("--trigger", extract_trigger,
                            "regeneration trigger: avg|individual");
    extract_cmd->add_option("--domain", extract_domain,
                            "domain label for the generation prompt");
    extract_cmd->add_option("--workers", extract_workers, "concurrent sections");

    // report
    auto* report_cmd = app.add_subcommand("report", "score report for a run");
    report_cmd->fallthrough();
    std::string report_dir;
    report_cmd->add_option("rundir", report_dir, "run directory")->required();

    // validate
    auto* validate_cmd =
        app.add_subcommand("validate", "schema-check an extraction file");
    validate_cmd->fallthrough();
    std::string validate_path;
    bool validate_tolerant = false;
    validate_cmd->add_option("file", validate_path, "extraction JSON or JSONL")
        ->required();
    validate_cmd->add_flag("--tolerant", validate_tolerant,
                           "unknown fields warn instead of failing");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "compliance-QA benchmark");
    bench_cmd->fallthrough();
    bench_cmd->require_subcommand(1);

    auto* bq = bench_cmd->add_subcommand("questions", "generate evaluation questions");
    bq->fallthrough();
    std::string bq_sections, bq_out = "bench-out", bq_mock;
    int bq_per_section = 0;
    bq->add_option("--sections", bq_sections, "sections.jsonl")->required();
    bq->add_option("--out", bq_out, "output directory")->required();
    bq->add_option("--per-section", bq_per_section, "questions per section");
    bq->add_option("--mock", bq_mock, "scripted backend fixture");

    auto* bi = bench_cmd->add_subcommand("index", "build a retrievable rule index");
    bi->fallthrough();
    std::string bi_rules, bi_out = "bench-out";
    bi->add_option("--rules", bi_rules, "run directory or flat JSONL")->required();
    bi->add_option("--out", bi_out, "output directory")->required();

    auto* ba = bench_cmd->add_subcommand("answer", "answer questions at depth k");
    ba->fallthrough();
    std::string ba_index, ba_questions, ba_system = "A", ba_out = "bench-out",
                ba_mock;
    int ba_k = 0;
    ba->add_option("--index", ba_index, "index.jsonl / run dir / flat rules")
        ->required();
    ba->add_option("--questions", ba_questions, "questions.jsonl")->required();
    ba->add_option("--k", ba_k,
                   "retrieval depth (omit to sweep bench.retrieval_depths)");
    ba->add_option("--system", ba_system, "system label for the answers file");
    ba->add_option("--out", ba_out, "output directory")->required();
    ba->add_option("--mock", ba_mock, "scripted backend fixture");

    auto* bj = bench_cmd->add_subcommand("judge", "pairwise judging with swapped order");
    bj->fallthrough();
    std::string bj_questions, bj_a, bj_b, bj_out = "bench-out", bj_mock;
    bj->add_option("--questions", bj_questions, "questions.jsonl")->required();
    bj->add_option("--answers-a", bj_a, "answers file for system A")->required();
    bj->add_option("--answers-b", bj_b, "answers file for system B")->required();
    bj->add_option("--out", bj_out, "output directory")->required();
    bj->add_option("--mock", bj_mock, "scripted backend fixture");

    auto* br = bench_cmd->add_subcommand("report", "win-rate table from verdicts");
    br->fallthrough();
    std::string br_dir;
    br->add_option("benchdir", br_dir, "bench output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);  // prints usage or help text
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*ingest_cmd) return cmd_ingest(ingest_doc, ingest_out, opts);
        if (*extract_cmd) {
            return cmd_extract(extract_input, extract_out, extract_mock, opts,
                               extract_theta, extract_retries, extract_trigger,
                               extract_domain, extract_workers);
        }
        if (*report_cmd) return cmd_report(report_dir, opts);
        if (*validate_cmd) {
            return cmd_validate(validate_path, validate_tolerant, opts);
        }
        if (*bench_cmd) {
            if (*bq) {
                return cmd_bench_questions(bq_sections, bq_out, bq_per_section,
                                           bq_mock, opts);
            }
            if (*bi) return cmd_bench_index(bi_rules, bi_out, opts);
            if (*ba) {
                return cmd_bench_answer(ba_index, ba_questions, ba_k, ba_system,
                                        ba_out, ba_mock, opts);
            }
            if (*bj) {
                return cmd_bench_judge(bj_questions, bj_a, bj_b, bj_out, bj_mock,
                                       opts);
            }
            if (*br) return cmd_bench_report(br_dir, opts);
        }
    } catch (const BackendError& e) {
        std::fprintf(stderr, "backend error: %s\n", e.what());
        return kBackend;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    }
    return kUsage;
}
