#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ruleforge/prompts.hpp"

namespace ruleforge::llm {

/// Inference settings for one chat-completion backend. Extraction and
/// judge backends are configured independently and may differ.
struct BackendConfig {
    std::string base_url;
    std::string model_name;
    std::string api_key_env;
    double temperature = 0.1;
    double top_p = 0.95;
    int max_tokens = 4096;
    std::chrono::milliseconds timeout{60000};
    int transport_retries = 2;
    int max_in_flight = 4;

    void check() const;  // throws ContractError on out-of-range values
};

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

/// Where a call sits in the pipeline; carried into the transcript so every
/// backend call traces back to its section, stage, and attempt.
struct CallContext {
    std::string section_fingerprint;
    TemplateId template_id = TemplateId::generate;
    std::string stage;  // "generate" | "metadata" | "definitions" | "rules" | bench labels
    int attempt_index = 0;
};

struct Transcript {
    std::string request_fingerprint;  // sha256(template id | prompt | model)
    std::string template_name;
    std::string model_name;
    std::string prompt_text;  // exact sent string, never mutated post-render
    std::string response_text;
    std::optional<TokenUsage> token_usage;
    std::chrono::milliseconds latency{0};
    CallContext context;
    bool error = false;
    std::string error_message;
};

using TranscriptSink = std::function<void(const Transcript&)>;

/// Chat-completion backend contract. complete() returns the raw response
/// text and records exactly one transcript per call through the sink.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    virtual std::string complete(const std::string& prompt,
                                 const CallContext& ctx) = 0;

    /// Total completed calls (success or failure), for budget assertions.
    virtual long call_count() const = 0;

    void set_transcript_sink(TranscriptSink sink) { sink_ = std::move(sink); }
    const std::string& model_name() const { return model_; }

protected:
    void emit(const Transcript& t) {
        if (sink_) sink_(t);
    }

    TranscriptSink sink_;
    std::string model_;
};

/// OpenAI-style chat-completion client over HTTP. Transport failures are
/// retried with exponential backoff; a shared in-flight cap bounds
/// concurrent requests across worker threads.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig config);
    ~HttpChatBackend() override;

    std::string complete(const std::string& prompt, const CallContext& ctx) override;
    long call_count() const override;

    const BackendConfig& config() const { return config_; }

private:
    struct Impl;
    BackendConfig config_;
    std::unique_ptr<Impl> impl_;
};

/// Deterministic scripted backend: responses come from a fixture mapping
/// "fingerprint:template:attempt" keys to canned text. The attempt index
/// is an internal per-(section, template) call counter.
struct ScriptedFixture {
    std::map<std::string, std::string> entries;

    static ScriptedFixture from_file(const std::string& path);
    static ScriptedFixture from_json_text(const std::string& text);
};

/// Pure lookup into a fixture; throws BackendError naming the missing
/// (fingerprint, template, attempt) triple. Fingerprint keys may be the
/// full hash, a unique prefix of 8+ hex chars, or "*".
std::string scripted_lookup(const ScriptedFixture& fixture,
                            const std::string& section_fp, TemplateId template_id,
                            int attempt_idx);

class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(ScriptedFixture fixture,
                             std::string model_name = "scripted");

    std::string complete(const std::string& prompt, const CallContext& ctx) override;
    long call_count() const override;

    /// Resets per-(section, template) call counters (fresh run replay).
    void reset_counters();

private:
    ScriptedFixture fixture_;
    mutable std::mutex mu_;
    std::map<std::string, int> counters_;
    long calls_ = 0;
};

/// Fingerprint binding a transcript to the exact request it answers.
std::string request_fingerprint(TemplateId id, const std::string& prompt,
                                const std::string& model_name);

}  // namespace ruleforge::llm
