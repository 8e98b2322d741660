#include "ruleforge/llm.hpp"

#include <condition_variable>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ruleforge/sha256.hpp"
#include "ruleforge/util.hpp"

namespace ruleforge::llm {

using nlohmann::json;

void BackendConfig::check() const {
    if (temperature < 0.0 || temperature > 2.0) {
        throw ContractError("temperature must be within [0,2]");
    }
    if (top_p <= 0.0 || top_p > 1.0) {
        throw ContractError("top_p must be within (0,1]");
    }
    if (max_tokens <= 0) {
        throw ContractError("max_tokens must be positive");
    }
}

std::string request_fingerprint(TemplateId id, const std::string& prompt,
                                const std::string& model_name) {
    std::string material = std::string(template_name(id)) + "\x1f" + prompt +
                           "\x1f" + model_name;
    return sha256_hex(material);
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

struct HttpChatBackend::Impl {
    std::mutex mu;
    std::condition_variable cv;
    int in_flight = 0;
    long calls = 0;

    struct FlightGuard {
        Impl& impl;
        explicit FlightGuard(Impl& i, int cap) : impl(i) {
            std::unique_lock<std::mutex> lock(impl.mu);
            impl.cv.wait(lock, [&] { return impl.in_flight < cap; });
            ++impl.in_flight;
        }
        ~FlightGuard() {
            {
                std::lock_guard<std::mutex> lock(impl.mu);
                --impl.in_flight;
            }
            impl.cv.notify_one();
        }
    };
};

HttpChatBackend::HttpChatBackend(BackendConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
    config_.check();
    model_ = config_.model_name;
}

HttpChatBackend::~HttpChatBackend() = default;

long HttpChatBackend::call_count() const {
    std::lock_guard<std::mutex> lock(impl_->mu);
    return impl_->calls;
}

std::string HttpChatBackend::complete(const std::string& prompt,
                                      const CallContext& ctx) {
    Impl::FlightGuard guard(*impl_, config_.max_in_flight);

    std::string api_key;
    if (!config_.api_key_env.empty()) {
        const char* v = std::getenv(config_.api_key_env.c_str());
        if (!v) {
            Transcript t;
            t.request_fingerprint =
                request_fingerprint(ctx.template_id, prompt, model_);
            t.template_name = template_name(ctx.template_id);
            t.model_name = model_;
            t.prompt_text = prompt;
            t.context = ctx;
            t.error = true;
            t.error_message = "API key environment variable '" +
                              config_.api_key_env + "' is not set";
            {
                std::lock_guard<std::mutex> lock(impl_->mu);
                ++impl_->calls;
            }
            emit(t);
            throw BackendError(t.error_message);
        }
        api_key = v;
    }

    json body;
    body["model"] = config_.model_name;
    body["temperature"] = config_.temperature;
    body["top_p"] = config_.top_p;
    body["max_tokens"] = config_.max_tokens;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});

    httplib::Headers headers = {{"Content-Type", "application/json"}};
    if (!api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key);
    }

    Transcript t;
    t.request_fingerprint = request_fingerprint(ctx.template_id, prompt, model_);
    t.template_name = template_name(ctx.template_id);
    t.model_name = model_;
    t.prompt_text = prompt;
    t.context = ctx;

    auto start = std::chrono::steady_clock::now();
    std::string last_error;

    // One client per request: keeps concurrent calls on independent
    // connections under the shared in-flight cap.
    httplib::Client client(config_.base_url);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    client.set_connection_timeout(secs.count() ? secs.count() : 1, 0);
    client.set_read_timeout(secs.count() ? secs.count() : 1, 0);
    client.set_write_timeout(secs.count() ? secs.count() : 1, 0);

    for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
        }
        auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            continue;
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") ||
            parsed["choices"].empty() ||
            !parsed["choices"][0].contains("message")) {
            last_error = "malformed completion response body";
            continue;
        }

        t.response_text =
            parsed["choices"][0]["message"].value("content", std::string());
        if (parsed.contains("usage") && parsed["usage"].is_object()) {
            TokenUsage usage;
            usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0L);
            usage.completion_tokens =
                parsed["usage"].value("completion_tokens", 0L);
            t.token_usage = usage;
        }
        t.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);
        {
            std::lock_guard<std::mutex> lock(impl_->mu);
            ++impl_->calls;
        }
        emit(t);
        return t.response_text;
    }

    t.error = true;
    t.error_message = last_error;
    t.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        ++impl_->calls;
    }
    emit(t);
    throw BackendError("backend call failed after " +
                       std::to_string(config_.transport_retries + 1) +
                       " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

ScriptedFixture ScriptedFixture::from_file(const std::string& path) {
    return from_json_text(util::read_file(path));
}

ScriptedFixture ScriptedFixture::from_json_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw BackendError("scripted fixture is not a JSON object");
    }
    ScriptedFixture fixture;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_string()) {
            throw BackendError("scripted fixture entry '" + it.key() +
                               "' is not a string");
        }
        fixture.entries[it.key()] = it.value().get<std::string>();
    }
    return fixture;
}

namespace {

// Splits a fixture key "<fp>:<template>:<attempt>" from the right so that
// fingerprints containing ':' are impossible but robustly handled anyway.
bool split_key(const std::string& key, std::string& fp, std::string& tmpl,
               int& attempt) {
    auto last = key.rfind(':');
    if (last == std::string::npos || last == 0) return false;
    auto mid = key.rfind(':', last - 1);
    if (mid == std::string::npos) return false;
    fp = key.substr(0, mid);
    tmpl = key.substr(mid + 1, last - mid - 1);
    try {
        attempt = std::stoi(key.substr(last + 1));
    } catch (...) {
        return false;
    }
    return true;
}

bool fp_matches(const std::string& pattern, const std::string& fp) {
    if (pattern == "*") return true;
    if (pattern.size() >= 8 && util::starts_with(fp, pattern)) return true;
    return pattern == fp;
}

}  // namespace

std::string scripted_lookup(const ScriptedFixture& fixture,
                            const std::string& section_fp, TemplateId template_id,
                            int attempt_idx) {
    const std::string tmpl = template_name(template_id);
    const std::string* wildcard_hit = nullptr;
    for (const auto& [key, value] : fixture.entries) {
        std::string kfp, ktmpl;
        int kattempt = 0;
        if (!split_key(key, kfp, ktmpl, kattempt)) continue;
        if (ktmpl != tmpl || kattempt != attempt_idx) continue;
        if (kfp == "*") {
            wildcard_hit = &value;  // exact/prefix keys take precedence
        } else if (fp_matches(kfp, section_fp)) {
            return value;
        }
    }
    if (wildcard_hit) return *wildcard_hit;
    throw BackendError("scripted fixture has no entry for (" + section_fp + ", " +
                       tmpl + ", " + std::to_string(attempt_idx) + ")");
}

ScriptedBackend::ScriptedBackend(ScriptedFixture fixture, std::string model_name)
    : fixture_(std::move(fixture)) {
    model_ = std::move(model_name);
}

void ScriptedBackend::reset_counters() {
    std::lock_guard<std::mutex> lock(mu_);
    counters_.clear();
}

long ScriptedBackend::call_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
}

std::string ScriptedBackend::complete(const std::string& prompt,
                                      const CallContext& ctx) {
    int attempt_idx;
    {
        std::lock_guard<std::mutex> lock(mu_);
        std::string counter_key =
            ctx.section_fingerprint + ":" + template_name(ctx.template_id);
        attempt_idx = counters_[counter_key]++;
        ++calls_;
    }

    Transcript t;
    t.request_fingerprint = request_fingerprint(ctx.template_id, prompt, model_);
    t.template_name = template_name(ctx.template_id);
    t.model_name = model_;
    t.prompt_text = prompt;
    t.context = ctx;
    t.context.attempt_index = attempt_idx;

    try {
        t.response_text = scripted_lookup(fixture_, ctx.section_fingerprint,
                                          ctx.template_id, attempt_idx);
    } catch (const BackendError& e) {
        t.error = true;
        t.error_message = e.what();
        emit(t);
        throw;
    }
    emit(t);
    return t.response_text;
}

}  // namespace ruleforge::llm
