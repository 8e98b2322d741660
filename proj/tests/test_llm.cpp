#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "helpers.hpp"
#include "ruleforge/llm.hpp"
#include "ruleforge/prompts.hpp"
#include "ruleforge/util.hpp"

using namespace ruleforge;
using nlohmann::json;

TEST_CASE("every template declares the arity its body actually uses") {
    using llm::TemplateId;
    for (auto id : {TemplateId::generate, TemplateId::regen_meta,
                    TemplateId::regen_defs, TemplateId::regen_rules,
                    TemplateId::judge_meta, TemplateId::judge_defs,
                    TemplateId::judge_rules, TemplateId::gen_questions,
                    TemplateId::answer, TemplateId::pairwise_judge}) {
        const auto& tmpl = llm::prompt_template(id);
        std::vector<std::string> args;
        for (int i = 0; i < tmpl.arity; ++i) {
            args.push_back("ARG" + std::to_string(i) + "VALUE");
        }
        std::string rendered = llm::render(id, args);  // throws if slots break
        for (const auto& a : args) {
            CHECK(rendered.find(a) != std::string::npos);
        }
    }
    CHECK(llm::prompt_template(llm::TemplateId::generate).arity == 2);
    CHECK(llm::prompt_template(llm::TemplateId::regen_meta).arity == 3);
    CHECK(llm::prompt_template(llm::TemplateId::regen_defs).arity == 3);
    CHECK(llm::prompt_template(llm::TemplateId::regen_rules).arity == 3);
    CHECK(llm::prompt_template(llm::TemplateId::judge_meta).arity == 2);
    CHECK(llm::prompt_template(llm::TemplateId::judge_defs).arity == 2);
    CHECK(llm::prompt_template(llm::TemplateId::judge_rules).arity == 2);
    CHECK(llm::prompt_template(llm::TemplateId::gen_questions).arity == 3);
}

TEST_CASE("render fills slots in declared order") {
    std::string out =
        llm::render(llm::TemplateId::regen_meta, {"SRC", "BAD", "CRIT"});
    auto src = out.find("Source Text: SRC");
    auto bad = out.find("Incorrect Metadata: BAD");
    auto crit = out.find("Critique: CRIT");
    REQUIRE(src != std::string::npos);
    REQUIRE(bad != std::string::npos);
    REQUIRE(crit != std::string::npos);
    CHECK(src < bad);
    CHECK(bad < crit);
}

TEST_CASE("render permits empty arguments") {
    std::string out = llm::render(llm::TemplateId::generate, {"finance", ""});
    CHECK(out.find("finance") != std::string::npos);
}

TEST_CASE("render rejects arity mismatches naming the expectation") {
    try {
        llm::render(llm::TemplateId::regen_rules, {"a", "b"});
        FAIL("expected RenderError");
    } catch (const RenderError& e) {
        std::string msg = e.what();
        CHECK(msg.find("3") != std::string::npos);
        CHECK(msg.find("regen_rules") != std::string::npos);
    }
}

TEST_CASE("slot markers inside arguments are not re-expanded") {
    std::string out = llm::render(llm::TemplateId::answer, {"{1}", "context"});
    CHECK(out.find("Question: {1}") != std::string::npos);
}

TEST_CASE("scripted lookup resolves keys and reports misses") {
    llm::ScriptedFixture fixture = llm::ScriptedFixture::from_json_text(R"({
        "deadbeef00:generate:0": "full-key",
        "*:judge_meta:1": "wildcard",
        "feedface":"ignored-malformed-key"
    })");

    std::string fp = "deadbeef00" + std::string(54, 'a');
    CHECK(llm::scripted_lookup(fixture, fp, llm::TemplateId::generate, 0) ==
          "full-key");
    CHECK(llm::scripted_lookup(fixture, "anything", llm::TemplateId::judge_meta,
                               1) == "wildcard");
    try {
        llm::scripted_lookup(fixture, fp, llm::TemplateId::judge_rules, 2);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        std::string msg = e.what();
        CHECK(msg.find("judge_rules") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
        CHECK(msg.find(fp) != std::string::npos);
    }
}

TEST_CASE("scripted backend counts per-template calls and is deterministic") {
    llm::ScriptedFixture fixture;
    fixture.entries["*:generate:0"] = "first";
    fixture.entries["*:generate:1"] = "second";

    auto run_once = [&]() {
        llm::ScriptedBackend backend(fixture);
        std::vector<llm::Transcript> transcripts;
        backend.set_transcript_sink(
            [&](const llm::Transcript& t) { transcripts.push_back(t); });
        llm::CallContext ctx;
        ctx.section_fingerprint = "fp";
        ctx.template_id = llm::TemplateId::generate;
        std::vector<std::string> responses;
        responses.push_back(backend.complete("p", ctx));
        responses.push_back(backend.complete("p", ctx));
        CHECK(backend.call_count() == 2);
        return std::make_pair(responses, transcripts);
    };

    auto [r1, t1] = run_once();
    auto [r2, t2] = run_once();
    CHECK(r1 == std::vector<std::string>{"first", "second"});
    CHECK(r1 == r2);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(t1[i].request_fingerprint == t2[i].request_fingerprint);
        CHECK(t1[i].response_text == t2[i].response_text);
        CHECK(t1[i].context.attempt_index == t2[i].context.attempt_index);
    }
}

TEST_CASE("scripted backend missing key surfaces as a backend error") {
    llm::ScriptedBackend backend(llm::ScriptedFixture{});
    llm::CallContext ctx;
    ctx.section_fingerprint = "fp";
    ctx.template_id = llm::TemplateId::generate;
    CHECK_THROWS_AS(backend.complete("p", ctx), BackendError);
}

TEST_CASE("backend config bounds are enforced") {
    llm::BackendConfig cfg;
    cfg.base_url = "http://localhost:1";
    cfg.temperature = 2.5;
    CHECK_THROWS_AS(llm::HttpChatBackend{cfg}, ContractError);
    cfg.temperature = 0.1;
    cfg.top_p = 0.0;
    CHECK_THROWS_AS(llm::HttpChatBackend{cfg}, ContractError);
    cfg.top_p = 0.95;
    cfg.max_tokens = 0;
    CHECK_THROWS_AS(llm::HttpChatBackend{cfg}, ContractError);
}

TEST_CASE("http backend against a local echo stub") {
    httplib::Server server;
    server.Post("/v1/chat/completions",
                [](const httplib::Request& req, httplib::Response& res) {
                    auto body = json::parse(req.body);
                    std::string prompt = body["messages"][0]["content"];
                    json reply = {
                        {"choices",
                         {{{"message", {{"role", "assistant"},
                                        {"content", prompt}}}}}},
                        {"usage",
                         {{"prompt_tokens", 3}, {"completion_tokens", 4}}}};
                    res.set_content(reply.dump(), "application/json");
                });

    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&]() { server.listen_after_bind(); });
    server.wait_until_ready();

    llm::BackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.model_name = "echo-model";
    cfg.transport_retries = 1;
    llm::HttpChatBackend backend(cfg);

    std::vector<llm::Transcript> transcripts;
    backend.set_transcript_sink(
        [&](const llm::Transcript& t) { transcripts.push_back(t); });

    llm::CallContext ctx;
    ctx.section_fingerprint = "fp";
    ctx.template_id = llm::TemplateId::generate;

    std::string first = backend.complete("echo me back", ctx);
    std::string second = backend.complete("echo me back", ctx);
    CHECK(first == "echo me back");
    CHECK(second == "echo me back");
    REQUIRE(transcripts.size() == 2);
    CHECK(transcripts[0].request_fingerprint ==
          transcripts[1].request_fingerprint);
    REQUIRE(transcripts[0].token_usage.has_value());
    CHECK(transcripts[0].token_usage->completion_tokens == 4);
    CHECK(backend.call_count() == 2);

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend reports exhausted retries distinctly") {
    llm::BackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:9";  // nothing listens on the discard port
    cfg.model_name = "down";
    cfg.transport_retries = 0;
    cfg.timeout = std::chrono::milliseconds(300);
    llm::HttpChatBackend backend(cfg);
    llm::CallContext ctx;
    CHECK_THROWS_AS(backend.complete("p", ctx), BackendError);
    CHECK(backend.call_count() == 1);
}

TEST_CASE("request fingerprints are stable and input-sensitive") {
    auto a = llm::request_fingerprint(llm::TemplateId::generate, "p", "m");
    auto b = llm::request_fingerprint(llm::TemplateId::generate, "p", "m");
    auto c = llm::request_fingerprint(llm::TemplateId::generate, "p2", "m");
    auto d = llm::request_fingerprint(llm::TemplateId::judge_meta, "p", "m");
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a != d);
}

TEST_CASE("a missing API key records an error transcript before failing") {
    llm::BackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:9";
    cfg.api_key_env = "RULEFORGE_TEST_KEY_THAT_IS_UNSET";
    llm::HttpChatBackend backend(cfg);
    std::vector<llm::Transcript> transcripts;
    backend.set_transcript_sink(
        [&](const llm::Transcript& t) { transcripts.push_back(t); });
    llm::CallContext ctx;
    CHECK_THROWS_AS(backend.complete("p", ctx), BackendError);
    REQUIRE(transcripts.size() == 1);
    CHECK(transcripts[0].error);
    CHECK(transcripts[0].error_message.find("RULEFORGE_TEST_KEY_THAT_IS_UNSET") !=
          std::string::npos);
}
