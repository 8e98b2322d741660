#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "ruleforge/ingest.hpp"
#include "ruleforge/sha256.hpp"
#include "ruleforge/util.hpp"

using namespace ruleforge;
using ingest::RawDocument;
using ingest::SegmentationRules;

TEST_CASE("sha256 matches the standard test vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    // Determinism across calls.
    CHECK(ingest::fingerprint("xyz") == ingest::fingerprint("xyz"));
}

TEST_CASE("normalize collapses blank runs") {
    auto doc = RawDocument::from_text("A\n\n\n\nB");
    auto out = ingest::normalize(doc);
    CHECK(out.text == "A\n\nB");
    CHECK(out.cleanup_log == std::vector<std::string>{"blank_collapse"});
}

TEST_CASE("normalize on empty input is a no-op") {
    auto out = ingest::normalize(RawDocument::from_text(""));
    CHECK(out.text.empty());
    CHECK(out.cleanup_log.empty());
}

TEST_CASE("normalize removes trailing whitespace, NBSP, and blank runs") {
    std::string nbsp = "\xC2\xA0";
    std::string text = "Line one   \nLine" + nbsp + "two\n\n\n\n\nLine three\n";
    auto out = ingest::normalize(RawDocument::from_text(text));
    // Hand-applying the three rules to the fixture:
    CHECK(out.text == "Line one\nLine two\n\nLine three\n");
    CHECK(out.cleanup_log ==
          std::vector<std::string>{"trailing_ws", "nbsp", "blank_collapse"});
}

TEST_CASE("normalize is idempotent") {
    std::vector<std::string> inputs = {
        "A\n\n\n\nB",
        "x  \ny\t\n\n\n\nz",
        "plain text with no artifacts\n",
        "\xC2\xA0leading nbsp\n\n\n\nmore",
    };
    for (const auto& input : inputs) {
        auto once = ingest::normalize(RawDocument::from_text(input));
        auto twice = ingest::normalize(once.as_raw());
        CHECK(twice.text == once.text);
        CHECK(twice.cleanup_log.empty());
    }
}

TEST_CASE("normalize rejects invalid UTF-8 naming the offset") {
    std::string bad = "ok\xFFnope";
    try {
        ingest::normalize(RawDocument::from_text(bad));
        FAIL("expected IngestError");
    } catch (const IngestError& e) {
        CHECK(std::string(e.what()).find("offset 2") != std::string::npos);
    }
}

TEST_CASE("segment splits on section headings and extracts identifiers") {
    std::string text =
        "Preamble text that is not a section.\n\n"
        "## § 164.306 Security standards\n\nBody one.\n\n"
        "## § 164.308 Administrative safeguards\n\nBody two.\n";
    auto doc = ingest::normalize(RawDocument::from_text(text));
    auto sections = ingest::segment(doc, SegmentationRules::defaults());

    REQUIRE(sections.size() == 2);
    CHECK(sections[0].section_id == "164.306");
    CHECK(sections[1].section_id == "164.308");
    CHECK(sections[0].ordinal == 0);
    CHECK(sections[1].ordinal == 1);
    // Preamble is metadata, not a section.
    CHECK(sections[0].doc_meta.preamble.find("Preamble text") !=
          std::string::npos);

    // Spans reconstruct their substrings and tile the post-preamble text.
    for (const auto& s : sections) {
        CHECK(doc.text.substr(s.span_begin, s.span_end - s.span_begin) ==
              s.content);
        CHECK(s.fingerprint == ingest::fingerprint(s.content));
    }
    CHECK(sections[0].span_end == sections[1].span_begin);
    CHECK(sections[1].span_end == doc.text.size());
}

TEST_CASE("segment on an empty document yields no sections") {
    auto doc = ingest::normalize(RawDocument::from_text(""));
    auto rules = SegmentationRules::defaults();
    rules.fallback = ingest::SegmentFallback::error;  // irrelevant when empty
    CHECK(ingest::segment(doc, rules).empty());
}

TEST_CASE("segment fallback behavior with no delimiter matches") {
    auto doc = ingest::normalize(
        RawDocument::from_text("Just some text without section markers.\n"));

    auto rules = SegmentationRules::defaults();
    rules.fallback = ingest::SegmentFallback::single_section;
    auto sections = ingest::segment(doc, rules);
    REQUIRE(sections.size() == 1);
    CHECK(sections[0].section_id == "FULL-DOC");
    CHECK(sections[0].content == doc.text);

    rules.fallback = ingest::SegmentFallback::error;
    CHECK_THROWS_AS(ingest::segment(doc, rules), IngestError);
}

TEST_CASE("mid-line cross-references do not start sections") {
    std::string text =
        "## § 10.1 First\n\nSee the definition in § 10.9 for details.\n\n"
        "## Rule 12b-1 Second\n\nAs provided under Article IV of the charter.\n";
    auto doc = ingest::normalize(RawDocument::from_text(text));
    auto sections = ingest::segment(doc, SegmentationRules::defaults());
    REQUIRE(sections.size() == 2);
    CHECK(sections[0].section_id == "10.1");
    CHECK(sections[1].section_id == "12b-1");
}

TEST_CASE("Article and Rule delimiters at line starts") {
    std::string text =
        "Article 5 Prohibited practices\nBody A.\n"
        "Rule 206-4 Advertising\nBody B.\n";
    auto doc = ingest::normalize(RawDocument::from_text(text));
    auto sections = ingest::segment(doc, SegmentationRules::defaults());
    REQUIRE(sections.size() == 2);
    CHECK(sections[0].section_id == "5");
    CHECK(sections[1].section_id == "206-4");
}

TEST_CASE("segmentation property: counts, spans, fingerprints over a corpus") {
    std::mt19937 rng(20240717);
    for (int trial = 0; trial < 20; ++trial) {
        int n_sections = 1 + static_cast<int>(rng() % 7);
        std::string text = "Document preamble line.\n\n";
        std::vector<std::string> ids;
        for (int s = 0; s < n_sections; ++s) {
            std::string id =
                std::to_string(100 + trial) + "." + std::to_string(s + 1);
            ids.push_back(id);
            text += "## § " + id + " Heading " + std::to_string(s) + "\n\n";
            int lines = 1 + static_cast<int>(rng() % 4);
            for (int l = 0; l < lines; ++l) {
                text += "Body line " + std::to_string(rng() % 1000) + ".\n";
            }
            text += "\n";
        }
        auto doc = ingest::normalize(RawDocument::from_text(text));
        auto sections = ingest::segment(doc, SegmentationRules::defaults());

        REQUIRE(sections.size() == static_cast<std::size_t>(n_sections));
        std::size_t prev_end = 0;
        for (std::size_t i = 0; i < sections.size(); ++i) {
            const auto& s = sections[i];
            CHECK(s.section_id == ids[i]);
            CHECK(s.ordinal == i);
            if (i > 0) CHECK(s.span_begin == prev_end);
            CHECK(s.span_begin < s.span_end);
            prev_end = s.span_end;
            CHECK(doc.text.substr(s.span_begin, s.span_end - s.span_begin) ==
                  s.content);
            CHECK(s.fingerprint == ingest::fingerprint(s.content));
            CHECK(s.fingerprint.size() == 64);
        }

        // Deterministic given (doc, rules).
        auto again = ingest::segment(doc, SegmentationRules::defaults());
        REQUIRE(again.size() == sections.size());
        for (std::size_t i = 0; i < sections.size(); ++i) {
            CHECK(again[i].fingerprint == sections[i].fingerprint);
            CHECK(again[i].span_begin == sections[i].span_begin);
        }
    }
}

TEST_CASE("fingerprints differ across distinct fixture contents") {
    std::vector<std::string> contents = {"a", "b", "ab", "ba", "", " a", "a "};
    for (std::size_t i = 0; i < contents.size(); ++i) {
        for (std::size_t j = i + 1; j < contents.size(); ++j) {
            CHECK(ingest::fingerprint(contents[i]) !=
                  ingest::fingerprint(contents[j]));
        }
    }
}

TEST_CASE("section jsonl round-trips") {
    auto s = testutil::make_section("## § 9.9 X\nbody\n", "9.9", 3);
    s.doc_meta.title = "Title";
    auto line = ingest::section_to_jsonl(s);
    auto back = ingest::section_from_jsonl(line);
    CHECK(back.section_id == s.section_id);
    CHECK(back.content == s.content);
    CHECK(back.fingerprint == s.fingerprint);
    CHECK(back.ordinal == s.ordinal);
    CHECK(back.span_begin == s.span_begin);
    CHECK(back.span_end == s.span_end);
    CHECK(back.doc_meta.title == "Title");
}

TEST_CASE("sections without an identifier token fall back to SEC-<ordinal>") {
    ingest::SegmentationRules rules;
    rules.delimiter_patterns = {R"(PART\b)"};  // no capture group
    rules.fallback = ingest::SegmentFallback::error;
    auto doc = ingest::normalize(
        RawDocument::from_text("PART ONE\nBody.\nPART TWO\nMore.\n"));
    auto sections = ingest::segment(doc, rules);
    REQUIRE(sections.size() == 2);
    CHECK(sections[0].section_id == "SEC-0");
    CHECK(sections[1].section_id == "SEC-1");
}

TEST_CASE("normalize idempotence holds under randomized artifacts") {
    std::mt19937 rng(987654);
    const std::vector<std::string> pieces = {
        "word", "  ", "\t", "\n", "\n\n\n", "\xC2\xA0", "line text", "\r\n",
        "§ 1.2", "end.  ", "\n\n\n\n\n", "mixed\xC2\xA0 ws \t"};
    for (int trial = 0; trial < 50; ++trial) {
        std::string input;
        int parts = 1 + static_cast<int>(rng() % 30);
        for (int p = 0; p < parts; ++p) {
            input += pieces[rng() % pieces.size()];
        }
        auto once = ingest::normalize(RawDocument::from_text(input));
        auto twice = ingest::normalize(once.as_raw());
        CHECK(twice.text == once.text);
        CHECK(twice.cleanup_log.empty());
        // Invariants: no NBSP, no trailing ws, no 3+ newline runs.
        CHECK(once.text.find("\xC2\xA0") == std::string::npos);
        CHECK(once.text.find("\n\n\n") == std::string::npos);
        for (const auto& line : util::split(once.text, '\n')) {
            if (!line.empty()) {
                CHECK(line.back() != ' ');
                CHECK(line.back() != '\t');
            }
        }
    }
}

TEST_CASE("CRLF input is normalized to LF with a logged transformation") {
    auto out = ingest::normalize(RawDocument::from_text("a\r\nb\r\nc"));
    CHECK(out.text == "a\nb\nc");
    CHECK(out.cleanup_log == std::vector<std::string>{"line_endings"});
}
