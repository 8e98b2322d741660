#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace ruleforge::ingest {

enum class DocFormat { markdown, plaintext };
enum class SegmentFallback { single_section, error };

/// A raw input document plus its provenance hash. `doc_hash` is the
/// SHA-256 of the raw input bytes before any cleanup.
struct RawDocument {
    std::string source_path;
    std::string text;
    DocFormat format_tag = DocFormat::markdown;
    std::string doc_hash;

    static RawDocument from_text(std::string text,
                                 DocFormat format = DocFormat::markdown,
                                 std::string source_path = "<memory>");
    static RawDocument from_file(const std::string& path);
};

/// Cleaned document text. Invariants: no NBSP characters, no trailing
/// whitespace on any line, no run of three or more consecutive newlines.
struct NormalizedDoc {
    std::string text;
    std::string source_hash;
    std::vector<std::string> cleanup_log;

    /// Re-wraps the normalized text as a RawDocument (idempotence checks).
    RawDocument as_raw() const;
};

struct DocMeta {
    std::string title;
    std::string version;
    std::string effective_date;
    std::string preamble;  // text before the first section delimiter
};

/// One delimiter-bounded section. `span` is a half-open character
/// interval into the NormalizedDoc text and `content` equals that slice.
struct SectionDoc {
    std::string section_id;
    std::string heading;
    std::string content;
    std::size_t span_begin = 0;
    std::size_t span_end = 0;
    std::string fingerprint;
    std::size_t ordinal = 0;
    DocMeta doc_meta;
};

/// Delimiter configuration. Patterns are ECMAScript regexes matched at
/// the start of a line (after optional heading markers); the first
/// capture group, when present, supplies the section identifier.
struct SegmentationRules {
    std::vector<std::string> delimiter_patterns;
    std::vector<int> heading_levels{1, 2, 3};
    SegmentFallback fallback = SegmentFallback::single_section;

    static SegmentationRules defaults();
};

/// SHA-256 of the UTF-8 content bytes, 64-char lowercase hex.
std::string fingerprint(std::string_view content);

/// Cleans formatting artifacts; idempotent. Throws IngestError on
/// invalid UTF-8, naming the byte offset.
NormalizedDoc normalize(const RawDocument& doc);

/// Splits a normalized document on regulatory section delimiters.
/// Text before the first delimiter becomes preamble metadata.
std::vector<SectionDoc> segment(const NormalizedDoc& doc,
                                const SegmentationRules& rules);

/// sections.jsonl encoding (one SectionDoc per line).
std::string section_to_jsonl(const SectionDoc& s);
SectionDoc section_from_jsonl(const std::string& line);

}  // namespace ruleforge::ingest
