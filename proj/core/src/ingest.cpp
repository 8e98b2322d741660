#include "ruleforge/ingest.hpp"

#include <algorithm>
#include <regex>

#include <json.hpp>

#include "ruleforge/sha256.hpp"
#include "ruleforge/util.hpp"

namespace ruleforge::ingest {

using nlohmann::ordered_json;

RawDocument RawDocument::from_text(std::string text, DocFormat format,
                                   std::string source_path) {
    RawDocument doc;
    doc.text = std::move(text);
    doc.format_tag = format;
    doc.source_path = std::move(source_path);
    doc.doc_hash = sha256_hex(doc.text);
    return doc;
}

RawDocument RawDocument::from_file(const std::string& path) {
    DocFormat fmt = DocFormat::plaintext;
    if (path.size() >= 3 && path.substr(path.size() - 3) == ".md") {
        fmt = DocFormat::markdown;
    }
    return from_text(util::read_file(path), fmt, path);
}

RawDocument NormalizedDoc::as_raw() const {
    return RawDocument::from_text(text);
}

std::string fingerprint(std::string_view content) {
    return sha256_hex(content);
}

namespace {

// Cleanup passes. Each returns true when it changed anything; the
// canonical log order is fixed regardless of execution order.
bool strip_bom(std::string& text) {
    if (util::starts_with(text, "\xEF\xBB\xBF")) {
        text.erase(0, 3);
        return true;
    }
    return false;
}

bool normalize_line_endings(std::string& text) {
    if (text.find('\r') == std::string::npos) return false;
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            out.push_back('\n');
        } else {
            out.push_back(text[i]);
        }
    }
    text = std::move(out);
    return true;
}

bool replace_nbsp(std::string& text) {
    bool changed = false;
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c == 0xC2 && i + 1 < text.size() &&
            static_cast<unsigned char>(text[i + 1]) == 0xA0) {
            out.push_back(' ');
            ++i;
            changed = true;
        } else {
            out.push_back(text[i]);
        }
    }
    if (changed) text = std::move(out);
    return changed;
}

bool strip_trailing_ws(std::string& text) {
    bool changed = false;
    std::string out;
    out.reserve(text.size());
    std::size_t line_start = 0;
    auto flush = [&](std::size_t end) {
        std::size_t e = end;
        while (e > line_start && (text[e - 1] == ' ' || text[e - 1] == '\t')) --e;
        if (e != end) changed = true;
        out.append(text, line_start, e - line_start);
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\n') {
            flush(i);
            out.push_back('\n');
            line_start = i + 1;
        }
    }
    flush(text.size());
    if (changed) text = std::move(out);
    return changed;
}

bool collapse_blank_runs(std::string& text) {
    bool changed = false;
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '\n') {
            std::size_t j = i;
            while (j < text.size() && text[j] == '\n') ++j;
            std::size_t run = j - i;
            std::size_t keep = std::min<std::size_t>(run, 2);
            out.append(keep, '\n');
            if (keep != run) changed = true;
            i = j;
        } else {
            out.push_back(text[i]);
            ++i;
        }
    }
    if (changed) text = std::move(out);
    return changed;
}

}  // namespace

NormalizedDoc normalize(const RawDocument& doc) {
    if (auto bad = util::find_invalid_utf8(doc.text)) {
        throw IngestError("invalid UTF-8 at byte offset " + std::to_string(*bad) +
                          " in " + doc.source_path);
    }

    NormalizedDoc out;
    out.source_hash = doc.doc_hash;
    out.text = doc.text;

    bool bom = strip_bom(out.text);
    bool eol = normalize_line_endings(out.text);
    bool nbsp = replace_nbsp(out.text);
    bool trailing = strip_trailing_ws(out.text);
    bool blank = collapse_blank_runs(out.text);

    if (bom) out.cleanup_log.emplace_back("bom");
    if (eol) out.cleanup_log.emplace_back("line_endings");
    if (trailing) out.cleanup_log.emplace_back("trailing_ws");
    if (nbsp) out.cleanup_log.emplace_back("nbsp");
    if (blank) out.cleanup_log.emplace_back("blank_collapse");
    return out;
}

SegmentationRules SegmentationRules::defaults() {
    SegmentationRules rules;
    rules.delimiter_patterns = {
        R"(§\s*([0-9A-Za-z][0-9A-Za-z.\-]*))",
        R"(Article\s+([0-9IVXLCDMivxlcdm]+[a-z]?)\b)",
        R"(Rule\s+([0-9A-Za-z][0-9A-Za-z.\-]*))",
    };
    rules.heading_levels = {1, 2, 3};
    rules.fallback = SegmentFallback::single_section;
    return rules;
}

namespace {

struct LineView {
    std::size_t begin;  // offset of first char
    std::size_t end;    // offset one past last char (excl. newline)
};

std::vector<LineView> line_views(const std::string& text) {
    std::vector<LineView> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            lines.push_back({start, i});
            start = i + 1;
        }
    }
    return lines;
}

// Number of leading '#' on a heading line; 0 when not a heading.
int heading_level(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && line[i] == '#') ++i;
    if (i == 0 || i > 6) return 0;
    if (i < line.size() && line[i] != ' ') return 0;
    return static_cast<int>(i);
}

struct DelimiterHit {
    std::size_t line_index;
    std::string section_id;
    std::string heading;
};

}  // namespace

std::vector<SectionDoc> segment(const NormalizedDoc& doc,
                                const SegmentationRules& rules) {
    if (rules.delimiter_patterns.empty()) {
        throw IngestError("segmentation rules need at least one delimiter pattern");
    }
    std::vector<SectionDoc> sections;
    if (doc.text.empty()) return sections;

    std::vector<std::regex> patterns;
    patterns.reserve(rules.delimiter_patterns.size());
    for (const auto& p : rules.delimiter_patterns) {
        try {
            patterns.emplace_back(p, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw IngestError("bad delimiter pattern '" + p + "': " + e.what());
        }
    }

    const auto lines = line_views(doc.text);
    std::vector<DelimiterHit> hits;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        std::string_view line(doc.text.data() + lines[li].begin,
                              lines[li].end - lines[li].begin);
        int level = heading_level(line);
        std::string_view body = line;
        if (level > 0) {
            if (std::find(rules.heading_levels.begin(), rules.heading_levels.end(),
                          level) == rules.heading_levels.end()) {
                continue;  // heading at a depth we do not treat as a section start
            }
            body = line.substr(static_cast<std::size_t>(level));
        }
        while (!body.empty() && (body.front() == ' ' || body.front() == '\t')) {
            body.remove_prefix(1);
        }
        std::string body_str(body);
        for (const auto& re : patterns) {
            std::smatch m;
            bool matched = level > 0
                               ? std::regex_search(body_str, m, re)
                               : (std::regex_search(body_str, m, re) &&
                                  m.position(0) == 0);
            if (!matched) continue;
            DelimiterHit hit;
            hit.line_index = li;
            if (m.size() > 1 && m[1].matched) hit.section_id = m[1].str();
            hit.heading = util::trim(body_str);
            hits.push_back(std::move(hit));
            break;
        }
    }

    DocMeta meta;
    auto fill_meta_from_preamble = [&](std::size_t preamble_end) {
        meta.preamble = doc.text.substr(0, preamble_end);
        for (const auto& raw : util::split(meta.preamble, '\n')) {
            std::string t = util::trim(raw);
            if (t.empty()) continue;
            int lvl = heading_level(t);
            if (lvl > 0) {
                t = util::trim(t.substr(static_cast<std::size_t>(lvl)));
            }
            meta.title = t;
            break;
        }
    };

    if (hits.empty()) {
        if (rules.fallback == SegmentFallback::error) {
            throw IngestError("no section delimiter matched and fallback=error");
        }
        SectionDoc s;
        s.section_id = "FULL-DOC";
        s.heading = "";
        s.span_begin = 0;
        s.span_end = doc.text.size();
        s.content = doc.text;
        s.fingerprint = fingerprint(s.content);
        s.ordinal = 0;
        fill_meta_from_preamble(0);
        s.doc_meta = meta;
        sections.push_back(std::move(s));
        return sections;
    }

    fill_meta_from_preamble(lines[hits.front().line_index].begin);

    for (std::size_t h = 0; h < hits.size(); ++h) {
        SectionDoc s;
        s.span_begin = lines[hits[h].line_index].begin;
        s.span_end = (h + 1 < hits.size()) ? lines[hits[h + 1].line_index].begin
                                           : doc.text.size();
        s.content = doc.text.substr(s.span_begin, s.span_end - s.span_begin);
        s.heading = hits[h].heading;
        s.ordinal = h;
        s.section_id = hits[h].section_id.empty()
                           ? "SEC-" + std::to_string(h)
                           : hits[h].section_id;
        s.fingerprint = fingerprint(s.content);
        s.doc_meta = meta;
        sections.push_back(std::move(s));
    }
    return sections;
}

std::string section_to_jsonl(const SectionDoc& s) {
    ordered_json j;
    j["section_id"] = s.section_id;
    j["heading"] = s.heading;
    j["content"] = s.content;
    j["span"] = {s.span_begin, s.span_end};
    j["fingerprint"] = s.fingerprint;
    j["ordinal"] = s.ordinal;
    j["doc_meta"] = {{"title", s.doc_meta.title},
                     {"version", s.doc_meta.version},
                     {"effective_date", s.doc_meta.effective_date}};
    return j.dump();
}

SectionDoc section_from_jsonl(const std::string& line) {
    auto j = nlohmann::json::parse(line);
    SectionDoc s;
    s.section_id = j.at("section_id").get<std::string>();
    s.heading = j.at("heading").get<std::string>();
    s.content = j.at("content").get<std::string>();
    s.span_begin = j.at("span").at(0).get<std::size_t>();
    s.span_end = j.at("span").at(1).get<std::size_t>();
    s.fingerprint = j.at("fingerprint").get<std::string>();
    s.ordinal = j.at("ordinal").get<std::size_t>();
    if (j.contains("doc_meta")) {
        s.doc_meta.title = j["doc_meta"].value("title", "");
        s.doc_meta.version = j["doc_meta"].value("version", "");
        s.doc_meta.effective_date = j["doc_meta"].value("effective_date", "");
    }
    return s;
}

}  // namespace ruleforge::ingest
