#include "ruleforge/ragbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include <httplib.h>
#include <json.hpp>

#include "ruleforge/util.hpp"

namespace ruleforge::bench {

using nlohmann::json;

void BenchConfig::check() const {
    if (retrieval_depths.empty()) {
        throw ContractError("at least one retrieval depth is required");
    }
    for (int k : retrieval_depths) {
        if (k < 1) throw ContractError("retrieval depths must be positive");
    }
    if (questions_per_section < 1) {
        throw ContractError("questions_per_section must be positive");
    }
}

// ---------------------------------------------------------------------------
// Fallback embedding
// ---------------------------------------------------------------------------

std::vector<std::string> tokenize_lower_alnum(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::size_t fnv1a_bucket(const std::string& token, int buckets) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : token) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return static_cast<std::size_t>(hash % static_cast<std::uint64_t>(buckets));
}

HashedTfidfEmbedding::HashedTfidfEmbedding(int buckets) : buckets_(buckets) {
    if (buckets_ < 1) throw ContractError("bucket count must be positive");
    idf_.assign(static_cast<std::size_t>(buckets_), 1.0);
}

std::string HashedTfidfEmbedding::tag() const {
    return "hashed-tfidf-" + std::to_string(buckets_);
}

void HashedTfidfEmbedding::fit(const std::vector<std::string>& corpus) {
    std::vector<std::size_t> df(static_cast<std::size_t>(buckets_), 0);
    for (const auto& text : corpus) {
        std::set<std::size_t> seen;
        for (const auto& token : tokenize_lower_alnum(text)) {
            seen.insert(fnv1a_bucket(token, buckets_));
        }
        for (std::size_t b : seen) ++df[b];
    }
    const double n = static_cast<double>(corpus.size());
    idf_.resize(static_cast<std::size_t>(buckets_));
    for (std::size_t b = 0; b < idf_.size(); ++b) {
        idf_[b] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[b]))) + 1.0;
    }
    fitted_ = true;
}

std::vector<std::vector<double>> HashedTfidfEmbedding::embed(
    const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> vec(static_cast<std::size_t>(buckets_), 0.0);
        for (const auto& token : tokenize_lower_alnum(text)) {
            vec[fnv1a_bucket(token, buckets_)] += 1.0;  // raw term frequency
        }
        double norm_sq = 0.0;
        for (std::size_t b = 0; b < vec.size(); ++b) {
            vec[b] *= idf_[b];
            norm_sq += vec[b] * vec[b];
        }
        if (norm_sq > 0.0) {
            double inv = 1.0 / std::sqrt(norm_sq);
            for (double& v : vec) v *= inv;
        }
        out.push_back(std::move(vec));
    }
    return out;
}

std::vector<std::vector<double>> embed_fallback(
    const std::vector<std::string>& texts) {
    HashedTfidfEmbedding provider;
    provider.fit(texts);
    return provider.embed(texts);
}

struct HttpEmbeddingProvider::Impl {
    std::unique_ptr<httplib::Client> client;
};

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url,
                                             std::string model,
                                             std::string api_key_env)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      api_key_env_(std::move(api_key_env)),
      impl_(std::make_unique<Impl>()) {
    impl_->client = std::make_unique<httplib::Client>(base_url_);
    impl_->client->set_read_timeout(60, 0);
}

HttpEmbeddingProvider::~HttpEmbeddingProvider() = default;

std::string HttpEmbeddingProvider::tag() const {
    return "http:" + model_;
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
    json body;
    body["model"] = model_;
    body["input"] = texts;

    httplib::Headers headers = {{"Content-Type", "application/json"}};
    if (!api_key_env_.empty()) {
        const char* key = std::getenv(api_key_env_.c_str());
        if (!key) {
            throw BackendError("API key environment variable '" + api_key_env_ +
                               "' is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = impl_->client->Post("/v1/embeddings", headers, body.dump(),
                                   "application/json");
    if (!res || res->status < 200 || res->status >= 300) {
        throw BackendError("embedding request failed: " +
                           (res ? "HTTP " + std::to_string(res->status)
                                : httplib::to_string(res.error())));
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("data") ||
        !parsed["data"].is_array()) {
        throw BackendError("malformed embedding response body");
    }
    std::vector<std::vector<double>> out(texts.size());
    for (const auto& item : parsed["data"]) {
        std::size_t idx = item.value("index", out.size());
        if (idx >= out.size() || !item.contains("embedding")) {
            throw BackendError("embedding response index out of range");
        }
        out[idx] = item["embedding"].get<std::vector<double>>();
        if (dimension_ == 0) dimension_ = static_cast<int>(out[idx].size());
        if (static_cast<int>(out[idx].size()) != dimension_) {
            throw BackendError("embedding dimension changed mid-session");
        }
    }
    for (const auto& vec : out) {
        for (double v : vec) {
            if (!std::isfinite(v)) {
                throw BackendError("embedding contains a non-finite value");
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rule serialization and indexing
// ---------------------------------------------------------------------------

RuleDocText serialize_rule(const schema::RuleUnit& r,
                           const std::string& provenance) {
    std::string text = r.label;
    auto add = [&](const char* tag, const std::string& value) {
        if (value.empty()) return;
        text += "\n";
        text += tag;
        text += ": ";
        text += value;
    };
    add("action", r.statement.action);
    if (r.statement.action_object) add("object", *r.statement.action_object);
    if (r.statement.method) add("method", *r.statement.method);
    if (r.statement.conditions && !r.statement.conditions->empty()) {
        std::string triggers;
        for (const auto& c : *r.statement.conditions) {
            if (!triggers.empty()) triggers += "; ";
            triggers += c.trigger;
        }
        add("conditions", triggers);
    }
    if (r.statement.constraints && !r.statement.constraints->empty()) {
        std::string constraints;
        for (const auto& c : *r.statement.constraints) {
            if (!constraints.empty()) constraints += "; ";
            constraints += c.text;
        }
        add("constraints", constraints);
    }
    if (r.statement.exceptions && !r.statement.exceptions->empty()) {
        std::string exceptions;
        for (const auto& x : *r.statement.exceptions) {
            if (!exceptions.empty()) exceptions += "; ";
            exceptions += x.text;
        }
        add("exceptions", exceptions);
    }
    add("verbatim", r.statement.verbatim);

    RuleDocText doc;
    doc.rule_id = r.rule_id;
    doc.rendered_text = std::move(text);
    doc.provenance = provenance;
    return doc;
}

RuleIndex build_index(const std::vector<RuleDocText>& docs,
                      std::shared_ptr<EmbeddingProvider> provider) {
    if (docs.empty()) {
        throw ContractError("cannot build an index over an empty rule set");
    }
    std::vector<std::string> corpus;
    corpus.reserve(docs.size());
    for (const auto& d : docs) corpus.push_back(d.rendered_text);
    provider->fit(corpus);

    auto vectors = provider->embed(corpus);
    if (vectors.size() != docs.size()) {
        throw ContractError("embedding provider returned a short batch");
    }

    RuleIndex index;
    index.provider_tag = provider->tag();
    index.dimension = provider->dimension();
    index.provider = std::move(provider);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (static_cast<int>(vectors[i].size()) != index.dimension) {
            throw ContractError("embedding dimension mismatch at entry " +
                                std::to_string(i));
        }
        // Normalize defensively; zero vectors are stored as-is.
        double norm_sq = 0.0;
        for (double v : vectors[i]) norm_sq += v * v;
        if (norm_sq > 0.0) {
            double inv = 1.0 / std::sqrt(norm_sq);
            for (double& v : vectors[i]) v *= inv;
        }
        index.entries.push_back({docs[i], std::move(vectors[i])});
    }
    return index;
}

RuleIndex build_index(const std::vector<store::RuleSetEntry>& rules,
                      std::shared_ptr<EmbeddingProvider> provider) {
    std::vector<RuleDocText> docs;
    docs.reserve(rules.size());
    for (const auto& entry : rules) {
        docs.push_back(serialize_rule(entry.rule, entry.section_fingerprint));
    }
    return build_index(docs, std::move(provider));
}

std::vector<std::pair<RuleDocText, double>> retrieve(const RuleIndex& index,
                                                     const std::string& query,
                                                     int k) {
    if (k < 1) throw ContractError("retrieval depth k must be >= 1");
    if (!index.provider) throw ContractError("index has no embedding provider");

    auto qvecs = index.provider->embed({query});
    const auto& qvec = qvecs.at(0);

    struct Scored {
        double score;
        std::size_t entry;
    };
    std::vector<Scored> scored;
    scored.reserve(index.entries.size());
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
        const auto& vec = index.entries[i].vec;
        double dot = 0.0;
        for (std::size_t d = 0; d < vec.size(); ++d) dot += vec[d] * qvec[d];
        scored.push_back({dot, i});
    }
    std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        const auto& ra = index.entries[a.entry].doc.rule_id;
        const auto& rb = index.entries[b.entry].doc.rule_id;
        if (ra != rb) return ra < rb;
        return a.entry < b.entry;
    });

    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k),
                                             scored.size());
    std::vector<std::pair<RuleDocText, double>> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.emplace_back(index.entries[scored[i].entry].doc, scored[i].score);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Question generation and answering
// ---------------------------------------------------------------------------

std::vector<QaItem> generate_questions(
    const std::vector<ingest::SectionDoc>& sections, int n_per_section,
    llm::ChatBackend& backend, std::vector<std::string>* warnings) {
    std::vector<QaItem> items;
    for (const auto& section : sections) {
        llm::CallContext ctx;
        ctx.section_fingerprint = section.fingerprint;
        ctx.template_id = llm::TemplateId::gen_questions;
        ctx.stage = "gen_questions";

        std::string count = std::to_string(n_per_section);
        std::string prompt = llm::render(llm::TemplateId::gen_questions,
                                         {count, count, section.content});
        std::string response = backend.complete(prompt, ctx);

        std::string payload = schema::extract_json_payload(response);
        json j = json::parse(payload, nullptr, false);
        if (j.is_discarded() || !j.is_array()) {
            if (warnings) {
                warnings->push_back("section " + section.section_id +
                                    ": question list did not parse, skipping");
            }
            continue;
        }
        int produced = 0;
        for (const auto& entry : j) {
            if (!entry.is_string() || entry.get<std::string>().empty()) {
                if (warnings) {
                    warnings->push_back("section " + section.section_id +
                                        ": dropped a malformed question entry");
                }
                continue;
            }
            QaItem item;
            item.id = section.fingerprint.substr(0, 12) + "-q" +
                      std::to_string(produced);
            item.question = entry.get<std::string>();
            item.source_section = section.fingerprint;
            items.push_back(std::move(item));
            ++produced;
        }
        if (produced < n_per_section && warnings) {
            warnings->push_back("section " + section.section_id + ": got " +
                                std::to_string(produced) + " of " + count +
                                " requested questions");
        }
    }
    return items;
}

AnswerRecord answer_question(const QaItem& q, const RuleIndex& index, int k,
                             llm::ChatBackend& backend) {
    if (index.entries.empty()) {
        throw ContractError("cannot answer against an empty index");
    }
    auto retrieved = retrieve(index, q.question, k);

    std::string context;
    AnswerRecord record;
    record.question_id = q.id;
    record.question = q.question;
    record.k = k;
    for (std::size_t i = 0; i < retrieved.size(); ++i) {
        context += std::to_string(i + 1) + ". " + retrieved[i].first.rendered_text +
                   "\n";
        record.retrieved_rule_ids.push_back(retrieved[i].first.rule_id);
    }

    llm::CallContext ctx;
    ctx.section_fingerprint = q.id;
    ctx.template_id = llm::TemplateId::answer;
    ctx.stage = "answer";

    std::string prompt = llm::render(llm::TemplateId::answer, {q.question, context});
    try {
        record.answer = backend.complete(prompt, ctx);
    } catch (const BackendError& e) {
        record.failed = true;
        record.error = e.what();
    }
    return record;
}

// ---------------------------------------------------------------------------
// Pairwise judging
// ---------------------------------------------------------------------------

const std::vector<std::string>& pairwise_criteria() {
    static const std::vector<std::string> names = {
        "Completeness",       "Factual Grounding",   "Handling Ambiguity",
        "Practical Actionability", "Regulatory Precision", "Overall Preference"};
    return names;
}

namespace {

// Parses a position-keyed verdict ("A" = first presented answer) into
// system terms given the presentation order.
bool parse_verdict(const std::string& response, Ordering ordering,
                   std::vector<std::pair<std::string, Winner>>& out) {
    std::string payload = schema::extract_json_payload(response);
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return false;

    std::vector<std::pair<std::string, std::string>> folded;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_string()) return false;
        folded.emplace_back(util::fold_key(it.key()),
                            util::fold_key(it.value().get<std::string>()));
    }

    out.clear();
    for (const auto& name : pairwise_criteria()) {
        std::string want = util::fold_key(name);
        const std::string* verdict = nullptr;
        for (const auto& [key, value] : folded) {
            if (key == want || util::starts_with(want, key) ||
                util::starts_with(key, want)) {
                verdict = &value;
                break;
            }
        }
        if (!verdict) return false;

        Winner positional;
        if (*verdict == "a" || *verdict == "first" || *verdict == "answera") {
            positional = Winner::A;
        } else if (*verdict == "b" || *verdict == "second" ||
                   *verdict == "answerb") {
            positional = Winner::B;
        } else if (*verdict == "tie" || *verdict == "equal" ||
                   *verdict == "draw") {
            positional = Winner::tie;
        } else {
            return false;
        }

        Winner system = positional;
        if (ordering == Ordering::BA) {  // first presented = system B
            if (positional == Winner::A) system = Winner::B;
            else if (positional == Winner::B) system = Winner::A;
        }
        out.emplace_back(name, system);
    }
    return true;
}

PairVerdict all_tie_verdict(const std::string& question_id, Ordering ordering,
                            int depth) {
    PairVerdict v;
    v.question_id = question_id;
    v.ordering = ordering;
    v.depth = depth;
    for (const auto& name : pairwise_criteria()) {
        v.winners.emplace_back(name, Winner::tie);
    }
    return v;
}

PairVerdict judge_single_ordering(const QaItem& q, const std::string& first,
                                  const std::string& second, Ordering ordering,
                                  llm::ChatBackend& backend, int depth,
                                  std::vector<std::string>* warnings) {
    llm::CallContext ctx;
    ctx.section_fingerprint = q.id;
    ctx.template_id = llm::TemplateId::pairwise_judge;
    ctx.stage = ordering == Ordering::AB ? "pairwise_ab" : "pairwise_ba";

    std::string prompt =
        llm::render(llm::TemplateId::pairwise_judge, {q.question, first, second});

    PairVerdict verdict;
    verdict.question_id = q.id;
    verdict.ordering = ordering;
    verdict.depth = depth;

    std::string response = backend.complete(prompt, ctx);
    if (parse_verdict(response, ordering, verdict.winners)) return verdict;

    // One re-ask, then fall back to all-tie with a warning.
    response = backend.complete(prompt, ctx);
    if (parse_verdict(response, ordering, verdict.winners)) return verdict;

    if (warnings) {
        warnings->push_back("pair " + q.id + " (" +
                            (ordering == Ordering::AB ? "AB" : "BA") +
                            "): verdict unparseable twice, recorded as all-tie");
    }
    return all_tie_verdict(q.id, ordering, depth);
}

}  // namespace

std::pair<PairVerdict, PairVerdict> pairwise_judge(
    const QaItem& q, const std::string& answer_a, const std::string& answer_b,
    llm::ChatBackend& backend, int depth, std::vector<std::string>* warnings) {
    PairVerdict ab = judge_single_ordering(q, answer_a, answer_b, Ordering::AB,
                                           backend, depth, warnings);
    PairVerdict ba = judge_single_ordering(q, answer_b, answer_a, Ordering::BA,
                                           backend, depth, warnings);
    return {std::move(ab), std::move(ba)};
}

// ---------------------------------------------------------------------------
// Win-rate aggregation
// ---------------------------------------------------------------------------

double aggregate_criterion_percentages(const std::vector<double>& percentages) {
    if (percentages.empty()) {
        throw ContractError("cannot aggregate an empty percentage list");
    }
    double sum = 0.0;
    for (double p : percentages) sum += p;
    return sum / static_cast<double>(percentages.size());
}

WinRateTable compute_win_table(const std::vector<PairVerdict>& verdicts,
                               const std::vector<int>& depths) {
    WinRateTable table;
    table.depths = depths;

    for (int depth : depths) {
        // Pair up the two orderings per question.
        std::map<std::string, std::pair<const PairVerdict*, const PairVerdict*>>
            pairs;
        for (const auto& v : verdicts) {
            if (v.depth != depth) continue;
            auto& slot = pairs[v.question_id];
            if (v.ordering == Ordering::AB) slot.first = &v;
            else slot.second = &v;
        }
        for (const auto& [qid, slot] : pairs) {
            if (!slot.first || !slot.second) {
                throw ContractError("pair " + qid + " at k=" +
                                    std::to_string(depth) +
                                    " is missing one judged ordering");
            }
        }

        std::vector<double> criterion_pcts;
        auto& rows = table.criterion_rows[depth];
        for (std::size_t c = 0; c < pairwise_criteria().size(); ++c) {
            double pct_sum = 0.0;
            int orderings = 0;
            for (Ordering ordering : {Ordering::AB, Ordering::BA}) {
                double wins = 0.0;
                std::size_t total = 0;
                for (const auto& [qid, slot] : pairs) {
                    const PairVerdict* v =
                        ordering == Ordering::AB ? slot.first : slot.second;
                    Winner w = v->winners.at(c).second;
                    if (w == Winner::A) wins += 1.0;
                    else if (w == Winner::tie) wins += 0.5;
                    ++total;
                }
                if (total == 0) continue;
                pct_sum += wins / static_cast<double>(total) * 100.0;
                ++orderings;
            }
            double pct = orderings > 0 ? pct_sum / orderings : 0.0;
            rows.emplace_back(pairwise_criteria()[c], pct);
            criterion_pcts.push_back(pct);
        }
        table.aggregated[depth] =
            aggregate_criterion_percentages(criterion_pcts);
    }
    return table;
}

std::string win_table_csv(const WinRateTable& table) {
    std::string csv = "criterion";
    for (int depth : table.depths) csv += ",k=" + std::to_string(depth);
    csv += "\n";
    for (std::size_t c = 0; c < pairwise_criteria().size(); ++c) {
        csv += pairwise_criteria()[c];
        for (int depth : table.depths) {
            csv += "," +
                   util::format_fixed(table.criterion_rows.at(depth).at(c).second, 2);
        }
        csv += "\n";
    }
    csv += "Aggregated";
    for (int depth : table.depths) {
        csv += "," + util::format_fixed(table.aggregated.at(depth), 2);
    }
    csv += "\n";
    return csv;
}

}  // namespace ruleforge::bench
