#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ruleforge/ingest.hpp"
#include "ruleforge/llm.hpp"
#include "ruleforge/schema.hpp"
#include "ruleforge/store.hpp"

namespace ruleforge::bench {

/// One indexable rule document: a deterministic flat rendering of a
/// RuleUnit plus its source-section provenance.
struct RuleDocText {
    std::string rule_id;
    std::string rendered_text;
    std::string provenance;  // section fingerprint ("" for foreign rule sets)
};

/// Embedding contract. fit() receives the indexed corpus so providers
/// with corpus statistics (IDF) stay consistent between index and query
/// time; embed() must be deterministic within a fitted session.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual void fit(const std::vector<std::string>& corpus) { (void)corpus; }
    virtual std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) = 0;
    virtual int dimension() const = 0;
    virtual std::string tag() const = 0;
};

/// Deterministic test-time provider: lowercase alphanumeric tokens,
/// FNV-1a hashing into fixed buckets, TF-IDF weighting over the fitted
/// corpus, L2 normalization. Empty text embeds to the zero vector.
class HashedTfidfEmbedding : public EmbeddingProvider {
public:
    explicit HashedTfidfEmbedding(int buckets = 1024);

    void fit(const std::vector<std::string>& corpus) override;
    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;
    int dimension() const override { return buckets_; }
    std::string tag() const override;

private:
    int buckets_;
    std::vector<double> idf_;
    bool fitted_ = false;
};

/// Convenience form of the fallback provider: fits on `texts` and embeds
/// the same batch.
std::vector<std::vector<double>> embed_fallback(
    const std::vector<std::string>& texts);

/// Live embedding endpoint (POST {base_url}/v1/embeddings). The vector
/// dimension is learned from the first response and enforced afterwards.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string base_url, std::string model,
                          std::string api_key_env);
    ~HttpEmbeddingProvider() override;

    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;
    int dimension() const override { return dimension_; }
    std::string tag() const override;

private:
    struct Impl;
    std::string base_url_;
    std::string model_;
    std::string api_key_env_;
    int dimension_ = 0;
    std::unique_ptr<Impl> impl_;
};

/// Tokenizer and bucket hash exposed for collision analysis in tests.
std::vector<std::string> tokenize_lower_alnum(const std::string& text);
std::size_t fnv1a_bucket(const std::string& token, int buckets);

struct RuleIndex {
    struct Entry {
        RuleDocText doc;
        std::vector<double> vec;  // unit L2 norm, or exactly zero
    };
    std::vector<Entry> entries;
    std::string provider_tag;
    int dimension = 0;
    std::shared_ptr<EmbeddingProvider> provider;  // query-time embeddings
};

/// Flat deterministic rendering: label, action, object, method, condition
/// triggers, constraints, exceptions, verbatim; absent fields omitted.
RuleDocText serialize_rule(const schema::RuleUnit& r,
                           const std::string& provenance = "");

RuleIndex build_index(const std::vector<RuleDocText>& docs,
                      std::shared_ptr<EmbeddingProvider> provider);
RuleIndex build_index(const std::vector<store::RuleSetEntry>& rules,
                      std::shared_ptr<EmbeddingProvider> provider);

/// Cosine top-k, ties broken by ascending rule_id; k beyond the corpus
/// returns everything.
std::vector<std::pair<RuleDocText, double>> retrieve(const RuleIndex& index,
                                                     const std::string& query,
                                                     int k);

struct QaItem {
    std::string id;
    std::string question;
    std::string source_section;  // fingerprint
};

std::vector<QaItem> generate_questions(
    const std::vector<ingest::SectionDoc>& sections, int n_per_section,
    llm::ChatBackend& backend, std::vector<std::string>* warnings = nullptr);

struct AnswerRecord {
    std::string question_id;
    std::string question;
    std::string answer;
    std::vector<std::string> retrieved_rule_ids;
    int k = 0;
    bool failed = false;
    std::string error;
};

AnswerRecord answer_question(const QaItem& q, const RuleIndex& index, int k,
                             llm::ChatBackend& backend);

enum class Ordering { AB, BA };
enum class Winner { A, B, tie };

/// Six pairwise criteria in report order.
const std::vector<std::string>& pairwise_criteria();

/// One judged presentation of an answer pair. Winners are expressed in
/// system terms (A = first system) regardless of presentation order.
struct PairVerdict {
    std::string question_id;
    Ordering ordering = Ordering::AB;
    int depth = 0;
    std::vector<std::pair<std::string, Winner>> winners;  // six entries
};

/// Judges the pair twice with swapped presentation order; the judge never
/// learns which system produced which answer. An unparseable verdict
/// after one re-ask becomes all-tie with a warning.
std::pair<PairVerdict, PairVerdict> pairwise_judge(
    const QaItem& q, const std::string& answer_a, const std::string& answer_b,
    llm::ChatBackend& backend, int depth,
    std::vector<std::string>* warnings = nullptr);

struct WinRateTable {
    std::vector<int> depths;
    /// depth -> (criterion, win% for system A), six rows per depth.
    std::map<int, std::vector<std::pair<std::string, double>>> criterion_rows;
    /// depth -> mean of the six criterion percentages.
    std::map<int, double> aggregated;
};

/// Per criterion per depth: (wins + half the ties) / judged, per
/// ordering, averaged over the two orderings, as a percentage. Throws
/// ContractError naming the pair when an ordering is missing.
WinRateTable compute_win_table(const std::vector<PairVerdict>& verdicts,
                               const std::vector<int>& depths);

/// The table's aggregation step: unweighted mean of criterion
/// percentages.
double aggregate_criterion_percentages(const std::vector<double>& percentages);

/// wintable.csv: rows = criteria + Aggregated, columns = depths.
std::string win_table_csv(const WinRateTable& table);

struct BenchConfig {
    std::vector<int> retrieval_depths{1, 5, 10};
    int questions_per_section = 4;
    double question_temperature = 0.8;

    void check() const;  // depths positive
};

}  // namespace ruleforge::bench
