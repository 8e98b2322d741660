#pragma once

#include <string>
#include <vector>

namespace ruleforge::llm {

/// Identifiers for every prompt the engine renders. Positional slots are
/// written {0}, {1}, ... in the template body and filled in order.
enum class TemplateId {
    generate,        // initial extraction (domain, section text)
    regen_meta,      // metadata repair (source, failing fragment, critique)
    regen_defs,      // definitions repair
    regen_rules,     // rule-unit repair
    judge_meta,      // metadata judge (source, fragment)
    judge_defs,      // definitions judge
    judge_rules,     // rule-unit judge
    gen_questions,   // QA bench question generation (count, count, passage)
    answer,          // grounded answering (question, numbered context)
    pairwise_judge,  // pairwise verdict (question, first answer, second answer)
};

struct PromptTemplate {
    TemplateId id;
    std::string body;
    int arity;
};

const PromptTemplate& prompt_template(TemplateId id);

const char* template_name(TemplateId id);
TemplateId template_from_name(const std::string& name);

/// Fills the template's positional slots in order. Throws RenderError on
/// arity mismatch; argument text is never re-scanned for slots.
std::string render(TemplateId id, const std::vector<std::string>& args);

}  // namespace ruleforge::llm
