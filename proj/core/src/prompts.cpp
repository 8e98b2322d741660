#include "ruleforge/prompts.hpp"

#include <array>
#include <cctype>

#include "ruleforge/util.hpp"

namespace ruleforge::llm {

namespace {

// --------------------------------------------------------------------------
// Prompt bodies. Slots are positional: {0}, {1}, ... filled in order.
// Literal braces in the embedded JSON examples never collide with slots.
// --------------------------------------------------------------------------

const char* kGenerate = R"PROMPT(You are an expert at analyzing regulatory documents to extract structured, actionable rules from {0}.

## Task
Extract all rules, requirements, obligations, prohibitions, permissions, and procedures.
Each distinct rule = one RuleUnit.

Requirements:
- Exhaustive: Capture every rule in the text
- Objective: Use only source text -- no inference or interpretation
- Precise: Include verbatim quotes to ground extractions
- Structured: Decompose into clear components

## Extraction Guidelines

### Section Metadata

Citation
- Official regulatory section number (e.g., "17 CFR 275.0-2", "Rule 144", "§230.405")
- DO NOT use Federal Register citations (e.g., "51 FR 32907") as section_cite
- If no regulatory section identifier exists in source, set to null

Title
- Section's official heading

Effective Dates
- Extract dates in EXACT format from source (e.g., "Sept. 17, 1986" NOT "September 17, 1986")
- Preserve abbreviations, punctuation, and spacing
- Extract ALL dates with appropriate event types
- Multiple FR citations typically indicate: first = "adopted", subsequent = "amended"
- Look for context clues in brackets (e.g., "amended at 64 FR...")
- Common event types: adopted, amended, effective, rescinded

notes
- Set to null unless source contains additional context not captured in other fields

x_extensions
- Set to null unless source contains non-standard metadata

Definitions
Extract terms whose meaning is established by the text:
- Positive definitions: "X means Y"
- Negative definitions: "X is not Y" or "X does not include Y"
- Example: "A transaction...is not an assignment" -> defines what "assignment" excludes

Note: Definitional text may ALSO constitute a rule (e.g., "X is not considered Y" both defines Y's scope AND exempts X). Extract to BOTH definitions and extracted_rules when applicable.

### For Each Rule Extract:

#### 1. Rule Identification
- rule_id: Unique identifier (e.g., "RULE-001"). Use consistent nomenclature across document.
- label: Concise summary (5-25 words)
- rule_type: obligation | prohibition | permission | exemption | definition-application | safe-harbor | procedure | clarification | deeming | condition-precedent | other (provide other_label)
  - Use exemption for: Carves out exceptions or states what is NOT covered (e.g., "X is not deemed Y")
  - Use clarification for: Explains scope or meaning without imposing new obligations

#### 2. Targets (WHO must comply)
CRITICAL: Target = WHO is being instructed to perform the action per this rule, NOT who is the action being performed on!

Example:
- "Issuers must file to Commission" -> Target is issuer (not Commission)
- "Any person may serve by furnishing Commission..." -> Target is any_person
- "If <event>, the head of Commission must..." -> Target is head of Commission (not Commission)

For each target:
- role: answers the "who must follow this rule?" question
- Preserve exact entity names: "Secretary of the Commission" NOT "commission"
- qualifiers: captures any additional conditions that apply (e.g. "with 15+ employees")

IMPORTANT -- Resolve Vague References:
- If source text uses "you", "the registrant", "such person", determine the actual entity from:
  - Section title (e.g., "Rules for Investment Advisers" -> target is "investment adviser")
  - Regulatory context (e.g., Form CRS is for broker-dealers and investment advisers)
  - Earlier definitional text in the section

#### 3. Statement
Extract the complete rule decomposition as a single structured object with the following fields:

3.1 action
- Primary regulatory verb phrase (multi-word OK: "file reports", "serve legal process")
- CRITICAL: For negative statements, INCLUDE the negation in the action field
- WHAT must/must not/may be done?

Examples of negative actions: "is not deemed" / "does not constitute" / "shall not be required" / "are not subject to"

Wrong: "deemed"      Correct: "is not deemed"
Wrong: "considered"  Correct: "is not considered"

3.2 action_object
- WHO/WHAT is acted upon (e.g., "to the Commission", "non-resident advisers", "assignment")

3.3 method
- HOW performed -- mechanisms, procedures (e.g., "by furnishing documents", "by delivering the amended Form CRS or by communicating through another disclosure")
- DO NOT include temporal/quantitative constraints here -- extract those to the constraints field

3.4 constraints
Extract temporal/quantitative/qualitative limits as an array. If none, return [].
For each constraint:
- text: Clear description (e.g., "within 10 business days", "not less than $5,000", "without charge")
- applies_to: What is constrained (null if ambiguous)

3.5 conditions
Capture ALL conditions that define when, where, or under what circumstances the rule applies. If unconditional, return [].

IMPORTANT: The trigger should describe the QUALIFYING circumstance, not just repeat the subject
Wrong: trigger: "transaction"
Correct: trigger: "transaction does not result in change of actual control or management"

Types of conditions to capture:

1. Event-based triggers (something happens):
- "If process is served..." -> trigger: "process is served on the Commission"
- "When trading volume exceeds..." -> trigger: "trading volume exceeds threshold"
- "Upon receipt of notice..." -> trigger: "receipt of notice"

2. Scope/jurisdictional conditions (regulatory framework):
- "Under Forms ADV and ADV-NR..." -> trigger: "Under Forms ADV and ADV-NR"
- "For purposes of Section 5..." -> trigger: "For purposes of Section 5"
- "As provided in Regulation S-K..." -> trigger: "As provided in Regulation S-K"

3. Status-based conditions (entity characteristics):
- "If the issuer is foreign..." -> trigger: "issuer is foreign"
- "For reporting companies..." -> trigger: "entity is a reporting company"

For each condition:
- trigger: The condition that must be met (can be event, scope, or status)
- time_window: Start/end times and timezone (only for temporal conditions)
- cross_references: Regulatory citations mentioned in the condition (e.g., "section 205(a)(2) of the Act")

3.6 exceptions
Extract exemptions/carve-outs. If none, return [].
For each exception:
- text: Exception description
- cross_references: Regulatory citations elaborating exception

3.7 penalties_or_consequences
Extract stated consequences of non-compliance. If none, return null.
For each penalty/consequence:
- text: Description of penalty or consequence
- cross_references: Regulatory citations related to the penalty

3.8 purpose
- Stated objective (only if explicit; else null)

3.9 verbatim
- REQUIRED -- Exact source quote establishing rule
- Must include ALL sentences that contribute to this RuleUnit

#### 4. Additional Elements
- citations: ALL regulatory references mentioned in the rule, regardless of where they appear in the statement. Include references from conditions, exceptions, and the main statement. For each citation provide the reference text and context of its use.
- examples: Illustrative examples from source (lift verbatim; else null)

## Output Format
JSON conforming to the SectionExtraction schema:
- section_meta: Citation, title, effective dates
- definitions: Terms defined in section with explanations
- extracted_rules: List of RuleUnit objects

If the section contains no actionable rules (preamble, table of contents, pure cross-reference material), return null instead of a JSON object.

## Quality Standards
- Completeness: Every regulatory statement -> RuleUnit with all applicable fields filled
- Fidelity: Verbatim = actual quotes, not paraphrases
- Granularity: Multiple distinct obligations -> separate RuleUnits
- No Hallucination: Only explicit content; use null/[] when absent
- Preserve Specificity: Exact entity names, titles, "if" statements -- no simplification
- Regulatory Citations: Federal Register citations (e.g., [51 FR 32907, Sept. 17, 1986]) indicate effective dates but should not be extracted to notes or x_extensions unless they provide substantive context beyond dating.

## Special Cases
- Compound Rules: Multiple obligations on different targets -> split into RuleUnits
- Cross-References: "as defined in §240.10b-5" -> capture in cross_references
- Implicit Requirements: Extract only if clearly stated (e.g., "failure to file within 10 days requires..." implies filing obligation)

## CRITICAL OUTPUT REQUIREMENTS

Your JSON output MUST include these fields for EVERY RuleUnit (use [] for empty):

{
  "rule_id": "...",
  "label": "...",
  "rule_type": {...},
  "targets": [...],
  "statement": {
    "action": "...",
    "action_object": "...",
    "method": "...",
    "constraints": [...],
    "conditions": [...],
    "exceptions": [...],
    "penalties_or_consequences": [...],
    "purpose": "...",
    "verbatim": "..."
  },
  "citations": {...},
  "examples": [...]
}

Missing any of these fields will cause validation failure.

FINAL VERIFICATION PROTOCOL

Before returning your JSON output:

1. Section Metadata Verification:
- section_cite: null if not in source, exact format if present (DO NOT use FR citations)
- effective_dates: ALL dates with correct event types ("adopted" for first, "amended" for subsequent)
- Dates: exact format match including abbreviations (e.g., "Sept." not "September")
- definitions: Extract negative definitions too (e.g., "X is not Y")
- Optional fields (notes, x_extensions): explicitly null if unused

2. Rule Extraction Verification:
- action: For negative statements, verify negation is INCLUDED (e.g., "is not deemed" NOT "deemed")
- rule_type: "exemption" for exclusionary rules (e.g., "X is not Y")
- conditions: trigger describes the qualifying circumstance, not just the subject
- conditions: cross_references populated if regulatory citations mentioned
- citations: ALL regulatory references included with context

3. Completeness Check: For each RuleUnit, verify that you've populated:
- conditions array (even if single item)
- constraints array (check for temporal/quantitative limits)
- exceptions array (check for carve-outs)
- penalties_or_consequences (check for stated consequences)

4. Source Cross-Check: For any field marked as [], re-read the verbatim quote and confirm no extractable information exists.

5. Scope Conditions: Specifically check if the rule begins with regulatory context like "Under [Form/Regulation]" or "For purposes of [Section]" -- this is ALWAYS a condition.

Now analyze the document and extract all rules:
{1}
)PROMPT";

const char* kRegenMeta = R"PROMPT(Your task is to extract section metadata from a source text containing regulatory content. You have been provided with a previous extraction that was assessed based on specific criteria and determined to be incorrect.

Using the critique, generate corrected metadata from the source text to achieve the highest score on all mentioned criteria:
- Completeness
- Fidelity to Source Text
- Non-Hallucination
- Title Quality
- Precision of Citations and Dates
- Reasonable Population of Optional Fields

Follow the format below:
{
  "section_cite": "citation from source",
  "title": "section title",
  "effective_dates": [{"event": "event_type", "date": "exact date format"}],
  "notes": "additional context if present in source",
  "x_extensions": {}
}

Only generate the corrected metadata JSON and nothing else.

Inputs:
Source Text: {0}
Incorrect Metadata: {1}
Critique: {2}
)PROMPT";

const char* kRegenDefs = R"PROMPT(Your task is to extract definitions from a source text containing regulatory content. You have been provided with a previous extraction that was assessed based on specific criteria and determined to be incorrect.

Using the critique, generate corrected definitions from the source text to achieve the highest score on all mentioned criteria:
- Completeness
- Fidelity to Source Text
- No Hallucination or Fabrication
- Precision and Formatting
- Quality of Terms

Follow the format below:
{
  "definitions": [
    {
      "term": "term",
      "text": "definition"
    }
  ]
}

Only generate the corrected definitions JSON and nothing else.

Inputs:
Source Text: {0}
Incorrect Definitions: {1}
Critique: {2}
)PROMPT";

const char* kRegenRules = R"PROMPT(Your task is to extract rule units from a source text containing regulatory content. You have been provided with a previous extraction that was assessed based on specific criteria and determined to be incorrect.

Using the critique, generate a corrected rule unit from the source text to achieve the highest score on all mentioned criteria:
- Completeness
- Conciseness (for label)
- Accuracy (of rule_type)
- Consistency (of targets)
- Fidelity to Source Text (statements)
- Neutrality
- Actionability
- No Hallucination

Follow the format below:
{
  "rule_id": "rule_id from the source/generated",
  "label": "concise summary (5-25 words)",
  "rule_type": "obligation" | "prohibition" | "permission" | "exemption" | "definition-application" | "safe-harbor" | "procedure" | "clarification" | "deeming" | "condition-precedent" | "other",
  "targets": ["WHO must comply, is prohibited, or is granted permission"],
  "statement": {
    "action": "primary regulatory action",
    "action_object": "direct object or recipient of the action",
    "method": "HOW the action must be performed",
    "constraints": [...],
    "conditions": [...],
    "exceptions": [...],
    "penalties_or_consequences": [...],
    "purpose": "stated objective",
    "verbatim": "source quote establishing rule"
  },
  "citations": [...],
  "examples": [...]
}

Only generate the corrected RuleUnit JSON and nothing else.

Inputs:
Source Text: {0}
Incorrect RuleUnit: {1}
Critique: {2}
)PROMPT";

// Shared tail for the three judge prompts: the scoring rubric plus the
// strict output grammar the score parser expects.
const char* kJudgeRubric = R"PROMPT(Scoring Guidelines (per criterion):
- 5.0: Fully satisfied with no errors
- 4.0-4.9: Mostly satisfied with minor issues
- 3.0-3.9: Partially satisfied with notable gaps or minor inaccuracies
- 2.0-2.9: Poorly satisfied with significant omissions or errors
- 1.0-1.9: Barely satisfied with major problems
- 0.0-0.9: Not satisfied -- critical failures or fabrications
)PROMPT";

const char* kJudgeOutputFormat = R"PROMPT(Output Format:
Return ONLY a JSON object keyed by criterion name. Each value must be an object with "Score" (a number from 0 to 5) and "Justification" (a string explaining the score). No commentary outside the JSON object.
)PROMPT";

std::string judge_meta_body() {
    std::string s = R"PROMPT(Evaluate whether the extracted section metadata is substantially accurate based on the following criteria:

1. Completeness
Major metadata elements should be extracted and populated:
- section_cite should be present and identify the correct section
- title should be captured if clearly present in the source
- effective_dates should include at least the primary temporal event (if any)
- notes (optional) may capture additional context
- x_extensions (optional) may include non-standard metadata
Missing critical fields (section_cite, title when present) are significant issues. Missing optional fields or secondary dates are minor issues.

2. Fidelity to Source Text
Notes and x_extensions should reasonably reflect the source content. Direct quotes, close paraphrasing, or reasonable interpretations are all acceptable. Minor rewording or normalization of language is acceptable.

3. Non-Hallucination
Fields should only be populated when corresponding information exists in the source. Do not fabricate dates, citations, or contextual information. Event types in effective_dates should be grounded in the source (normalized terminology acceptable, e.g., "enacted" -> "adopted"). This criterion is strict: hallucinated information is a significant problem.

4. Title Quality
Title should accurately reflect the section title if present. Minor formatting variations are acceptable. Null is appropriate if no title exists.

5. Precision of Citations and Dates
Section citations should identify the correct section (minor formatting differences acceptable). Dates should be correct to at least the month/year level. If multiple effective dates exist, capturing the primary date is essential; missing secondary dates is a minor issue.

6. Reasonable Population of Optional Fields
When notes or x_extensions are populated, they should add value. Omitting these fields when relevant information exists is a minor issue, not a major deficiency.

)PROMPT";
    s += kJudgeRubric;
    s += "Score each of the 6 criteria independently. If a criterion is not "
         "applicable, assign 5. Report the average as the final score.\n\n";
    s += kJudgeOutputFormat;
    s += "\nInputs:\nSource Text: {0}\nExtracted Metadata: {1}\n";
    return s;
}

std::string judge_defs_body() {
    std::string s = R"PROMPT(Evaluate whether the extracted definitions and related rule extractions are substantially accurate based on the following criteria:

1. Completeness
Major definitional statements should be captured, including:
- Primary positive definitions ("X means Y", "X includes Y")
- Significant negative definitions or exclusions ("X is not Y", "X does not include Y")
- Important context such as major exceptions or limitations
Missing primary definitions or major exclusions are significant issues. Missing minor qualifications or secondary cross-references are minor issues.

2. Fidelity to Source Text
Extracted terms and definitions should reasonably reflect the source. Direct quotes, close paraphrasing, or reasonable interpretations preserving core meaning are all acceptable. Definitions should not substantially contradict the source or misrepresent the term's meaning.

3. No Hallucination or Fabrication
Extract only definitions present in the source. Do not invent terms, definitions, or context not grounded in the text. This criterion is strict: fabricated content is a significant problem. Reasonable interpretations of existing content are acceptable.

4. Precision and Formatting
Terms should be substantially accurate in spelling and punctuation. Important references (e.g., to statutes or sections) should be captured. Each extracted definition should be clear and understandable. Minor formatting inconsistencies are acceptable if core meaning is preserved.

5. Quality of Terms
Each extracted term should reasonably match the terminology used in the source. Terms should accurately represent the intended meaning and context. Minor variations in term format or phrasing are acceptable if they do not misrepresent the definition.

)PROMPT";
    s += kJudgeRubric;
    s += "Score each of the 5 criteria independently. If a criterion is not "
         "applicable, assign 5. Report the average as the final score.\n\n";
    s += kJudgeOutputFormat;
    s += "\nInputs:\nSource Text: {0}\nExtracted Definitions: {1}\n";
    return s;
}

std::string judge_rules_body() {
    std::string s = R"PROMPT(You are an expert evaluator assessing structured rule extraction from regulatory documents. You will receive the original source text and an extracted RuleUnit. Evaluate each component based on the following criteria:

1. Completeness
Core components (label, rule_type, targets, action, action_object) are significant if missing. Secondary components (method, constraints, conditions) and optional fields when absent are minor issues.

2. Conciseness
The label should be reasonably brief, summarizing the rule while preserving important meaning. Slight wordiness is acceptable. Significant deviation from the rule's meaning or scope should be noted.

3. Accuracy
The rule_type should reasonably represent the type of rule in the source. Minor classification judgment calls are acceptable. Significant misclassification that misrepresents the rule's fundamental nature is a problem.

4. Consistency
Targets should reasonably align with the source. Minor terminology variations that preserve meaning are acceptable. Targets should not significantly contradict or misrepresent who the rule applies to.

5. Fidelity to Source Text
Statement components should reasonably reflect the source. Conditions, exceptions, and constraints should capture the primary requirements. Minor deviations in phrasing that do not affect legal interpretation are acceptable. Significant alterations of scope or omission of critical qualifiers should be noted.

6. Neutrality
Labels and statements should present the source in a balanced manner. Minor interpretive choices are acceptable. Significant bias or misrepresentation of the rule's intent should be noted.

7. Actionability
Action and action_object should provide reasonably clear guidance, understandable and usable in a business context. Minor ambiguity is acceptable if the core action and object are identifiable. Excessive abstraction that obscures what must be done is problematic.

8. Non-Hallucination
Extract only rule units present in the source. Do not invent rule components, conditions, targets, or context not grounded in the text. This criterion is strict: fabricated content is a significant problem. Reasonable interpretations of existing content are acceptable.

)PROMPT";
    s += kJudgeRubric;
    s += "Score each of the 8 criteria independently. If a criterion is not "
         "applicable, assign 5. Report the average as the final score. Focus on "
         "significant errors that materially affect accuracy, completeness, or "
         "usability of the extracted rule.\n\n";
    s += kJudgeOutputFormat;
    s += "\nInputs:\nSource Text: {0}\nExtracted RuleUnit: {1}\n";
    return s;
}

const char* kGenQuestions = R"PROMPT(You are a senior legal analyst and compliance expert with over two decades of experience in the regulatory domain of the passage below, including its governing statutes, supervisory authorities, and compliance procedures.

Your role is to generate precise, grounded, and legally meaningful questions from regulatory passages. You think like both a compliance officer and a litigator: you understand nuance, edge cases, and the practical implications of regulatory language. Given the following regulatory passage, generate exactly {0} questions that a compliance officer, legal analyst, or auditor might ask.

Strict Rules:
- Every question must be directly and fully answerable from the passage alone
- Do NOT introduce concepts, entities, or scenarios not present in the passage
- Do NOT ask questions requiring outside knowledge or inference beyond the passage
- Questions must be diverse: cover who, what, when, how, and under what conditions
- Questions must be specific and unambiguous
- Questions should vary in complexity: mix factual, conditional, and analytical types
- Each question must stand alone as a complete, clear sentence

Output Format:
Return ONLY a valid JSON list of {1} strings. No explanation, no preamble, no commentary.

Example:
["Question one?", "Question two?", ...]

Input:
Passage: {2}
)PROMPT";

const char* kAnswer = R"PROMPT(You are a regulatory compliance assistant. Answer the question using only the numbered rules provided as context. Ground every statement in those rules; when the rules do not contain the information needed, say so explicitly. Be precise about scope, conditions, and exceptions.

Question: {0}

Rules:
{1}

Answer:
)PROMPT";

const char* kPairwiseJudge = R"PROMPT(You are comparing two answers to the same regulatory compliance question. Judge only the content presented; you do not know which system produced which answer. Evaluate the pair on each criterion below:

1. Completeness: Does the answer address all aspects of the question?
2. Factual Grounding: Are claims traceable to the retrieved rules rather than invented?
3. Handling Ambiguity: Does the answer correctly distinguish mandates, permissions, and unresolved provisions rather than forcing false certainty?
4. Practical Actionability: Is regulatory language translated into concrete guidance rather than inert quotation?
5. Regulatory Precision: Are scope, conditions, and exceptions reflected correctly?
6. Overall Preference: Which answer is better overall?

For each criterion choose exactly one of "A" (the first answer), "B" (the second answer), or "tie".

Output Format:
Return ONLY a JSON object mapping each criterion name to "A", "B", or "tie". No commentary outside the JSON object.

Question: {0}

Answer A:
{1}

Answer B:
{2}
)PROMPT";

struct Registry {
    std::array<PromptTemplate, 10> templates;

    Registry() {
        templates[0] = {TemplateId::generate, kGenerate, 2};
        templates[1] = {TemplateId::regen_meta, kRegenMeta, 3};
        templates[2] = {TemplateId::regen_defs, kRegenDefs, 3};
        templates[3] = {TemplateId::regen_rules, kRegenRules, 3};
        templates[4] = {TemplateId::judge_meta, judge_meta_body(), 2};
        templates[5] = {TemplateId::judge_defs, judge_defs_body(), 2};
        templates[6] = {TemplateId::judge_rules, judge_rules_body(), 2};
        templates[7] = {TemplateId::gen_questions, kGenQuestions, 3};
        templates[8] = {TemplateId::answer, kAnswer, 2};
        templates[9] = {TemplateId::pairwise_judge, kPairwiseJudge, 3};
    }
};

const Registry& registry() {
    static const Registry r;
    return r;
}

}  // namespace

const PromptTemplate& prompt_template(TemplateId id) {
    return registry().templates[static_cast<std::size_t>(id)];
}

const char* template_name(TemplateId id) {
    switch (id) {
        case TemplateId::generate: return "generate";
        case TemplateId::regen_meta: return "regen_meta";
        case TemplateId::regen_defs: return "regen_defs";
        case TemplateId::regen_rules: return "regen_rules";
        case TemplateId::judge_meta: return "judge_meta";
        case TemplateId::judge_defs: return "judge_defs";
        case TemplateId::judge_rules: return "judge_rules";
        case TemplateId::gen_questions: return "gen_questions";
        case TemplateId::answer: return "answer";
        case TemplateId::pairwise_judge: return "pairwise_judge";
    }
    return "unknown";
}

TemplateId template_from_name(const std::string& name) {
    for (const auto& t : registry().templates) {
        if (name == template_name(t.id)) return t.id;
    }
    throw Error("unknown prompt template: " + name);
}

std::string render(TemplateId id, const std::vector<std::string>& args) {
    const PromptTemplate& tmpl = prompt_template(id);
    if (static_cast<int>(args.size()) != tmpl.arity) {
        throw RenderError(std::string("template '") + template_name(id) +
                          "' expects " + std::to_string(tmpl.arity) +
                          " arguments, got " + std::to_string(args.size()));
    }

    std::string out;
    out.reserve(tmpl.body.size() + 256);
    std::vector<bool> seen(args.size(), false);

    const std::string& body = tmpl.body;
    for (std::size_t i = 0; i < body.size();) {
        if (body[i] == '{' && i + 2 < body.size() &&
            std::isdigit(static_cast<unsigned char>(body[i + 1]))) {
            std::size_t j = i + 1;
            while (j < body.size() &&
                   std::isdigit(static_cast<unsigned char>(body[j]))) {
                ++j;
            }
            if (j < body.size() && body[j] == '}') {
                int slot = std::stoi(body.substr(i + 1, j - i - 1));
                if (slot < 0 || slot >= static_cast<int>(args.size())) {
                    throw RenderError(std::string("template '") +
                                      template_name(id) +
                                      "' references out-of-range slot {" +
                                      std::to_string(slot) + "}");
                }
                out += args[static_cast<std::size_t>(slot)];
                seen[static_cast<std::size_t>(slot)] = true;
                i = j + 1;
                continue;
            }
        }
        out.push_back(body[i]);
        ++i;
    }

    for (std::size_t s = 0; s < seen.size(); ++s) {
        if (!seen[s]) {
            throw RenderError(std::string("template '") + template_name(id) +
                              "' is missing slot {" + std::to_string(s) + "}");
        }
    }
    return out;
}

}  // namespace ruleforge::llm
