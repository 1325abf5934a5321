#include "medcot/prompt.hpp"

#include <stdexcept>

namespace medcot {

namespace {

constexpr std::string_view kGenerateBody = R"__T(You are a highly knowledgeable medical expert. You are provided with a clinical multiple-choice question along with several candidate answers.
Your task is to carefully analyze the clinical scenario and each option by following these steps:
1. Restate the question in your own words.
2. Highlight the key clinical details and relevant background information (e.g., pathophysiology, anatomy, typical presentations, diagnostic tests).
3. Evaluate each candidate answer, discussing supporting evidence and potential pitfalls.
4. Systematically rule out options that do not align with the clinical context.
5. Compare any remaining choices based on their merits.
6. Conclude with your final answer accompanied by a clear and concise summary of your reasoning.

Please note: Your response should be based solely on the current question and candidate answers. Do not consider any previous context or prior interactions.

Question:
{question}

Candidate Answers:
{options}

Please provide your detailed chain-of-thought reasoning followed by your final answer.)__T";

constexpr std::string_view kVerifyBody = R"__T(You are a medical evaluation expert. Analyze if the Chain-of-Thought (CoT) analysis correctly leads to the answer.

[Question]
{question}

[Options]
{options_str}

[Correct Answer]
{answer}

[CoT Analysis]
{cot_content}

Evaluate the CoT analysis following these criteria:
1. Does the analysis correctly identify key clinical factors?
2. Are all options appropriately considered and evaluated?
3. Does the reasoning logically lead to the correct answer?
4. Are there any factual errors in medical knowledge?

Output a JSON object with:
- "verdict": "Correct" if the CoT analysis is valid and reaches the correct answer, otherwise "Error"
- "reason": Brief explanation of your evaluation (1-2 sentences))__T";

constexpr std::string_view kSummarizeBody = R"__T(Summarize the following chain-of-thought reasoning:
{cot})__T";

constexpr std::string_view kRankBody = R"__T(You are a medical reasoning evaluator. Given the question, options, and known answer, review the following chains-of-thought (CoTs) labeled by their keys.
Select the two most sound and useful CoTs, then provide brief justifications for why each of the other CoTs were not chosen.

[Question]
{question}

[Options]
A) {optA}
B) {optB}
C) {optC}
D) {optD}

[Correct Answer]
{answer}

[CoTs]
{cot_block}

Respond with a JSON object with exactly two keys:
  "top2": ["modelX_COTY", "modelZ_COTW"],
  "reasons": {<label>: <one-sentence justification> for every CoT not in top2})__T";

constexpr std::string_view kRefineBody = R"__T(You are an expert clinician-educator AI tutor. Your mission is to generate an exceptionally comprehensive, in-depth chain-of-thought explanation that rigorously justifies the correct answer for the given clinical MCQ, while specifically addressing and integrating provided error feedback to eliminate previous reasoning flaws. Adhere closely to these instructions to maximize completeness:

1. **Error-Driven Refinement**  
   - Review the provided **Error Reasons from Other Attempts**.  
   - Identify logical gaps, factual mistakes, omissions, or misleading inferences in the original chain‐of‐thought.  
   - Explicitly incorporate corrections and clarifications derived from these error reasons.

2. **Structured, Layered Reasoning**  
   Organize your explanation into clear sections:
   a. Restate the question in your own words.
   b. Highlight the key clinical details and relevant background information (e.g., pathophysiology, anatomy, typical presentations, diagnostic tests).
   c. Evaluate each candidate answer, discussing supporting evidence and potential pitfalls.
   d. Systematically rule out options that do not align with the clinical context.
   e. Compare any remaining choices based on their merits.
   f. Conclude with your final answer accompanied by a clear and concise summary of your reasoning.

**Inputs**
- **Question:**  '{question}'  
- **Options:**  '{options}'  
- **Correct Answer:**  '{answer}'  
- **Original Chain-of-Thought:**  '{original_cot}'  
- **Error Reasons from Other Attempts:**  '{error_reasons}'  

**Output:**  
Please optimized Original Chain-of-Thought. Ensure that you explicitly address and rectify each error reason provided.)__T";

constexpr std::string_view kScoreBody = R"__T(You are a medical reasoning evaluator. Assess the following response based on the following criteria:

1. **Clinical accuracy**: Does the response correctly incorporate medical facts, clinical guidelines, and evidence-based practices? Are the clinical details provided accurate, relevant, and appropriate for the given situation?
2. **Logical reasoning**: Does the response logically follow the reasoning process required to arrive at the answer? Is the reasoning chain coherent and well-supported by evidence or clinical knowledge?
3. **Factual correctness**: Are there any factual errors in the response? Are all statements factually correct and consistent with established medical knowledge?
4. **Completeness**: Does the response cover all necessary aspects of the question? Is it thorough and detailed, addressing the key points without missing critical information?

[Question]
{question}

[Response]
{response}

Please evaluate the response on the above criteria and provide a JSON object with two keys:
  "score": integer between 1 and 10,
  "justification": A concise explanation of your score.)__T";

}  // namespace

std::string_view builtin_template_body(TemplateId id) {
  switch (id) {
    case TemplateId::Generate: return kGenerateBody;
    case TemplateId::Verify: return kVerifyBody;
    case TemplateId::Summarize: return kSummarizeBody;
    case TemplateId::Rank: return kRankBody;
    case TemplateId::Refine: return kRefineBody;
    case TemplateId::Score: return kScoreBody;
  }
  throw std::runtime_error("unknown template id");
}
}  // namespace medcot
