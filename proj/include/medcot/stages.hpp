#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcot/core.hpp"
#include "medcot/gateway.hpp"
#include "medcot/prompt.hpp"

namespace medcot {

class ExtractError : public std::runtime_error {
 public:
  enum class Kind { NoObject, MissingKeys };
  ExtractError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// Returns the first balanced top-level JSON object in `reply` (code fences
// stripped, brace scanning string/escape-aware) that parses and contains all
// `required_keys`. Throws ExtractError otherwise.
nlohmann::json extract_json(std::string_view reply,
                            const std::vector<std::string>& required_keys = {});

struct StageContext {
  Gateway& gateway;
  const PromptRegistry& prompts;
};

// ---- generation ------------------------------------------------------------

struct AbsentSlot {
  std::string label;
  std::string agent_id;
  double temperature{0.0};
  std::string error;
};

struct GenerationResult {
  std::vector<ReasoningPath> paths;
  std::vector<AbsentSlot> absent;  // slots whose calls failed after retries
};

// One path per generator x configured temperature, labeled <agent>_COT<k>
// (k is the 1-based temperature index). Throws only if every call failed.
GenerationResult generate_paths(StageContext& ctx, const Question& q,
                                const std::vector<AgentSpec>& generators);

// ---- verification ----------------------------------------------------------

// One re-ask on unparseable output, then Error with the sentinel reason.
// Throws GatewayError on transport failure.
Verdict verify_path(StageContext& ctx, const Question& q,
                    const ReasoningPath& p, const AgentSpec& verifier);

// ---- ranking ----------------------------------------------------------------

struct RankOutcome {
  std::array<std::string, 2> top2;
  std::map<std::string, std::string> reasons;  // rejected label -> one-liner
  bool fallback_used{false};
};

// |correct| == 2: both selected, zero agent calls. |correct| >= 3: agent
// ranks; a bad reply after one re-ask degrades to the two lexicographically
// smallest labels with fallback_used set. |correct| < 2 is a caller bug.
RankOutcome rank_paths(StageContext& ctx, const Question& q,
                       const std::vector<ReasoningPath>& correct,
                       const AgentSpec& ranker);

// Pure fallback rule, exposed for tests: two lexicographically smallest.
std::array<std::string, 2> rank_fallback(const std::vector<std::string>& labels);

// ---- refinement ------------------------------------------------------------

// Sentinel reasons are filtered before rendering; an all-sentinel list
// degrades to a fixed placeholder line. Empty input is a precondition error.
ReasoningPath refine_path(StageContext& ctx, const Question& q,
                          const ReasoningPath& p,
                          const std::vector<std::string>& error_reasons,
                          const AgentSpec& refiner);

struct RegenerationResult {
  ReasoningPath path;
  Provenance provenance{Provenance::Regenerated};
};

// Difficult tier: no correct seed -> fresh generation by the strong agent
// (provenance regenerated); one correct seed -> refine it with all recorded
// error reasons (provenance refined).
RegenerationResult regenerate_path(StageContext& ctx, const Question& q,
                                   const ReasoningPath* seed_correct,
                                   const std::vector<std::string>& error_reasons,
                                   const AgentSpec& strong);

// ---- summarization / scoring -------------------------------------------------

// Returns the reply verbatim; empty reply or empty cot is an error.
std::string summarize(StageContext& ctx, const std::string& cot,
                      const AgentSpec& summarizer);

class ScoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integer 1..10 plus justification; one re-ask, then ScoreError (the caller
// queues the item for rescoring).
QualityScore score_response(StageContext& ctx, const Question& q,
                            const std::string& response,
                            const AgentSpec& scorer);

// ---- shared prompt plumbing (exposed for tests) ------------------------------

// "[label]\n<text>" blocks joined by blank lines.
std::string cot_block(const std::vector<ReasoningPath>& paths);
// One reason per line; sentinels filtered; placeholder line if nothing remains.
std::string error_reasons_block(const std::vector<std::string>& reasons);
inline constexpr const char* kNoErrorReasonsPlaceholder =
    "(no specific error reasons recorded)";
// Appended to the original prompt for the single structured-output re-ask.
inline constexpr const char* kReaskSuffix =
    "\n\nRespond with only the JSON object, no other text.";

std::map<std::string, std::string> generate_bindings(const Question& q);
std::map<std::string, std::string> verify_bindings(const Question& q,
                                                   const ReasoningPath& p);

void to_json(nlohmann::json& j, const AbsentSlot& v);
void from_json(const nlohmann::json& j, AbsentSlot& v);

}  // namespace medcot
