#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace medcot {

struct Option {
  std::string label;
  std::string text;
};

struct Question {
  std::string id;
  std::string source;  // "MedQA", "MedMCQA", "PubMedQA", or "MMLU-<subdomain>"
  std::string stem;
  std::vector<Option> options;  // ordered; labels unique
  std::string gold;             // matches exactly one option label
};

// True for the known benchmark tags (MMLU requires a non-empty subdomain).
bool source_tag_valid(std::string_view source);

// Throws std::runtime_error if any Question invariant is violated.
void validate_question(const Question& q);

// "A) text" lines in corpus order, joined by newlines.
std::string options_block(const Question& q);
// "B) text" for the gold option.
std::string answer_display(const Question& q);

struct ReasoningPath {
  std::string question_id;
  std::string agent_id;
  double temperature{0.0};
  std::string label;  // "<agent>_COT<k>"
  std::string text;
};

std::string path_label(const std::string& agent_id, int k);

enum class VerdictKind { Correct, Error };

std::string to_string(VerdictKind v);
VerdictKind verdict_kind_from_string(const std::string& s);

inline constexpr const char* kUnparseableVerifierReason =
    "UNPARSEABLE_VERIFIER_REPLY";

struct Verdict {
  std::string path_label;
  VerdictKind verdict{VerdictKind::Error};
  std::string reason;  // empty allowed when Correct
};

enum class Tier { Easy, Medium, Difficult };

std::string to_string(Tier t);
Tier tier_from_string(const std::string& s);

struct TierThresholds {
  int easy_max_errors{4};    // error_count 0..easy_max_errors        -> Easy
  int medium_max_errors{7};  // ..medium_max_errors -> Medium; above  -> Difficult
};

struct TierAssignment {
  std::string question_id;
  int total_paths{0};
  int correct_count{0};
  int error_count{0};
  Tier tier{Tier::Difficult};
};

// Missing verdicts (fewer than expected_total) are padded as errors; more
// verdicts than expected_total or duplicate path labels are hard errors.
TierAssignment classify_tier(const std::string& question_id,
                             const std::vector<Verdict>& verdicts,
                             int expected_total,
                             const TierThresholds& thresholds = {});

enum class Provenance { Original, Refined, Regenerated };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct QualityScore {
  int score{0};  // valid range 1..10
  std::string justification;
};

struct SelectedCot {
  std::string label;  // path label this text is linked to
  std::string text;
  Provenance provenance{Provenance::Original};
  std::string summary;  // response text; non-empty in a complete record
  std::optional<QualityScore> pre_score;
  std::optional<QualityScore> post_score;
};

struct CuratedRecord {
  std::string question_id;
  Tier tier{Tier::Easy};
  std::vector<SelectedCot> selected;  // 1..2 entries
  std::map<std::string, std::string> ranker_reasons;
};

// Throws std::runtime_error if |selected| is not in [1,2] or a summary is empty.
void validate_record(const CuratedRecord& rec);

// ---- corpus ingestion ------------------------------------------------------

struct RejectedRow {
  std::size_t line{0};  // 1-based line number in the corpus file
  std::string error;
};

struct LoadResult {
  std::vector<Question> questions;  // input order preserved
  std::vector<RejectedRow> rejects;
};

// Reads a JSONL corpus file, validating every row against `source`.
// Throws on: unreadable file, unknown source tag, zero valid rows.
LoadResult load_questions(const std::filesystem::path& path,
                          const std::string& source);

void write_questions(const std::filesystem::path& path,
                     const std::vector<Question>& questions);
void write_rejects(const std::filesystem::path& path,
                   const std::vector<RejectedRow>& rejects);

// Stable id from provenance coordinates, reproducible across runs.
std::string stable_question_id(const std::string& source,
                               const std::string& split, std::size_t index);

// JSON bindings (nlohmann ADL).
void to_json(nlohmann::json& j, const Option& v);
void from_json(const nlohmann::json& j, Option& v);
void to_json(nlohmann::json& j, const Question& v);
void from_json(const nlohmann::json& j, Question& v);
void to_json(nlohmann::json& j, const ReasoningPath& v);
void from_json(const nlohmann::json& j, ReasoningPath& v);
void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);
void to_json(nlohmann::json& j, const TierAssignment& v);
void from_json(const nlohmann::json& j, TierAssignment& v);
void to_json(nlohmann::json& j, const QualityScore& v);
void from_json(const nlohmann::json& j, QualityScore& v);
void to_json(nlohmann::json& j, const SelectedCot& v);
void from_json(const nlohmann::json& j, SelectedCot& v);
void to_json(nlohmann::json& j, const CuratedRecord& v);
void from_json(const nlohmann::json& j, CuratedRecord& v);

}  // namespace medcot
