#include "medcot/core.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "medcot/util.hpp"

namespace medcot {

bool source_tag_valid(std::string_view source) {
  if (source == "MedQA" || source == "MedMCQA" || source == "PubMedQA")
    return true;
  return starts_with(source, "MMLU-") && source.size() > 5;
}

static std::size_t expected_option_count(std::string_view source) {
  return source == "PubMedQA" ? 3 : 4;
}

void validate_question(const Question& q) {
  if (q.id.empty()) throw std::runtime_error("question id is empty");
  if (!source_tag_valid(q.source))
    throw std::runtime_error("unknown source tag: " + q.source);
  if (q.stem.empty()) throw std::runtime_error("question stem is empty");
  if (q.options.empty()) throw std::runtime_error("options list is empty");
  if (q.options.size() != expected_option_count(q.source))
    throw std::runtime_error("expected " +
                             std::to_string(expected_option_count(q.source)) +
                             " options for source " + q.source + ", got " +
                             std::to_string(q.options.size()));
  std::set<std::string> labels;
  for (const auto& opt : q.options) {
    if (opt.label.empty()) throw std::runtime_error("option label is empty");
    if (!labels.insert(opt.label).second)
      throw std::runtime_error("duplicate option label: " + opt.label);
  }
  if (labels.count(q.gold) == 0)
    throw std::runtime_error("answer label '" + q.gold +
                             "' matches no option");
}

std::string options_block(const Question& q) {
  std::string out;
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    if (i) out += '\n';
    out += q.options[i].label + ") " + q.options[i].text;
  }
  return out;
}

std::string answer_display(const Question& q) {
  for (const auto& opt : q.options)
    if (opt.label == q.gold) return opt.label + ") " + opt.text;
  throw std::runtime_error("answer label '" + q.gold + "' matches no option");
}

std::string path_label(const std::string& agent_id, int k) {
  return agent_id + "_COT" + std::to_string(k);
}

std::string to_string(VerdictKind v) {
  return v == VerdictKind::Correct ? "Correct" : "Error";
}

VerdictKind verdict_kind_from_string(const std::string& s) {
  if (s == "Correct") return VerdictKind::Correct;
  if (s == "Error") return VerdictKind::Error;
  throw std::runtime_error("unknown verdict: " + s);
}

std::string to_string(Tier t) {
  switch (t) {
    case Tier::Easy: return "Easy";
    case Tier::Medium: return "Medium";
    case Tier::Difficult: return "Difficult";
  }
  throw std::runtime_error("unknown tier value");
}

Tier tier_from_string(const std::string& s) {
  if (s == "Easy") return Tier::Easy;
  if (s == "Medium") return Tier::Medium;
  if (s == "Difficult") return Tier::Difficult;
  throw std::runtime_error("unknown tier: " + s);
}

TierAssignment classify_tier(const std::string& question_id,
                             const std::vector<Verdict>& verdicts,
                             int expected_total,
                             const TierThresholds& thresholds) {
  if (expected_total <= 0)
    throw std::runtime_error("expected_total must be positive");
  if (static_cast<int>(verdicts.size()) > expected_total)
    throw std::runtime_error(
        "more verdicts than expected: " + std::to_string(verdicts.size()) +
        " > " + std::to_string(expected_total));
  std::set<std::string> labels;
  int correct = 0;
  for (const auto& v : verdicts) {
    if (!labels.insert(v.path_label).second)
      throw std::runtime_error("duplicate path label: " + v.path_label);
    if (v.verdict == VerdictKind::Correct) ++correct;
  }
  // Missing verdicts (failed generations) count as errors: conservative
  // routing toward heavier curation.
  TierAssignment ta;
  ta.question_id = question_id;
  ta.total_paths = expected_total;
  ta.correct_count = correct;
  ta.error_count = expected_total - correct;
  if (ta.error_count <= thresholds.easy_max_errors)
    ta.tier = Tier::Easy;
  else if (ta.error_count <= thresholds.medium_max_errors)
    ta.tier = Tier::Medium;
  else
    ta.tier = Tier::Difficult;
  return ta;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Original: return "original";
    case Provenance::Refined: return "refined";
    case Provenance::Regenerated: return "regenerated";
  }
  throw std::runtime_error("unknown provenance value");
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "original") return Provenance::Original;
  if (s == "refined") return Provenance::Refined;
  if (s == "regenerated") return Provenance::Regenerated;
  throw std::runtime_error("unknown provenance: " + s);
}

void validate_record(const CuratedRecord& rec) {
  if (rec.selected.empty() || rec.selected.size() > 2)
    throw std::runtime_error("curated record must carry 1 or 2 selected texts, has " +
                             std::to_string(rec.selected.size()));
  for (const auto& sel : rec.selected) {
    if (sel.text.empty())
      throw std::runtime_error("selected text is empty for " + rec.question_id);
    if (sel.summary.empty())
      throw std::runtime_error("selected text lacks a summary for " +
                               rec.question_id);
  }
}

// ---- corpus ingestion ------------------------------------------------------

static Question parse_question_row(const nlohmann::json& j,
                                   const std::string& source) {
  Question q;
  q.id = j.at("id").get<std::string>();
  q.source = j.at("source").get<std::string>();
  if (q.source != source)
    throw std::runtime_error("row source '" + q.source +
                             "' does not match file source '" + source + "'");
  q.stem = j.at("question").get<std::string>();
  for (const auto& o : j.at("options")) {
    Option opt;
    opt.label = o.at("label").get<std::string>();
    opt.text = o.at("text").get<std::string>();
    q.options.push_back(std::move(opt));
  }
  q.gold = j.at("answer").get<std::string>();
  validate_question(q);
  return q;
}

LoadResult load_questions(const std::filesystem::path& path,
                          const std::string& source) {
  if (!source_tag_valid(source))
    throw std::runtime_error("unknown source tag: " + source);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path.string());

  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // trailing blank
      result.rejects.push_back({line_no, "empty line"});
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      result.questions.push_back(parse_question_row(j, source));
    } catch (const std::exception& e) {
      result.rejects.push_back({line_no, e.what()});
    }
  }
  if (result.questions.empty())
    throw std::runtime_error("zero valid rows in corpus file: " +
                             path.string());
  return result;
}

void write_questions(const std::filesystem::path& path,
                     const std::vector<Question>& questions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  for (const auto& q : questions) {
    nlohmann::json j = q;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_rejects(const std::filesystem::path& path,
                   const std::vector<RejectedRow>& rejects) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  for (const auto& r : rejects) {
    nlohmann::json j{{"line", r.line}, {"error", r.error}};
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string stable_question_id(const std::string& source,
                               const std::string& split, std::size_t index) {
  return fnv1a64_hex(source + "\x1f" + split + "\x1f" + std::to_string(index));
}

// ---- JSON bindings ---------------------------------------------------------

void to_json(nlohmann::json& j, const Option& v) {
  j = {{"label", v.label}, {"text", v.text}};
}
void from_json(const nlohmann::json& j, Option& v) {
  j.at("label").get_to(v.label);
  j.at("text").get_to(v.text);
}

void to_json(nlohmann::json& j, const Question& v) {
  j = {{"id", v.id},
       {"source", v.source},
       {"question", v.stem},
       {"options", v.options},
       {"answer", v.gold}};
}
void from_json(const nlohmann::json& j, Question& v) {
  j.at("id").get_to(v.id);
  j.at("source").get_to(v.source);
  j.at("question").get_to(v.stem);
  j.at("options").get_to(v.options);
  j.at("answer").get_to(v.gold);
}

void to_json(nlohmann::json& j, const ReasoningPath& v) {
  j = {{"question_id", v.question_id},
       {"agent_id", v.agent_id},
       {"temperature", v.temperature},
       {"label", v.label},
       {"text", v.text}};
}
void from_json(const nlohmann::json& j, ReasoningPath& v) {
  j.at("question_id").get_to(v.question_id);
  j.at("agent_id").get_to(v.agent_id);
  j.at("temperature").get_to(v.temperature);
  j.at("label").get_to(v.label);
  j.at("text").get_to(v.text);
}

void to_json(nlohmann::json& j, const Verdict& v) {
  j = {{"path_label", v.path_label},
       {"verdict", to_string(v.verdict)},
       {"reason", v.reason}};
}
void from_json(const nlohmann::json& j, Verdict& v) {
  j.at("path_label").get_to(v.path_label);
  v.verdict = verdict_kind_from_string(j.at("verdict").get<std::string>());
  j.at("reason").get_to(v.reason);
}

void to_json(nlohmann::json& j, const TierAssignment& v) {
  j = {{"question_id", v.question_id},
       {"total_paths", v.total_paths},
       {"correct_count", v.correct_count},
       {"error_count", v.error_count},
       {"tier", to_string(v.tier)}};
}
void from_json(const nlohmann::json& j, TierAssignment& v) {
  j.at("question_id").get_to(v.question_id);
  j.at("total_paths").get_to(v.total_paths);
  j.at("correct_count").get_to(v.correct_count);
  j.at("error_count").get_to(v.error_count);
  v.tier = tier_from_string(j.at("tier").get<std::string>());
}

void to_json(nlohmann::json& j, const QualityScore& v) {
  j = {{"score", v.score}, {"justification", v.justification}};
}
void from_json(const nlohmann::json& j, QualityScore& v) {
  j.at("score").get_to(v.score);
  j.at("justification").get_to(v.justification);
}

void to_json(nlohmann::json& j, const SelectedCot& v) {
  j = {{"label", v.label},
       {"text", v.text},
       {"provenance", to_string(v.provenance)},
       {"summary", v.summary}};
  if (v.pre_score) j["pre_score"] = *v.pre_score;
  if (v.post_score) j["post_score"] = *v.post_score;
}
void from_json(const nlohmann::json& j, SelectedCot& v) {
  j.at("label").get_to(v.label);
  j.at("text").get_to(v.text);
  v.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  j.at("summary").get_to(v.summary);
  if (j.contains("pre_score")) v.pre_score = j.at("pre_score").get<QualityScore>();
  if (j.contains("post_score"))
    v.post_score = j.at("post_score").get<QualityScore>();
}

void to_json(nlohmann::json& j, const CuratedRecord& v) {
  j = {{"question_id", v.question_id},
       {"tier", to_string(v.tier)},
       {"selected", v.selected},
       {"ranker_reasons", v.ranker_reasons}};
}
void from_json(const nlohmann::json& j, CuratedRecord& v) {
  j.at("question_id").get_to(v.question_id);
  v.tier = tier_from_string(j.at("tier").get<std::string>());
  j.at("selected").get_to(v.selected);
  j.at("ranker_reasons").get_to(v.ranker_reasons);
}

}  // namespace medcot
