#include "medcot/stages.hpp"

#include <algorithm>
#include <stdexcept>

#include "medcot/util.hpp"

namespace medcot {

std::string cot_block(const std::vector<ReasoningPath>& paths) {
  std::string out;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i) out += "\n\n";
    out += "[" + paths[i].label + "]\n" + paths[i].text;
  }
  return out;
}

std::string error_reasons_block(const std::vector<std::string>& reasons) {
  std::string out;
  for (const auto& r : reasons) {
    if (r == kUnparseableVerifierReason) continue;  // bookkeeping, not feedback
    if (!out.empty()) out += '\n';
    out += r;
  }
  if (out.empty()) out = kNoErrorReasonsPlaceholder;
  return out;
}

std::map<std::string, std::string> generate_bindings(const Question& q) {
  return {{"question", q.stem}, {"options", options_block(q)}};
}

std::map<std::string, std::string> verify_bindings(const Question& q,
                                                   const ReasoningPath& p) {
  return {{"question", q.stem},
          {"options_str", options_block(q)},
          {"answer", answer_display(q)},
          {"cot_content", p.text}};
}

void to_json(nlohmann::json& j, const AbsentSlot& v) {
  j = {{"label", v.label},
       {"agent_id", v.agent_id},
       {"temperature", v.temperature},
       {"error", v.error}};
}

void from_json(const nlohmann::json& j, AbsentSlot& v) {
  j.at("label").get_to(v.label);
  j.at("agent_id").get_to(v.agent_id);
  j.at("temperature").get_to(v.temperature);
  j.at("error").get_to(v.error);
}

GenerationResult generate_paths(StageContext& ctx, const Question& q,
                                const std::vector<AgentSpec>& generators) {
  if (generators.empty())
    throw std::runtime_error("generate_paths needs at least one generator");
  const std::string prompt =
      ctx.prompts.render(TemplateId::Generate, generate_bindings(q));

  GenerationResult result;
  for (const auto& agent : generators) {
    for (std::size_t k = 0; k < agent.temperatures.size(); ++k) {
      const double temperature = agent.temperatures[k];
      const std::string label = path_label(agent.id, static_cast<int>(k) + 1);
      SamplingParams overrides;
      overrides.temperature = temperature;
      try {
        CompletionResult res = ctx.gateway.complete(agent, prompt, overrides);
        ReasoningPath path;
        path.question_id = q.id;
        path.agent_id = agent.id;
        path.temperature = temperature;
        path.label = label;
        path.text = std::move(res.text);
        result.paths.push_back(std::move(path));
      } catch (const GatewayError& e) {
        result.absent.push_back({label, agent.id, temperature, e.what()});
      }
    }
  }
  if (result.paths.empty())
    throw std::runtime_error("all generation calls failed for question " +
                             q.id);
  return result;
}

Verdict verify_path(StageContext& ctx, const Question& q,
                    const ReasoningPath& p, const AgentSpec& verifier) {
  const std::string prompt =
      ctx.prompts.render(TemplateId::Verify, verify_bindings(q, p));

  Verdict verdict;
  verdict.path_label = p.label;
  for (int round = 0; round < 2; ++round) {
    const std::string ask = round == 0 ? prompt : prompt + kReaskSuffix;
    CompletionResult res = ctx.gateway.complete(verifier, ask);
    nlohmann::json obj;
    try {
      obj = extract_json(res.text, {"verdict"});
    } catch (const ExtractError&) {
      continue;
    }
    if (!obj.at("verdict").is_string()) continue;
    const std::string value = trim(obj.at("verdict").get<std::string>());
    if (value != "Correct" && value != "Error") continue;
    verdict.verdict = verdict_kind_from_string(value);
    if (obj.contains("reason") && obj.at("reason").is_string())
      verdict.reason = obj.at("reason").get<std::string>();
    return verdict;
  }
  verdict.verdict = VerdictKind::Error;
  verdict.reason = kUnparseableVerifierReason;
  return verdict;
}

std::array<std::string, 2> rank_fallback(const std::vector<std::string>& labels) {
  if (labels.size() < 2)
    throw std::runtime_error("fallback selection needs at least two labels");
  std::vector<std::string> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  return {sorted[0], sorted[1]};
}

RankOutcome rank_paths(StageContext& ctx, const Question& q,
                       const std::vector<ReasoningPath>& correct,
                       const AgentSpec& ranker) {
  if (correct.size() < 2)
    throw std::runtime_error(
        "rank_paths needs at least two correct paths (question " + q.id +
        " was routed to the wrong tier)");

  std::vector<std::string> labels;
  labels.reserve(correct.size());
  for (const auto& p : correct) labels.push_back(p.label);

  RankOutcome outcome;
  if (correct.size() == 2) {
    // Chosen by default; no agent call.
    outcome.top2 = {labels[0], labels[1]};
    return outcome;
  }

  std::vector<std::string> option_labels;
  for (const auto& opt : q.options) option_labels.push_back(opt.label);
  const PromptTemplate tmpl =
      rank_template_for(option_labels, ctx.prompts.get(TemplateId::Rank));

  std::map<std::string, std::string> bindings{
      {"question", q.stem},
      {"answer", answer_display(q)},
      {"cot_block", cot_block(correct)}};
  for (const auto& opt : q.options) {
    std::string name = "opt";
    for (char c : opt.label)
      name += (std::isalnum(static_cast<unsigned char>(c)) || c == '_') ? c : '_';
    bindings[name] = opt.text;
  }
  const std::string prompt = render_template(tmpl, bindings);

  auto valid_top2 = [&](const nlohmann::json& obj,
                        std::array<std::string, 2>& out) {
    if (!obj.contains("top2") || !obj.at("top2").is_array() ||
        obj.at("top2").size() != 2)
      return false;
    const auto& arr = obj.at("top2");
    if (!arr.at(0).is_string() || !arr.at(1).is_string()) return false;
    out = {arr.at(0).get<std::string>(), arr.at(1).get<std::string>()};
    if (out[0] == out[1]) return false;
    auto known = [&](const std::string& l) {
      return std::find(labels.begin(), labels.end(), l) != labels.end();
    };
    return known(out[0]) && known(out[1]);
  };

  for (int round = 0; round < 2; ++round) {
    const std::string ask = round == 0 ? prompt : prompt + kReaskSuffix;
    CompletionResult res = ctx.gateway.complete(ranker, ask);
    nlohmann::json obj;
    try {
      obj = extract_json(res.text, {"top2"});
    } catch (const ExtractError&) {
      continue;
    }
    std::array<std::string, 2> top2;
    if (!valid_top2(obj, top2)) continue;
    outcome.top2 = top2;
    // Normalize reasons to cover exactly the non-selected labels.
    nlohmann::json reasons = obj.value("reasons", nlohmann::json::object());
    if (!reasons.is_object()) reasons = nlohmann::json::object();
    for (const auto& label : labels) {
      if (label == top2[0] || label == top2[1]) continue;
      std::string reason;
      if (reasons.contains(label) && reasons.at(label).is_string())
        reason = reasons.at(label).get<std::string>();
      outcome.reasons[label] = reason;
    }
    return outcome;
  }

  outcome.top2 = rank_fallback(labels);
  outcome.fallback_used = true;
  return outcome;
}

ReasoningPath refine_path(StageContext& ctx, const Question& q,
                          const ReasoningPath& p,
                          const std::vector<std::string>& error_reasons,
                          const AgentSpec& refiner) {
  if (error_reasons.empty())
    throw std::invalid_argument("refine_path requires error reasons");

  const std::map<std::string, std::string> bindings{
      {"question", q.stem},
      {"options", options_block(q)},
      {"answer", answer_display(q)},
      {"original_cot", p.text},
      {"error_reasons", error_reasons_block(error_reasons)}};
  const std::string prompt = ctx.prompts.render(TemplateId::Refine, bindings);
  CompletionResult res = ctx.gateway.complete(refiner, prompt);
  if (trim(res.text).empty())
    throw std::runtime_error("refiner returned an empty reply for " + q.id);

  ReasoningPath refined;
  refined.question_id = q.id;
  refined.agent_id = refiner.id;
  refined.temperature = refiner.sampling.temperature.value_or(kDefaultTemperature);
  refined.label = p.label;  // linked to the original path
  refined.text = std::move(res.text);
  return refined;
}

RegenerationResult regenerate_path(StageContext& ctx, const Question& q,
                                   const ReasoningPath* seed_correct,
                                   const std::vector<std::string>& error_reasons,
                                   const AgentSpec& strong) {
  RegenerationResult result;
  if (seed_correct) {
    result.path = refine_path(ctx, q, *seed_correct, error_reasons, strong);
    result.provenance = Provenance::Refined;
    return result;
  }
  const std::string prompt =
      ctx.prompts.render(TemplateId::Generate, generate_bindings(q));
  CompletionResult res = ctx.gateway.complete(strong, prompt);
  if (trim(res.text).empty())
    throw std::runtime_error("regeneration returned an empty reply for " +
                             q.id);
  result.path.question_id = q.id;
  result.path.agent_id = strong.id;
  result.path.temperature =
      strong.sampling.temperature.value_or(kDefaultTemperature);
  result.path.label = strong.id + "_COT1";
  result.path.text = std::move(res.text);
  result.provenance = Provenance::Regenerated;
  return result;
}

std::string summarize(StageContext& ctx, const std::string& cot,
                      const AgentSpec& summarizer) {
  if (cot.empty())
    throw std::invalid_argument("summarize requires a non-empty cot");
  const std::string prompt =
      ctx.prompts.render(TemplateId::Summarize, {{"cot", cot}});
  CompletionResult res = ctx.gateway.complete(summarizer, prompt);
  if (trim(res.text).empty())
    throw std::runtime_error("summarizer returned an empty reply");
  return res.text;
}

QualityScore score_response(StageContext& ctx, const Question& q,
                            const std::string& response,
                            const AgentSpec& scorer) {
  const std::map<std::string, std::string> bindings{{"question", q.stem},
                                                    {"response", response}};
  const std::string prompt = ctx.prompts.render(TemplateId::Score, bindings);

  std::string failure = "unparseable scorer reply";
  for (int round = 0; round < 2; ++round) {
    const std::string ask = round == 0 ? prompt : prompt + kReaskSuffix;
    CompletionResult res = ctx.gateway.complete(scorer, ask);
    nlohmann::json obj;
    try {
      obj = extract_json(res.text, {"score"});
    } catch (const ExtractError& e) {
      failure = e.what();
      continue;
    }
    if (!obj.at("score").is_number_integer()) {
      failure = "score is not an integer";
      continue;
    }
    const int score = obj.at("score").get<int>();
    if (score < 1 || score > 10) {
      failure = "score " + std::to_string(score) + " outside 1..10";
      continue;
    }
    QualityScore qs;
    qs.score = score;
    if (obj.contains("justification") && obj.at("justification").is_string())
      qs.justification = obj.at("justification").get<std::string>();
    return qs;
  }
  throw ScoreError("scoring failed after re-ask: " + failure);
}

}  // namespace medcot
