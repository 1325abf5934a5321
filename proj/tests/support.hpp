#pragma once

// Shared fixtures for the test suites: scratch directories, corpus builders,
// a full mock agent ensemble, and scripted-reply pipelines that drive the
// orchestrator end to end without touching the network.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcot/config.hpp"
#include "medcot/core.hpp"
#include "medcot/gateway.hpp"
#include "medcot/mock_backend.hpp"
#include "medcot/stages.hpp"
#include "medcot/util.hpp"

namespace testkit {

inline medcot::RetryPolicy fast_policy(int max_attempts = 5) {
  medcot::RetryPolicy p;
  p.base = std::chrono::milliseconds(1);
  p.cap = std::chrono::milliseconds(4);
  p.max_attempts = max_attempts;
  return p;
}

inline const medcot::Gateway::Sleeper no_sleep{
    [](std::chrono::milliseconds) {}};

// Unique scratch directory under the system temp root, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    char name[64];
    std::snprintf(name, sizeof name, "medcot_%08x_%03u", rd(),
                  counter.fetch_add(1));
    dir_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path file(const std::string& name) const {
    return dir_ / name;
  }

 private:
  std::filesystem::path dir_;
};

inline std::string qid(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "q%03d", n);
  return buf;
}

inline medcot::Question make_question(int n,
                                      const std::string& source = "MedQA") {
  medcot::Question q;
  q.id = qid(n);
  q.source = source;
  q.stem = "Clinical vignette " + q.id + ": a patient presents with finding " +
           std::to_string(n) + ". What is the best next step?";
  q.options = {{"A", "Observation"},
               {"B", "Targeted therapy"},
               {"C", "Immediate surgery"},
               {"D", "Radiation"}};
  q.gold = "B";
  return q;
}

inline medcot::AgentSpec make_agent(const std::string& id,
                                    medcot::AgentRole role,
                                    const std::string& endpoint,
                                    int max_in_flight = 8) {
  medcot::AgentSpec a;
  a.id = id;
  a.endpoint = endpoint;
  a.model = "mock-" + id;
  a.role = role;
  a.max_in_flight = max_in_flight;
  return a;
}

// Nine-agent ensemble on three mock endpoints; retry delays shrunk so the
// failure-path tests stay fast.
inline medcot::PipelinePlan mock_plan(int workers = 2) {
  using medcot::AgentRole;
  medcot::PipelinePlan plan;
  plan.run.workers = workers;
  plan.retry.base = std::chrono::milliseconds(1);
  plan.retry.cap = std::chrono::milliseconds(4);
  plan.agents = {
      make_agent("gen_a", AgentRole::Generator, "mock://gen_a"),
      make_agent("gen_b", AgentRole::Generator, "mock://gen_b"),
      make_agent("gen_c", AgentRole::Generator, "mock://gen_c"),
      make_agent("verifier", AgentRole::Verifier, "mock://judge"),
      make_agent("ranker", AgentRole::Ranker, "mock://judge"),
      make_agent("refiner", AgentRole::Refiner, "mock://judge"),
      make_agent("summarizer", AgentRole::Summarizer, "mock://judge"),
      make_agent("strong_solver", AgentRole::DifficultGenerator,
                 "mock://premium"),
      make_agent("scorer", AgentRole::Scorer, "mock://premium"),
  };
  return plan;
}

// ---- scripted pipeline ------------------------------------------------------

// Generation slots are numbered 0..8 in generation order:
// gen_a x {0.7, 0.9, 1.0}, then gen_b, then gen_c.
inline std::string slot_agent(int slot) {
  static const char* agents[3] = {"gen_a", "gen_b", "gen_c"};
  return agents[slot / 3];
}
inline std::string slot_temp(int slot) {
  static const char* temps[3] = {"0.7", "0.9", "1.0"};
  return temps[slot % 3];
}
inline std::string slot_label(int slot) {
  return medcot::path_label(slot_agent(slot), slot % 3 + 1);
}
// The scripted generator reply opens with this marker, which the verifier
// rules key on (the verify prompt embeds the path text).
inline std::string path_marker(const std::string& id, int slot) {
  return "PATH(" + id + "|" + slot_agent(slot) + "|" + slot_temp(slot) + ")";
}

// `errors` error verdicts followed by correct ones, labels p1..p<total>.
inline std::vector<medcot::Verdict> make_verdicts(int errors, int total = 9) {
  std::vector<medcot::Verdict> out;
  for (int i = 0; i < total; ++i) {
    medcot::Verdict v;
    v.path_label = "p" + std::to_string(i + 1);
    if (i < errors) {
      v.verdict = medcot::VerdictKind::Error;
      v.reason = "step " + std::to_string(i + 1) + " is wrong";
    } else {
      v.verdict = medcot::VerdictKind::Correct;
    }
    out.push_back(std::move(v));
  }
  return out;
}

inline medcot::MockRule contains_rule(const std::string& agent,
                                      const std::string& marker,
                                      const std::string& reply) {
  medcot::MockRule r;
  r.agent = agent;
  r.contains = marker;
  r.reply = reply;
  return r;
}

struct PipelineFixture {
  std::vector<medcot::Question> questions;
  std::vector<medcot::MockRule> rules;
  std::map<std::string, medcot::Tier> expected_tiers;
  std::map<std::string, std::size_t> expected_selected;  // curated CoTs
};

// Scripts one question whose verification yields `error_count` errors on the
// first `error_count` generation slots, plus every downstream reply the
// resulting tier needs. Replies are pure functions of the prompt, so reruns
// reproduce byte-identical pipeline output.
inline void add_scripted_question(PipelineFixture& fx, int n, int error_count) {
  const std::string id = qid(n);
  const std::string stem_marker = "vignette " + id + ":";
  fx.questions.push_back(make_question(n));

  for (int g = 0; g < 3; ++g)
    fx.rules.push_back(contains_rule(
        slot_agent(3 * g), stem_marker,
        "PATH(" + id +
            "|$AGENT|$TEMP) The findings favor targeted therapy; answer B."));

  std::vector<std::string> correct_labels;
  for (int slot = 0; slot < 9; ++slot) {
    nlohmann::json verdict;
    if (slot < error_count) {
      verdict = {{"verdict", "Error"},
                 {"reason", "Trace " + slot_label(slot) + " of " + id +
                                " misreads the vignette."}};
    } else {
      verdict = {{"verdict", "Correct"}, {"reason", ""}};
      correct_labels.push_back(slot_label(slot));
    }
    fx.rules.push_back(
        contains_rule("verifier", path_marker(id, slot), verdict.dump()));
  }

  medcot::Tier tier = medcot::Tier::Difficult;
  if (error_count <= 4)
    tier = medcot::Tier::Easy;
  else if (error_count <= 7)
    tier = medcot::Tier::Medium;
  fx.expected_tiers[id] = tier;
  fx.expected_selected[id] = tier == medcot::Tier::Difficult ? 1 : 2;

  // The scripted ranker keeps the LAST two correct slots, so tests can tell
  // an honored ranker reply apart from default or fallback selection.
  if (correct_labels.size() >= 3) {
    nlohmann::json reasons = nlohmann::json::object();
    for (std::size_t i = 0; i + 2 < correct_labels.size(); ++i)
      reasons[correct_labels[i]] =
          "Sound but less complete than the chosen traces.";
    const nlohmann::json reply = {
        {"top2",
         {correct_labels[correct_labels.size() - 2], correct_labels.back()}},
        {"reasons", reasons}};
    fx.rules.push_back(contains_rule("ranker", stem_marker, reply.dump()));
  }

  if (tier == medcot::Tier::Medium)
    fx.rules.push_back(contains_rule(
        "refiner", stem_marker,
        "REFINED($FP8) corrected trace for " + id + "; the answer is B."));
  if (tier == medcot::Tier::Difficult)
    fx.rules.push_back(contains_rule(
        "strong_solver", id,
        "REGEN($FP8) strong-model trace for " + id + "; the answer is B."));

  fx.rules.push_back(contains_rule(
      "summarizer", id,
      "Summary($FP8): targeted therapy (B) is the best next step for " + id +
          "."));
}

// Ten questions per tier, error counts spanning each band.
inline PipelineFixture thirty_question_fixture() {
  PipelineFixture fx;
  static const int kEasy[] = {0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  static const int kMedium[] = {5, 6, 7, 5, 6, 7, 5, 6, 7, 5};
  static const int kDifficult[] = {8, 9, 8, 9, 8, 9, 8, 9, 8, 9};
  int n = 1;
  for (int e : kEasy) add_scripted_question(fx, n++, e);
  for (int e : kMedium) add_scripted_question(fx, n++, e);
  for (int e : kDifficult) add_scripted_question(fx, n++, e);
  return fx;
}

// Mock-backed bundle for driving individual stage operations.
struct StageRig {
  medcot::ScriptedMockBackend mock;
  medcot::Gateway gateway;
  medcot::PromptRegistry prompts;
  medcot::StageContext ctx;

  explicit StageRig(std::vector<medcot::MockRule> rules,
                    medcot::MockOptions options = {})
      : mock(std::move(rules), options),
        gateway(mock, fast_policy(), no_sleep),
        prompts(medcot::PromptRegistry::builtin()),
        ctx{gateway, prompts} {}
};

// ---- JSON-extraction reference oracle ------------------------------------------

// Brute force: after the same fence stripping, try every '{'..'}' substring
// in (start, end) order and return the first strict-parsed object carrying
// all required keys. Mirrors the ExtractError contract.
inline nlohmann::json oracle_extract(std::string_view reply,
                                     const std::vector<std::string>& keys) {
  std::string text;
  if (reply.find("```") == std::string_view::npos) {
    text.assign(reply);
  } else {
    for (const auto& line : medcot::split_lines(reply)) {
      if (medcot::starts_with(medcot::trim(line), "```")) continue;
      text += line;
      text += '\n';
    }
  }

  bool saw_object = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    for (std::size_t j = i + 1; j < text.size(); ++j) {
      if (text[j] != '}') continue;
      const auto candidate = nlohmann::json::parse(
          text.substr(i, j - i + 1), nullptr, /*allow_exceptions=*/false);
      if (candidate.is_discarded() || !candidate.is_object()) continue;
      saw_object = true;
      bool has_all = true;
      for (const auto& k : keys)
        if (!candidate.contains(k)) {
          has_all = false;
          break;
        }
      if (has_all) return candidate;
      break;  // a longer span from this '{' cannot parse
    }
  }
  throw medcot::ExtractError(saw_object
                                 ? medcot::ExtractError::Kind::MissingKeys
                                 : medcot::ExtractError::Kind::NoObject,
                             "oracle: no matching object");
}

// One randomized prose-wrapped extraction case. When has_target is set the
// reply embeds exactly one object carrying the "verdict" key (possibly
// fenced), surrounded by brace-laden prose and key-less decoy objects.
struct ExtractCase {
  std::string reply;
  bool has_target{false};
  nlohmann::json target;
};

inline ExtractCase random_extract_case(std::mt19937& rng) {
  static const std::vector<std::string> kProse{
      "Sure, here is the object you asked for: ",
      "Let me think { step by step. ",
      "The answer follows } shortly. ",
      "{oops, an unfinished thought ",
      "Final answer below.\n",
      "Note: braces like {} are tricky. ",
      "(end of analysis) "};
  static const std::vector<std::string> kStrings{
      "plain", "", "}{", "brace } inside", "quote \" inside",
      "back\\slash", "{\"fake\": 1}", "multi\nline"};

  auto pick = [&rng](const std::vector<std::string>& pool) {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
  };
  auto coin = [&rng](double p) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(rng) < p;
  };

  nlohmann::json target{{"verdict", coin(0.5) ? "Correct" : "Error"}};
  if (coin(0.7)) target["reason"] = pick(kStrings);
  if (coin(0.3)) target["extra"] = nlohmann::json{{"k", pick(kStrings)}};
  if (coin(0.3)) target["n"] = 7;

  ExtractCase c;
  std::string out = pick(kProse);
  if (coin(0.5)) {
    const nlohmann::json decoy{{"note", pick(kStrings)}};
    out += decoy.dump();
    out += pick(kProse);
  }
  c.has_target = coin(0.9);
  if (c.has_target) {
    const bool fence = coin(0.3);
    if (fence) out += "\n```json\n";
    out += target.dump();
    if (fence) out += "\n```";
    c.target = target;
  }
  out += "\n";
  out += pick(kProse);
  c.reply = std::move(out);
  return c;
}

// ---- file emitters (CLI-facing formats) ---------------------------------------

inline void write_script_file(const std::filesystem::path& path,
                              const std::vector<medcot::MockRule>& rules,
                              bool strict = true) {
  std::string text;
  nlohmann::json options = {{"options", {{"strict", strict}}}};
  text += options.dump() + "\n";
  for (const auto& r : rules) {
    nlohmann::json j = r;
    text += j.dump() + "\n";
  }
  medcot::write_file(path, text);
}

inline void write_plan_config(const std::filesystem::path& path,
                              int workers = 2, bool scoring = false) {
  nlohmann::json agents = nlohmann::json::array();
  auto agent = [&agents](const std::string& id, const std::string& role,
                         const std::string& endpoint) {
    agents.push_back({{"id", id},
                      {"endpoint", endpoint},
                      {"model", "mock-" + id},
                      {"role", role},
                      {"max_in_flight", 8}});
  };
  agent("gen_a", "generator", "mock://gen_a");
  agent("gen_b", "generator", "mock://gen_b");
  agent("gen_c", "generator", "mock://gen_c");
  agent("verifier", "verifier", "mock://judge");
  agent("ranker", "ranker", "mock://judge");
  agent("refiner", "refiner", "mock://judge");
  agent("summarizer", "summarizer", "mock://judge");
  agent("strong_solver", "difficult_generator", "mock://premium");
  agent("scorer", "scorer", "mock://premium");

  const nlohmann::json config = {
      {"run",
       {{"workers", workers},
        {"scoring", scoring},
        {"medium_reverify", false},
        {"difficult_paths", 1}}},
      {"retry",
       {{"base_ms", 1}, {"cap_ms", 4}, {"max_attempts", 5}, {"jitter", true}}},
      {"agents", agents}};
  medcot::write_file(path, config.dump(2) + "\n");
}

inline std::string read_text(const std::filesystem::path& path) {
  return medcot::read_file(path);
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  medcot::write_file(path, text);
}

inline std::vector<nlohmann::json> read_jsonl(
    const std::filesystem::path& path) {
  std::vector<nlohmann::json> rows;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (medcot::trim(line).empty()) continue;
    rows.push_back(nlohmann::json::parse(line));
  }
  return rows;
}

}  // namespace testkit
