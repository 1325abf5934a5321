#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcot/gateway.hpp"

namespace medcot {

// One scripted reply rule. A rule matches a call when the agent id matches
// (exactly, or "*") and either the prompt's FNV-1a64 fingerprint equals
// `fingerprint` or the prompt contains `contains`. Fingerprint rules are
// checked first and must be unique per (agent, fingerprint); contains-rules
// are checked in script order.
//
// Reply text supports deterministic substitutions:
//   $AGENT  -> calling agent id
//   $TEMP   -> request temperature, one decimal (e.g. "0.9")
//   $FP8    -> first 8 hex chars of the prompt fingerprint
//   $PROMPT -> the full prompt (echo)
//
// fail_times > 0 makes the first N matching calls fail with fail_status
// (transient unless `permanent`), after which the reply is served.
struct MockRule {
  std::string agent{"*"};
  std::optional<std::string> fingerprint;
  std::optional<std::string> contains;
  std::string reply;
  int fail_times{0};
  int fail_status{429};
  bool permanent{false};
};

struct MockOptions {
  bool strict{false};           // unmatched call -> permanent error
  std::string default_reply;    // served when no rule matches (non-strict)
  int latency_ms{0};            // per-call dwell, for concurrency tests
};

// Deterministic offline stand-in for live endpoints; thread-safe, counts
// calls, and tracks the concurrency high-water mark per endpoint.
class ScriptedMockBackend : public Backend {
 public:
  ScriptedMockBackend() = default;
  ScriptedMockBackend(std::vector<MockRule> rules, MockOptions options);

  // Script file: JSONL of MockRule objects; a line carrying "options"
  // configures MockOptions instead.
  static ScriptedMockBackend from_file(const std::filesystem::path& path);
  // Same parse, for callers that construct the backend elsewhere (the class
  // itself is pinned in place by its mutex).
  static std::pair<std::vector<MockRule>, MockOptions> parse_script(
      const std::filesystem::path& path);

  BackendReply send(const AgentSpec& agent, const ChatRequest& req) override;

  long total_calls() const;
  long calls_for(const std::string& agent_id) const;
  int max_concurrent() const;

 private:
  struct RuleState {
    MockRule rule;
    std::atomic<int> failures_served{0};
  };
  std::string substitute(const std::string& reply, const AgentSpec& agent,
                         const ChatRequest& req) const;

  std::vector<std::unique_ptr<RuleState>> rules_;
  std::map<std::pair<std::string, std::string>, RuleState*> by_fingerprint_;
  MockOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, long> calls_;
  int in_flight_{0};
  int max_concurrent_{0};
};

void to_json(nlohmann::json& j, const MockRule& r);
void from_json(const nlohmann::json& j, MockRule& r);

}  // namespace medcot
