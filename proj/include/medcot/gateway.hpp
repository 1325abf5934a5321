#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace medcot {

enum class AgentRole {
  Generator,
  Verifier,
  Ranker,
  Refiner,
  Summarizer,
  Scorer,
  DifficultGenerator
};

std::string to_string(AgentRole role);
AgentRole agent_role_from_string(const std::string& s);

struct SamplingParams {
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;
};

// Request-level defaults when neither the agent nor the caller overrides.
inline constexpr double kDefaultTemperature = 0.6;
inline constexpr double kDefaultTopP = 0.95;
inline constexpr int kDefaultMaxTokens = 1024;

struct AgentSpec {
  std::string id;
  std::string endpoint;  // base URL of an OpenAI-compatible service
  std::string model;
  AgentRole role{AgentRole::Generator};
  SamplingParams sampling;
  // Generator ensemble temperatures; one path is produced per value.
  std::vector<double> temperatures{0.7, 0.9, 1.0};
  std::string api_key_env;  // defaults to <AGENT_ID>_API_KEY (upper-cased)
  int max_in_flight{4};     // per-endpoint concurrency cap
};

// Environment variable that holds this agent's API key.
std::string api_key_env_name(const AgentSpec& agent);

struct ChatRequest {
  std::string model;
  std::string prompt;  // sent as a single user message
  double temperature{kDefaultTemperature};
  double top_p{kDefaultTopP};
  int max_tokens{kDefaultMaxTokens};
};

struct BackendReply {
  enum class Status { Ok, Transient, Permanent };
  Status status{Status::Permanent};
  std::string text;
  long tokens_in{0};
  long tokens_out{0};
  int http_status{0};
  std::string error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendReply send(const AgentSpec& agent, const ChatRequest& req) = 0;
};

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  std::chrono::milliseconds cap{60000};
  int max_attempts{5};
  bool jitter{true};
};

struct CompletionResult {
  std::string text;
  long tokens_in{0};
  long tokens_out{0};
  std::chrono::milliseconds latency{0};
  int attempts{1};
  std::string agent_id;
};

struct AgentUsage {
  long calls{0};
  long failures{0};
  long tokens_in{0};
  long tokens_out{0};
};

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thread-safe front door for all agent calls: retries transient failures with
// exponential backoff + jitter, enforces per-endpoint in-flight caps, and
// keeps a per-agent token/call ledger (failed attempts included).
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(Backend& backend, RetryPolicy policy = {},
                   Sleeper sleeper = nullptr, std::uint64_t jitter_seed = 0);

  // Throws GatewayError on permanent failure or retry exhaustion.
  CompletionResult complete(const AgentSpec& agent, const std::string& prompt,
                            const SamplingParams& overrides = {});

  std::map<std::string, AgentUsage> usage() const;
  long total_calls() const;
  long total_tokens_in() const;
  long total_tokens_out() const;

 private:
  struct EndpointGate {
    std::mutex m;
    std::condition_variable cv;
    int in_flight{0};
    int limit{1};
  };
  EndpointGate& gate_for(const AgentSpec& agent);
  std::chrono::milliseconds backoff_delay(int attempt);

  Backend& backend_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  mutable std::mutex mu_;
  std::map<std::string, AgentUsage> usage_;
  std::map<std::string, std::unique_ptr<EndpointGate>> gates_;
  std::mt19937_64 rng_;
  std::mutex rng_mu_;
};

// FNV-1a 64 hex digest of a prompt; the key used by scripted mock rules.
std::string prompt_fingerprint(std::string_view prompt);

}  // namespace medcot
