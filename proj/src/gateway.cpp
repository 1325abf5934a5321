#include "medcot/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include "medcot/util.hpp"

namespace medcot {

std::string to_string(AgentRole role) {
  switch (role) {
    case AgentRole::Generator: return "generator";
    case AgentRole::Verifier: return "verifier";
    case AgentRole::Ranker: return "ranker";
    case AgentRole::Refiner: return "refiner";
    case AgentRole::Summarizer: return "summarizer";
    case AgentRole::Scorer: return "scorer";
    case AgentRole::DifficultGenerator: return "difficult_generator";
  }
  throw std::runtime_error("unknown agent role value");
}

AgentRole agent_role_from_string(const std::string& s) {
  if (s == "generator") return AgentRole::Generator;
  if (s == "verifier") return AgentRole::Verifier;
  if (s == "ranker") return AgentRole::Ranker;
  if (s == "refiner") return AgentRole::Refiner;
  if (s == "summarizer") return AgentRole::Summarizer;
  if (s == "scorer") return AgentRole::Scorer;
  if (s == "difficult_generator") return AgentRole::DifficultGenerator;
  throw std::runtime_error("unknown agent role: " + s);
}

std::string api_key_env_name(const AgentSpec& agent) {
  if (!agent.api_key_env.empty()) return agent.api_key_env;
  std::string name = agent.id;
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) {
    return std::isalnum(c) ? std::toupper(c) : '_';
  });
  return name + "_API_KEY";
}

Gateway::Gateway(Backend& backend, RetryPolicy policy, Sleeper sleeper,
                 std::uint64_t jitter_seed)
    : backend_(backend),
      policy_(policy),
      sleeper_(std::move(sleeper)),
      rng_(jitter_seed ? jitter_seed : std::random_device{}()) {
  if (!sleeper_)
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Gateway::EndpointGate& Gateway::gate_for(const AgentSpec& agent) {
  std::lock_guard lock(mu_);
  auto it = gates_.find(agent.endpoint);
  if (it == gates_.end()) {
    auto gate = std::make_unique<EndpointGate>();
    gate->limit = std::max(1, agent.max_in_flight);
    it = gates_.emplace(agent.endpoint, std::move(gate)).first;
  }
  return *it->second;
}

std::chrono::milliseconds Gateway::backoff_delay(int attempt) {
  // attempt is 1-based; delay before retry k is base * 2^(k-1), capped.
  double ms = static_cast<double>(policy_.base.count());
  for (int i = 1; i < attempt; ++i) ms *= 2.0;
  ms = std::min(ms, static_cast<double>(policy_.cap.count()));
  if (policy_.jitter) {
    std::lock_guard lock(rng_mu_);
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    ms *= dist(rng_);
    ms = std::min(ms, static_cast<double>(policy_.cap.count()));
  }
  return std::chrono::milliseconds(static_cast<long>(ms));
}

CompletionResult Gateway::complete(const AgentSpec& agent,
                                   const std::string& prompt,
                                   const SamplingParams& overrides) {
  ChatRequest req;
  req.model = agent.model;
  req.prompt = prompt;
  req.temperature = overrides.temperature.value_or(
      agent.sampling.temperature.value_or(kDefaultTemperature));
  req.top_p = overrides.top_p.value_or(agent.sampling.top_p.value_or(kDefaultTopP));
  req.max_tokens = overrides.max_tokens.value_or(
      agent.sampling.max_tokens.value_or(kDefaultMaxTokens));

  EndpointGate& gate = gate_for(agent);
  {
    std::unique_lock lock(gate.m);
    gate.cv.wait(lock, [&] { return gate.in_flight < gate.limit; });
    ++gate.in_flight;
  }
  struct GateRelease {
    EndpointGate& g;
    ~GateRelease() {
      {
        std::lock_guard lock(g.m);
        --g.in_flight;
      }
      g.cv.notify_one();
    }
  } release{gate};

  const auto start = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
    BackendReply reply = backend_.send(agent, req);
    {
      std::lock_guard lock(mu_);
      auto& u = usage_[agent.id];
      ++u.calls;
      u.tokens_in += reply.tokens_in;
      u.tokens_out += reply.tokens_out;
      if (reply.status != BackendReply::Status::Ok) ++u.failures;
    }
    if (reply.status == BackendReply::Status::Ok) {
      CompletionResult res;
      res.text = std::move(reply.text);
      res.tokens_in = reply.tokens_in;
      res.tokens_out = reply.tokens_out;
      res.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      res.attempts = attempt;
      res.agent_id = agent.id;
      return res;
    }
    last_error = reply.error.empty()
                     ? "status " + std::to_string(reply.http_status)
                     : reply.error;
    if (reply.status == BackendReply::Status::Permanent)
      throw GatewayError("agent '" + agent.id +
                         "' permanent failure: " + last_error);
    if (attempt < policy_.max_attempts) sleeper_(backoff_delay(attempt));
  }
  throw GatewayError("agent '" + agent.id + "' failed after " +
                     std::to_string(policy_.max_attempts) +
                     " attempts: " + last_error);
}

std::map<std::string, AgentUsage> Gateway::usage() const {
  std::lock_guard lock(mu_);
  return usage_;
}

long Gateway::total_calls() const {
  std::lock_guard lock(mu_);
  long total = 0;
  for (const auto& [_, u] : usage_) total += u.calls;
  return total;
}

long Gateway::total_tokens_in() const {
  std::lock_guard lock(mu_);
  long total = 0;
  for (const auto& [_, u] : usage_) total += u.tokens_in;
  return total;
}

long Gateway::total_tokens_out() const {
  std::lock_guard lock(mu_);
  long total = 0;
  for (const auto& [_, u] : usage_) total += u.tokens_out;
  return total;
}

std::string prompt_fingerprint(std::string_view prompt) {
  return fnv1a64_hex(prompt);
}

}  // namespace medcot
