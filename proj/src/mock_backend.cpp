#include "medcot/mock_backend.hpp"

#include <fstream>
#include <stdexcept>
#include <thread>

#include "medcot/util.hpp"

namespace medcot {

ScriptedMockBackend::ScriptedMockBackend(std::vector<MockRule> rules,
                                         MockOptions options)
    : options_(std::move(options)) {
  for (auto& rule : rules) {
    if (!rule.fingerprint && !rule.contains)
      throw std::runtime_error(
          "mock rule needs a 'fingerprint' or 'contains' matcher");
    auto state = std::make_unique<RuleState>();
    state->rule = std::move(rule);
    if (state->rule.fingerprint) {
      auto key = std::make_pair(state->rule.agent, *state->rule.fingerprint);
      if (!by_fingerprint_.emplace(key, state.get()).second)
        throw std::runtime_error("duplicate mock fingerprint for agent '" +
                                 state->rule.agent + "': " +
                                 *state->rule.fingerprint);
    }
    rules_.push_back(std::move(state));
  }
}

ScriptedMockBackend ScriptedMockBackend::from_file(
    const std::filesystem::path& path) {
  auto [rules, options] = parse_script(path);
  return ScriptedMockBackend(std::move(rules), std::move(options));
}

std::pair<std::vector<MockRule>, MockOptions> ScriptedMockBackend::parse_script(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read mock script: " + path.string());
  std::vector<MockRule> rules;
  MockOptions options;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("mock script line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    if (j.contains("options")) {
      const auto& o = j.at("options");
      options.strict = o.value("strict", false);
      options.default_reply = o.value("default_reply", std::string{});
      options.latency_ms = o.value("latency_ms", 0);
      continue;
    }
    rules.push_back(j.get<MockRule>());
  }
  return {std::move(rules), std::move(options)};
}

std::string ScriptedMockBackend::substitute(const std::string& reply,
                                            const AgentSpec& agent,
                                            const ChatRequest& req) const {
  auto replace_all = [](std::string s, const std::string& from,
                        const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
    return s;
  };
  std::string out = reply;
  out = replace_all(out, "$AGENT", agent.id);
  out = replace_all(out, "$TEMP", format_double(req.temperature, 1));
  out = replace_all(out, "$FP8", prompt_fingerprint(req.prompt).substr(0, 8));
  out = replace_all(out, "$PROMPT", req.prompt);
  return out;
}

BackendReply ScriptedMockBackend::send(const AgentSpec& agent,
                                       const ChatRequest& req) {
  {
    std::lock_guard lock(mu_);
    ++calls_[agent.id];
    ++in_flight_;
    max_concurrent_ = std::max(max_concurrent_, in_flight_);
  }
  struct Depart {
    ScriptedMockBackend& self;
    ~Depart() {
      std::lock_guard lock(self.mu_);
      --self.in_flight_;
    }
  } depart{*this};
  if (options_.latency_ms > 0)
    std::this_thread::sleep_for(std::chrono::milliseconds(options_.latency_ms));

  RuleState* hit = nullptr;
  const std::string fp = prompt_fingerprint(req.prompt);
  if (auto it = by_fingerprint_.find({agent.id, fp}); it != by_fingerprint_.end())
    hit = it->second;
  if (!hit)
    if (auto it = by_fingerprint_.find({std::string("*"), fp});
        it != by_fingerprint_.end())
      hit = it->second;
  if (!hit) {
    for (const auto& state : rules_) {
      const MockRule& r = state->rule;
      if (!r.contains) continue;
      if (r.agent != "*" && r.agent != agent.id) continue;
      if (req.prompt.find(*r.contains) == std::string::npos) continue;
      hit = state.get();
      break;
    }
  }

  BackendReply reply;
  if (!hit) {
    if (options_.strict || options_.default_reply.empty()) {
      reply.status = BackendReply::Status::Permanent;
      reply.error = "no mock rule matches agent '" + agent.id +
                    "' prompt fingerprint " + fp;
      return reply;
    }
    reply.status = BackendReply::Status::Ok;
    reply.text = substitute(options_.default_reply, agent, req);
  } else {
    if (hit->rule.fail_times > 0 &&
        hit->failures_served.fetch_add(1) < hit->rule.fail_times) {
      reply.status = hit->rule.permanent ? BackendReply::Status::Permanent
                                         : BackendReply::Status::Transient;
      reply.http_status = hit->rule.fail_status;
      reply.error = "scripted failure (status " +
                    std::to_string(hit->rule.fail_status) + ")";
      return reply;
    }
    if (hit->rule.fail_times == 0 && hit->rule.permanent) {
      reply.status = BackendReply::Status::Permanent;
      reply.http_status = hit->rule.fail_status;
      reply.error = "scripted permanent failure";
      return reply;
    }
    reply.status = BackendReply::Status::Ok;
    reply.text = substitute(hit->rule.reply, agent, req);
  }
  // Deterministic token accounting: ~4 bytes per token.
  reply.tokens_in = static_cast<long>((req.prompt.size() + 3) / 4);
  reply.tokens_out = static_cast<long>((reply.text.size() + 3) / 4);
  return reply;
}

long ScriptedMockBackend::total_calls() const {
  std::lock_guard lock(mu_);
  long total = 0;
  for (const auto& [_, n] : calls_) total += n;
  return total;
}

long ScriptedMockBackend::calls_for(const std::string& agent_id) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find(agent_id);
  return it == calls_.end() ? 0 : it->second;
}

int ScriptedMockBackend::max_concurrent() const {
  std::lock_guard lock(mu_);
  return max_concurrent_;
}

void to_json(nlohmann::json& j, const MockRule& r) {
  j = nlohmann::json{{"agent", r.agent}, {"reply", r.reply}};
  if (r.fingerprint) j["fingerprint"] = *r.fingerprint;
  if (r.contains) j["contains"] = *r.contains;
  if (r.fail_times) j["fail_times"] = r.fail_times;
  if (r.fail_status != 429) j["fail_status"] = r.fail_status;
  if (r.permanent) j["permanent"] = true;
}

void from_json(const nlohmann::json& j, MockRule& r) {
  r.agent = j.value("agent", std::string("*"));
  if (j.contains("fingerprint"))
    r.fingerprint = j.at("fingerprint").get<std::string>();
  if (j.contains("contains")) r.contains = j.at("contains").get<std::string>();
  r.reply = j.value("reply", std::string{});
  r.fail_times = j.value("fail_times", 0);
  r.fail_status = j.value("fail_status", 429);
  r.permanent = j.value("permanent", false);
}

}  // namespace medcot
