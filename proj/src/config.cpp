#include "medcot/config.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "medcot/util.hpp"

namespace medcot {

std::vector<AgentSpec> PipelinePlan::generators() const {
  std::vector<AgentSpec> out;
  for (const auto& a : agents)
    if (a.role == AgentRole::Generator) out.push_back(a);
  return out;
}

const AgentSpec& PipelinePlan::require_one(AgentRole role) const {
  const AgentSpec* found = optional_one(role);
  if (!found)
    throw ConfigError("missing agent role: " + to_string(role));
  return *found;
}

const AgentSpec* PipelinePlan::optional_one(AgentRole role) const {
  const AgentSpec* found = nullptr;
  for (const auto& a : agents) {
    if (a.role != role) continue;
    if (found) throw ConfigError("duplicate agent role: " + to_string(role));
    found = &a;
  }
  return found;
}

int PipelinePlan::expected_paths() const {
  int total = 0;
  for (const auto& g : generators())
    total += static_cast<int>(g.temperatures.size());
  return total;
}

static AgentSpec parse_agent(const nlohmann::json& j,
                             const std::vector<double>& default_temps) {
  AgentSpec a;
  a.id = j.at("id").get<std::string>();
  a.endpoint = j.value("endpoint", std::string{});
  a.model = j.value("model", std::string{});
  a.role = agent_role_from_string(j.at("role").get<std::string>());
  if (j.contains("temperature")) a.sampling.temperature = j.at("temperature").get<double>();
  if (j.contains("top_p")) a.sampling.top_p = j.at("top_p").get<double>();
  if (j.contains("max_tokens")) a.sampling.max_tokens = j.at("max_tokens").get<int>();
  if (j.contains("temperatures"))
    a.temperatures = j.at("temperatures").get<std::vector<double>>();
  else if (a.role == AgentRole::Generator)
    a.temperatures = default_temps;
  else
    a.temperatures.clear();
  a.api_key_env = j.value("api_key_env", std::string{});
  a.max_in_flight = j.value("max_in_flight", 4);
  return a;
}

void validate_plan(const PipelinePlan& plan) {
  if (plan.run.workers < 1) throw ConfigError("run.workers must be >= 1");
  if (plan.run.difficult_paths < 1)
    throw ConfigError("run.difficult_paths must be >= 1");
  if (plan.thresholds.easy_max_errors < 0 ||
      plan.thresholds.medium_max_errors <= plan.thresholds.easy_max_errors)
    throw ConfigError(
        "thresholds must satisfy 0 <= easy_max_errors < medium_max_errors");

  std::set<std::string> ids;
  for (const auto& a : plan.agents) {
    if (a.id.empty()) throw ConfigError("agent with empty id");
    if (!ids.insert(a.id).second)
      throw ConfigError("duplicate agent id: " + a.id);
    if (a.max_in_flight < 1)
      throw ConfigError("agent '" + a.id + "' max_in_flight must be >= 1");
  }

  const auto gens = plan.generators();
  if (gens.empty()) throw ConfigError("missing agent role: generator");
  for (const auto& g : gens) {
    if (g.temperatures.empty())
      throw ConfigError("generator '" + g.id + "' has no temperatures");
    for (double t : g.temperatures)
      if (t < 0.0 || t > 1.0)
        throw ConfigError("generator '" + g.id +
                          "' temperature outside [0,1]: " + format_double(t, 2));
  }
  plan.require_one(AgentRole::Verifier);
  plan.require_one(AgentRole::Ranker);
  plan.require_one(AgentRole::Refiner);
  plan.require_one(AgentRole::Summarizer);
  plan.require_one(AgentRole::DifficultGenerator);
  if (plan.run.scoring && !plan.optional_one(AgentRole::Scorer))
    throw ConfigError("missing agent role: scorer (scoring is enabled)");
}

PipelinePlan load_plan(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }

  PipelinePlan plan;
  try {
    if (j.contains("run")) {
      const auto& r = j.at("run");
      plan.run.workers = r.value("workers", plan.run.workers);
      plan.run.scoring = r.value("scoring", plan.run.scoring);
      plan.run.medium_reverify =
          r.value("medium_reverify", plan.run.medium_reverify);
      plan.run.difficult_paths =
          r.value("difficult_paths", plan.run.difficult_paths);
    }
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      plan.thresholds.easy_max_errors =
          t.value("easy_max_errors", plan.thresholds.easy_max_errors);
      plan.thresholds.medium_max_errors =
          t.value("medium_max_errors", plan.thresholds.medium_max_errors);
    }
    if (j.contains("generator_temperatures"))
      plan.generator_temperatures =
          j.at("generator_temperatures").get<std::vector<double>>();
    if (j.contains("retry")) {
      const auto& r = j.at("retry");
      plan.retry.base = std::chrono::milliseconds(
          r.value("base_ms", static_cast<long>(plan.retry.base.count())));
      plan.retry.cap = std::chrono::milliseconds(
          r.value("cap_ms", static_cast<long>(plan.retry.cap.count())));
      plan.retry.max_attempts = r.value("max_attempts", plan.retry.max_attempts);
      plan.retry.jitter = r.value("jitter", plan.retry.jitter);
    }
    if (j.contains("price_book"))
      plan.price_book = j.at("price_book").get<PriceBook>();
    for (const auto& aj : j.at("agents"))
      plan.agents.push_back(parse_agent(aj, plan.generator_temperatures));
    if (j.contains("templates")) {
      for (const auto& [name, value] : j.at("templates").items()) {
        const TemplateId id = template_id_from_string(name);
        const std::filesystem::path override_path =
            path.parent_path() / value.get<std::string>();
        plan.template_overrides[id] = read_file(override_path);
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }

  validate_plan(plan);
  return plan;
}

PromptRegistry build_registry(const PipelinePlan& plan) {
  PromptRegistry registry = PromptRegistry::builtin();
  for (const auto& [id, body] : plan.template_overrides)
    registry.set_override(id, body);
  return registry;
}

std::string plan_fingerprint(const PipelinePlan& plan,
                             const PromptRegistry& registry) {
  std::string canon;
  auto field = [&canon](const std::string& s) {
    canon += s;
    canon += '\x1f';
  };

  std::vector<AgentSpec> sorted = plan.agents;
  std::sort(sorted.begin(), sorted.end(),
            [](const AgentSpec& a, const AgentSpec& b) { return a.id < b.id; });
  for (const auto& a : sorted) {
    field(a.id);
    field(a.endpoint);
    field(a.model);
    field(to_string(a.role));
    for (double t : a.temperatures) field(format_double(t, 4));
    field(a.sampling.temperature ? format_double(*a.sampling.temperature, 4)
                                 : "-");
    field(a.sampling.top_p ? format_double(*a.sampling.top_p, 4) : "-");
    field(a.sampling.max_tokens ? std::to_string(*a.sampling.max_tokens) : "-");
    canon += '\x1e';
  }
  field(std::to_string(plan.thresholds.easy_max_errors));
  field(std::to_string(plan.thresholds.medium_max_errors));
  for (double t : plan.generator_temperatures) field(format_double(t, 4));
  field(std::to_string(plan.run.difficult_paths));
  field(plan.run.scoring ? "scoring" : "no-scoring");
  field(plan.run.medium_reverify ? "reverify" : "no-reverify");
  field(registry.digest());
  return fnv1a64_hex(canon);
}

}  // namespace medcot
