#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "medcot/core.hpp"
#include "medcot/cost.hpp"
#include "medcot/gateway.hpp"
#include "medcot/prompt.hpp"

namespace medcot {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunSettings {
  int workers{4};
  bool scoring{false};
  bool medium_reverify{false};  // informational re-check of refined mediums
  int difficult_paths{1};       // curated paths emitted by the difficult tier
};

struct PipelinePlan {
  RunSettings run;
  TierThresholds thresholds;
  std::vector<double> generator_temperatures{0.7, 0.9, 1.0};
  RetryPolicy retry;
  PriceBook price_book;
  std::vector<AgentSpec> agents;
  // template id -> override body (file contents, read at load time)
  std::map<TemplateId, std::string> template_overrides;

  std::vector<AgentSpec> generators() const;
  const AgentSpec& require_one(AgentRole role) const;
  const AgentSpec* optional_one(AgentRole role) const;
  int expected_paths() const;  // generator count x temperature count
};

// Parses and validates a config file; ConfigError messages name the missing
// or duplicated role. Template override files are read here.
PipelinePlan load_plan(const std::filesystem::path& path);

// Standalone validation (same checks load_plan applies).
void validate_plan(const PipelinePlan& plan);

// Builtin templates plus the plan's overrides.
PromptRegistry build_registry(const PipelinePlan& plan);

// Stable digest of agent specs, templates, thresholds, temperatures, and the
// routing switches; stored in the journal header and checked on resume.
std::string plan_fingerprint(const PipelinePlan& plan,
                             const PromptRegistry& registry);

}  // namespace medcot
