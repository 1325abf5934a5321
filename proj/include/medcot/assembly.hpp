#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcot/core.hpp"

namespace medcot {

enum class Variant { CoT, Response, Reason };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

inline constexpr const char* kThinkOpen = "<think>";
inline constexpr const char* kThinkClose = "</think>";

struct SftInstance {
  std::string question_id;
  Variant variant{Variant::CoT};
  std::string prompt;  // stem + labeled options
  std::string target;
  std::string source;  // benchmark tag, for the manifest
  std::string tier;
  int ord{0};  // selected-CoT index within the question (0 or 1)
};

// Prompt text shared by all variants: stem, blank line, option lines.
std::string instance_prompt(const Question& q);

// One instance per selected CoT. Reason targets are
// "<think>" + CoT + "</think>" + Response with nothing inserted; a CoT that
// itself contains "</think>" cannot round-trip and is rejected. Response and
// Reason variants require a summary on every selected CoT.
std::vector<SftInstance> make_instances(const CuratedRecord& rec,
                                        const Question& q, Variant variant);

// Splits a Reason target at the first "</think>" into (CoT, Response).
std::pair<std::string, std::string> split_reason_target(
    const std::string& target);

struct DatasetManifest {
  long total{0};
  std::map<std::string, long> per_variant;
  std::map<std::string, long> per_source;
  std::map<std::string, long> per_tier;
  long dedup_dropped{0};
};

nlohmann::json manifest_json(const DatasetManifest& m);

// Sorts by (question_id, variant, ord), drops exact-duplicate targets within
// a question, writes JSONL records
// {"id","variant","instruction","output","source","tier"}; byte-identical
// across reruns on identical input.
DatasetManifest emit_dataset(std::vector<SftInstance> instances,
                             const std::filesystem::path& sink);

}  // namespace medcot
