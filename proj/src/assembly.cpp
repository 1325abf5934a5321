#include "medcot/assembly.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace medcot {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::CoT: return "cot";
    case Variant::Response: return "response";
    case Variant::Reason: return "reason";
  }
  throw std::runtime_error("unknown variant value");
}

Variant variant_from_string(const std::string& s) {
  if (s == "cot") return Variant::CoT;
  if (s == "response") return Variant::Response;
  if (s == "reason") return Variant::Reason;
  throw std::runtime_error("unknown variant: " + s +
                           " (expected cot|response|reason)");
}

std::string instance_prompt(const Question& q) {
  return q.stem + "\n\n" + options_block(q);
}

std::vector<SftInstance> make_instances(const CuratedRecord& rec,
                                        const Question& q, Variant variant) {
  if (rec.question_id != q.id)
    throw std::runtime_error("record/question id mismatch: " +
                             rec.question_id + " vs " + q.id);
  validate_record(rec);

  std::vector<SftInstance> out;
  const std::string prompt = instance_prompt(q);
  for (std::size_t i = 0; i < rec.selected.size(); ++i) {
    const SelectedCot& sel = rec.selected[i];
    SftInstance inst;
    inst.question_id = rec.question_id;
    inst.variant = variant;
    inst.prompt = prompt;
    inst.source = q.source;
    inst.tier = to_string(rec.tier);
    inst.ord = static_cast<int>(i);
    switch (variant) {
      case Variant::CoT:
        inst.target = sel.text;
        break;
      case Variant::Response:
        inst.target = sel.summary;
        break;
      case Variant::Reason:
        if (sel.text.find(kThinkClose) != std::string::npos)
          throw std::runtime_error(
              "CoT for " + rec.question_id + " contains the literal \"" +
              std::string(kThinkClose) + "\" and cannot form a Reason target");
        inst.target = kThinkOpen + sel.text + kThinkClose + sel.summary;
        break;
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::pair<std::string, std::string> split_reason_target(
    const std::string& target) {
  const std::string open = kThinkOpen;
  const std::string close = kThinkClose;
  if (target.rfind(open, 0) != 0)
    throw std::runtime_error("reason target does not start with " + open);
  const auto pos = target.find(close);
  if (pos == std::string::npos)
    throw std::runtime_error("reason target lacks " + close);
  return {target.substr(open.size(), pos - open.size()),
          target.substr(pos + close.size())};
}

nlohmann::json manifest_json(const DatasetManifest& m) {
  return {{"total", m.total},
          {"per_variant", m.per_variant},
          {"per_source", m.per_source},
          {"per_tier", m.per_tier},
          {"dedup_dropped", m.dedup_dropped}};
}

DatasetManifest emit_dataset(std::vector<SftInstance> instances,
                             const std::filesystem::path& sink) {
  std::stable_sort(instances.begin(), instances.end(),
                   [](const SftInstance& a, const SftInstance& b) {
                     if (a.question_id != b.question_id)
                       return a.question_id < b.question_id;
                     if (a.variant != b.variant) return a.variant < b.variant;
                     return a.ord < b.ord;
                   });

  std::ofstream out(sink, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write dataset file: " + sink.string());

  DatasetManifest manifest;
  std::set<std::pair<std::string, std::string>> seen;  // (qid+variant, target)
  for (const auto& inst : instances) {
    const auto key = std::make_pair(
        inst.question_id + "\x1f" + to_string(inst.variant), inst.target);
    if (!seen.insert(key).second) {
      ++manifest.dedup_dropped;
      continue;
    }
    nlohmann::json j{{"id", inst.question_id + "#" + std::to_string(inst.ord)},
                     {"variant", to_string(inst.variant)},
                     {"instruction", inst.prompt},
                     {"output", inst.target},
                     {"source", inst.source},
                     {"tier", inst.tier}};
    out << j.dump() << '\n';
    ++manifest.total;
    ++manifest.per_variant[to_string(inst.variant)];
    ++manifest.per_source[inst.source];
    ++manifest.per_tier[inst.tier];
  }
  if (!out) throw std::runtime_error("write failed: " + sink.string());
  return manifest;
}

}  // namespace medcot
