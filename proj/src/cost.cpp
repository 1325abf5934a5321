#include "medcot/cost.hpp"

#include <cmath>
#include <stdexcept>

#include "medcot/util.hpp"

namespace medcot {

LineCost line_cost(const CostLine& line) {
  const bool has_tokens = line.tokens_in_m || line.tokens_out_m;
  const bool has_gpu = line.gpu_hours || line.gpu_rate;
  if (has_tokens && has_gpu)
    throw std::runtime_error("cost line '" + line.phase +
                             "' mixes token and GPU pricing");

  LineCost out;
  out.stated = line.stated_cost;
  if (has_tokens) {
    double total = 0.0;
    if (line.tokens_in_m) {
      if (!line.price_in)
        throw std::runtime_error("cost line '" + line.phase +
                                 "' has tokens_in_m but no price_in");
      total += *line.tokens_in_m * *line.price_in;
    }
    if (line.tokens_out_m) {
      if (!line.price_out)
        throw std::runtime_error("cost line '" + line.phase +
                                 "' has tokens_out_m but no price_out");
      total += *line.tokens_out_m * *line.price_out;
    }
    out.computed = total;
  } else if (has_gpu) {
    if (!line.gpu_hours || !line.gpu_rate)
      throw std::runtime_error("cost line '" + line.phase +
                               "' needs both gpu_hours and gpu_rate");
    out.computed = *line.gpu_hours * *line.gpu_rate;
  } else if (!line.stated_cost) {
    throw std::runtime_error("cost line '" + line.phase +
                             "' has no resolvable pricing mode");
  }

  out.effective = out.stated ? *out.stated : *out.computed;
  if (out.computed && out.stated) out.delta = *out.computed - *out.stated;
  return out;
}

double ledger_total(const std::vector<CostLine>& lines) {
  double total = 0.0;
  for (const auto& line : lines) total += line_cost(line).effective;
  return total;
}

double compare_plans(double plan_a_total, double plan_b_total) {
  if (plan_b_total <= 0.0)
    throw std::runtime_error("compare_plans needs a positive denominator");
  return plan_a_total / plan_b_total;
}

LedgerFile load_ledger(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  LedgerFile ledger;
  ledger.lines = j.at("lines").get<std::vector<CostLine>>();
  if (j.contains("baseline_lines"))
    ledger.baseline_lines =
        j.at("baseline_lines").get<std::vector<CostLine>>();
  return ledger;
}

static nlohmann::json line_report(const CostLine& line) {
  const LineCost cost = line_cost(line);
  nlohmann::json j{{"phase", line.phase}, {"effective", cost.effective}};
  if (cost.computed) j["computed"] = *cost.computed;
  if (cost.stated) j["stated"] = *cost.stated;
  if (cost.delta) j["delta"] = *cost.delta;
  return j;
}

nlohmann::json ledger_report(const LedgerFile& ledger) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& line : ledger.lines) lines.push_back(line_report(line));
  nlohmann::json out{{"lines", lines}, {"total", ledger_total(ledger.lines)}};
  if (!ledger.baseline_lines.empty()) {
    nlohmann::json baseline = nlohmann::json::array();
    for (const auto& line : ledger.baseline_lines)
      baseline.push_back(line_report(line));
    const double baseline_total = ledger_total(ledger.baseline_lines);
    out["baseline_lines"] = baseline;
    out["baseline_total"] = baseline_total;
    out["ratio"] = compare_plans(baseline_total, ledger_total(ledger.lines));
  }
  return out;
}

std::string ledger_report_csv(const LedgerFile& ledger) {
  std::string csv = "section,phase,computed,stated,delta,effective\n";
  auto row = [&csv](const std::string& section, const CostLine& line) {
    const LineCost cost = line_cost(line);
    csv += section + "," + line.phase + ",";
    csv += cost.computed ? format_double(*cost.computed, 4) : std::string{};
    csv += ",";
    csv += cost.stated ? format_double(*cost.stated, 2) : std::string{};
    csv += ",";
    csv += cost.delta ? format_double(*cost.delta, 4) : std::string{};
    csv += "," + format_double(cost.effective, 2) + "\n";
  };
  for (const auto& line : ledger.lines) row("plan", line);
  for (const auto& line : ledger.baseline_lines) row("baseline", line);
  csv += "total,plan,,,," + format_double(ledger_total(ledger.lines), 2) + "\n";
  if (!ledger.baseline_lines.empty())
    csv += "total,baseline,,,," +
           format_double(ledger_total(ledger.baseline_lines), 2) + "\n";
  return csv;
}

void to_json(nlohmann::json& j, const CostLine& v) {
  j = nlohmann::json{{"phase", v.phase}};
  auto set = [&j](const char* key, const std::optional<double>& value) {
    if (value) j[key] = *value;
  };
  set("tokens_in_m", v.tokens_in_m);
  set("tokens_out_m", v.tokens_out_m);
  set("price_in", v.price_in);
  set("price_out", v.price_out);
  set("gpu_hours", v.gpu_hours);
  set("gpu_rate", v.gpu_rate);
  set("stated_cost", v.stated_cost);
}

void from_json(const nlohmann::json& j, CostLine& v) {
  v.phase = j.value("phase", std::string{});
  auto get = [&j](const char* key) -> std::optional<double> {
    if (j.contains(key)) return j.at(key).get<double>();
    return std::nullopt;
  };
  v.tokens_in_m = get("tokens_in_m");
  v.tokens_out_m = get("tokens_out_m");
  v.price_in = get("price_in");
  v.price_out = get("price_out");
  v.gpu_hours = get("gpu_hours");
  v.gpu_rate = get("gpu_rate");
  v.stated_cost = get("stated_cost");
}

void to_json(nlohmann::json& j, const PriceBook& v) {
  j = {{"strong_in", v.strong_in},
       {"strong_out", v.strong_out},
       {"light_in", v.light_in},
       {"light_out", v.light_out},
       {"gpu_rate", v.gpu_rate}};
}

void from_json(const nlohmann::json& j, PriceBook& v) {
  v.strong_in = j.value("strong_in", v.strong_in);
  v.strong_out = j.value("strong_out", v.strong_out);
  v.light_in = j.value("light_in", v.light_in);
  v.light_out = j.value("light_out", v.light_out);
  v.gpu_rate = j.value("gpu_rate", v.gpu_rate);
}

}  // namespace medcot
