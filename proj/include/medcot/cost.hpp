#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace medcot {

// One ledger phase. Exactly one pricing mode applies: token pricing
// (tokens_*_m with matching price_*), GPU pricing (gpu_hours + gpu_rate), or
// a bare stated_cost. A stated_cost may also accompany either computed mode;
// it then wins for totals and the delta is surfaced.
struct CostLine {
  std::string phase;
  std::optional<double> tokens_in_m;   // millions of tokens
  std::optional<double> tokens_out_m;
  std::optional<double> price_in;      // $ per million tokens
  std::optional<double> price_out;
  std::optional<double> gpu_hours;
  std::optional<double> gpu_rate;      // $ per hour
  std::optional<double> stated_cost;   // dollars, as published
};

struct LineCost {
  std::optional<double> computed;
  std::optional<double> stated;
  double effective{0.0};              // stated when present, else computed
  std::optional<double> delta;        // computed - stated, when both exist
};

// Throws std::runtime_error when no pricing mode is resolvable or when token
// and GPU fields are mixed on one line.
LineCost line_cost(const CostLine& line);

double ledger_total(const std::vector<CostLine>& lines);

// plan_a_total / plan_b_total; throws on non-positive denominator.
double compare_plans(double plan_a_total, double plan_b_total);

// Default unit prices (config-overridable).
struct PriceBook {
  double strong_in{15.0};
  double strong_out{60.0};
  double light_in{0.15};
  double light_out{0.60};
  double gpu_rate{0.97};
};

// Ledger file: {"lines": [CostLine...], "baseline_lines": [CostLine...]?}.
struct LedgerFile {
  std::vector<CostLine> lines;
  std::vector<CostLine> baseline_lines;
};

LedgerFile load_ledger(const std::filesystem::path& path);

// Per-line computed/stated/delta plus totals (and the baseline/plan ratio
// when baseline lines are present).
nlohmann::json ledger_report(const LedgerFile& ledger);
std::string ledger_report_csv(const LedgerFile& ledger);

void to_json(nlohmann::json& j, const CostLine& v);
void from_json(const nlohmann::json& j, CostLine& v);
void to_json(nlohmann::json& j, const PriceBook& v);
void from_json(const nlohmann::json& j, PriceBook& v);

}  // namespace medcot
