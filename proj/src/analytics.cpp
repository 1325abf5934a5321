#include "medcot/analytics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "medcot/core.hpp"
#include "medcot/util.hpp"

namespace medcot {

namespace {

// label -> (agent_id, temperature), per question, from Generated payloads.
using SlotMap = std::map<std::string, std::pair<std::string, double>>;

std::map<std::string, SlotMap> slot_maps(const JournalData& journal) {
  std::map<std::string, SlotMap> out;
  for (const auto& e : journal.entries) {
    if (e.stage != Stage::Generated) continue;
    SlotMap& slots = out[e.qid];
    for (const auto& pj : e.payload.at("paths")) {
      const auto p = pj.get<ReasoningPath>();
      slots[p.label] = {p.agent_id, p.temperature};
    }
  }
  return out;
}

}  // namespace

VerdictHistogram verdict_histogram(const JournalData& journal) {
  const auto slots = slot_maps(journal);
  VerdictHistogram hist;
  for (const auto& e : journal.entries) {
    if (e.stage != Stage::Verified) continue;
    auto sit = slots.find(e.qid);
    for (const auto& vj : e.payload.at("verdicts")) {
      const auto verdict = vj.get<Verdict>();
      std::pair<std::string, double> key{"unknown", 0.0};
      if (sit != slots.end()) {
        auto lit = sit->second.find(verdict.path_label);
        if (lit != sit->second.end()) key = lit->second;
      }
      auto& cell = hist[key];
      if (verdict.verdict == VerdictKind::Correct)
        ++cell.correct;
      else
        ++cell.error;
    }
  }
  return hist;
}

long verdict_grand_total(const VerdictHistogram& hist) {
  long total = 0;
  for (const auto& [_, cell] : hist) total += cell.correct + cell.error;
  return total;
}

SelectionCounts ranker_distribution(const JournalData& journal) {
  const auto slots = slot_maps(journal);
  SelectionCounts counts;
  for (const auto& e : journal.entries) {
    if (e.stage != Stage::Ranked) continue;
    auto sit = slots.find(e.qid);
    if (sit == slots.end()) continue;
    for (const auto& lj : e.payload.at("top2")) {
      const auto label = lj.get<std::string>();
      auto lit = sit->second.find(label);
      if (lit == sit->second.end()) continue;
      ++counts[lit->second];
    }
  }
  return counts;
}

PairwiseDiff pairwise_diff(const CorrectnessMap& a, const CorrectnessMap& b) {
  if (a.size() != b.size())
    throw std::runtime_error("correctness maps differ in size: " +
                             std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
  PairwiseDiff d;
  for (const auto& [id, a_correct] : a) {
    auto it = b.find(id);
    if (it == b.end())
      throw std::runtime_error("question id missing from second map: " + id);
    const bool b_correct = it->second;
    if (a_correct && !b_correct) ++d.a_only;
    if (!a_correct && b_correct) ++d.b_only;
    ++d.total;
  }
  if (d.total > 0) {
    d.a_only_pct = 100.0 * static_cast<double>(d.a_only) / d.total;
    d.b_only_pct = 100.0 * static_cast<double>(d.b_only) / d.total;
  }
  return d;
}

CollectiveMiss collective_miss(const CorrectnessMap& a, const CorrectnessMap& b,
                               const CorrectnessMap& c) {
  if (a.size() != b.size() || a.size() != c.size())
    throw std::runtime_error("correctness maps differ in size");
  CollectiveMiss m;
  for (const auto& [id, a_correct] : a) {
    auto bit = b.find(id);
    auto cit = c.find(id);
    if (bit == b.end() || cit == c.end())
      throw std::runtime_error("question id missing from a map: " + id);
    const bool b_correct = bit->second;
    const bool c_correct = cit->second;
    if (!a_correct && b_correct && c_correct) ++m.miss[0];
    if (a_correct && !b_correct && c_correct) ++m.miss[1];
    if (a_correct && b_correct && !c_correct) ++m.miss[2];
    ++m.total;
  }
  return m;
}

AccuracySe accuracy_with_se(long correct, long n) {
  if (n <= 0) throw std::runtime_error("accuracy_with_se requires n >= 1");
  if (correct < 0 || correct > n)
    throw std::runtime_error("correct count outside [0, n]");
  AccuracySe out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  out.standard_error =
      std::sqrt(out.accuracy * (1.0 - out.accuracy) / static_cast<double>(n));
  return out;
}

double micro_average(const std::vector<std::pair<double, long>>& acc_n) {
  if (acc_n.empty()) throw std::runtime_error("micro_average of empty list");
  double weighted = 0.0;
  long total = 0;
  for (const auto& [accuracy, n] : acc_n) {
    if (n < 1) throw std::runtime_error("micro_average requires all n >= 1");
    weighted += accuracy * static_cast<double>(n);
    total += n;
  }
  return weighted / static_cast<double>(total);
}

std::string PairedScoreReport::formatted() const {
  return "pre " + format_double(pre_mean, 2) + "  post " +
         format_double(post_mean, 2) + "  delta " + format_signed(delta, 2) +
         "  (n=" + std::to_string(n) + ")";
}

PairedScoreReport paired_scores(const std::vector<int>& pre,
                                const std::vector<int>& post) {
  if (pre.empty() || pre.size() != post.size())
    throw std::runtime_error("paired_scores needs equal-length non-empty streams");
  PairedScoreReport report;
  report.n = pre.size();
  double pre_sum = 0.0, post_sum = 0.0;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    pre_sum += pre[i];
    post_sum += post[i];
  }
  report.pre_mean = pre_sum / static_cast<double>(report.n);
  report.post_mean = post_sum / static_cast<double>(report.n);
  report.delta = report.post_mean - report.pre_mean;
  return report;
}

std::string verdict_histogram_csv(const VerdictHistogram& hist) {
  std::string csv = "agent,temperature,correct,error\n";
  for (const auto& [key, cell] : hist)
    csv += key.first + "," + format_double(key.second, 1) + "," +
           std::to_string(cell.correct) + "," + std::to_string(cell.error) +
           "\n";
  return csv;
}

nlohmann::json verdict_histogram_json(const VerdictHistogram& hist) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, cell] : hist)
    rows.push_back({{"agent", key.first},
                    {"temperature", key.second},
                    {"correct", cell.correct},
                    {"error", cell.error}});
  return {{"rows", rows}, {"grand_total", verdict_grand_total(hist)}};
}

std::string selection_counts_csv(const SelectionCounts& counts) {
  std::string csv = "agent,temperature,selections\n";
  for (const auto& [key, n] : counts)
    csv += key.first + "," + format_double(key.second, 1) + "," +
           std::to_string(n) + "\n";
  return csv;
}

nlohmann::json selection_counts_json(const SelectionCounts& counts) {
  nlohmann::json rows = nlohmann::json::array();
  long total = 0;
  for (const auto& [key, n] : counts) {
    rows.push_back({{"agent", key.first},
                    {"temperature", key.second},
                    {"selections", n}});
    total += n;
  }
  return {{"rows", rows}, {"total_selections", total}};
}

nlohmann::json pairwise_diff_json(const PairwiseDiff& d) {
  return {{"a_only", d.a_only},
          {"b_only", d.b_only},
          {"total", d.total},
          {"a_only_pct", d.a_only_pct},
          {"b_only_pct", d.b_only_pct}};
}

nlohmann::json collective_miss_json(const CollectiveMiss& m,
                                    const std::vector<std::string>& names) {
  if (names.size() != 3)
    throw std::runtime_error("collective_miss_json needs three model names");
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    const double pct =
        m.total ? 100.0 * static_cast<double>(m.miss[i]) / m.total : 0.0;
    rows.push_back(
        {{"model", names[i]}, {"missed", m.miss[i]}, {"missed_pct", pct}});
  }
  return {{"rows", rows}, {"total", m.total}};
}

CorrectnessMap load_correctness(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read correctness file: " + path.string());
  CorrectnessMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out[j.at("id").get<std::string>()] = j.at("correct").get<bool>();
    } catch (const std::exception& e) {
      throw std::runtime_error("correctness file " + path.string() + " line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace medcot
