#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcot/journal.hpp"

namespace medcot {

// ---- verdict / ranker tables -------------------------------------------------

struct VerdictCell {
  long correct{0};
  long error{0};
};

// (agent_id, temperature) -> correct/error counts over Verified entries.
using VerdictHistogram = std::map<std::pair<std::string, double>, VerdictCell>;

VerdictHistogram verdict_histogram(const JournalData& journal);
long verdict_grand_total(const VerdictHistogram& hist);

// (agent_id, temperature) -> number of times the ranker (or default
// selection) kept that slot's path.
using SelectionCounts = std::map<std::pair<std::string, double>, long>;

SelectionCounts ranker_distribution(const JournalData& journal);

// ---- correctness comparisons ---------------------------------------------------

// question id -> answered correctly
using CorrectnessMap = std::map<std::string, bool>;

struct PairwiseDiff {
  long a_only{0};  // a correct, b wrong
  long b_only{0};  // b correct, a wrong
  long total{0};
  double a_only_pct{0.0};
  double b_only_pct{0.0};
};

// Throws std::runtime_error when the id sets differ.
PairwiseDiff pairwise_diff(const CorrectnessMap& a, const CorrectnessMap& b);

struct CollectiveMiss {
  // miss[i] = questions model i got wrong while both others were correct
  std::array<long, 3> miss{0, 0, 0};
  long total{0};
};

CollectiveMiss collective_miss(const CorrectnessMap& a, const CorrectnessMap& b,
                               const CorrectnessMap& c);

// ---- accuracy aggregation ------------------------------------------------------

struct AccuracySe {
  double accuracy{0.0};        // fraction in [0,1]
  double standard_error{0.0};  // binomial SE, same scale
};

// Throws on n == 0 or correct outside [0, n].
AccuracySe accuracy_with_se(long correct, long n);

// Count-weighted mean of per-benchmark accuracies (any consistent scale).
// Throws on an empty list or any n < 1.
double micro_average(const std::vector<std::pair<double, long>>& acc_n);

// ---- paired scoring -------------------------------------------------------------

struct PairedScoreReport {
  std::size_t n{0};
  double pre_mean{0.0};
  double post_mean{0.0};
  double delta{0.0};
  // "pre 7.37  post 8.17  delta +0.80  (n=100)"
  std::string formatted() const;
};

// Throws when the streams are empty or differ in length.
PairedScoreReport paired_scores(const std::vector<int>& pre,
                                const std::vector<int>& post);

// ---- report emission ------------------------------------------------------------

std::string verdict_histogram_csv(const VerdictHistogram& hist);
nlohmann::json verdict_histogram_json(const VerdictHistogram& hist);
std::string selection_counts_csv(const SelectionCounts& counts);
nlohmann::json selection_counts_json(const SelectionCounts& counts);
nlohmann::json pairwise_diff_json(const PairwiseDiff& d);
nlohmann::json collective_miss_json(const CollectiveMiss& m,
                                    const std::vector<std::string>& names);

// {"id": str, "correct": bool} per line.
CorrectnessMap load_correctness(const std::filesystem::path& path);

}  // namespace medcot
