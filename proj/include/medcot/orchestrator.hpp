#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "medcot/config.hpp"
#include "medcot/core.hpp"
#include "medcot/journal.hpp"
#include "medcot/stages.hpp"

namespace medcot {

struct TierHistogram {
  long easy{0};
  long medium{0};
  long difficult{0};
  long sum() const { return easy + medium + difficult; }
};

struct FailureNote {
  std::string qid;
  std::string stage;
  std::string cause;
};

struct RescoreItem {
  std::string qid;
  int index{0};  // selected-CoT index within the record
  std::string detail;
};

struct RunSummary {
  std::string run_id;
  long questions_total{0};
  long completed{0};
  long failed{0};
  long full_verdict_sets{0};  // questions with a complete verdict set
  TierHistogram tiers;
  std::vector<FailureNote> failures;
  std::vector<RescoreItem> rescore_queue;
  std::map<std::string, AgentUsage> usage;
  long total_calls{0};
  long tokens_in{0};
  long tokens_out{0};

  nlohmann::json to_json() const;
};

enum class RunMode {
  Fresh,       // create/truncate the journal
  Auto,        // append to an existing journal, else create
  ResumeOnly,  // journal must already exist
};

// Thrown out of run() when the test crash hook fires; the journal is left
// exactly as an abrupt kill would leave it.
class AbortRun : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Orchestrator {
 public:
  Orchestrator(const PipelinePlan& plan, Gateway& gateway,
               const PromptRegistry& prompts);

  // Schedules every question over the worker pool, journaling each stage.
  // Stage failures mark the question failed and the run continues; journal
  // problems (lock held, fingerprint mismatch, corruption) throw.
  RunSummary run(const std::vector<Question>& corpus,
                 const std::filesystem::path& journal_path,
                 RunMode mode = RunMode::Auto);

  // Tier routing from injected verdicts; no generator/verifier calls.
  RunSummary dry_run(const std::vector<Question>& corpus,
                     const std::filesystem::path& journal_path,
                     const std::map<std::string, std::vector<Verdict>>& fixtures);

  // Test instrumentation: invoked synchronously after every journal append.
  std::function<void(const JournalEntry&)> post_append_hook;

 private:
  struct StageFailure {
    std::string stage;
    std::string cause;
  };

  void process_question(const Question& q, QuestionProgress progress,
                        JournalWriter& writer);
  void journal_append(JournalWriter& writer, const std::string& qid,
                      Stage stage, nlohmann::json payload);
  RunSummary summarize_run(const std::vector<Question>& corpus,
                           const std::filesystem::path& journal_path,
                           const std::string& run_id) const;

  const PipelinePlan& plan_;
  Gateway& gateway_;
  const PromptRegistry& prompts_;
};

// Loads {"qid", "verdicts": [...]} JSONL fixtures for dry runs.
std::map<std::string, std::vector<Verdict>> load_verdict_fixtures(
    const std::filesystem::path& path);

std::string make_run_id();

}  // namespace medcot
