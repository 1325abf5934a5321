#include "medcot/orchestrator.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <random>
#include <thread>

#include "medcot/util.hpp"

namespace medcot {

nlohmann::json RunSummary::to_json() const {
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& f : failures)
    fails.push_back({{"qid", f.qid}, {"stage", f.stage}, {"cause", f.cause}});
  nlohmann::json rescore = nlohmann::json::array();
  for (const auto& r : rescore_queue)
    rescore.push_back(
        {{"qid", r.qid}, {"index", r.index}, {"detail", r.detail}});
  nlohmann::json agents = nlohmann::json::object();
  for (const auto& [id, u] : usage)
    agents[id] = {{"calls", u.calls},
                  {"failures", u.failures},
                  {"tokens_in", u.tokens_in},
                  {"tokens_out", u.tokens_out}};
  return {{"run_id", run_id},
          {"questions",
           {{"total", questions_total},
            {"completed", completed},
            {"failed", failed},
            {"full_verdict_sets", full_verdict_sets}}},
          {"tiers",
           {{"easy", tiers.easy},
            {"medium", tiers.medium},
            {"difficult", tiers.difficult}}},
          {"failures", fails},
          {"rescore_queue", rescore},
          {"agents", agents},
          {"totals",
           {{"calls", total_calls},
            {"tokens_in", tokens_in},
            {"tokens_out", tokens_out}}}};
}

std::string make_run_id() {
  std::random_device rd;
  const std::uint64_t salt =
      (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
  const auto ticks =
      std::chrono::system_clock::now().time_since_epoch().count();
  return "run-" +
         fnv1a64_hex(std::to_string(ticks) + ":" + std::to_string(salt));
}

std::map<std::string, std::vector<Verdict>> load_verdict_fixtures(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read verdict fixtures: " + path.string());
  std::map<std::string, std::vector<Verdict>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("verdict fixtures line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    const auto qid = j.at("qid").get<std::string>();
    auto verdicts = j.at("verdicts").get<std::vector<Verdict>>();
    if (!out.emplace(qid, std::move(verdicts)).second)
      throw std::runtime_error("duplicate verdict fixture for question " + qid);
  }
  return out;
}

Orchestrator::Orchestrator(const PipelinePlan& plan, Gateway& gateway,
                           const PromptRegistry& prompts)
    : plan_(plan), gateway_(gateway), prompts_(prompts) {}

void Orchestrator::journal_append(JournalWriter& writer, const std::string& qid,
                                  Stage stage, nlohmann::json payload) {
  JournalEntry entry{qid, stage, std::move(payload), iso8601_utc_now()};
  writer.append(entry);
  if (post_append_hook) post_append_hook(entry);
}

namespace {

const ReasoningPath* path_by_label(const std::vector<ReasoningPath>& paths,
                                   const std::string& label) {
  for (const auto& p : paths)
    if (p.label == label) return &p;
  return nullptr;
}

}  // namespace

void Orchestrator::process_question(const Question& q,
                                    QuestionProgress progress,
                                    JournalWriter& writer) {
  if (progress.has(Stage::Assembled)) return;
  std::string at = "generate";
  try {
    StageContext ctx{gateway_, prompts_};

    // -- generation ----------------------------------------------------------
    std::vector<ReasoningPath> paths;
    if (progress.has(Stage::Generated)) {
      progress.payloads.at(Stage::Generated).at("paths").get_to(paths);
    } else {
      GenerationResult gen = generate_paths(ctx, q, plan_.generators());
      paths = std::move(gen.paths);
      journal_append(
          writer, q.id, Stage::Generated,
          {{"question", q}, {"paths", paths}, {"absent", gen.absent}});
    }

    // -- verification --------------------------------------------------------
    at = "verify";
    std::vector<Verdict> verdicts;
    if (progress.has(Stage::Verified)) {
      progress.payloads.at(Stage::Verified).at("verdicts").get_to(verdicts);
    } else {
      const AgentSpec& verifier = plan_.require_one(AgentRole::Verifier);
      for (const auto& p : paths)
        verdicts.push_back(verify_path(ctx, q, p, verifier));
      journal_append(writer, q.id, Stage::Verified, {{"verdicts", verdicts}});
    }

    // -- tier routing ----------------------------------------------------------
    at = "route";
    TierAssignment assignment;
    if (progress.has(Stage::Tiered)) {
      assignment = progress.payloads.at(Stage::Tiered)
                       .at("assignment")
                       .get<TierAssignment>();
    } else {
      assignment = classify_tier(q.id, verdicts, plan_.expected_paths(),
                                 plan_.thresholds);
      journal_append(writer, q.id, Stage::Tiered, {{"assignment", assignment}});
    }

    std::map<std::string, VerdictKind> verdict_of;
    for (const auto& v : verdicts) verdict_of[v.path_label] = v.verdict;
    std::vector<ReasoningPath> correct;
    for (const auto& p : paths) {
      auto it = verdict_of.find(p.label);
      if (it != verdict_of.end() && it->second == VerdictKind::Correct)
        correct.push_back(p);
    }
    std::vector<std::string> error_reasons;
    for (const auto& v : verdicts)
      if (v.verdict == VerdictKind::Error && !v.reason.empty())
        error_reasons.push_back(v.reason);
    // refine_path requires a non-empty list; the sentinel renders as the
    // fixed placeholder line.
    if (error_reasons.empty())
      error_reasons.push_back(kUnparseableVerifierReason);

    // -- ranking (easy + medium) ----------------------------------------------
    RankOutcome rank;
    if (assignment.tier != Tier::Difficult) {
      at = "rank";
      if (progress.has(Stage::Ranked)) {
        const auto& pl = progress.payloads.at(Stage::Ranked);
        rank.top2[0] = pl.at("top2").at(0).get<std::string>();
        rank.top2[1] = pl.at("top2").at(1).get<std::string>();
        rank.reasons =
            pl.at("reasons").get<std::map<std::string, std::string>>();
        rank.fallback_used = pl.at("fallback_used").get<bool>();
      } else {
        rank = rank_paths(ctx, q, correct, plan_.require_one(AgentRole::Ranker));
        journal_append(writer, q.id, Stage::Ranked,
                       {{"top2", {rank.top2[0], rank.top2[1]}},
                        {"reasons", rank.reasons},
                        {"fallback_used", rank.fallback_used}});
      }
    }

    // -- selection: originals, refinements, or regenerations ------------------
    std::vector<SelectedCot> selected;
    if (assignment.tier == Tier::Easy) {
      for (const auto& label : rank.top2) {
        const ReasoningPath* p = path_by_label(paths, label);
        if (!p)
          throw std::runtime_error("ranked label " + label +
                                   " has no generated path");
        selected.push_back({label, p->text, Provenance::Original, "", {}, {}});
      }
    } else if (progress.has(Stage::Refined)) {
      progress.payloads.at(Stage::Refined).at("selected").get_to(selected);
    } else if (assignment.tier == Tier::Medium) {
      at = "refine";
      const AgentSpec& refiner = plan_.require_one(AgentRole::Refiner);
      for (const auto& label : rank.top2) {
        const ReasoningPath* p = path_by_label(paths, label);
        if (!p)
          throw std::runtime_error("ranked label " + label +
                                   " has no generated path");
        ReasoningPath refined = refine_path(ctx, q, *p, error_reasons, refiner);
        selected.push_back(
            {label, refined.text, Provenance::Refined, "", {}, {}});
      }
      nlohmann::json pl{{"selected", selected}};
      if (plan_.run.medium_reverify) {
        const AgentSpec& verifier = plan_.require_one(AgentRole::Verifier);
        std::vector<Verdict> recheck;
        for (const auto& sel : selected) {
          ReasoningPath rp{q.id, refiner.id, kDefaultTemperature, sel.label,
                           sel.text};
          recheck.push_back(verify_path(ctx, q, rp, verifier));
        }
        pl["reverify"] = recheck;
      }
      journal_append(writer, q.id, Stage::Refined, std::move(pl));
    } else {  // difficult
      at = "regenerate";
      const AgentSpec& strong = plan_.require_one(AgentRole::DifficultGenerator);
      const ReasoningPath* seed = correct.empty() ? nullptr : &correct.front();
      for (int k = 0; k < plan_.run.difficult_paths; ++k) {
        RegenerationResult rr =
            regenerate_path(ctx, q, seed, error_reasons, strong);
        if (k > 0 && !seed) rr.path.label = path_label(strong.id, k + 1);
        selected.push_back(
            {rr.path.label, rr.path.text, rr.provenance, "", {}, {}});
      }
      journal_append(writer, q.id, Stage::Refined, {{"selected", selected}});
    }

    // -- summarization ---------------------------------------------------------
    at = "summarize";
    if (progress.has(Stage::Summarized)) {
      const auto& arr = progress.payloads.at(Stage::Summarized).at("summaries");
      if (arr.size() != selected.size())
        throw std::runtime_error(
            "journaled summaries do not match the selected set for question " +
            q.id);
      for (std::size_t i = 0; i < selected.size(); ++i)
        selected[i].summary = arr.at(i).get<std::string>();
    } else {
      const AgentSpec& summarizer = plan_.require_one(AgentRole::Summarizer);
      nlohmann::json summaries = nlohmann::json::array();
      for (auto& sel : selected) {
        sel.summary = summarize(ctx, sel.text, summarizer);
        summaries.push_back(sel.summary);
      }
      journal_append(writer, q.id, Stage::Summarized,
                     {{"summaries", std::move(summaries)}});
    }

    // -- scoring (optional) ----------------------------------------------------
    if (plan_.run.scoring) {
      at = "score";
      if (progress.has(Stage::Scored)) {
        for (const auto& entry :
             progress.payloads.at(Stage::Scored).at("scores")) {
          const auto idx = entry.at("index").get<std::size_t>();
          if (idx >= selected.size())
            throw std::runtime_error(
                "journaled score index out of range for question " + q.id);
          if (entry.contains("pre"))
            selected[idx].pre_score = entry.at("pre").get<QualityScore>();
          if (entry.contains("post"))
            selected[idx].post_score = entry.at("post").get<QualityScore>();
        }
      } else {
        const AgentSpec& scorer = plan_.require_one(AgentRole::Scorer);
        nlohmann::json scores = nlohmann::json::array();
        for (std::size_t i = 0; i < selected.size(); ++i) {
          auto& sel = selected[i];
          nlohmann::json entry{{"index", i}};
          if (sel.provenance == Provenance::Refined) {
            if (const ReasoningPath* p = path_by_label(paths, sel.label)) {
              try {
                QualityScore s = score_response(ctx, q, p->text, scorer);
                sel.pre_score = s;
                entry["pre"] = s;
              } catch (const ScoreError& e) {
                entry["pre_failed"] = std::string(e.what());
              }
            }
          }
          try {
            QualityScore s = score_response(ctx, q, sel.text, scorer);
            sel.post_score = s;
            entry["post"] = s;
          } catch (const ScoreError& e) {
            entry["post_failed"] = std::string(e.what());
          }
          scores.push_back(std::move(entry));
        }
        journal_append(writer, q.id, Stage::Scored,
                       {{"scores", std::move(scores)}});
      }
    }

    // -- assembly ---------------------------------------------------------------
    at = "assemble";
    CuratedRecord record{q.id, assignment.tier, std::move(selected),
                         assignment.tier != Tier::Difficult
                             ? rank.reasons
                             : std::map<std::string, std::string>{}};
    validate_record(record);
    journal_append(writer, q.id, Stage::Assembled, {{"record", record}});
  } catch (const AbortRun&) {
    throw;
  } catch (const std::exception& e) {
    journal_append(writer, q.id, Stage::Failed,
                   {{"at_stage", at}, {"cause", std::string(e.what())}});
  }
}

RunSummary Orchestrator::run(const std::vector<Question>& corpus,
                             const std::filesystem::path& journal_path,
                             RunMode mode) {
  const std::string fingerprint = plan_fingerprint(plan_, prompts_);
  JournalLock lock(journal_path);

  const bool exists = std::filesystem::exists(journal_path);
  if (mode == RunMode::ResumeOnly && !exists)
    throw std::runtime_error("cannot resume: journal not found: " +
                             journal_path.string());
  const bool fresh =
      mode == RunMode::Fresh || (mode == RunMode::Auto && !exists);

  std::map<std::string, QuestionProgress> progress;
  JournalWriter writer = [&]() -> JournalWriter {
    if (fresh)
      return JournalWriter::create(
          journal_path,
          JournalHeader{make_run_id(), fingerprint, iso8601_utc_now()});
    progress = replay_journal(read_journal(journal_path));
    return JournalWriter::append_to(journal_path, fingerprint);
  }();
  const std::string run_id = writer.header().run_id;

  std::vector<const Question*> todo;
  for (const auto& q : corpus) {
    auto it = progress.find(q.id);
    if (it != progress.end() && it->second.has(Stage::Assembled)) continue;
    todo.push_back(&q);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex err_mu;
  std::exception_ptr fatal;

  auto worker = [&]() {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= todo.size()) break;
      const Question& q = *todo[i];
      QuestionProgress qp;
      if (auto it = progress.find(q.id); it != progress.end()) qp = it->second;
      try {
        process_question(q, std::move(qp), writer);
      } catch (...) {
        // AbortRun from the crash hook, or a journal write failure: both end
        // the run. Stage failures never reach here (journaled as Failed).
        std::lock_guard lk(err_mu);
        if (!fatal) fatal = std::current_exception();
        stop.store(true, std::memory_order_relaxed);
      }
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(plan_.run.workers,
                                static_cast<int>(std::max<std::size_t>(
                                    1, todo.size()))));
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);

  return summarize_run(corpus, journal_path, run_id);
}

RunSummary Orchestrator::dry_run(
    const std::vector<Question>& corpus,
    const std::filesystem::path& journal_path,
    const std::map<std::string, std::vector<Verdict>>& fixtures) {
  const std::string fingerprint = plan_fingerprint(plan_, prompts_);
  JournalLock lock(journal_path);
  JournalWriter writer = JournalWriter::create(
      journal_path,
      JournalHeader{make_run_id(), fingerprint, iso8601_utc_now()});
  for (const auto& q : corpus) {
    auto it = fixtures.find(q.id);
    if (it == fixtures.end()) continue;
    TierAssignment assignment = classify_tier(
        q.id, it->second, plan_.expected_paths(), plan_.thresholds);
    journal_append(writer, q.id, Stage::Tiered, {{"assignment", assignment}});
  }
  return summarize_run(corpus, journal_path, writer.header().run_id);
}

RunSummary Orchestrator::summarize_run(
    const std::vector<Question>& corpus,
    const std::filesystem::path& journal_path,
    const std::string& run_id) const {
  RunSummary s;
  s.run_id = run_id;
  s.questions_total = static_cast<long>(corpus.size());

  const JournalData data = read_journal(journal_path);
  const auto progress = replay_journal(data);
  const int expected = plan_.expected_paths();

  // Latest failure details per question, for questions still failed.
  std::map<std::string, FailureNote> last_failure;
  for (const auto& e : data.entries) {
    if (e.stage != Stage::Failed) continue;
    last_failure[e.qid] =
        FailureNote{e.qid, e.payload.value("at_stage", std::string{}),
                    e.payload.value("cause", std::string{})};
  }

  for (const auto& q : corpus) {
    auto it = progress.find(q.id);
    if (it == progress.end()) continue;
    const QuestionProgress& qp = it->second;
    if (qp.has(Stage::Assembled)) ++s.completed;
    if (qp.failed) {
      ++s.failed;
      auto fit = last_failure.find(q.id);
      if (fit != last_failure.end()) s.failures.push_back(fit->second);
    }
    if (qp.has(Stage::Verified)) {
      const auto& verdicts = qp.payloads.at(Stage::Verified).at("verdicts");
      if (static_cast<int>(verdicts.size()) == expected)
        ++s.full_verdict_sets;
    }
    if (qp.has(Stage::Tiered)) {
      const auto assignment =
          qp.payloads.at(Stage::Tiered).at("assignment").get<TierAssignment>();
      switch (assignment.tier) {
        case Tier::Easy: ++s.tiers.easy; break;
        case Tier::Medium: ++s.tiers.medium; break;
        case Tier::Difficult: ++s.tiers.difficult; break;
      }
    }
    if (qp.has(Stage::Scored)) {
      for (const auto& entry : qp.payloads.at(Stage::Scored).at("scores")) {
        const int idx = entry.value("index", 0);
        if (entry.contains("pre_failed"))
          s.rescore_queue.push_back(
              {q.id, idx, entry.at("pre_failed").get<std::string>()});
        if (entry.contains("post_failed"))
          s.rescore_queue.push_back(
              {q.id, idx, entry.at("post_failed").get<std::string>()});
      }
    }
  }

  s.usage = gateway_.usage();
  s.total_calls = gateway_.total_calls();
  s.tokens_in = gateway_.total_tokens_in();
  s.tokens_out = gateway_.total_tokens_out();
  return s;
}

}  // namespace medcot
