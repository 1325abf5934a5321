#include <CLI11.hpp>

#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcot/analytics.hpp"
#include "medcot/assembly.hpp"
#include "medcot/config.hpp"
#include "medcot/core.hpp"
#include "medcot/cost.hpp"
#include "medcot/gateway.hpp"
#include "medcot/http_backend.hpp"
#include "medcot/journal.hpp"
#include "medcot/mock_backend.hpp"
#include "medcot/orchestrator.hpp"
#include "medcot/stages.hpp"
#include "medcot/util.hpp"

namespace {

using nlohmann::json;

// Everything a pipeline-touching subcommand needs, built from --config/--mock.
struct Runtime {
  medcot::PipelinePlan plan;
  medcot::PromptRegistry prompts = medcot::PromptRegistry::builtin();
  std::unique_ptr<medcot::Backend> backend;
  std::unique_ptr<medcot::Gateway> gateway;

  medcot::StageContext stage_context() { return {*gateway, prompts}; }
};

Runtime make_runtime(const std::string& config_path,
                     const std::string& mock_path) {
  Runtime rt;
  rt.plan = medcot::load_plan(config_path);
  rt.prompts = medcot::build_registry(rt.plan);
  if (!mock_path.empty()) {
    auto [rules, options] = medcot::ScriptedMockBackend::parse_script(mock_path);
    rt.backend = std::make_unique<medcot::ScriptedMockBackend>(
        std::move(rules), std::move(options));
  } else {
    rt.backend = std::make_unique<medcot::HttpBackend>();
  }
  rt.gateway = std::make_unique<medcot::Gateway>(*rt.backend, rt.plan.retry);
  return rt;
}

json read_json_file(const std::string& path) {
  return json::parse(medcot::read_file(path));
}

// Writes to --out when given, else stdout.
void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content << "\n";
  else
    medcot::write_file(out_path, content + "\n");
}

void emit_json(const std::string& out_path, const json& j) {
  emit(out_path, j.dump(2));
}

// CSV + JSON pair under a shared path prefix; stdout JSON when no prefix.
void emit_report(const std::string& prefix, const json& j,
                 const std::string& csv) {
  if (prefix.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  medcot::write_file(prefix + ".json", j.dump(2) + "\n");
  medcot::write_file(prefix + ".csv", csv);
}

std::vector<medcot::Question> load_corpus(const std::string& corpus_path,
                                          const std::string& source,
                                          const std::string& rejects_path,
                                          json& stats) {
  medcot::LoadResult lr = medcot::load_questions(corpus_path, source);
  if (!rejects_path.empty()) medcot::write_rejects(rejects_path, lr.rejects);
  stats["ingested"] = lr.questions.size();
  stats["rejected"] = lr.rejects.size();
  return std::move(lr.questions);
}

// Curated records need their question snapshots back; both live in the journal.
std::vector<medcot::SftInstance> instances_from_journal(
    const std::string& journal_path, medcot::Variant variant) {
  const medcot::JournalData data = medcot::read_journal(journal_path);
  const auto progress = medcot::replay_journal(data);
  std::vector<medcot::SftInstance> instances;
  for (const auto& [qid, qp] : progress) {
    if (!qp.has(medcot::Stage::Assembled)) continue;
    if (!qp.has(medcot::Stage::Generated))
      throw std::runtime_error("question " + qid +
                               " is assembled but has no question snapshot");
    const auto record = qp.payloads.at(medcot::Stage::Assembled)
                            .at("record")
                            .get<medcot::CuratedRecord>();
    const auto question = qp.payloads.at(medcot::Stage::Generated)
                              .at("question")
                              .get<medcot::Question>();
    auto batch = medcot::make_instances(record, question, variant);
    instances.insert(instances.end(), std::make_move_iterator(batch.begin()),
                     std::make_move_iterator(batch.end()));
  }
  return instances;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"medcot: multi-agent medical chain-of-thought curation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string mock_path;
  app.add_option("--mock", mock_path,
                 "scripted-backend JSONL; replaces live endpoints everywhere");

  // Shared flag storage. Each subcommand binds the subset it uses.
  std::string config_path, corpus_path, source, journal_path, out_path;
  std::string question_path, paths_path, reasons_path, cot_path, response_path;
  std::string verdicts_path, qid, summary_path, rejects_path, fixtures_path;
  std::string variant_name, manifest_path, ledger_path, csv_path;
  std::string a_path, b_path, c_path, names_csv, results_path, out_prefix;
  bool fresh = false, dry_run = false;

  // ---- single-stage debugging commands --------------------------------------

  auto* cmd_generate =
      app.add_subcommand("generate", "produce reasoning paths for one question");
  cmd_generate->add_option("--config", config_path)->required();
  cmd_generate->add_option("--question", question_path, "Question JSON file")
      ->required();
  cmd_generate->add_option("--out", out_path);
  cmd_generate->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    const auto q = read_json_file(question_path).get<medcot::Question>();
    medcot::validate_question(q);
    auto ctx = rt.stage_context();
    medcot::GenerationResult res =
        medcot::generate_paths(ctx, q, rt.plan.generators());
    emit_json(out_path, json{{"paths", res.paths}, {"absent", res.absent}});
  });

  auto* cmd_verify =
      app.add_subcommand("verify", "verdict for each reasoning path");
  cmd_verify->add_option("--config", config_path)->required();
  cmd_verify->add_option("--question", question_path)->required();
  cmd_verify->add_option("--paths", paths_path, "ReasoningPath JSON array")
      ->required();
  cmd_verify->add_option("--out", out_path);
  cmd_verify->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    const auto q = read_json_file(question_path).get<medcot::Question>();
    const auto paths =
        read_json_file(paths_path).get<std::vector<medcot::ReasoningPath>>();
    const medcot::AgentSpec& verifier =
        rt.plan.require_one(medcot::AgentRole::Verifier);
    auto ctx = rt.stage_context();
    std::vector<medcot::Verdict> verdicts;
    for (const auto& p : paths)
      verdicts.push_back(medcot::verify_path(ctx, q, p, verifier));
    emit_json(out_path, json{{"verdicts", verdicts}});
  });

  auto* cmd_route =
      app.add_subcommand("route", "tier assignment from a verdict set");
  cmd_route->add_option("--config", config_path)->required();
  cmd_route->add_option("--verdicts", verdicts_path, "Verdict JSON array")
      ->required();
  cmd_route->add_option("--qid", qid)->required();
  cmd_route->add_option("--out", out_path);
  cmd_route->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    const auto verdicts =
        read_json_file(verdicts_path).get<std::vector<medcot::Verdict>>();
    const medcot::TierAssignment assignment = medcot::classify_tier(
        qid, verdicts, rt.plan.expected_paths(), rt.plan.thresholds);
    emit_json(out_path, json(assignment));
  });

  auto* cmd_rank =
      app.add_subcommand("rank", "keep the top two of the correct paths");
  cmd_rank->add_option("--config", config_path)->required();
  cmd_rank->add_option("--question", question_path)->required();
  cmd_rank->add_option("--paths", paths_path, "correct paths, JSON array")
      ->required();
  cmd_rank->add_option("--out", out_path);
  cmd_rank->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    const auto q = read_json_file(question_path).get<medcot::Question>();
    const auto paths =
        read_json_file(paths_path).get<std::vector<medcot::ReasoningPath>>();
    auto ctx = rt.stage_context();
    const medcot::RankOutcome outcome = medcot::rank_paths(
        ctx, q, paths, rt.plan.require_one(medcot::AgentRole::Ranker));
    emit_json(out_path, json{{"top2", {outcome.top2[0], outcome.top2[1]}},
                             {"reasons", outcome.reasons},
                             {"fallback_used", outcome.fallback_used}});
  });

  auto* cmd_refine =
      app.add_subcommand("refine", "rewrite one path against error reasons");
  cmd_refine->add_option("--config", config_path)->required();
  cmd_refine->add_option("--question", question_path)->required();
  cmd_refine->add_option("--path", paths_path, "ReasoningPath JSON file")
      ->required();
  cmd_refine->add_option("--reasons", reasons_path, "JSON array of strings")
      ->required();
  cmd_refine->add_option("--out", out_path);
  cmd_refine->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    const auto q = read_json_file(question_path).get<medcot::Question>();
    const auto path = read_json_file(paths_path).get<medcot::ReasoningPath>();
    const auto reasons =
        read_json_file(reasons_path).get<std::vector<std::string>>();
    auto ctx = rt.stage_context();
    const medcot::ReasoningPath refined = medcot::refine_path(
        ctx, q, path, reasons, rt.plan.require_one(medcot::AgentRole::Refiner));
    emit_json(out_path, json(refined));
  });

  auto* cmd_summarize =
      app.add_subcommand("summarize", "condense one CoT into a response");
  cmd_summarize->add_option("--config", config_path)->required();
  cmd_summarize->add_option("--cot", cot_path, "plain-text CoT file")
      ->required();
  cmd_summarize->add_option("--out", out_path);
  cmd_summarize->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    auto ctx = rt.stage_context();
    const std::string summary =
        medcot::summarize(ctx, medcot::read_file(cot_path),
                          rt.plan.require_one(medcot::AgentRole::Summarizer));
    emit(out_path, summary);
  });

  auto* cmd_score =
      app.add_subcommand("score", "1-10 quality score for a response");
  cmd_score->add_option("--config", config_path)->required();
  cmd_score->add_option("--question", question_path)->required();
  cmd_score->add_option("--response", response_path, "plain-text response file")
      ->required();
  cmd_score->add_option("--out", out_path);
  cmd_score->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    const auto q = read_json_file(question_path).get<medcot::Question>();
    auto ctx = rt.stage_context();
    const medcot::QualityScore score = medcot::score_response(
        ctx, q, medcot::read_file(response_path),
        rt.plan.require_one(medcot::AgentRole::Scorer));
    emit_json(out_path, json(score));
  });

  // ---- pipeline ---------------------------------------------------------------

  auto* cmd_run = app.add_subcommand("run", "full pipeline over a corpus");
  cmd_run->add_option("--corpus", corpus_path)->required();
  cmd_run->add_option("--source", source, "benchmark tag the corpus holds")
      ->required();
  cmd_run->add_option("--config", config_path)->required();
  cmd_run->add_option("--journal", journal_path)->required();
  cmd_run->add_flag("--fresh", fresh, "truncate any existing journal");
  cmd_run->add_flag("--dry-run", dry_run,
                    "route injected verdicts; no agent calls");
  cmd_run->add_option("--verdict-fixtures", fixtures_path,
                      "JSONL {qid, verdicts} for --dry-run");
  cmd_run->add_option("--summary", summary_path, "also write the summary here");
  cmd_run->add_option("--rejects", rejects_path, "write malformed-row report");
  cmd_run->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    json stats;
    const auto corpus = load_corpus(corpus_path, source, rejects_path, stats);
    medcot::Orchestrator orch(rt.plan, *rt.gateway, rt.prompts);
    medcot::RunSummary summary;
    if (dry_run) {
      if (fixtures_path.empty())
        throw std::runtime_error("--dry-run requires --verdict-fixtures");
      summary = orch.dry_run(corpus, journal_path,
                             medcot::load_verdict_fixtures(fixtures_path));
    } else {
      summary = orch.run(corpus, journal_path,
                         fresh ? medcot::RunMode::Fresh : medcot::RunMode::Auto);
    }
    json out = summary.to_json();
    out["questions"]["ingested"] = stats["ingested"];
    out["questions"]["rejected"] = stats["rejected"];
    std::cout << out.dump(2) << "\n";
    if (!summary_path.empty())
      medcot::write_file(summary_path, out.dump(2) + "\n");
  });

  auto* cmd_resume =
      app.add_subcommand("resume", "continue an interrupted journal");
  cmd_resume->add_option("--corpus", corpus_path)->required();
  cmd_resume->add_option("--source", source)->required();
  cmd_resume->add_option("--config", config_path)->required();
  cmd_resume->add_option("--journal", journal_path)->required();
  cmd_resume->add_option("--summary", summary_path);
  cmd_resume->callback([&] {
    Runtime rt = make_runtime(config_path, mock_path);
    json stats;
    const auto corpus = load_corpus(corpus_path, source, "", stats);
    medcot::Orchestrator orch(rt.plan, *rt.gateway, rt.prompts);
    medcot::RunSummary summary =
        orch.run(corpus, journal_path, medcot::RunMode::ResumeOnly);
    json out = summary.to_json();
    out["questions"]["ingested"] = stats["ingested"];
    std::cout << out.dump(2) << "\n";
    if (!summary_path.empty())
      medcot::write_file(summary_path, out.dump(2) + "\n");
  });

  // ---- dataset emission ---------------------------------------------------------

  auto* cmd_assemble =
      app.add_subcommand("assemble", "emit one SFT dataset variant");
  cmd_assemble->add_option("--journal", journal_path)->required();
  cmd_assemble->add_option("--variant", variant_name, "cot|response|reason")
      ->required();
  cmd_assemble->add_option("--out", out_path)->required();
  cmd_assemble->add_option("--manifest", manifest_path);
  cmd_assemble->callback([&] {
    const medcot::Variant variant = medcot::variant_from_string(variant_name);
    auto instances = instances_from_journal(journal_path, variant);
    const medcot::DatasetManifest manifest =
        medcot::emit_dataset(std::move(instances), out_path);
    const json mj = medcot::manifest_json(manifest);
    std::cout << mj.dump(2) << "\n";
    if (!manifest_path.empty())
      medcot::write_file(manifest_path, mj.dump(2) + "\n");
  });

  // ---- reports -------------------------------------------------------------------

  auto* cmd_report = app.add_subcommand("report", "analytics tables");
  cmd_report->require_subcommand(1);

  auto* rep_verdicts = cmd_report->add_subcommand(
      "verdicts", "correct/error counts per agent and temperature");
  rep_verdicts->add_option("--journal", journal_path)->required();
  rep_verdicts->add_option("--out-prefix", out_prefix,
                           "writes <prefix>.csv and <prefix>.json");
  rep_verdicts->callback([&] {
    const auto data = medcot::read_journal(journal_path);
    const auto hist = medcot::verdict_histogram(data);
    emit_report(out_prefix, medcot::verdict_histogram_json(hist),
                medcot::verdict_histogram_csv(hist));
  });

  auto* rep_ranker = cmd_report->add_subcommand(
      "ranker", "how often each slot's path was kept");
  rep_ranker->add_option("--journal", journal_path)->required();
  rep_ranker->add_option("--out-prefix", out_prefix);
  rep_ranker->callback([&] {
    const auto data = medcot::read_journal(journal_path);
    const auto counts = medcot::ranker_distribution(data);
    emit_report(out_prefix, medcot::selection_counts_json(counts),
                medcot::selection_counts_csv(counts));
  });

  auto* rep_diff = cmd_report->add_subcommand(
      "diff", "pairwise and 1-vs-2 correctness differences");
  rep_diff->add_option("--a", a_path, "correctness JSONL {id, correct}")
      ->required();
  rep_diff->add_option("--b", b_path)->required();
  rep_diff->add_option("--c", c_path, "third model enables the 1-vs-2 table");
  rep_diff->add_option("--names", names_csv, "comma-separated model names");
  rep_diff->add_option("--out-prefix", out_prefix);
  rep_diff->callback([&] {
    std::vector<std::string> names{"a", "b", "c"};
    if (!names_csv.empty()) {
      names.clear();
      std::string chunk;
      for (char ch : names_csv) {
        if (ch == ',') {
          names.push_back(chunk);
          chunk.clear();
        } else {
          chunk += ch;
        }
      }
      names.push_back(chunk);
    }
    while (names.size() < 3) names.push_back("model" + std::to_string(names.size()));
    const auto a = medcot::load_correctness(a_path);
    const auto b = medcot::load_correctness(b_path);
    json out;
    std::string csv = "pair,first_only,second_only,total,first_only_pct,second_only_pct\n";
    auto add_pair = [&](const std::string& na, const medcot::CorrectnessMap& ma,
                        const std::string& nb, const medcot::CorrectnessMap& mb) {
      const auto d = medcot::pairwise_diff(ma, mb);
      out["pairwise"].push_back(
          {{"a", na}, {"b", nb}, {"diff", medcot::pairwise_diff_json(d)}});
      csv += na + " vs " + nb + "," + std::to_string(d.a_only) + "," +
             std::to_string(d.b_only) + "," + std::to_string(d.total) + "," +
             medcot::format_double(d.a_only_pct, 2) + "," +
             medcot::format_double(d.b_only_pct, 2) + "\n";
    };
    add_pair(names[0], a, names[1], b);
    if (!c_path.empty()) {
      const auto c = medcot::load_correctness(c_path);
      add_pair(names[0], a, names[2], c);
      add_pair(names[1], b, names[2], c);
      const auto m = medcot::collective_miss(a, b, c);
      out["collective"] = medcot::collective_miss_json(
          m, {names[0], names[1], names[2]});
      csv += "collective_miss," + std::to_string(m.miss[0]) + "," +
             std::to_string(m.miss[1]) + "," + std::to_string(m.miss[2]) +
             ",,\n";
    }
    emit_report(out_prefix, out, csv);
  });

  auto* rep_accuracy = cmd_report->add_subcommand(
      "accuracy", "per-benchmark accuracy with SE plus the weighted total");
  rep_accuracy->add_option("--results", results_path,
                           "JSONL {benchmark, correct, n}")
      ->required();
  rep_accuracy->add_option("--out-prefix", out_prefix);
  rep_accuracy->callback([&] {
    const std::string text = medcot::read_file(results_path);
    std::vector<std::pair<double, long>> acc_n;
    json rows = json::array();
    std::string csv = "benchmark,correct,n,accuracy_pct,se_pct\n";
    for (const auto& line : medcot::split_lines(text)) {
      if (medcot::trim(line).empty()) continue;
      const json row = json::parse(line);
      const auto benchmark = row.at("benchmark").get<std::string>();
      const long correct = row.at("correct").get<long>();
      const long n = row.at("n").get<long>();
      const auto se = medcot::accuracy_with_se(correct, n);
      acc_n.push_back({se.accuracy * 100.0, n});
      rows.push_back({{"benchmark", benchmark},
                      {"correct", correct},
                      {"n", n},
                      {"accuracy_pct", se.accuracy * 100.0},
                      {"se_pct", se.standard_error * 100.0}});
      csv += benchmark + "," + std::to_string(correct) + "," +
             std::to_string(n) + "," +
             medcot::format_double(se.accuracy * 100.0, 2) + "," +
             medcot::format_double(se.standard_error * 100.0, 2) + "\n";
    }
    const double total = medcot::micro_average(acc_n);
    csv += "total,,,," + medcot::format_double(total, 2) + "\n";
    emit_report(out_prefix,
                json{{"benchmarks", rows}, {"total_accuracy_pct", total}}, csv);
  });

  // ---- cost + config --------------------------------------------------------------

  auto* cmd_cost = app.add_subcommand("estimate-cost", "cost ledger report");
  cmd_cost->add_option("--ledger", ledger_path)->required();
  cmd_cost->add_option("--out", out_path, "also write the JSON report here");
  cmd_cost->add_option("--csv", csv_path, "also write the CSV report here");
  cmd_cost->callback([&] {
    const medcot::LedgerFile ledger = medcot::load_ledger(ledger_path);
    const json report = medcot::ledger_report(ledger);
    std::cout << report.dump(2) << "\n";
    if (!out_path.empty())
      medcot::write_file(out_path, report.dump(2) + "\n");
    if (!csv_path.empty())
      medcot::write_file(csv_path, medcot::ledger_report_csv(ledger));
  });

  auto* cmd_validate =
      app.add_subcommand("validate-config", "parse + validate a config file");
  cmd_validate->add_option("--config", config_path)->required();
  cmd_validate->callback([&] {
    const medcot::PipelinePlan plan = medcot::load_plan(config_path);
    const medcot::PromptRegistry registry = medcot::build_registry(plan);
    json agents = json::array();
    for (const auto& a : plan.agents)
      agents.push_back({{"id", a.id}, {"role", medcot::to_string(a.role)}});
    std::cout << json{{"ok", true},
                      {"plan_fingerprint",
                       medcot::plan_fingerprint(plan, registry)},
                      {"expected_paths", plan.expected_paths()},
                      {"agents", agents}}
                     .dump(2)
              << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and friends print through CLI11 itself.
      return app.exit(e);
    }
    std::cerr << json{{"error", std::string(e.what())}}.dump() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", std::string(e.what())}}.dump()
              << "\n";
    return 1;
  }
}
