#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest/doctest.h>

#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcot/stages.hpp"
#include "medcot/util.hpp"
#include "support.hpp"

using namespace medcot;
using testkit::contains_rule;
using testkit::make_agent;
using testkit::StageRig;

namespace {

MockRule fp_rule(const std::string& agent, const std::string& prompt,
                 const std::string& reply) {
  MockRule r;
  r.agent = agent;
  r.fingerprint = prompt_fingerprint(prompt);
  r.reply = reply;
  return r;
}

const AgentSpec kVerifier =
    make_agent("verifier", AgentRole::Verifier, "mock://judge");
const AgentSpec kRanker = make_agent("ranker", AgentRole::Ranker, "mock://judge");
const AgentSpec kRefiner =
    make_agent("refiner", AgentRole::Refiner, "mock://judge");
const AgentSpec kSummarizer =
    make_agent("summarizer", AgentRole::Summarizer, "mock://judge");
const AgentSpec kStrong = make_agent("strong_solver",
                                     AgentRole::DifficultGenerator,
                                     "mock://premium");
const AgentSpec kScorer = make_agent("scorer", AgentRole::Scorer,
                                     "mock://premium");

std::vector<AgentSpec> generator_trio() {
  return {make_agent("gen_a", AgentRole::Generator, "mock://gen_a"),
          make_agent("gen_b", AgentRole::Generator, "mock://gen_b"),
          make_agent("gen_c", AgentRole::Generator, "mock://gen_c")};
}

ReasoningPath make_path(const std::string& label, const std::string& text) {
  ReasoningPath p;
  p.question_id = "q001";
  p.agent_id = "gen_a";
  p.temperature = 0.7;
  p.label = label;
  p.text = text;
  return p;
}

}  // namespace

// ---- extract_json ---------------------------------------------------------------

TEST_CASE("extract_json basics") {
  CHECK(extract_json(R"({"a": 1})") == nlohmann::json{{"a", 1}});
  CHECK(extract_json(R"(prose before {"a": 1} prose after)") ==
        nlohmann::json{{"a", 1}});
  CHECK(extract_json("```json\n{\"a\": 1}\n```") == nlohmann::json{{"a", 1}});
  CHECK(extract_json(R"({"a": {"b": 2}})").at("a").at("b") == 2);
  CHECK(extract_json(R"({"a": "}{"})").at("a") == "}{");
  CHECK(extract_json(R"({"a": "he said \"}\" loudly"})").at("a") ==
        "he said \"}\" loudly");
}

TEST_CASE("extract_json picks the first object satisfying the keys") {
  const std::string two = R"({"x": 1} and then {"verdict": "Error"})";
  CHECK(extract_json(two).at("x") == 1);  // no required keys: first object
  CHECK(extract_json(two, {"verdict"}).at("verdict") == "Error");

  // A broken opener before a valid object is skipped.
  CHECK(extract_json(R"({broken {"a": 1})", {"a"}).at("a") == 1);

  // Arrays and scalars are not objects.
  CHECK_THROWS_AS(extract_json("[1, 2, 3]"), ExtractError);
}

TEST_CASE("extract_json error kinds") {
  try {
    extract_json("no braces at all");
    FAIL("expected ExtractError");
  } catch (const ExtractError& e) {
    CHECK(e.kind == ExtractError::Kind::NoObject);
  }
  try {
    extract_json(R"({"x": 1})", {"verdict"});
    FAIL("expected ExtractError");
  } catch (const ExtractError& e) {
    CHECK(e.kind == ExtractError::Kind::MissingKeys);
  }
  CHECK_THROWS_AS(extract_json("{ never closes"), ExtractError);
}

TEST_CASE("extract_json agrees with the brute-force oracle") {
  std::mt19937 rng(20260818);
  int with_target = 0;
  for (int i = 0; i < 200; ++i) {
    const testkit::ExtractCase c = testkit::random_extract_case(rng);
    nlohmann::json got, want;
    ExtractError::Kind got_kind{}, want_kind{};
    bool got_threw = false, want_threw = false;
    try {
      got = extract_json(c.reply, {"verdict"});
    } catch (const ExtractError& e) {
      got_threw = true;
      got_kind = e.kind;
    }
    try {
      want = testkit::oracle_extract(c.reply, {"verdict"});
    } catch (const ExtractError& e) {
      want_threw = true;
      want_kind = e.kind;
    }
    REQUIRE_MESSAGE(got_threw == want_threw, "case ", i, ": ", c.reply);
    if (got_threw) {
      CHECK(got_kind == want_kind);
      CHECK_FALSE(c.has_target);
    } else {
      CHECK(got == want);
      REQUIRE(c.has_target);
      CHECK(got == c.target);
      ++with_target;
    }
  }
  CHECK(with_target > 100);  // the generator mostly embeds a target
}

// ---- prompt plumbing helpers -----------------------------------------------------

TEST_CASE("cot_block formats labeled traces") {
  CHECK(cot_block({}) == "");
  CHECK(cot_block({make_path("p1", "one")}) == "[p1]\none");
  CHECK(cot_block({make_path("p1", "one"), make_path("p2", "two")}) ==
        "[p1]\none\n\n[p2]\ntwo");
}

TEST_CASE("error_reasons_block filters sentinels") {
  CHECK(error_reasons_block({"r1", "r2"}) == "r1\nr2");
  CHECK(error_reasons_block({"r1", kUnparseableVerifierReason, "r2"}) ==
        "r1\nr2");
  CHECK(error_reasons_block({kUnparseableVerifierReason}) ==
        kNoErrorReasonsPlaceholder);
  CHECK(error_reasons_block({}) == kNoErrorReasonsPlaceholder);
}

// ---- generation -------------------------------------------------------------------

TEST_CASE("generate_paths produces one path per generator and temperature") {
  StageRig rig({contains_rule("*", "vignette", "PATH($AGENT|$TEMP)")});
  const Question q = testkit::make_question(1);

  const GenerationResult gen =
      generate_paths(rig.ctx, q, generator_trio());
  REQUIRE(gen.paths.size() == 9);
  CHECK(gen.absent.empty());

  CHECK(gen.paths[0].label == "gen_a_COT1");
  CHECK(gen.paths[0].agent_id == "gen_a");
  CHECK(gen.paths[0].temperature == doctest::Approx(0.7));
  CHECK(gen.paths[0].text == "PATH(gen_a|0.7)");
  CHECK(gen.paths[0].question_id == "q001");

  CHECK(gen.paths[4].label == "gen_b_COT2");
  CHECK(gen.paths[4].text == "PATH(gen_b|0.9)");
  CHECK(gen.paths[8].label == "gen_c_COT3");
  CHECK(gen.paths[8].temperature == doctest::Approx(1.0));
  CHECK(gen.paths[8].text == "PATH(gen_c|1.0)");

  CHECK(rig.mock.total_calls() == 9);
}

TEST_CASE("generate_paths records failed slots as absent") {
  MockRule broken = contains_rule("gen_b", "vignette", "PATH($AGENT|$TEMP)");
  broken.fail_times = 1;
  broken.fail_status = 400;
  broken.permanent = true;
  StageRig rig({contains_rule("gen_a", "vignette", "PATH($AGENT|$TEMP)"),
                broken,
                contains_rule("gen_c", "vignette", "PATH($AGENT|$TEMP)")});
  const Question q = testkit::make_question(1);

  const GenerationResult gen = generate_paths(rig.ctx, q, generator_trio());
  CHECK(gen.paths.size() == 8);
  REQUIRE(gen.absent.size() == 1);
  CHECK(gen.absent[0].label == "gen_b_COT1");
  CHECK(gen.absent[0].agent_id == "gen_b");
  CHECK(gen.absent[0].temperature == doctest::Approx(0.7));
  CHECK(gen.absent[0].error.find("permanent failure") != std::string::npos);
}

TEST_CASE("generate_paths retries transient slot failures") {
  MockRule flaky = contains_rule("gen_a", "vignette", "PATH($AGENT|$TEMP)");
  flaky.fail_times = 2;
  flaky.fail_status = 429;
  StageRig rig({flaky,
                contains_rule("gen_b", "vignette", "PATH($AGENT|$TEMP)"),
                contains_rule("gen_c", "vignette", "PATH($AGENT|$TEMP)")});
  const Question q = testkit::make_question(1);

  const GenerationResult gen = generate_paths(rig.ctx, q, generator_trio());
  CHECK(gen.paths.size() == 9);
  CHECK(gen.absent.empty());
  CHECK(rig.mock.calls_for("gen_a") == 5);  // 2 failures + 3 successes
}

TEST_CASE("generate_paths hard failures") {
  MockOptions strict;
  strict.strict = true;
  StageRig rig({}, strict);  // nothing matches: every call fails permanently
  const Question q = testkit::make_question(1);
  CHECK_THROWS_WITH_AS(generate_paths(rig.ctx, q, generator_trio()),
                       doctest::Contains("all generation calls failed"),
                       std::runtime_error);
  CHECK_THROWS_AS(generate_paths(rig.ctx, q, {}), std::runtime_error);
}

// ---- verification -----------------------------------------------------------------

TEST_CASE("verify_path parses verdicts") {
  const Question q = testkit::make_question(1);
  const ReasoningPath p = make_path("gen_a_COT1", "TRACE-A reasoning");

  SUBCASE("correct verdict") {
    StageRig rig({contains_rule("verifier", "TRACE-A",
                                R"({"verdict": "Correct", "reason": ""})")});
    const Verdict v = verify_path(rig.ctx, q, p, kVerifier);
    CHECK(v.path_label == "gen_a_COT1");
    CHECK(v.verdict == VerdictKind::Correct);
    CHECK(v.reason.empty());
    CHECK(rig.mock.total_calls() == 1);
  }

  SUBCASE("error verdict with reason, prose-wrapped") {
    StageRig rig({contains_rule(
        "verifier", "TRACE-A",
        R"(My judgement: {"verdict": "Error", "reason": "step 2 is wrong"} done)")});
    const Verdict v = verify_path(rig.ctx, q, p, kVerifier);
    CHECK(v.verdict == VerdictKind::Error);
    CHECK(v.reason == "step 2 is wrong");
  }

  SUBCASE("verdict value is trimmed") {
    StageRig rig({contains_rule("verifier", "TRACE-A",
                                R"({"verdict": "  Correct \n"})")});
    CHECK(verify_path(rig.ctx, q, p, kVerifier).verdict ==
          VerdictKind::Correct);
  }

  SUBCASE("non-string reason is dropped") {
    StageRig rig({contains_rule("verifier", "TRACE-A",
                                R"({"verdict": "Error", "reason": 5})")});
    const Verdict v = verify_path(rig.ctx, q, p, kVerifier);
    CHECK(v.verdict == VerdictKind::Error);
    CHECK(v.reason.empty());
  }
}

TEST_CASE("verify_path re-asks once before degrading") {
  const Question q = testkit::make_question(1);
  const ReasoningPath p = make_path("gen_a_COT1", "TRACE-A reasoning");
  StageRig probe({});  // only for rendering the canonical prompt
  const std::string base =
      probe.prompts.render(TemplateId::Verify, verify_bindings(q, p));

  SUBCASE("re-ask succeeds") {
    StageRig rig({fp_rule("verifier", base, "no json here"),
                  fp_rule("verifier", base + kReaskSuffix,
                          R"({"verdict": "Correct"})")});
    const Verdict v = verify_path(rig.ctx, q, p, kVerifier);
    CHECK(v.verdict == VerdictKind::Correct);
    CHECK(rig.mock.total_calls() == 2);
  }

  SUBCASE("unknown verdict value triggers the re-ask") {
    StageRig rig({fp_rule("verifier", base, R"({"verdict": "Maybe"})"),
                  fp_rule("verifier", base + kReaskSuffix,
                          R"({"verdict": "Error", "reason": "r"})")});
    const Verdict v = verify_path(rig.ctx, q, p, kVerifier);
    CHECK(v.verdict == VerdictKind::Error);
    CHECK(v.reason == "r");
  }

  SUBCASE("double failure degrades to the sentinel") {
    StageRig rig({contains_rule("verifier", "TRACE-A", "still not json")});
    const Verdict v = verify_path(rig.ctx, q, p, kVerifier);
    CHECK(v.verdict == VerdictKind::Error);
    CHECK(v.reason == kUnparseableVerifierReason);
    CHECK(rig.mock.total_calls() == 2);
  }
}

// ---- ranking ----------------------------------------------------------------------

TEST_CASE("rank_fallback picks the two smallest labels") {
  CHECK(rank_fallback({"gen_b_COT1", "gen_a_COT2", "gen_c_COT3"}) ==
        std::array<std::string, 2>{"gen_a_COT2", "gen_b_COT1"});
  CHECK_THROWS_AS(rank_fallback({"only"}), std::runtime_error);
}

TEST_CASE("rank_paths selects by default when exactly two are correct") {
  StageRig rig({});  // would fail on any call; none may happen
  const Question q = testkit::make_question(1);
  const std::vector<ReasoningPath> correct{make_path("p2", "two"),
                                           make_path("p1", "one")};
  const RankOutcome out = rank_paths(rig.ctx, q, correct, kRanker);
  CHECK(out.top2 == std::array<std::string, 2>{"p2", "p1"});  // input order
  CHECK(out.reasons.empty());
  CHECK_FALSE(out.fallback_used);
  CHECK(rig.mock.total_calls() == 0);
}

TEST_CASE("rank_paths rejects fewer than two correct paths") {
  StageRig rig({});
  const Question q = testkit::make_question(1);
  CHECK_THROWS_WITH_AS(
      rank_paths(rig.ctx, q, {make_path("p1", "one")}, kRanker),
      doctest::Contains("routed to the wrong tier"), std::runtime_error);
}

TEST_CASE("rank_paths honors a valid agent reply") {
  const Question q = testkit::make_question(1);
  const std::vector<ReasoningPath> correct{
      make_path("l1", "text one"), make_path("l2", "text two"),
      make_path("l3", "text three"), make_path("l4", "text four")};

  // The rank prompt embeds the labeled trace block.
  const nlohmann::json reply = {{"top2", {"l3", "l1"}},
                                {"reasons", {{"l2", "shallow"}}}};
  StageRig rig({contains_rule("ranker", "[l3]\ntext three", reply.dump())});

  const RankOutcome out = rank_paths(rig.ctx, q, correct, kRanker);
  CHECK(out.top2 == std::array<std::string, 2>{"l3", "l1"});
  CHECK_FALSE(out.fallback_used);
  // Reasons normalized to exactly the rejected labels.
  REQUIRE(out.reasons.size() == 2);
  CHECK(out.reasons.at("l2") == "shallow");
  CHECK(out.reasons.at("l4") == "");
  CHECK(rig.mock.total_calls() == 1);
}

TEST_CASE("rank_paths re-asks on bad replies, then falls back") {
  const Question q = testkit::make_question(1);
  const std::vector<ReasoningPath> correct{make_path("l2", "two"),
                                           make_path("l3", "three"),
                                           make_path("l1", "one")};

  SUBCASE("unknown label then valid") {
    // First reply names a label outside the correct set; the re-ask wins.
    StageRig probe({});
    std::vector<std::string> labels{"l2", "l3", "l1"};
    const PromptTemplate tmpl = rank_template_for(
        {"A", "B", "C", "D"}, probe.prompts.get(TemplateId::Rank));
    std::map<std::string, std::string> bindings{
        {"question", q.stem},
        {"answer", answer_display(q)},
        {"cot_block", cot_block(correct)},
        {"optA", q.options[0].text},
        {"optB", q.options[1].text},
        {"optC", q.options[2].text},
        {"optD", q.options[3].text}};
    const std::string base = render_template(tmpl, bindings);
    StageRig rig({fp_rule("ranker", base, R"({"top2": ["ghost", "l1"]})"),
                  fp_rule("ranker", base + kReaskSuffix,
                          R"({"top2": ["l1", "l3"]})")});
    const RankOutcome out = rank_paths(rig.ctx, q, correct, kRanker);
    CHECK(out.top2 == std::array<std::string, 2>{"l1", "l3"});
    CHECK_FALSE(out.fallback_used);
    CHECK(out.reasons.at("l2") == "");
  }

  SUBCASE("double failure falls back lexicographically") {
    StageRig rig({contains_rule("ranker", "[l2]", "never valid json")});
    const RankOutcome out = rank_paths(rig.ctx, q, correct, kRanker);
    CHECK(out.fallback_used);
    CHECK(out.top2 == std::array<std::string, 2>{"l1", "l2"});
    CHECK(out.reasons.empty());
    CHECK(rig.mock.total_calls() == 2);
  }

  SUBCASE("duplicate labels in top2 are invalid") {
    StageRig rig({contains_rule("ranker", "[l2]", R"({"top2": ["l1", "l1"]})")});
    const RankOutcome out = rank_paths(rig.ctx, q, correct, kRanker);
    CHECK(out.fallback_used);
    CHECK(rig.mock.total_calls() == 2);
  }
}

TEST_CASE("rank_paths adapts the option block to three-option questions") {
  Question q = testkit::make_question(1, "PubMedQA");
  q.options = {{"A", "yes"}, {"B", "no"}, {"C", "maybe"}};
  q.gold = "A";

  const std::vector<ReasoningPath> correct{make_path("l1", "one"),
                                           make_path("l2", "two"),
                                           make_path("l3", "three")};
  // Rule keys on the rebuilt option block rendered with actual texts.
  StageRig rig({contains_rule("ranker", "A) yes\nB) no\nC) maybe",
                              R"({"top2": ["l2", "l3"]})")});
  const RankOutcome out = rank_paths(rig.ctx, q, correct, kRanker);
  CHECK(out.top2 == std::array<std::string, 2>{"l2", "l3"});
  CHECK(rig.mock.total_calls() == 1);
}

// ---- refinement / regeneration ----------------------------------------------------

TEST_CASE("refine_path rewrites with the recorded error reasons") {
  const Question q = testkit::make_question(1);
  const ReasoningPath p = make_path("gen_a_COT2", "ORIGINAL trace");

  // The refine prompt carries the filtered reasons block.
  StageRig rig({contains_rule("refiner", "bad unit conversion\nwrong dose",
                              "REWRITTEN trace")});
  const ReasoningPath refined =
      refine_path(rig.ctx, q, p,
                  {"bad unit conversion", kUnparseableVerifierReason,
                   "wrong dose"},
                  kRefiner);
  CHECK(refined.text == "REWRITTEN trace");
  CHECK(refined.label == "gen_a_COT2");  // linked to the original
  CHECK(refined.agent_id == "refiner");
  CHECK(refined.temperature == doctest::Approx(kDefaultTemperature));
  CHECK(refined.question_id == "q001");
}

TEST_CASE("refine_path edge cases") {
  const Question q = testkit::make_question(1);
  const ReasoningPath p = make_path("gen_a_COT2", "ORIGINAL trace");

  SUBCASE("empty reasons are a caller bug") {
    StageRig rig({});
    CHECK_THROWS_AS(refine_path(rig.ctx, q, p, {}, kRefiner),
                    std::invalid_argument);
  }
  SUBCASE("all-sentinel reasons render the placeholder") {
    StageRig rig({contains_rule("refiner", kNoErrorReasonsPlaceholder,
                                "REWRITTEN")});
    CHECK(refine_path(rig.ctx, q, p, {kUnparseableVerifierReason}, kRefiner)
              .text == "REWRITTEN");
  }
  SUBCASE("empty reply is an error") {
    StageRig rig({contains_rule("refiner", "ORIGINAL", "  \n ")});
    CHECK_THROWS_WITH_AS(refine_path(rig.ctx, q, p, {"r"}, kRefiner),
                         doctest::Contains("empty reply"), std::runtime_error);
  }
}

TEST_CASE("regenerate_path refines a correct seed") {
  const Question q = testkit::make_question(1);
  const ReasoningPath seed = make_path("gen_c_COT3", "SEED trace");
  StageRig rig({contains_rule("strong_solver", "SEED trace", "IMPROVED")});

  const RegenerationResult rr =
      regenerate_path(rig.ctx, q, &seed, {"r1"}, kStrong);
  CHECK(rr.provenance == Provenance::Refined);
  CHECK(rr.path.text == "IMPROVED");
  CHECK(rr.path.label == "gen_c_COT3");
  CHECK(rr.path.agent_id == "strong_solver");
}

TEST_CASE("regenerate_path starts fresh without a seed") {
  const Question q = testkit::make_question(1);
  StageRig rig({contains_rule("strong_solver", "vignette", "FRESH trace")});

  const RegenerationResult rr =
      regenerate_path(rig.ctx, q, nullptr, {"r1", "r2"}, kStrong);
  CHECK(rr.provenance == Provenance::Regenerated);
  CHECK(rr.path.text == "FRESH trace");
  CHECK(rr.path.label == "strong_solver_COT1");
  CHECK(rr.path.question_id == "q001");

  SUBCASE("empty regeneration reply is an error") {
    StageRig empty({contains_rule("strong_solver", "vignette", "")});
    CHECK_THROWS_AS(regenerate_path(empty.ctx, q, nullptr, {}, kStrong),
                    std::runtime_error);
  }
}

// ---- summarize / score -------------------------------------------------------------

TEST_CASE("summarize returns the reply verbatim") {
  StageRig rig({contains_rule("summarizer", "LONG trace",
                              "Short answer: B.")});
  CHECK(summarize(rig.ctx, "LONG trace with steps", kSummarizer) ==
        "Short answer: B.");

  CHECK_THROWS_AS(summarize(rig.ctx, "", kSummarizer), std::invalid_argument);

  StageRig empty({contains_rule("summarizer", "LONG", " ")});
  CHECK_THROWS_AS(summarize(empty.ctx, "LONG trace", kSummarizer),
                  std::runtime_error);
}

TEST_CASE("score_response parses strict integers") {
  const Question q = testkit::make_question(1);

  SUBCASE("happy path") {
    StageRig rig({contains_rule("scorer", "the response",
                                R"({"score": 7, "justification": "solid"})")});
    const QualityScore s =
        score_response(rig.ctx, q, "the response", kScorer);
    CHECK(s.score == 7);
    CHECK(s.justification == "solid");
  }
  SUBCASE("justification optional") {
    StageRig rig({contains_rule("scorer", "the response", R"({"score": 10})")});
    CHECK(score_response(rig.ctx, q, "the response", kScorer).score == 10);
  }
  SUBCASE("re-ask succeeds after a bad first reply") {
    StageRig probe({});
    const std::string base = probe.prompts.render(
        TemplateId::Score, {{"question", q.stem}, {"response", "resp"}});
    StageRig rig({fp_rule("scorer", base, R"({"score": 99})"),
                  fp_rule("scorer", base + kReaskSuffix, R"({"score": 1})")});
    CHECK(score_response(rig.ctx, q, "resp", kScorer).score == 1);
    CHECK(rig.mock.total_calls() == 2);
  }
}

TEST_CASE("score_response throws ScoreError after the re-ask") {
  const Question q = testkit::make_question(1);

  SUBCASE("out of range") {
    StageRig rig({contains_rule("scorer", "resp", R"({"score": 0})")});
    CHECK_THROWS_WITH_AS(score_response(rig.ctx, q, "resp", kScorer),
                         doctest::Contains("outside 1..10"), ScoreError);
    CHECK(rig.mock.total_calls() == 2);
  }
  SUBCASE("non-integer score") {
    StageRig rig({contains_rule("scorer", "resp", R"({"score": 7.5})")});
    CHECK_THROWS_WITH_AS(score_response(rig.ctx, q, "resp", kScorer),
                         doctest::Contains("score is not an integer"),
                         ScoreError);
  }
  SUBCASE("string score") {
    StageRig rig({contains_rule("scorer", "resp", R"({"score": "7"})")});
    CHECK_THROWS_AS(score_response(rig.ctx, q, "resp", kScorer), ScoreError);
  }
  SUBCASE("no json at all") {
    StageRig rig({contains_rule("scorer", "resp", "I would rate it highly")});
    CHECK_THROWS_WITH_AS(score_response(rig.ctx, q, "resp", kScorer),
                         doctest::Contains("scoring failed after re-ask"),
                         ScoreError);
  }
}
