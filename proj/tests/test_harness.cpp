#include "t1/harness.hpp"

#include "t1/errors.hpp"
#include "support/scripted_backend.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace t1;
using harness::RunConfig;
using nlohmann::json;
using testing::chat_response_body;
using testing::ConcurrencyProbeTransport;
using testing::ScriptedTransport;

namespace {

const std::string kYes = "Checked.\nVerification: Is the answer correct (Yes/No)? Yes";
const std::string kNo = "Checked.\nVerification: Is the answer correct (Yes/No)? No";

std::filesystem::path fresh_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("t1_harness_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

json minimal_config_doc(const std::filesystem::path& dataset,
                        const std::filesystem::path& output_dir) {
    return json{
        {"dataset_path", dataset.string()},
        {"generator",
         {{"backend",
           {{"name", "gen"}, {"base_url", "http://gen.invalid/v1"}, {"model_id", "gen-model"}}}}},
        {"output_dir", output_dir.string()},
    };
}

// --- the hand-computed three-problem pipeline fixture -------------------------

struct FixtureCandidate {
    std::string text;
    bool tool_pass = false;
    int yes_of_2 = 0;  // how many of the two grading rationales say Yes
};

struct FixtureProblem {
    std::string id;
    std::string question;
    std::string gold;
    std::vector<FixtureCandidate> candidates;
};

std::vector<FixtureProblem> pipeline_fixture() {
    return {
        {"p1",
         "What is two plus five?",
         "7",
         {{"P1 alpha. The final answer is: $\\boxed{7}$", true, 2},
          {"P1 beta. The final answer is: $\\boxed{8}$", false, 1},
          {"P1 gamma. The final answer is: $\\boxed{7}$", true, 0},
          {"P1 delta. The final answer is: $\\boxed{8}$", false, 0}}},
        {"p2",
         "What is nine minus five?",
         "4",
         {{"P2 alpha. The final answer is: $\\boxed{5}$", false, 1},
          {"P2 beta. The final answer is: $\\boxed{5}$", false, 1},
          {"P2 gamma. The final answer is: $\\boxed{3}$", false, 0},
          {"P2 delta. The final answer is: $\\boxed{3}$", false, 0}}},
        {"p3",
         "What is one divided by two?",
         "1/2",
         {{"P3 alpha. The final answer is: $\\boxed{1/2}$", true, 2},
          {"P3 beta. The final answer is: $\\boxed{0.5}$", false, 2},
          {"P3 gamma. The final answer is: $\\boxed{2}$", false, 1},
          {"P3 delta. The final answer is: $\\boxed{\\frac{1}{2}}$", true, 1}}},
    };
}

void write_fixture_dataset(const std::filesystem::path& path,
                           const std::vector<FixtureProblem>& problems) {
    std::string text;
    for (const auto& p : problems) {
        text += json{{"id", p.id}, {"question", p.question}, {"answer", p.gold}}.dump() + "\n";
    }
    write_file(path, text);
}

/// Answers generation, checker-code and grading requests from the fixture
/// table, keyed on the question or candidate text inside the prompt.
ConcurrencyProbeTransport::Handler fixture_handler(std::vector<FixtureProblem> problems) {
    return [problems](const std::string& body) -> gateway::HttpResponse {
        json doc = json::parse(body);
        std::string user = doc.at("messages").back().at("content");
        int n = doc.value("n", 1);
        if (user.find("Solve the following problem") != std::string::npos) {
            for (const auto& p : problems) {
                if (user.find(p.question) == std::string::npos) continue;
                std::vector<std::string> texts;
                for (const auto& c : p.candidates) texts.push_back(c.text);
                return {200, chat_response_body(texts)};
            }
            return {500, "unknown question"};
        }
        for (const auto& p : problems) {
            for (const auto& c : p.candidates) {
                if (user.find(c.text) == std::string::npos) continue;
                if (user.find("Return python code only.") != std::string::npos) {
                    std::string code = c.tool_pass ? "```python\nprint(True)\n```"
                                                   : "```python\nprint(False)\n```";
                    return {200, chat_response_body(std::vector<std::string>(n, code))};
                }
                std::vector<std::string> texts;
                for (int i = 0; i < n; ++i) texts.push_back(i < c.yes_of_2 ? kYes : kNo);
                return {200, chat_response_body(texts)};
            }
        }
        return {500, "unmatched verification request"};
    };
}

RunConfig pipeline_config(const std::filesystem::path& dir) {
    json doc = minimal_config_doc(dir / "dataset.jsonl", dir / "run");
    doc["generator"]["sampling"] = {{"n_samples", 4}, {"temperature", 0.8}, {"max_tokens", 512}};
    doc["verifier_stack"] = {{"toolv", "code"},
                             {"toolv_k", 1},
                             {"rm", "genrm"},
                             {"genrm", {{"n_rationales", 2}}}};
    doc["bon_curve"] = {{"k_list", {1, 2, 4}}, {"resamples", 25}, {"seed", 7}};
    return harness::parse_run_config(doc);
}

} // namespace

// --- configuration -------------------------------------------------------------

TEST_CASE("minimal config parses with published defaults") {
    auto dir = fresh_dir("cfg_min");
    auto config = harness::parse_run_config(minimal_config_doc(dir / "d.jsonl", dir / "out"));
    CHECK(config.task_kind == answers::TaskKind::math);
    CHECK(config.sampling.n_samples == 64);
    CHECK(config.sampling.temperature == doctest::Approx(0.8));
    CHECK(config.bon_curve.k_list == std::vector<int>{1, 2, 4, 8, 16, 32, 64});
    CHECK(config.bon_curve.resamples == 100);
    CHECK(config.selection == harness::SelectionChoice::weighted_bon);
    CHECK(config.verifier_stack.toolv == harness::ToolvChoice::none);
    CHECK(config.verifier_stack.rm == harness::RmChoice::none);
    CHECK_FALSE(config.cache_root.has_value());
    std::filesystem::remove_all(dir);
}

TEST_CASE("config serialization round-trips and hashes stably") {
    auto dir = fresh_dir("cfg_rt");
    auto doc = minimal_config_doc(dir / "d.jsonl", dir / "out");
    doc["bon_curve"] = {{"seed", 41}};
    auto config = harness::parse_run_config(doc);
    auto echoed = harness::to_json(config);
    auto reparsed = harness::parse_run_config(echoed);
    CHECK(harness::to_json(reparsed) == echoed);
    CHECK(harness::config_hash(config) == harness::config_hash(reparsed));

    doc["bon_curve"] = {{"seed", 42}};
    auto other = harness::parse_run_config(doc);
    CHECK(harness::config_hash(other) != harness::config_hash(config));
    std::filesystem::remove_all(dir);
}

TEST_CASE("unknown config keys are rejected at every level") {
    auto dir = fresh_dir("cfg_keys");
    auto base = minimal_config_doc(dir / "d.jsonl", dir / "out");

    SUBCASE("top level") {
        auto doc = base;
        doc["datasett_path"] = "oops";
        try {
            harness::parse_run_config(doc);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("datasett_path") != std::string::npos);
        }
    }
    SUBCASE("backend block") {
        auto doc = base;
        doc["generator"]["backend"]["model"] = "typo";
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    SUBCASE("sampling block") {
        auto doc = base;
        doc["generator"]["sampling"] = {{"top_p", 0.9}};
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    SUBCASE("verifier stack") {
        auto doc = base;
        doc["verifier_stack"] = {{"tool", "code"}};
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    SUBCASE("bon curve") {
        auto doc = base;
        doc["bon_curve"] = {{"ks", {1, 2}}};
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("config validation catches incoherent setups") {
    auto dir = fresh_dir("cfg_bad");
    auto base = minimal_config_doc(dir / "d.jsonl", dir / "out");

    SUBCASE("missing required keys") {
        auto doc = base;
        doc.erase("dataset_path");
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
        doc = base;
        doc.erase("output_dir");
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
        doc = base;
        doc["generator"]["backend"].erase("model_id");
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    SUBCASE("k beyond the pool size") {
        auto doc = base;
        doc["generator"]["sampling"] = {{"n_samples", 4}};
        doc["bon_curve"] = {{"k_list", {1, 8}}};
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    SUBCASE("tool stage incompatible with the task") {
        auto doc = base;
        doc["verifier_stack"] = {{"toolv", "code"}};
        doc["task_kind"] = "multiple_choice";
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
        doc["task_kind"] = "math";
        doc["verifier_stack"] = {{"toolv", "fact"}, {"corpus_dir", "x"}};
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    SUBCASE("fact mode without its context source") {
        auto doc = base;
        doc["task_kind"] = "multiple_choice";
        doc["verifier_stack"] = {{"toolv", "fact"}};
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
        doc["verifier_stack"] = {{"toolv", "fact"}, {"fact_mode", "gold"}};
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    SUBCASE("prm choice without a prm block") {
        auto doc = base;
        doc["verifier_stack"] = {{"rm", "prm"}};
        CHECK_THROWS_AS(harness::parse_run_config(doc), ConfigError);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("config files load from disk") {
    auto dir = fresh_dir("cfg_disk");
    auto path = dir / "run.json";
    write_file(path, minimal_config_doc(dir / "d.jsonl", dir / "out").dump(2));
    auto config = harness::load_run_config(path);
    CHECK(config.generator.model_id == "gen-model");

    CHECK_THROWS_AS(harness::load_run_config(dir / "absent.json"), ConfigError);
    write_file(dir / "broken.json", "{not json");
    CHECK_THROWS_AS(harness::load_run_config(dir / "broken.json"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("referenced files are checked before a run") {
    auto dir = fresh_dir("cfg_refs");
    auto config = harness::parse_run_config(minimal_config_doc(dir / "d.jsonl", dir / "out"));
    CHECK_THROWS_AS(harness::check_references(config), ConfigError);
    write_file(dir / "d.jsonl", "");
    CHECK_NOTHROW(harness::check_references(config));
    std::filesystem::remove_all(dir);
}

// --- dataset ---------------------------------------------------------------------

TEST_CASE("math datasets load with optional metadata") {
    auto dir = fresh_dir("ds_math");
    auto path = dir / "math.jsonl";
    write_file(path,
               json{{"id", "m1"}, {"question", "1+1?"}, {"answer", "2"}, {"subject", "algebra"},
                    {"level", 3}}
                       .dump() +
                   "\n\n" +
                   json{{"id", 17}, {"question", "2*3?"}, {"answer", 6}}.dump() + "\n" +
                   json{{"id", "m3"}, {"question", "9-1?"}, {"answer", "8"}}.dump() + "\n");
    auto problems = harness::load_dataset(path, answers::TaskKind::math);
    REQUIRE(problems.size() == 3);
    CHECK(problems[0].id == "m1");
    CHECK(problems[0].gold_answer == "2");
    CHECK(problems[0].metadata.at("subject") == "algebra");
    CHECK(problems[0].metadata.at("level") == "3");
    CHECK(problems[1].id == "17");
    CHECK(problems[1].gold_answer == "6");
    CHECK(problems[2].metadata.empty());
    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset errors carry line numbers") {
    auto dir = fresh_dir("ds_bad");
    auto path = dir / "math.jsonl";

    SUBCASE("missing answer on line 2") {
        write_file(path, json{{"id", "a"}, {"question", "q"}, {"answer", "1"}}.dump() + "\n" +
                             json{{"id", "b"}, {"question", "q"}}.dump() + "\n");
        try {
            harness::load_dataset(path, answers::TaskKind::math);
            FAIL("expected IngestionError");
        } catch (const IngestionError& e) {
            std::string what = e.what();
            CHECK(what.find("line 2") != std::string::npos);
            CHECK(what.find("answer") != std::string::npos);
        }
    }
    SUBCASE("garbage line") {
        write_file(path, "not json at all\n");
        try {
            harness::load_dataset(path, answers::TaskKind::math);
            FAIL("expected IngestionError");
        } catch (const IngestionError& e) {
            CHECK(std::string(e.what()).find("line 1") != std::string::npos);
        }
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(harness::load_dataset(dir / "absent.jsonl", answers::TaskKind::math),
                        IngestionError);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("multiple-choice datasets carry ordered options") {
    auto dir = fresh_dir("ds_mc");
    auto path = dir / "mc.jsonl";
    json options = json::array(
        {"red", "orange", "yellow", "green", "blue", "indigo", "violet", "cyan", "magenta",
         "white"});
    write_file(path, json{{"id", "q1"},
                          {"question", "Pick the last color."},
                          {"options", options},
                          {"answer_letter", "J"}}
                             .dump() +
                         "\n");
    auto problems = harness::load_dataset(path, answers::TaskKind::multiple_choice);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].task_kind == answers::TaskKind::multiple_choice);
    CHECK(problems[0].gold_answer == "J");
    CHECK(problems[0].metadata.at("options") == options.dump());

    SUBCASE("letter outside the option range") {
        write_file(path, json{{"id", "q2"},
                              {"question", "?"},
                              {"options", {"a", "b"}},
                              {"answer_letter", "C"}}
                                 .dump() +
                             "\n");
        CHECK_THROWS_AS(harness::load_dataset(path, answers::TaskKind::multiple_choice),
                        IngestionError);
    }
    SUBCASE("too few options") {
        write_file(path, json{{"id", "q3"},
                              {"question", "?"},
                              {"options", {"only"}},
                              {"answer_letter", "A"}}
                                 .dump() +
                             "\n");
        CHECK_THROWS_AS(harness::load_dataset(path, answers::TaskKind::multiple_choice),
                        IngestionError);
    }
    SUBCASE("missing answer_letter") {
        write_file(path,
                   json{{"id", "q4"}, {"question", "?"}, {"options", {"a", "b"}}}.dump() + "\n");
        CHECK_THROWS_AS(harness::load_dataset(path, answers::TaskKind::multiple_choice),
                        IngestionError);
    }
    std::filesystem::remove_all(dir);
}

// --- confusion --------------------------------------------------------------------

TEST_CASE("confusion counts use rejection as the positive class") {
    using harness::LabeledDecision;

    SUBCASE("perfect classifier") {
        std::vector<LabeledDecision> decisions{
            {false, true}, {false, true}, {true, false}, {true, false}};
        auto stats = harness::verifier_confusion(decisions);
        CHECK(stats.tp == 2);
        CHECK(stats.tn == 2);
        CHECK(stats.fp == 0);
        CHECK(stats.fn == 0);
        CHECK(stats.accuracy == 1.0);
        CHECK(stats.f1 == 1.0);
    }
    SUBCASE("inverted classifier") {
        std::vector<LabeledDecision> decisions{{true, true}, {false, false}};
        auto stats = harness::verifier_confusion(decisions);
        CHECK(stats.accuracy == 0.0);
    }
    SUBCASE("sixteen-decision fixture") {
        // tp=4 fp=2 fn=3 tn=7 by construction
        std::vector<LabeledDecision> decisions;
        for (int i = 0; i < 4; ++i) decisions.push_back({false, true});
        for (int i = 0; i < 2; ++i) decisions.push_back({true, true});
        for (int i = 0; i < 3; ++i) decisions.push_back({false, false});
        for (int i = 0; i < 7; ++i) decisions.push_back({true, false});
        auto stats = harness::verifier_confusion(decisions);
        CHECK(stats.tp == 4);
        CHECK(stats.fp == 2);
        CHECK(stats.fn == 3);
        CHECK(stats.tn == 7);
        CHECK(stats.accuracy == doctest::Approx(11.0 / 16.0));
        CHECK(stats.precision == doctest::Approx(4.0 / 6.0));
        CHECK(stats.recall == doctest::Approx(4.0 / 7.0));
        CHECK(stats.f1 == doctest::Approx(8.0 / 13.0));
    }
    SUBCASE("all accepted: empty-denominator ratios are 0") {
        std::vector<LabeledDecision> decisions{{true, false}, {false, false}};
        auto stats = harness::verifier_confusion(decisions);
        CHECK(stats.precision == 0.0);
        CHECK(stats.recall == 0.0);
        CHECK(stats.f1 == 0.0);
    }
    SUBCASE("empty input") {
        CHECK_THROWS_AS(harness::verifier_confusion({}), DomainError);
    }
}

TEST_CASE("rejection decisions come from the tool verdict, then the rm score") {
    core::Candidate c;
    c.problem_id = "p";
    CHECK_FALSE(harness::rejection_decision(c).has_value());

    c.rm_score = 0.4;
    CHECK(harness::rejection_decision(c) == true);
    c.rm_score = 0.5;
    CHECK(harness::rejection_decision(c) == false);

    core::Attempt attempt;
    attempt.attempt_pass = true;
    c.tool_verdict = core::make_verdict(core::VerdictRule::any_of_k, {attempt});
    c.rm_score = 0.1;  // filter verdict wins over the score
    CHECK(harness::rejection_decision(c) == false);

    attempt.attempt_pass = false;
    attempt.failure_kind = core::FailureKind::fail_verdict;
    c.tool_verdict = core::make_verdict(core::VerdictRule::any_of_k, {attempt});
    CHECK(harness::rejection_decision(c) == true);
}

// --- the pipeline -------------------------------------------------------------------

TEST_CASE("scripted pipeline matches the hand-computed fixture") {
    auto dir = fresh_dir("e2e");
    auto fixture = pipeline_fixture();
    write_fixture_dataset(dir / "dataset.jsonl", fixture);
    auto config = pipeline_config(dir);

    gateway::LlmClient client(
        std::make_unique<ConcurrencyProbeTransport>(fixture_handler(fixture),
                                                    std::chrono::milliseconds(0)),
        std::nullopt);
    auto report = harness::run_eval(config, client, prompts::default_pack());

    REQUIRE(report.per_problem.size() == 3);
    const auto& p1 = report.per_problem[0];
    CHECK(p1.problem_id == "p1");
    CHECK(p1.selected_answer == "7/1");
    CHECK(p1.selected_index == 0);
    CHECK(p1.method == "weighted_bon");
    CHECK(p1.correct);
    REQUIRE(p1.group_scores.size() == 2);
    CHECK(p1.group_scores[0].first == "7/1");
    CHECK(p1.group_scores[0].second == doctest::Approx(1.0));
    CHECK(p1.group_scores[1].first == "8/1");
    CHECK(p1.group_scores[1].second == doctest::Approx(0.0));

    // every p2 candidate is rejected, so selection falls back to raw rm scores
    const auto& p2 = report.per_problem[1];
    CHECK(p2.selected_answer == "5/1");
    CHECK(p2.method == "rm_fallback");
    CHECK_FALSE(p2.correct);
    REQUIRE(p2.group_scores.size() == 2);
    CHECK(p2.group_scores[0].first == "5/1");
    CHECK(p2.group_scores[0].second == doctest::Approx(1.0));
    CHECK(p2.group_scores[1].second == doctest::Approx(0.0));

    const auto& p3 = report.per_problem[2];
    CHECK(p3.selected_answer == "1/2");
    CHECK(p3.method == "weighted_bon");
    CHECK(p3.correct);
    REQUIRE(p3.group_scores.size() == 2);
    CHECK(p3.group_scores[0].first == "1/2");
    CHECK(p3.group_scores[0].second == doctest::Approx(1.5));

    CHECK(report.verifier_stats.tp == 7);
    CHECK(report.verifier_stats.fp == 1);
    CHECK(report.verifier_stats.fn == 0);
    CHECK(report.verifier_stats.tn == 4);
    CHECK(report.verifier_stats.accuracy == doctest::Approx(11.0 / 12.0));
    CHECK(report.verifier_stats.precision == doctest::Approx(7.0 / 8.0));
    CHECK(report.verifier_stats.recall == doctest::Approx(1.0));
    CHECK(report.verifier_stats.f1 == doctest::Approx(14.0 / 15.0));

    REQUIRE(report.curve.size() == 3);
    CHECK(report.curve[0].k == 1);
    CHECK(report.curve[2].k == 4);
    // k = pool size evaluates the full pool: correct on p1 and p3 only
    CHECK(report.curve[2].accuracy == doctest::Approx(2.0 / 3.0));
    for (const auto& point : report.curve) {
        CHECK(point.accuracy >= 0.0);
        CHECK(point.accuracy <= 1.0);
    }

    // one checkpoint per problem, stamped with the config hash
    auto hash = harness::config_hash(config);
    int checkpoints = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir / "run" / "problems")) {
        auto doc = json::parse(read_file(entry.path()));
        CHECK(doc.at("config_hash") == hash);
        CHECK(doc.at("candidates").size() == 4);
        ++checkpoints;
    }
    CHECK(checkpoints == 3);

    SUBCASE("checkpoint resume rebuilds the identical report without traffic") {
        auto down = std::make_unique<ScriptedTransport>(
            std::vector<gateway::HttpResponse>{{0, "network down"}});
        auto* raw = down.get();
        gateway::LlmClient offline(std::move(down), std::nullopt);
        auto resumed = harness::run_eval(config, offline, prompts::default_pack());
        CHECK(raw->call_count() == 0);

        harness::emit_reports(report, dir / "a");
        harness::emit_reports(resumed, dir / "b");
        for (const char* name :
             {"curve.csv", "confusion.csv", "per_problem.jsonl", "config_echo.json"}) {
            CHECK_MESSAGE(read_file(dir / "a" / name) == read_file(dir / "b" / name),
                          "mismatch in " << name);
        }
    }

    std::filesystem::remove_all(dir);
}

TEST_CASE("warm response cache replays a run into a fresh output dir") {
    auto dir = fresh_dir("cache_replay");
    auto fixture = pipeline_fixture();
    write_fixture_dataset(dir / "dataset.jsonl", fixture);
    auto config = pipeline_config(dir);
    auto cache_root = dir / "cache";

    gateway::LlmClient cold(
        std::make_unique<ConcurrencyProbeTransport>(fixture_handler(fixture),
                                                    std::chrono::milliseconds(0)),
        cache_root);
    auto first = harness::run_eval(config, cold, prompts::default_pack());
    harness::emit_reports(first, dir / "a");

    // same cache, empty output dir, dead transport: everything replays
    auto config2 = config;
    config2.output_dir = dir / "run2";
    auto down = std::make_unique<ScriptedTransport>(
        std::vector<gateway::HttpResponse>{{0, "network down"}});
    auto* raw = down.get();
    gateway::LlmClient warm(std::move(down), cache_root);
    auto second = harness::run_eval(config2, warm, prompts::default_pack());
    harness::emit_reports(second, dir / "b");

    CHECK(raw->call_count() == 0);
    for (const char* name : {"curve.csv", "confusion.csv", "per_problem.jsonl"}) {
        CHECK_MESSAGE(read_file(dir / "a" / name) == read_file(dir / "b" / name),
                      "mismatch in " << name);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("a backend failure aborts resumably") {
    auto dir = fresh_dir("resume");
    auto fixture = pipeline_fixture();
    write_fixture_dataset(dir / "dataset.jsonl", fixture);
    auto config = pipeline_config(dir);

    // first attempt: generation for p2 hits a permanent backend fault
    auto flaky = [inner = fixture_handler(fixture)](const std::string& body) {
        json doc = json::parse(body);
        std::string user = doc.at("messages").back().at("content");
        if (user.find("Solve the following problem") != std::string::npos &&
            user.find("nine minus five") != std::string::npos) {
            return gateway::HttpResponse{400, "bad request"};
        }
        return inner(body);
    };
    gateway::LlmClient broken(
        std::make_unique<ConcurrencyProbeTransport>(flaky, std::chrono::milliseconds(0)),
        std::nullopt);
    CHECK_THROWS_AS(harness::run_eval(config, broken, prompts::default_pack()), BackendError);
    // p1 finished before the fault, so its checkpoint survives
    CHECK(std::filesystem::exists(dir / "run" / "problems"));

    gateway::LlmClient healthy(
        std::make_unique<ConcurrencyProbeTransport>(fixture_handler(fixture),
                                                    std::chrono::milliseconds(0)),
        std::nullopt);
    auto resumed = harness::run_eval(config, healthy, prompts::default_pack());
    harness::emit_reports(resumed, dir / "resumed");

    // reference: one uninterrupted run in its own output dir
    auto reference_config = config;
    reference_config.output_dir = dir / "run_ref";
    gateway::LlmClient fresh(
        std::make_unique<ConcurrencyProbeTransport>(fixture_handler(fixture),
                                                    std::chrono::milliseconds(0)),
        std::nullopt);
    auto reference = harness::run_eval(reference_config, fresh, prompts::default_pack());
    harness::emit_reports(reference, dir / "reference");

    for (const char* name : {"curve.csv", "confusion.csv", "per_problem.jsonl"}) {
        CHECK_MESSAGE(read_file(dir / "resumed" / name) == read_file(dir / "reference" / name),
                      "mismatch in " << name);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("bare stack with majority selection is the voting baseline") {
    auto dir = fresh_dir("majority");
    auto fixture = pipeline_fixture();
    write_fixture_dataset(dir / "dataset.jsonl", fixture);

    json doc = minimal_config_doc(dir / "dataset.jsonl", dir / "run");
    doc["generator"]["sampling"] = {{"n_samples", 4}};
    doc["selection"] = "majority";
    doc["bon_curve"] = {{"k_list", {1, 4}}, {"resamples", 10}, {"seed", 3}};
    auto config = harness::parse_run_config(doc);

    gateway::LlmClient client(
        std::make_unique<ConcurrencyProbeTransport>(fixture_handler(fixture),
                                                    std::chrono::milliseconds(0)),
        std::nullopt);
    auto report = harness::run_eval(config, client, prompts::default_pack());

    REQUIRE(report.per_problem.size() == 3);
    // p1 votes tie 2-2; the group holding candidate 0 wins
    CHECK(report.per_problem[0].selected_answer == "7/1");
    CHECK(report.per_problem[0].method == "majority");
    CHECK(report.per_problem[0].correct);
    CHECK(report.per_problem[1].selected_answer == "5/1");
    CHECK_FALSE(report.per_problem[1].correct);
    CHECK(report.per_problem[2].selected_answer == "1/2");
    CHECK(report.per_problem[2].correct);

    // no verifier ran, so no confusion decisions exist
    CHECK(report.verifier_stats.tp + report.verifier_stats.fp + report.verifier_stats.fn +
              report.verifier_stats.tn ==
          0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("prm scoring drives selection through the step endpoint") {
    auto dir = fresh_dir("prm");
    write_file(dir / "dataset.jsonl",
               json{{"id", "p1"}, {"question", "What is one plus two?"}, {"answer", "3"}}.dump() +
                   "\n");

    json doc = minimal_config_doc(dir / "dataset.jsonl", dir / "run");
    doc["generator"]["sampling"] = {{"n_samples", 2}};
    doc["verifier_stack"] = {
        {"rm", "prm"},
        {"prm",
         {{"backend",
           {{"name", "prm"}, {"base_url", "http://prm.invalid"}, {"model_id", "prm-model"}}},
          {"aggregation", "last"}}}};
    doc["bon_curve"] = {{"k_list", {1, 2}}, {"resamples", 10}, {"seed", 5}};
    auto config = harness::parse_run_config(doc);

    auto handler = [](const std::string& body) -> gateway::HttpResponse {
        json doc = json::parse(body);
        if (doc.contains("steps")) {
            double score = doc.at("steps").front().get<std::string>().find("PRM good") !=
                                   std::string::npos
                               ? 0.9
                               : 0.2;
            return {200, json{{"scores", std::vector<double>(doc.at("steps").size(), score)}}
                             .dump()};
        }
        return {200, chat_response_body({"PRM good. The final answer is: $\\boxed{3}$",
                                         "PRM bad. The final answer is: $\\boxed{4}$"})};
    };
    gateway::LlmClient client(
        std::make_unique<ConcurrencyProbeTransport>(handler, std::chrono::milliseconds(0)),
        std::nullopt);
    auto report = harness::run_eval(config, client, prompts::default_pack());

    REQUIRE(report.per_problem.size() == 1);
    CHECK(report.per_problem[0].selected_answer == "3/1");
    CHECK(report.per_problem[0].correct);
    REQUIRE(report.per_problem[0].group_scores.size() == 2);
    CHECK(report.per_problem[0].group_scores[0].second == doctest::Approx(0.9));
    CHECK(report.per_problem[0].group_scores[1].second == doctest::Approx(0.2));

    // 0.2 < 0.5 rejects the wrong candidate: one tp, one tn
    CHECK(report.verifier_stats.tp == 1);
    CHECK(report.verifier_stats.tn == 1);
    CHECK(report.verifier_stats.accuracy == doctest::Approx(1.0));
    std::filesystem::remove_all(dir);
}

// --- reports ---------------------------------------------------------------------

TEST_CASE("report files have pinned layouts") {
    auto dir = fresh_dir("reports");
    harness::EvalReport report;
    report.curve = {{1, 0.5}, {2, 0.75}};
    report.verifier_stats.tp = 1;
    report.verifier_stats.fp = 2;
    report.verifier_stats.fn = 3;
    report.verifier_stats.tn = 4;
    report.verifier_stats.accuracy = 0.5;
    report.verifier_stats.precision = 1.0 / 3.0;
    report.verifier_stats.recall = 0.25;
    report.verifier_stats.f1 = 2.0 / 7.0;
    harness::PerProblem row;
    row.problem_id = "p1";
    row.selected_answer = "7";
    row.selected_index = 0;
    row.method = "weighted_bon";
    row.correct = true;
    row.group_scores = {{"7", 1.5}};
    report.per_problem = {row};
    report.config_echo =
        harness::parse_run_config(minimal_config_doc(dir / "d.jsonl", dir / "out"));

    harness::emit_reports(report, dir / "out");

    CHECK(read_file(dir / "out" / "curve.csv") == "k,accuracy\n1,0.5\n2,0.75\n");

    std::string third = json(1.0 / 3.0).dump();
    std::string two_sevenths = json(2.0 / 7.0).dump();
    CHECK(read_file(dir / "out" / "confusion.csv") ==
          "# rejection is the positive class: tp = rejected and wrong\n"
          "metric,value\n"
          "tp,1\nfp,2\nfn,3\ntn,4\n"
          "accuracy,0.5\nprecision," +
              third + "\nrecall,0.25\nf1," + two_sevenths + "\n");

    CHECK(read_file(dir / "out" / "per_problem.jsonl") ==
          R"({"correct":true,"group_scores":[["7",1.5]],"method":"weighted_bon",)"
          R"("problem_id":"p1","selected_answer":"7","selected_index":0})"
          "\n");

    auto echoed = json::parse(read_file(dir / "out" / "config_echo.json"));
    CHECK(echoed == harness::to_json(report.config_echo));

    SUBCASE("emission is deterministic") {
        auto before = read_file(dir / "out" / "confusion.csv");
        harness::emit_reports(report, dir / "out");
        CHECK(read_file(dir / "out" / "confusion.csv") == before);
    }
    std::filesystem::remove_all(dir);
}
