#include "t1/distill.hpp"

#include "t1/errors.hpp"
#include "support/scripted_backend.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace t1;
using distill::DistillCounts;
using distill::DistillKind;
using distill::DistillParams;
using distill::DistillRecord;
using testing::chat_response_body;
using testing::ScriptedTransport;

namespace {

const std::string kYesRationale =
    "Each step checks out.\nVerification: Is the answer correct (Yes/No)? Yes";
const std::string kFactYes =
    "All claims match the document.\nVerification: Are all statements correct? (Yes/No)? Yes";

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::filesystem::path fresh_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("t1_distill_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<core::Problem> two_problems() {
    core::Problem p1;
    p1.id = "p1";
    p1.question = "What is 2 + 2?";
    p1.gold_answer = "4";
    core::Problem p2;
    p2.id = "p2";
    p2.question = "What is 5 - 3?";
    p2.gold_answer = "2";
    return {p1, p2};
}

DistillRecord sample_record() {
    DistillRecord r;
    r.kind = DistillKind::genrm;
    r.problem_id = "p1";
    r.solution = "The final answer is: $\\boxed{4}$";
    r.target_text = kYesRationale;
    r.validated = true;
    r.reason = "";
    r.teacher_model = "teacher-model";
    r.temperature = 0.6;
    r.sample_index = 3;
    return r;
}

} // namespace

TEST_CASE("distill kind names round-trip") {
    for (auto kind :
         {DistillKind::toolv_code, DistillKind::toolv_fact, DistillKind::genrm}) {
        CHECK(distill::distill_kind_from_string(distill::to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(distill::distill_kind_from_string("prm"), ConfigError);
}

TEST_CASE("default teacher sample counts per kind") {
    CHECK(distill::default_targets_per_solution(DistillKind::toolv_code) == 4);
    CHECK(distill::default_targets_per_solution(DistillKind::toolv_fact) == 8);
    CHECK(distill::default_targets_per_solution(DistillKind::genrm) == 8);
}

TEST_CASE("empty targets are flagged for every kind") {
    sandbox::SandboxPolicy policy;
    for (auto kind :
         {DistillKind::toolv_code, DistillKind::toolv_fact, DistillKind::genrm}) {
        auto v = distill::validate_target(kind, "", policy);
        CHECK_FALSE(v.validated);
        CHECK(v.reason == "empty");
        v = distill::validate_target(kind, "  \n\t ", policy);
        CHECK_FALSE(v.validated);
        CHECK(v.reason == "empty");
    }
}

TEST_CASE("code target validation runs the block in the sandbox") {
    sandbox::SandboxPolicy policy;

    SUBCASE("prose without a fence") {
        auto v = distill::validate_target(DistillKind::toolv_code,
                                          "I would just compare the numbers.", policy);
        CHECK_FALSE(v.validated);
        CHECK(v.reason == "no_code_block");
    }
    SUBCASE("block printing True validates") {
        auto v = distill::validate_target(DistillKind::toolv_code,
                                          "```python\nprint(2 + 2 == 4)\n```", policy);
        CHECK(v.validated);
        CHECK(v.reason.empty());
    }
    SUBCASE("block printing False still validates: a well-formed negative verdict") {
        auto v = distill::validate_target(DistillKind::toolv_code,
                                          "```python\nprint(2 + 2 == 5)\n```", policy);
        CHECK(v.validated);
        CHECK(v.reason.empty());
    }
    SUBCASE("block with chatty output is unparseable") {
        auto v = distill::validate_target(DistillKind::toolv_code,
                                          "```python\nprint('checking...')\n```", policy);
        CHECK_FALSE(v.validated);
        CHECK(v.reason == "unparseable");
    }
    SUBCASE("crashing block is a runtime error") {
        auto v = distill::validate_target(DistillKind::toolv_code,
                                          "```python\nraise ValueError('boom')\n```", policy);
        CHECK_FALSE(v.validated);
        CHECK(v.reason == "runtime_error");
    }
    SUBCASE("looping block times out") {
        policy.wall_timeout_s = 0.5;
        auto v = distill::validate_target(DistillKind::toolv_code,
                                          "```python\nwhile True:\n    pass\n```", policy);
        CHECK_FALSE(v.validated);
        CHECK(v.reason == "timeout");
    }
}

TEST_CASE("rationale targets need a parseable trailing verdict") {
    sandbox::SandboxPolicy policy;

    auto v = distill::validate_target(DistillKind::genrm, kYesRationale, policy);
    CHECK(v.validated);
    v = distill::validate_target(
        DistillKind::genrm, "Everything looks plausible but I will not commit.", policy);
    CHECK_FALSE(v.validated);
    CHECK(v.reason == "unparseable");

    v = distill::validate_target(DistillKind::toolv_fact, kFactYes, policy);
    CHECK(v.validated);
    // the other kind's verdict line does not satisfy the fact-check grammar
    v = distill::validate_target(DistillKind::toolv_fact, kYesRationale, policy);
    CHECK_FALSE(v.validated);
    CHECK(v.reason == "unparseable");
}

TEST_CASE("generation emits one record per problem x solution x target") {
    // Call order: student(p1), teacher(p1), student(p2), teacher(p2).
    auto transport = std::make_unique<ScriptedTransport>(std::vector<gateway::HttpResponse>{
        {200, chat_response_body({"Solution one. The final answer is: $\\boxed{4}$"})},
        {200, chat_response_body({kYesRationale, "Refusing to grade this."})},
        {200, chat_response_body({"Solution two. The final answer is: $\\boxed{2}$"})},
        {200, chat_response_body({kYesRationale, kYesRationale})},
    });
    auto* raw = transport.get();
    gateway::LlmClient client(std::move(transport), std::nullopt);

    auto student = testing::test_profile("student");
    student.model_id = "student-model";
    auto teacher = testing::test_profile("teacher");
    teacher.model_id = "teacher-model";

    DistillCounts counts;
    counts.solutions_per_problem = 1;
    counts.targets_per_solution = 2;
    auto records =
        distill::generate_distill_set(two_problems(), client, student, teacher,
                                      DistillKind::genrm, counts, {}, prompts::default_pack());

    REQUIRE(records.size() == 4);
    CHECK(records[0].problem_id == "p1");
    CHECK(records[1].problem_id == "p1");
    CHECK(records[2].problem_id == "p2");
    CHECK(records[3].problem_id == "p2");
    CHECK(records[0].solution == "Solution one. The final answer is: $\\boxed{4}$");
    CHECK(records[2].solution == "Solution two. The final answer is: $\\boxed{2}$");
    for (const auto& r : records) {
        CHECK(r.kind == DistillKind::genrm);
        CHECK(r.teacher_model == "teacher-model");
        CHECK(r.temperature == doctest::Approx(0.6));
    }
    CHECK(records[0].sample_index == 0);
    CHECK(records[1].sample_index == 1);

    // refusals are flagged, never dropped
    CHECK(records[0].validated);
    CHECK_FALSE(records[1].validated);
    CHECK(records[1].reason == "unparseable");
    CHECK(records[1].target_text == "Refusing to grade this.");

    // wire shape: student call carries its model and n=1, teacher n=2 at 0.6
    auto requests = raw->requests();
    REQUIRE(requests.size() == 4);
    auto first = nlohmann::json::parse(requests[0].body);
    CHECK(first.at("model") == "student-model");
    CHECK(first.at("n") == 1);
    auto second = nlohmann::json::parse(requests[1].body);
    CHECK(second.at("model") == "teacher-model");
    CHECK(second.at("n") == 2);
    CHECK(second.at("temperature") == doctest::Approx(0.6));
    std::string teacher_prompt = second.at("messages").back().at("content");
    CHECK(teacher_prompt.find("What is 2 + 2?") != std::string::npos);
    CHECK(teacher_prompt.find("Solution one.") != std::string::npos);
}

TEST_CASE("target count defaults to the kind's teacher sample count") {
    std::vector<std::string> eight(8, kYesRationale);
    auto transport = std::make_unique<ScriptedTransport>(std::vector<gateway::HttpResponse>{
        {200, chat_response_body({"A solution."})},
        {200, chat_response_body(eight)},
    });
    auto* raw = transport.get();
    gateway::LlmClient client(std::move(transport), std::nullopt);

    auto dataset = two_problems();
    dataset.resize(1);
    auto records = distill::generate_distill_set(dataset, client, testing::test_profile(),
                                                 testing::test_profile(), DistillKind::genrm,
                                                 {}, {}, prompts::default_pack());
    CHECK(records.size() == 8);
    auto teacher_request = nlohmann::json::parse(raw->requests().at(1).body);
    CHECK(teacher_request.at("n") == 8);
}

TEST_CASE("fact-check distillation binds the gold document") {
    auto transport = std::make_unique<ScriptedTransport>(std::vector<gateway::HttpResponse>{
        {200, chat_response_body({"The mitochondria is the powerhouse of the cell."})},
        {200, chat_response_body({kFactYes})},
    });
    auto* raw = transport.get();
    gateway::LlmClient client(std::move(transport), std::nullopt);

    auto dataset = two_problems();
    dataset.resize(1);
    dataset[0].task_kind = answers::TaskKind::multiple_choice;
    std::map<std::string, std::string> gold{{"p1", "Cells contain mitochondria."}};

    DistillCounts counts;
    counts.targets_per_solution = 1;
    DistillParams params;
    params.fact_config.mode = toolv_fact::FactMode::gold;
    params.gold_documents = &gold;
    auto records = distill::generate_distill_set(dataset, client, testing::test_profile(),
                                                 testing::test_profile(),
                                                 DistillKind::toolv_fact, counts, params,
                                                 prompts::default_pack());
    REQUIRE(records.size() == 1);
    CHECK(records[0].validated);

    std::string teacher_prompt =
        nlohmann::json::parse(raw->requests().at(1).body).at("messages").back().at("content");
    CHECK(teacher_prompt.find("<document>Cells contain mitochondria.</document>") !=
          std::string::npos);

    SUBCASE("missing context source fails up front") {
        params.gold_documents = nullptr;
        CHECK_THROWS_AS(distill::generate_distill_set(
                            dataset, client, testing::test_profile(), testing::test_profile(),
                            DistillKind::toolv_fact, counts, params, prompts::default_pack()),
                        ConfigError);
    }
}

TEST_CASE("code distillation validates targets through the sandbox") {
    auto transport = std::make_unique<ScriptedTransport>(std::vector<gateway::HttpResponse>{
        {200, chat_response_body({"The final answer is: $\\boxed{4}$"})},
        {200, chat_response_body({"```python\nprint(2 + 2 == 4)\n```",
                                  "No code needed, it is obviously right."})},
    });
    gateway::LlmClient client(std::move(transport), std::nullopt);

    auto dataset = two_problems();
    dataset.resize(1);
    DistillCounts counts;
    counts.targets_per_solution = 2;
    auto records = distill::generate_distill_set(dataset, client, testing::test_profile(),
                                                 testing::test_profile(),
                                                 DistillKind::toolv_code, counts, {},
                                                 prompts::default_pack());
    REQUIRE(records.size() == 2);
    CHECK(records[0].validated);
    CHECK(records[0].reason.empty());
    CHECK_FALSE(records[1].validated);
    CHECK(records[1].reason == "no_code_block");
}

TEST_CASE("bad counts are configuration errors") {
    auto transport = std::make_unique<ScriptedTransport>(
        std::vector<gateway::HttpResponse>{{200, chat_response_body({"x"})}});
    gateway::LlmClient client(std::move(transport), std::nullopt);

    DistillCounts counts;
    counts.solutions_per_problem = 0;
    CHECK_THROWS_AS(distill::generate_distill_set(two_problems(), client,
                                                  testing::test_profile(),
                                                  testing::test_profile(), DistillKind::genrm,
                                                  counts, {}, prompts::default_pack()),
                    ConfigError);
    counts.solutions_per_problem = 1;
    counts.targets_per_solution = -2;
    CHECK_THROWS_AS(distill::generate_distill_set(two_problems(), client,
                                                  testing::test_profile(),
                                                  testing::test_profile(), DistillKind::genrm,
                                                  counts, {}, prompts::default_pack()),
                    ConfigError);
}

TEST_CASE("records round-trip through JSONL") {
    auto dir = fresh_dir("roundtrip");
    auto r1 = sample_record();
    auto r2 = sample_record();
    r2.kind = DistillKind::toolv_code;
    r2.problem_id = "p2";
    r2.target_text = "```python\nprint(True)\n```";
    r2.validated = false;
    r2.reason = "timeout";
    r2.sample_index = 0;

    auto path = dir / "corpus.jsonl";
    distill::write_jsonl({r1, r2}, path);
    auto back = distill::read_jsonl(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == r1);
    CHECK(back[1] == r2);

    SUBCASE("schema field names are pinned") {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        auto row = nlohmann::json::parse(line);
        for (const char* field :
             {"kind", "problem_id", "solution", "target_text", "validated", "reason",
              "teacher_model", "temperature", "sample_index"}) {
            CHECK_MESSAGE(row.contains(field), "missing field: " << field);
        }
        CHECK(row.size() == 9);
        CHECK(row.at("kind") == "genrm");
        CHECK(row.at("validated") == true);
    }

    SUBCASE("rewriting the same records is byte-identical") {
        auto bytes = read_file(path);
        distill::write_jsonl({r1, r2}, path);
        CHECK(read_file(path) == bytes);
    }

    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed JSONL rows name their line") {
    auto dir = fresh_dir("badrows");
    auto path = dir / "corpus.jsonl";

    SUBCASE("syntax error") {
        std::ofstream(path) << R"({"kind": "genrm")" << "\n";
        try {
            distill::read_jsonl(path);
            FAIL("expected IngestionError");
        } catch (const IngestionError& e) {
            CHECK(std::string(e.what()).find("line 1") != std::string::npos);
        }
    }
    SUBCASE("missing field on a later line") {
        distill::write_jsonl({sample_record()}, path);
        std::ofstream(path, std::ios::app) << R"({"kind": "genrm", "problem_id": "p9"})"
                                           << "\n";
        try {
            distill::read_jsonl(path);
            FAIL("expected IngestionError");
        } catch (const IngestionError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(distill::read_jsonl(dir / "absent.jsonl"), ConfigError);
    }

    std::filesystem::remove_all(dir);
}

TEST_CASE("warm cache reruns produce byte-identical output without traffic") {
    auto dir = fresh_dir("cache");
    auto cache_root = dir / "cache";

    std::vector<gateway::HttpResponse> script{
        {200, chat_response_body({"First solution."})},
        {200, chat_response_body({kYesRationale, "Refusing."})},
        {200, chat_response_body({"Second solution."})},
        {200, chat_response_body({kYesRationale, kYesRationale})},
    };
    DistillCounts counts;
    counts.targets_per_solution = 2;

    gateway::LlmClient cold(std::make_unique<ScriptedTransport>(script), cache_root);
    auto first = distill::generate_distill_set(two_problems(), cold, testing::test_profile(),
                                               testing::test_profile(), DistillKind::genrm,
                                               counts, {}, prompts::default_pack());
    distill::write_jsonl(first, dir / "first.jsonl");

    // a transport that would fail every call proves the rerun is cache-only
    auto failing = std::make_unique<ScriptedTransport>(
        std::vector<gateway::HttpResponse>{{0, "connect refused"}});
    auto* raw = failing.get();
    gateway::LlmClient warm(std::move(failing), cache_root);
    auto second = distill::generate_distill_set(two_problems(), warm, testing::test_profile(),
                                                testing::test_profile(), DistillKind::genrm,
                                                counts, {}, prompts::default_pack());
    distill::write_jsonl(second, dir / "second.jsonl");

    CHECK(raw->call_count() == 0);
    CHECK(read_file(dir / "first.jsonl") == read_file(dir / "second.jsonl"));
    CHECK(first.size() == 4);

    std::filesystem::remove_all(dir);
}
