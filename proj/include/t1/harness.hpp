#pragma once

#include "t1/core.hpp"
#include "t1/gateway.hpp"
#include "t1/prompts.hpp"
#include "t1/rm_scorers.hpp"
#include "t1/sandbox.hpp"
#include "t1/toolv_fact.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace t1::harness {

enum class ToolvChoice { none, code, fact };
enum class RmChoice { none, genrm, prm };
enum class SelectionChoice { weighted_bon, majority };

std::string_view to_string(ToolvChoice c);
std::string_view to_string(RmChoice c);
std::string_view to_string(SelectionChoice c);
ToolvChoice toolv_choice_from_string(std::string_view s);
RmChoice rm_choice_from_string(std::string_view s);
SelectionChoice selection_choice_from_string(std::string_view s);

struct PrmConfig {
    gateway::BackendProfile backend;
    rm_scorers::PrmAggregation aggregation = rm_scorers::PrmAggregation::last;
};

/// Which verification stages run and how they are parameterized. The tool
/// and reward stages default to self-verification: absent an explicit
/// verifier backend they reuse the generator's.
struct VerifierStack {
    ToolvChoice toolv = ToolvChoice::none;
    int toolv_k = 4;
    toolv_fact::FactMode fact_mode = toolv_fact::FactMode::retrieved;
    int fact_top_k = 3;
    std::optional<std::filesystem::path> corpus_dir;
    std::optional<std::filesystem::path> gold_documents;
    std::optional<gateway::BackendProfile> verifier_backend;
    RmChoice rm = RmChoice::none;
    rm_scorers::GenRMConfig genrm;
    std::optional<PrmConfig> prm;
};

struct BonCurveConfig {
    std::vector<int> k_list = {1, 2, 4, 8, 16, 32, 64};
    int resamples = 100;
    std::uint64_t seed = 0;  // root seed; every stochastic stage derives from it
};

struct RunConfig {
    std::filesystem::path dataset_path;
    answers::TaskKind task_kind = answers::TaskKind::math;
    gateway::BackendProfile generator;
    gateway::SamplingParams sampling;  // defaults: 64 samples at temperature 0.8
    VerifierStack verifier_stack;
    SelectionChoice selection = SelectionChoice::weighted_bon;
    BonCurveConfig bon_curve;
    std::optional<std::filesystem::path> cache_root;
    std::filesystem::path output_dir;
    sandbox::SandboxPolicy sandbox_policy;  // not serialized; host-specific
};

/// Strict parsers: an unknown key at any nesting level is a ConfigError, as
/// is a k in k_list outside [1, n_samples].
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Digest of the canonical config serialization; stamps every checkpoint so
/// stale artifacts from a different configuration are never reused.
std::string config_hash(const RunConfig& config);

/// Checks that every file the config references exists (dataset, corpus,
/// gold sidecar). output_dir is created on demand, not required.
void check_references(const RunConfig& config);

/// JSONL ingestion. Math rows: {id, question, answer, subject?, level?}.
/// Multiple-choice rows add {options: [str], answer_letter}. Extra fields are
/// tolerated; missing ones raise IngestionError naming the line.
std::vector<core::Problem> load_dataset(const std::filesystem::path& path,
                                        answers::TaskKind task_kind);

struct PerProblem {
    std::string problem_id;
    std::string selected_answer;  // normalized form
    int selected_index = 0;
    std::string method;
    bool correct = false;
    std::vector<std::pair<std::string, double>> group_scores;
};

struct CurvePoint {
    int k = 0;
    double accuracy = 0.0;
};

/// 2x2 confusion with rejection as the positive class:
///   tp = rejected and wrong, fp = rejected but correct,
///   fn = accepted but wrong, tn = accepted and correct.
/// Ratios with an empty denominator are reported as 0.
struct VerifierStats {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    long long tn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct LabeledDecision {
    bool correct = false;   // candidate's answer matches gold
    bool rejected = false;  // verifier turned it away
};

VerifierStats verifier_confusion(const std::vector<LabeledDecision>& decisions);

/// Extracts the verifier decision from a scored candidate: a tool verdict
/// rejects on fail; otherwise an rm score rejects below the threshold.
/// Candidates carrying neither signal have no decision.
std::optional<bool> rejection_decision(const core::Candidate& candidate, double threshold = 0.5);

struct EvalReport {
    std::vector<PerProblem> per_problem;
    std::vector<CurvePoint> curve;
    VerifierStats verifier_stats;
    RunConfig config_echo;
};

/// Full pipeline: generate N candidates per problem, extract answers, run the
/// configured tool filter and reward scorer, select, and estimate the
/// accuracy-vs-k curve by seeded subsampling. Per-problem results are
/// checkpointed under output_dir/problems/ and reused on rerun when the
/// config hash matches, so an interrupted run resumes where it stopped.
EvalReport run_eval(const RunConfig& config, gateway::LlmClient& client,
                    const prompts::PromptPack& pack);

/// Convenience entry: builds the HTTP client (with the config's cache root)
/// and uses the built-in prompt pack.
EvalReport run_eval(const RunConfig& config);

/// Writes curve.csv, confusion.csv, per_problem.jsonl and config_echo.json
/// into output_dir. Deterministic bytes for a given report.
void emit_reports(const EvalReport& report, const std::filesystem::path& output_dir);

} // namespace t1::harness
