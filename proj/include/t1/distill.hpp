#pragma once

#include "t1/core.hpp"
#include "t1/gateway.hpp"
#include "t1/prompts.hpp"
#include "t1/sandbox.hpp"
#include "t1/toolv_fact.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace t1::distill {

/// Which verifier the emitted corpus is meant to train.
enum class DistillKind { toolv_code, toolv_fact, genrm };

std::string_view to_string(DistillKind k);
DistillKind distill_kind_from_string(std::string_view s);

/// One (problem, student solution, teacher target) training pair.
/// Validation is advisory: a failed check sets validated=false and a reason,
/// but the record is still emitted. Downstream trainers decide what to keep.
struct DistillRecord {
    DistillKind kind = DistillKind::toolv_code;
    std::string problem_id;
    std::string solution;     // student model's sampled solution
    std::string target_text;  // teacher completion used as supervision
    bool validated = false;
    std::string reason;  // empty when validated; else empty|no_code_block|timeout|runtime_error|unparseable
    std::string teacher_model;
    double temperature = 0.6;
    int sample_index = 0;  // index of the target among this solution's teacher samples

    bool operator==(const DistillRecord&) const = default;
};

struct DistillCounts {
    int solutions_per_problem = 1;
    /// 0 means the kind's default: 4 for toolv_code, 8 for toolv_fact and genrm.
    int targets_per_solution = 0;
};

int default_targets_per_solution(DistillKind kind);

struct DistillParams {
    /// Student solution sampling; n_samples is overridden by counts.
    gateway::SamplingParams student_sampling;
    double teacher_temperature = 0.6;
    int teacher_max_tokens = 2048;
    /// Policy for executing code targets during validation.
    sandbox::SandboxPolicy sandbox_policy;
    /// Context sources for toolv_fact targets; unused otherwise.
    toolv_fact::FactVerifyConfig fact_config;
    const toolv_fact::CorpusIndex* corpus = nullptr;
    const std::map<std::string, std::string>* gold_documents = nullptr;
};

/// validated / reason for one teacher target.
struct Validation {
    bool validated = false;
    std::string reason;
};

/// Kind-specific advisory check. Code targets must carry a code block that
/// runs in the sandbox and prints a True/False verdict; rationale targets
/// must end in a parseable verdict line. Empty completions are flagged
/// "empty" for every kind.
Validation validate_target(DistillKind kind, const std::string& target_text,
                           const sandbox::SandboxPolicy& policy);

/// Samples solutions from the student backend, then teacher targets for each
/// solution with the kind's prompt template, validates, and returns one
/// record per (problem, solution, target) in dataset order. Cardinality is
/// exactly problems x solutions_per_problem x targets_per_solution; nothing
/// is dropped. Reruns against a warm response cache are byte-identical.
std::vector<DistillRecord> generate_distill_set(
    const std::vector<core::Problem>& dataset, gateway::LlmClient& client,
    const gateway::BackendProfile& student_backend, const gateway::BackendProfile& teacher_backend,
    DistillKind kind, const DistillCounts& counts, const DistillParams& params,
    const prompts::PromptPack& pack);

/// JSONL persistence. Field names are part of the interface: kind,
/// problem_id, solution, target_text, validated, reason, teacher_model,
/// temperature, sample_index.
void write_jsonl(const std::vector<DistillRecord>& records, const std::filesystem::path& path);
std::vector<DistillRecord> read_jsonl(const std::filesystem::path& path);

} // namespace t1::distill
