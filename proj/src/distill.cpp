#include "t1/distill.hpp"

#include "t1/errors.hpp"
#include "t1/rm_scorers.hpp"
#include "t1/toolv_code.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>

namespace t1::distill {
namespace {

using nlohmann::json;

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

prompts::TemplateName target_template(DistillKind kind) {
    switch (kind) {
        case DistillKind::toolv_code:
            return prompts::TemplateName::code_gen;
        case DistillKind::toolv_fact:
            return prompts::TemplateName::fact_check;
        case DistillKind::genrm:
            return prompts::TemplateName::genrm_cot;
    }
    throw ContractViolation("unhandled distill kind");
}

json record_to_json(const DistillRecord& r) {
    return json{
        {"kind", std::string(to_string(r.kind))},
        {"problem_id", r.problem_id},
        {"solution", r.solution},
        {"target_text", r.target_text},
        {"validated", r.validated},
        {"reason", r.reason},
        {"teacher_model", r.teacher_model},
        {"temperature", r.temperature},
        {"sample_index", r.sample_index},
    };
}

} // namespace

std::string_view to_string(DistillKind k) {
    switch (k) {
        case DistillKind::toolv_code:
            return "toolv_code";
        case DistillKind::toolv_fact:
            return "toolv_fact";
        case DistillKind::genrm:
            return "genrm";
    }
    throw ContractViolation("unhandled distill kind");
}

DistillKind distill_kind_from_string(std::string_view s) {
    if (s == "toolv_code") return DistillKind::toolv_code;
    if (s == "toolv_fact") return DistillKind::toolv_fact;
    if (s == "genrm") return DistillKind::genrm;
    throw ConfigError("unknown distill kind: " + std::string(s));
}

int default_targets_per_solution(DistillKind kind) {
    return kind == DistillKind::toolv_code ? 4 : 8;
}

Validation validate_target(DistillKind kind, const std::string& target_text,
                           const sandbox::SandboxPolicy& policy) {
    if (blank(target_text)) return {false, "empty"};
    if (kind == DistillKind::toolv_code) {
        auto block = toolv_code::extract_code_block(target_text);
        if (!block) return {false, "no_code_block"};
        auto run = sandbox::run_sandboxed(*block, policy);
        if (run.exit == sandbox::ExitClass::timeout) return {false, "timeout"};
        if (run.exit == sandbox::ExitClass::error) return {false, "runtime_error"};
        if (run.verdict == sandbox::CodeVerdict::unparseable) return {false, "unparseable"};
        return {true, ""};
    }
    bool parsed = kind == DistillKind::genrm
                      ? rm_scorers::parse_genrm_verdict(target_text).has_value()
                      : toolv_fact::parse_fact_verdict(target_text) !=
                            toolv_fact::FactVerdict::unparseable;
    if (!parsed) return {false, "unparseable"};
    return {true, ""};
}

std::vector<DistillRecord> generate_distill_set(
    const std::vector<core::Problem>& dataset, gateway::LlmClient& client,
    const gateway::BackendProfile& student_backend, const gateway::BackendProfile& teacher_backend,
    DistillKind kind, const DistillCounts& counts, const DistillParams& params,
    const prompts::PromptPack& pack) {
    if (counts.solutions_per_problem < 1) {
        throw ConfigError("solutions_per_problem must be >= 1");
    }
    int targets = counts.targets_per_solution == 0 ? default_targets_per_solution(kind)
                                                   : counts.targets_per_solution;
    if (targets < 1) throw ConfigError("targets_per_solution must be >= 1");
    gateway::validate(student_backend);
    gateway::validate(teacher_backend);

    const auto& solve_tmpl = pack.get(prompts::TemplateName::generate_solution);
    const auto& target_tmpl = pack.get(target_template(kind));

    gateway::SamplingParams student = params.student_sampling;
    student.n_samples = counts.solutions_per_problem;

    gateway::SamplingParams teacher;
    teacher.temperature = params.teacher_temperature;
    teacher.n_samples = targets;
    teacher.max_tokens = params.teacher_max_tokens;

    std::vector<DistillRecord> records;
    records.reserve(dataset.size() * static_cast<size_t>(counts.solutions_per_problem) *
                    static_cast<size_t>(targets));
    for (const auto& problem : dataset) {
        auto solutions =
            client.complete(student_backend, solve_tmpl, {{"question", problem.question}}, student);
        for (const auto& solution : solutions) {
            std::map<std::string, std::string> bindings{
                {"question", problem.question},
                {"solution", solution.text},
            };
            if (kind == DistillKind::toolv_fact) {
                bindings["document"] = toolv_fact::document_context(
                    problem, solution.text, params.fact_config, params.corpus,
                    params.gold_documents);
            }
            auto targets_out = client.complete(teacher_backend, target_tmpl, bindings, teacher);
            for (size_t t = 0; t < targets_out.size(); ++t) {
                DistillRecord rec;
                rec.kind = kind;
                rec.problem_id = problem.id;
                rec.solution = solution.text;
                rec.target_text = targets_out[t].text;
                auto check = validate_target(kind, rec.target_text, params.sandbox_policy);
                rec.validated = check.validated;
                rec.reason = check.reason;
                rec.teacher_model = teacher_backend.model_id;
                rec.temperature = params.teacher_temperature;
                rec.sample_index = static_cast<int>(t);
                records.push_back(std::move(rec));
            }
        }
    }
    return records;
}

void write_jsonl(const std::vector<DistillRecord>& records, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + path.string());
        for (const auto& record : records) {
            out << record_to_json(record).dump() << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<DistillRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<DistillRecord> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (row.is_discarded() || !row.is_object()) {
            throw IngestionError(path.string() + " line " + std::to_string(lineno) +
                                 ": not a JSON object");
        }
        try {
            DistillRecord rec;
            rec.kind = distill_kind_from_string(row.at("kind").get<std::string>());
            rec.problem_id = row.at("problem_id").get<std::string>();
            rec.solution = row.at("solution").get<std::string>();
            rec.target_text = row.at("target_text").get<std::string>();
            rec.validated = row.at("validated").get<bool>();
            rec.reason = row.at("reason").get<std::string>();
            rec.teacher_model = row.at("teacher_model").get<std::string>();
            rec.temperature = row.at("temperature").get<double>();
            rec.sample_index = row.at("sample_index").get<int>();
            records.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw IngestionError(path.string() + " line " + std::to_string(lineno) + ": " +
                                 e.what());
        }
    }
    return records;
}

} // namespace t1::distill
