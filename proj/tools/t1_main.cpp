// Command-line front end over the t1 libraries.
//
// Exit codes: 0 success, 2 configuration error, 3 backend failure,
// 4 ingestion error. Anything else unexpected exits 1.

#include "t1/core.hpp"
#include "t1/distill.hpp"
#include "t1/errors.hpp"
#include "t1/gateway.hpp"
#include "t1/harness.hpp"
#include "t1/prompts.hpp"
#include "t1/rm_scorers.hpp"
#include "t1/sandbox.hpp"
#include "t1/theory.hpp"
#include "t1/toolv_code.hpp"
#include "t1/toolv_fact.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <tuple>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace t1;

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// Shortest round-trip representation; matches the report writers, so CSV
// values printed here agree byte-for-byte with emitted artifacts.
std::string dump_double(double v) { return json(v).dump(); }

void emit_text(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + out_path);
    out << text;
    std::cerr << "wrote " << out_path << "\n";
}

// ---------------------------------------------------------------------------
// Shared option bundles
// ---------------------------------------------------------------------------

struct BackendOpts {
    std::string name;
    std::string base_url;
    std::string model;
    std::string api_key_env;
    int max_parallel = 4;
    double timeout_s = 60.0;
};

void add_backend_options(CLI::App* cmd, BackendOpts& opts, const std::string& prefix = "") {
    auto flag = [&prefix](const char* stem) { return "--" + prefix + stem; };
    cmd->add_option(flag("base-url"), opts.base_url, "endpoint root, e.g. http://host:8000/v1")
        ->required();
    cmd->add_option(flag("model"), opts.model, "model id sent with every request")->required();
    cmd->add_option(flag("api-key-env"), opts.api_key_env,
                    "environment variable holding the API key (unset = no auth header)");
    cmd->add_option(flag("max-parallel"), opts.max_parallel, "in-flight request bound")
        ->capture_default_str();
    cmd->add_option(flag("timeout"), opts.timeout_s, "per-request timeout, seconds")
        ->capture_default_str();
}

gateway::BackendProfile to_profile(const BackendOpts& opts, const std::string& default_name) {
    gateway::BackendProfile profile;
    profile.name = opts.name.empty() ? default_name : opts.name;
    profile.base_url = opts.base_url;
    profile.model_id = opts.model;
    profile.api_key_env = opts.api_key_env;
    profile.max_parallel = opts.max_parallel;
    profile.timeout_s = opts.timeout_s;
    gateway::validate(profile);
    return profile;
}

struct SandboxOpts {
    double timeout_s = 5.0;
    int memory_mb = 512;
};

void add_sandbox_options(CLI::App* cmd, SandboxOpts& opts) {
    cmd->add_option("--sandbox-timeout", opts.timeout_s, "snippet wall-clock limit, seconds")
        ->capture_default_str();
    cmd->add_option("--sandbox-memory-mb", opts.memory_mb, "snippet memory limit")
        ->capture_default_str();
}

sandbox::SandboxPolicy to_policy(const SandboxOpts& opts) {
    sandbox::SandboxPolicy policy;
    policy.wall_timeout_s = opts.timeout_s;
    policy.memory_limit_mb = opts.memory_mb;
    return policy;
}

std::optional<std::filesystem::path> cache_root_of(const std::string& cache_root) {
    if (cache_root.empty()) return std::nullopt;
    return std::filesystem::path(cache_root);
}

gateway::LlmClient make_client(const std::string& cache_root) {
    return gateway::LlmClient(gateway::make_http_transport(), cache_root_of(cache_root));
}

/// Offline stages replay checkpoints and the response cache; any attempt to
/// reach a backend fails immediately with a pointer at `t1 generate`.
class OfflineTransport : public gateway::Transport {
public:
    gateway::HttpResponse post(const std::string&, const std::string&, const std::string&,
                               const std::map<std::string, std::string>&, double) override {
        return {0, "offline stage refuses network calls; run `t1 generate` (or `t1 eval`) first"};
    }
};

// ---------------------------------------------------------------------------
// Problem / candidate ingestion for the single-problem verifier commands
// ---------------------------------------------------------------------------

core::Problem pick_problem(const std::string& path, answers::TaskKind task,
                           const std::string& id) {
    auto problems = harness::load_dataset(path, task);
    if (id.empty()) {
        if (problems.size() == 1) return problems.front();
        throw ConfigError(path + " holds " + std::to_string(problems.size()) +
                          " problems; pick one with --problem-id");
    }
    for (auto& p : problems) {
        if (p.id == id) return p;
    }
    throw ConfigError("problem id " + id + " not found in " + path);
}

/// Candidate rows are JSONL: either a bare string or {"text": str}.
std::vector<core::Candidate> load_candidates(const std::string& path,
                                             const core::Problem& problem) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open candidates file " + path);
    std::vector<core::Candidate> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        std::string text;
        if (row.is_string()) {
            text = row.get<std::string>();
        } else if (row.is_object() && row.contains("text") && row.at("text").is_string()) {
            text = row.at("text").get<std::string>();
        } else {
            throw IngestionError(path + " line " + std::to_string(lineno) +
                                 ": expected a string or {\"text\": ...}");
        }
        core::Candidate c;
        c.problem_id = problem.id;
        c.index = static_cast<int>(out.size());
        c.text = std::move(text);
        c.canonical_answer = answers::extract_answer(c.text, problem.task_kind);
        out.push_back(std::move(c));
    }
    if (out.empty()) throw IngestionError(path + ": no candidates");
    return out;
}

void print_verdict_row(int index, const core::ToolVerdict& verdict) {
    json attempts = json::array();
    for (const auto& a : verdict.attempts) {
        json row{{"attempt_pass", a.attempt_pass}};
        row["failure_kind"] =
            a.failure_kind ? json(std::string(core::to_string(*a.failure_kind))) : json(nullptr);
        attempts.push_back(std::move(row));
    }
    std::cout << json{{"index", index},
                      {"pass", verdict.pass},
                      {"rule", std::string(core::to_string(verdict.rule))},
                      {"attempts", std::move(attempts)}}
                     .dump()
              << "\n";
}

// ---------------------------------------------------------------------------
// eval / generate / select / report
// ---------------------------------------------------------------------------

enum class Stage { eval, generate, select, report };

struct PipelineOpts {
    std::string config_path;
};

void run_pipeline(const PipelineOpts& opts, Stage stage) {
    auto config = harness::load_run_config(opts.config_path);
    // eval and generate may talk to the backend; select and report must be
    // satisfiable from checkpoints and the response cache alone.
    bool live = stage == Stage::eval || stage == Stage::generate;
    gateway::LlmClient client(live ? gateway::make_http_transport()
                                   : std::unique_ptr<gateway::Transport>(new OfflineTransport),
                              config.cache_root);
    auto report = harness::run_eval(config, client, prompts::default_pack());
    auto stats = client.stats();

    if (stage == Stage::generate) {
        std::cout << "checkpointed " << report.per_problem.size() << " problems under "
                  << (config.output_dir / "problems").string() << "\n";
        std::cout << "backend calls: " << stats.network_calls
                  << "  cache hits: " << stats.cache_hits << "\n";
        return;
    }
    if (stage == Stage::select) {
        std::cout << "problem_id\tmethod\tselected_answer\tcorrect\n";
        for (const auto& row : report.per_problem) {
            std::cout << row.problem_id << "\t" << row.method << "\t" << row.selected_answer
                      << "\t" << (row.correct ? "true" : "false") << "\n";
        }
        return;
    }

    harness::emit_reports(report, config.output_dir);
    long long correct = std::count_if(report.per_problem.begin(), report.per_problem.end(),
                                      [](const harness::PerProblem& r) { return r.correct; });
    std::cout << "problems: " << report.per_problem.size() << "  correct: " << correct
              << "  accuracy: "
              << fmt4(static_cast<double>(correct) /
                      static_cast<double>(report.per_problem.size()))
              << "\n";
    std::cout << "curve:";
    for (const auto& point : report.curve) {
        std::cout << " " << point.k << ":" << fmt4(point.accuracy);
    }
    std::cout << "\n";
    const auto& s = report.verifier_stats;
    if (s.tp + s.fp + s.fn + s.tn > 0) {
        std::cout << "verifier: tp=" << s.tp << " fp=" << s.fp << " fn=" << s.fn
                  << " tn=" << s.tn << " precision=" << fmt4(s.precision)
                  << " recall=" << fmt4(s.recall) << " f1=" << fmt4(s.f1) << "\n";
    }
    if (stage == Stage::eval) {
        std::cout << "backend calls: " << stats.network_calls
                  << "  cache hits: " << stats.cache_hits << "\n";
    }
    std::cout << "reports under " << config.output_dir.string()
              << ": curve.csv confusion.csv per_problem.jsonl config_echo.json\n";
}

// ---------------------------------------------------------------------------
// toolv-code / toolv-fact
// ---------------------------------------------------------------------------

struct ToolvCodeOpts {
    std::string problem_file;
    std::string problem_id;
    std::string candidates_file;
    int k = 4;
    double temperature = 0.6;
    int max_tokens = 2048;
    std::string cache_root;
    BackendOpts backend;
    SandboxOpts sandbox;
};

void run_toolv_code(const ToolvCodeOpts& opts) {
    auto problem = pick_problem(opts.problem_file, answers::TaskKind::math, opts.problem_id);
    auto candidates = load_candidates(opts.candidates_file, problem);
    auto profile = to_profile(opts.backend, "verifier");
    auto client = make_client(opts.cache_root);
    const auto& tmpl = prompts::default_pack().get(prompts::TemplateName::code_gen);
    gateway::CompletionFn complete = [&](const std::map<std::string, std::string>& bindings,
                                         int n) {
        gateway::SamplingParams params;
        params.temperature = opts.temperature;
        params.n_samples = n;
        params.max_tokens = opts.max_tokens;
        return client.complete(profile, tmpl, bindings, params);
    };
    auto policy = to_policy(opts.sandbox);
    for (const auto& candidate : candidates) {
        auto verdict = toolv_code::verify_math(problem, candidate, opts.k, complete, policy);
        print_verdict_row(candidate.index, verdict);
    }
}

struct ToolvFactOpts {
    std::string mode = "retrieved";
    std::string problem_file;
    std::string problem_id;
    std::string candidates_file;
    std::string index_dir;
    std::string gold_file;
    int k = 4;
    int top_k = 3;
    bool any_task = false;
    double temperature = 0.6;
    int max_tokens = 2048;
    std::string cache_root;
    BackendOpts backend;
};

void run_toolv_fact(const ToolvFactOpts& opts) {
    toolv_fact::FactVerifyConfig config;
    config.k = opts.k;
    config.mode = toolv_fact::fact_mode_from_string(opts.mode);
    config.top_k = opts.top_k;
    config.allow_any_task = opts.any_task;

    std::optional<toolv_fact::CorpusIndex> index;
    std::map<std::string, std::string> gold;
    if (config.mode == toolv_fact::FactMode::retrieved) {
        if (opts.index_dir.empty()) throw ConfigError("retrieved mode needs --index");
        index = toolv_fact::CorpusIndex::load(opts.index_dir);
    } else {
        if (opts.gold_file.empty()) throw ConfigError("gold mode needs --gold");
        gold = toolv_fact::load_gold_documents(opts.gold_file);
    }

    auto problem =
        pick_problem(opts.problem_file, answers::TaskKind::multiple_choice, opts.problem_id);
    auto candidates = load_candidates(opts.candidates_file, problem);
    auto profile = to_profile(opts.backend, "verifier");
    auto client = make_client(opts.cache_root);
    const auto& tmpl = prompts::default_pack().get(prompts::TemplateName::fact_check);
    gateway::CompletionFn complete = [&](const std::map<std::string, std::string>& bindings,
                                         int n) {
        gateway::SamplingParams params;
        params.temperature = opts.temperature;
        params.n_samples = n;
        params.max_tokens = opts.max_tokens;
        return client.complete(profile, tmpl, bindings, params);
    };
    for (const auto& candidate : candidates) {
        auto verdict = toolv_fact::verify_fact(problem, candidate, config,
                                               index ? &*index : nullptr, &gold, complete);
        print_verdict_row(candidate.index, verdict);
    }
}

// ---------------------------------------------------------------------------
// index build / query
// ---------------------------------------------------------------------------

struct IndexBuildOpts {
    std::string corpus;
    std::string out_dir;
};

void run_index_build(const IndexBuildOpts& opts) {
    auto documents = toolv_fact::load_corpus_jsonl(opts.corpus);
    auto index = toolv_fact::CorpusIndex::build(documents);
    index.save(opts.out_dir);
    std::cout << "indexed " << index.doc_count() << " documents (avg length "
              << fmt4(index.avg_doc_len()) << ") -> " << opts.out_dir << "\n";
}

struct IndexQueryOpts {
    std::string index_dir;
    std::string query;
    int top_k = 3;
};

void run_index_query(const IndexQueryOpts& opts) {
    auto index = toolv_fact::CorpusIndex::load(opts.index_dir);
    auto hits = index.retrieve(opts.query, opts.top_k);
    std::cout << "doc_id\tscore\ttitle\n";
    for (const auto& hit : hits) {
        std::cout << hit.doc_id << "\t" << dump_double(hit.score) << "\t" << hit.title << "\n";
    }
}

// ---------------------------------------------------------------------------
// theory closed-form / mc / sweep / toy
// ---------------------------------------------------------------------------

struct TheoryOpts {
    std::vector<double> p_values;
    std::vector<double> q_values;
    std::vector<int> n_values;
    long long trials = 1000000;
    std::uint64_t seed = 0;
    std::string out_path;
};

void run_theory_grid(const TheoryOpts& opts, bool with_mc) {
    std::string csv = with_mc ? "p,q,N,analytic,mc,stderr\n" : "p,q,N,analytic\n";
    for (double p : opts.p_values) {
        for (double q : opts.q_values) {
            for (int n : opts.n_values) {
                theory::VerifierNoiseModel model{p, q, n};
                double analytic = theory::bon_accuracy_closed_form(model);
                csv += dump_double(p) + "," + dump_double(q) + "," + std::to_string(n) + "," +
                       dump_double(analytic);
                if (with_mc) {
                    auto mc = theory::bon_accuracy_monte_carlo(model, opts.trials, opts.seed);
                    csv += "," + dump_double(mc.estimate) + "," + dump_double(mc.standard_error);
                }
                csv += "\n";
            }
        }
    }
    emit_text(csv, opts.out_path);
}

struct ToyOpts {
    std::vector<int> m_values = {10, 50, 100};
    double train_fraction = 0.1;
    std::uint64_t seed = 0;
    std::string out_path;
};

void run_theory_toy(const ToyOpts& opts) {
    std::string csv =
        "M,train_fraction,seed,universe_size,tabular_error,tabular_entries,tool_error,"
        "tool_entries\n";
    for (int m : opts.m_values) {
        theory::ToyAdditionTask task{m, opts.train_fraction, opts.seed};
        auto result = theory::run_toy_memorization(task);
        csv += std::to_string(m) + "," + dump_double(opts.train_fraction) + "," +
               std::to_string(opts.seed) + "," + std::to_string(result.universe_size) + "," +
               dump_double(result.tabular_error) + "," + std::to_string(result.tabular_entries) +
               "," + dump_double(result.tool_error) + "," + std::to_string(result.tool_entries) +
               "\n";
    }
    emit_text(csv, opts.out_path);
}

// ---------------------------------------------------------------------------
// concept-proof gen / run
// ---------------------------------------------------------------------------

struct ConceptGenOpts {
    theory::ConceptProofSpec spec;
    std::string out_path;
};

void add_concept_spec_options(CLI::App* cmd, theory::ConceptProofSpec& spec) {
    cmd->add_option("--n-terms", spec.n_terms, "operands per expression")->capture_default_str();
    cmd->add_option("--n-correct", spec.n_correct, "items whose claim is true")
        ->capture_default_str();
    cmd->add_option("--n-incorrect", spec.n_incorrect, "items with a perturbed claim")
        ->capture_default_str();
    cmd->add_option("--digit-lo", spec.digit_lo, "smallest operand")->capture_default_str();
    cmd->add_option("--digit-hi", spec.digit_hi, "largest operand")->capture_default_str();
    cmd->add_option("--perturb", spec.perturb_rel, "relative bound on the injected error")
        ->capture_default_str();
    cmd->add_option("--seed", spec.seed, "generation seed")->capture_default_str();
}

void run_concept_gen(const ConceptGenOpts& opts) {
    auto items = theory::generate_concept_proof_set(opts.spec);
    std::string text;
    for (const auto& item : items) {
        text += json{{"expression", item.expression},
                     {"claimed", item.claimed},
                     {"label", item.label}}
                    .dump() +
                "\n";
    }
    emit_text(text, opts.out_path);
    std::cerr << items.size() << " items\n";
}

struct ConceptRunOpts {
    theory::ConceptProofSpec spec;
    std::string mode = "natural_language";
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string cache_root;
    std::string per_item_path;
    BackendOpts backend;
    SandboxOpts sandbox;
};

void run_concept_run(const ConceptRunOpts& opts) {
    auto mode = theory::concept_mode_from_string(opts.mode);
    auto profile = to_profile(opts.backend, "judge");
    auto client = make_client(opts.cache_root);
    theory::Responder responder = [&](const prompts::RenderedPrompt& prompt) {
        gateway::SamplingParams params;
        params.temperature = opts.temperature;
        params.n_samples = 1;
        params.max_tokens = opts.max_tokens;
        return client.complete(profile, prompt, params).front().text;
    };
    auto result = theory::run_concept_proof(opts.spec, mode, responder, prompts::default_pack(),
                                            to_policy(opts.sandbox));
    long long correct = std::count_if(result.per_item.begin(), result.per_item.end(),
                                      [](const theory::ConceptItemOutcome& o) { return o.correct; });
    std::cout << "accuracy: " << fmt4(result.accuracy) << " (" << correct << "/"
              << result.per_item.size() << ")\n";
    if (!opts.per_item_path.empty()) {
        std::string text;
        for (const auto& outcome : result.per_item) {
            text += json{{"expression", outcome.item.expression},
                         {"claimed", outcome.item.claimed},
                         {"label", outcome.item.label},
                         {"predicted",
                          outcome.predicted ? json(*outcome.predicted) : json(nullptr)},
                         {"correct", outcome.correct},
                         {"detail", outcome.detail}}
                        .dump() +
                    "\n";
        }
        emit_text(text, opts.per_item_path);
    }
}

// ---------------------------------------------------------------------------
// distill
// ---------------------------------------------------------------------------

struct DistillOpts {
    std::string dataset;
    std::string task_kind = "math";
    std::string kind;
    std::string out_path;
    int solutions = 1;
    int targets = 0;  // 0 = kind default
    double student_temperature = 0.8;
    int student_max_tokens = 2048;
    double teacher_temperature = 0.6;
    int teacher_max_tokens = 2048;
    std::string cache_root;
    std::string fact_mode = "retrieved";
    std::string index_dir;
    std::string gold_file;
    int top_k = 3;
    BackendOpts student;
    BackendOpts teacher;
    SandboxOpts sandbox;
};

void run_distill(const DistillOpts& opts) {
    auto kind = distill::distill_kind_from_string(opts.kind);
    auto task = answers::task_kind_from_string(opts.task_kind);
    auto dataset = harness::load_dataset(opts.dataset, task);
    auto student = to_profile(opts.student, "student");
    auto teacher = to_profile(opts.teacher, "teacher");
    auto client = make_client(opts.cache_root);

    distill::DistillCounts counts{opts.solutions, opts.targets};
    distill::DistillParams params;
    params.student_sampling.temperature = opts.student_temperature;
    params.student_sampling.max_tokens = opts.student_max_tokens;
    params.teacher_temperature = opts.teacher_temperature;
    params.teacher_max_tokens = opts.teacher_max_tokens;
    params.sandbox_policy = to_policy(opts.sandbox);

    std::optional<toolv_fact::CorpusIndex> index;
    std::map<std::string, std::string> gold;
    if (kind == distill::DistillKind::toolv_fact) {
        params.fact_config.mode = toolv_fact::fact_mode_from_string(opts.fact_mode);
        params.fact_config.top_k = opts.top_k;
        if (params.fact_config.mode == toolv_fact::FactMode::retrieved) {
            if (opts.index_dir.empty()) throw ConfigError("retrieved mode needs --index");
            index = toolv_fact::CorpusIndex::load(opts.index_dir);
            params.corpus = &*index;
        } else {
            if (opts.gold_file.empty()) throw ConfigError("gold mode needs --gold");
            gold = toolv_fact::load_gold_documents(opts.gold_file);
            params.gold_documents = &gold;
        }
    }

    auto records = distill::generate_distill_set(dataset, client, student, teacher, kind, counts,
                                                 params, prompts::default_pack());
    distill::write_jsonl(records, opts.out_path);
    long long validated = std::count_if(records.begin(), records.end(),
                                        [](const distill::DistillRecord& r) { return r.validated; });
    std::cout << records.size() << " records (" << validated << " validated) -> " << opts.out_path
              << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"weighted best-of-N evaluation with tool and reward-model verification"};
    app.require_subcommand(1);

    // --- pipeline stages ---
    auto pipeline = std::make_shared<PipelineOpts>();
    for (const auto& entry :
         {std::tuple{"eval", Stage::eval, "run the full pipeline and emit reports"},
          std::tuple{"generate", Stage::generate,
                     "produce per-problem candidate/verdict/score checkpoints"},
          std::tuple{"select", Stage::select, "recompute selections from checkpoints, offline"},
          std::tuple{"report", Stage::report, "recompute and emit reports from checkpoints"}}) {
        auto* cmd = app.add_subcommand(std::get<0>(entry), std::get<2>(entry));
        cmd->add_option("--config", pipeline->config_path, "run configuration, JSON")
            ->required();
        Stage stage = std::get<1>(entry);
        cmd->callback([pipeline, stage] { run_pipeline(*pipeline, stage); });
    }

    // --- toolv-code ---
    auto code_opts = std::make_shared<ToolvCodeOpts>();
    {
        auto* cmd = app.add_subcommand("toolv-code",
                                       "verify math candidates by generated checker code");
        cmd->add_option("--problem-file", code_opts->problem_file, "JSONL problem file")
            ->required();
        cmd->add_option("--problem-id", code_opts->problem_id,
                        "which problem to verify (defaults to a single-problem file)");
        cmd->add_option("--candidates-file", code_opts->candidates_file,
                        "JSONL candidate solutions: bare strings or {\"text\": ...}")
            ->required();
        cmd->add_option("--k", code_opts->k, "checker completions per candidate")
            ->capture_default_str();
        cmd->add_option("--temperature", code_opts->temperature, "checker sampling temperature")
            ->capture_default_str();
        cmd->add_option("--max-tokens", code_opts->max_tokens, "checker completion budget")
            ->capture_default_str();
        cmd->add_option("--cache-root", code_opts->cache_root, "response cache directory");
        add_backend_options(cmd, code_opts->backend);
        add_sandbox_options(cmd, code_opts->sandbox);
        cmd->callback([code_opts] { run_toolv_code(*code_opts); });
    }

    // --- toolv-fact ---
    auto fact_opts = std::make_shared<ToolvFactOpts>();
    {
        auto* cmd = app.add_subcommand("toolv-fact",
                                       "verify knowledge candidates against documents");
        cmd->add_option("--mode", fact_opts->mode, "document source: retrieved or gold")
            ->check(CLI::IsMember({"retrieved", "gold"}))
            ->capture_default_str();
        cmd->add_option("--problem-file", fact_opts->problem_file, "JSONL problem file")
            ->required();
        cmd->add_option("--problem-id", fact_opts->problem_id,
                        "which problem to verify (defaults to a single-problem file)");
        cmd->add_option("--candidates-file", fact_opts->candidates_file,
                        "JSONL candidate solutions")
            ->required();
        cmd->add_option("--index", fact_opts->index_dir, "index directory (retrieved mode)");
        cmd->add_option("--gold", fact_opts->gold_file, "gold document sidecar (gold mode)");
        cmd->add_option("--k", fact_opts->k, "rationales per candidate, all must pass")
            ->capture_default_str();
        cmd->add_option("--top-k", fact_opts->top_k, "documents retrieved per query")
            ->capture_default_str();
        cmd->add_flag("--any-task", fact_opts->any_task,
                      "lift the multiple-choice-only task gate");
        cmd->add_option("--temperature", fact_opts->temperature, "rationale temperature")
            ->capture_default_str();
        cmd->add_option("--max-tokens", fact_opts->max_tokens, "rationale completion budget")
            ->capture_default_str();
        cmd->add_option("--cache-root", fact_opts->cache_root, "response cache directory");
        add_backend_options(cmd, fact_opts->backend);
        cmd->callback([fact_opts] { run_toolv_fact(*fact_opts); });
    }

    // --- index ---
    auto build_opts = std::make_shared<IndexBuildOpts>();
    auto query_opts = std::make_shared<IndexQueryOpts>();
    {
        auto* index_cmd = app.add_subcommand("index", "build or query the retrieval index");
        index_cmd->require_subcommand(1);
        auto* build = index_cmd->add_subcommand("build", "index a JSONL corpus");
        build->add_option("--corpus", build_opts->corpus, "JSONL {id, title, text}")->required();
        build->add_option("--out", build_opts->out_dir, "index directory to write")->required();
        build->callback([build_opts] { run_index_build(*build_opts); });
        auto* query = index_cmd->add_subcommand("query", "rank documents for a query");
        query->add_option("--index", query_opts->index_dir, "index directory")->required();
        query->add_option("--query", query_opts->query, "query text")->required();
        query->add_option("--top-k", query_opts->top_k, "results returned")
            ->capture_default_str();
        query->callback([query_opts] { run_index_query(*query_opts); });
    }

    // --- theory ---
    auto theory_opts = std::make_shared<TheoryOpts>();
    auto sweep_opts = std::make_shared<TheoryOpts>();
    auto toy_opts = std::make_shared<ToyOpts>();
    {
        auto* theory_cmd =
            app.add_subcommand("theory", "noisy-verifier selection accuracy analyses");
        theory_cmd->require_subcommand(1);

        auto add_grid = [](CLI::App* cmd, TheoryOpts& opts, bool required_grid) {
            auto* p = cmd->add_option("--p", opts.p_values,
                                      "rejection accuracy on wrong answers, in (1/2, 1]");
            auto* q = cmd->add_option("--q", opts.q_values,
                                      "acceptance accuracy on right answers, in (1/2, 1]");
            auto* n = cmd->add_option("--n", opts.n_values, "samples drawn per problem");
            if (required_grid) {
                p->required();
                q->required();
                n->required();
            }
            cmd->add_option("--out", opts.out_path, "CSV path (stdout if omitted)");
        };

        auto* closed = theory_cmd->add_subcommand("closed-form", "exact selection accuracy");
        add_grid(closed, *theory_opts, true);
        closed->callback([theory_opts] { run_theory_grid(*theory_opts, /*with_mc=*/false); });

        auto* mc = theory_cmd->add_subcommand("mc",
                                              "Monte Carlo estimate beside the exact value");
        add_grid(mc, *theory_opts, true);
        mc->add_option("--trials", theory_opts->trials, "simulated selections per point")
            ->capture_default_str();
        mc->add_option("--seed", theory_opts->seed, "simulation seed")->capture_default_str();
        mc->callback([theory_opts] { run_theory_grid(*theory_opts, /*with_mc=*/true); });

        sweep_opts->p_values = {0.6, 0.7, 0.8, 0.9, 1.0};
        sweep_opts->q_values = {0.6, 0.7, 0.8, 0.9, 1.0};
        sweep_opts->n_values = {1, 2, 4, 8, 16, 32, 64};
        auto* sweep = theory_cmd->add_subcommand(
            "sweep", "closed form vs Monte Carlo over the default grid");
        add_grid(sweep, *sweep_opts, false);
        sweep->add_option("--trials", sweep_opts->trials, "simulated selections per point")
            ->capture_default_str();
        sweep->add_option("--seed", sweep_opts->seed, "simulation seed")->capture_default_str();
        sweep->callback([sweep_opts] { run_theory_grid(*sweep_opts, /*with_mc=*/true); });

        auto* toy = theory_cmd->add_subcommand("toy",
                                               "memorizing vs tool-using learner comparison");
        toy->add_option("--m", toy_opts->m_values, "operand range bound")->capture_default_str();
        toy->add_option("--train-fraction", toy_opts->train_fraction,
                        "fraction of the universe seen in training")
            ->capture_default_str();
        toy->add_option("--seed", toy_opts->seed, "training sample seed")->capture_default_str();
        toy->add_option("--out", toy_opts->out_path, "CSV path (stdout if omitted)");
        toy->callback([toy_opts] { run_theory_toy(*toy_opts); });
    }

    // --- concept-proof ---
    auto gen_opts = std::make_shared<ConceptGenOpts>();
    auto run_opts = std::make_shared<ConceptRunOpts>();
    {
        auto* concept_cmd =
            app.add_subcommand("concept-proof", "balanced arithmetic verification benchmark");
        concept_cmd->require_subcommand(1);

        auto* gen = concept_cmd->add_subcommand("gen", "generate the labeled item set");
        add_concept_spec_options(gen, gen_opts->spec);
        gen->add_option("--out", gen_opts->out_path, "JSONL path (stdout if omitted)");
        gen->callback([gen_opts] { run_concept_gen(*gen_opts); });

        auto* run = concept_cmd->add_subcommand("run", "judge every item against a backend");
        add_concept_spec_options(run, run_opts->spec);
        run->add_option("--mode", run_opts->mode, "natural_language or tool")
            ->check(CLI::IsMember({"natural_language", "tool"}))
            ->capture_default_str();
        run->add_option("--temperature", run_opts->temperature, "judge sampling temperature")
            ->capture_default_str();
        run->add_option("--max-tokens", run_opts->max_tokens, "judge completion budget")
            ->capture_default_str();
        run->add_option("--cache-root", run_opts->cache_root, "response cache directory");
        run->add_option("--per-item", run_opts->per_item_path, "per-item outcomes, JSONL");
        add_backend_options(run, run_opts->backend);
        add_sandbox_options(run, run_opts->sandbox);
        run->callback([run_opts] { run_concept_run(*run_opts); });
    }

    // --- distill ---
    auto distill_opts = std::make_shared<DistillOpts>();
    {
        auto* cmd = app.add_subcommand("distill",
                                       "emit verifier training records from teacher samples");
        cmd->add_option("--dataset", distill_opts->dataset, "JSONL training problems")
            ->required();
        cmd->add_option("--task-kind", distill_opts->task_kind, "math or multiple_choice")
            ->check(CLI::IsMember({"math", "multiple_choice"}))
            ->capture_default_str();
        cmd->add_option("--kind", distill_opts->kind,
                        "corpus kind: toolv_code, toolv_fact or genrm")
            ->check(CLI::IsMember({"toolv_code", "toolv_fact", "genrm"}))
            ->required();
        cmd->add_option("--out", distill_opts->out_path, "output JSONL")->required();
        cmd->add_option("--solutions", distill_opts->solutions, "student solutions per problem")
            ->capture_default_str();
        cmd->add_option("--targets", distill_opts->targets,
                        "teacher targets per solution (0 = kind default)")
            ->capture_default_str();
        cmd->add_option("--student-temperature", distill_opts->student_temperature,
                        "solution sampling temperature")
            ->capture_default_str();
        cmd->add_option("--student-max-tokens", distill_opts->student_max_tokens,
                        "solution completion budget")
            ->capture_default_str();
        cmd->add_option("--teacher-temperature", distill_opts->teacher_temperature,
                        "target sampling temperature")
            ->capture_default_str();
        cmd->add_option("--teacher-max-tokens", distill_opts->teacher_max_tokens,
                        "target completion budget")
            ->capture_default_str();
        cmd->add_option("--cache-root", distill_opts->cache_root, "response cache directory");
        cmd->add_option("--mode", distill_opts->fact_mode,
                        "document source for toolv_fact: retrieved or gold")
            ->check(CLI::IsMember({"retrieved", "gold"}))
            ->capture_default_str();
        cmd->add_option("--index", distill_opts->index_dir, "index directory (retrieved mode)");
        cmd->add_option("--gold", distill_opts->gold_file, "gold document sidecar (gold mode)");
        cmd->add_option("--top-k", distill_opts->top_k, "documents retrieved per query")
            ->capture_default_str();
        add_backend_options(cmd, distill_opts->student, "student-");
        add_backend_options(cmd, distill_opts->teacher, "teacher-");
        add_sandbox_options(cmd, distill_opts->sandbox);
        cmd->callback([distill_opts] { run_distill(*distill_opts); });
    }

    // --- prompts ---
    auto pack_dir = std::make_shared<std::string>();
    {
        auto* prompts_cmd = app.add_subcommand("prompts", "prompt template management");
        prompts_cmd->require_subcommand(1);
        auto* exp = prompts_cmd->add_subcommand("export", "write the built-in pack to disk");
        exp->add_option("--out", *pack_dir, "directory receiving pack.json")->required();
        exp->callback([pack_dir] {
            prompts::save_pack(prompts::default_pack(), *pack_dir);
            std::cerr << "wrote " << (std::filesystem::path(*pack_dir) / "pack.json").string()
                      << "\n";
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const ProtocolError& e) {
        std::cerr << "backend protocol error: " << e.what() << "\n";
        return 3;
    } catch (const IngestionError& e) {
        std::cerr << "ingestion error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
