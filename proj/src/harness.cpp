#include "t1/harness.hpp"

#include "t1/errors.hpp"
#include "t1/rng.hpp"
#include "t1/toolv_code.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace t1::harness {
namespace {

using nlohmann::json;

// Teacher-sample temperature for the tool stages (code and fact-check).
constexpr double kToolTemperature = 0.6;

// --- strict config parsing -------------------------------------------------

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return item.key() == k;
            }) == allowed.end()) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

const json& need(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(where + " is missing required key '" + key + "'");
    return *it;
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    return it->get<T>();
}

gateway::BackendProfile parse_backend(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown_keys(obj, where,
                        {"name", "base_url", "model_id", "api_key_env", "max_parallel",
                         "timeout_s", "retry"});
    gateway::BackendProfile profile;
    profile.name = need(obj, "name", where).get<std::string>();
    profile.base_url = need(obj, "base_url", where).get<std::string>();
    profile.model_id = need(obj, "model_id", where).get<std::string>();
    profile.api_key_env = get_or<std::string>(obj, "api_key_env", "");
    profile.max_parallel = get_or(obj, "max_parallel", profile.max_parallel);
    profile.timeout_s = get_or(obj, "timeout_s", profile.timeout_s);
    if (auto it = obj.find("retry"); it != obj.end()) {
        if (!it->is_object()) throw ConfigError(where + ".retry must be an object");
        reject_unknown_keys(*it, where + ".retry", {"max_attempts", "backoff_base_s"});
        profile.retry.max_attempts = get_or(*it, "max_attempts", profile.retry.max_attempts);
        profile.retry.backoff_base_s =
            get_or(*it, "backoff_base_s", profile.retry.backoff_base_s);
    }
    return profile;
}

json backend_to_json(const gateway::BackendProfile& p) {
    return json{
        {"name", p.name},
        {"base_url", p.base_url},
        {"model_id", p.model_id},
        {"api_key_env", p.api_key_env},
        {"max_parallel", p.max_parallel},
        {"timeout_s", p.timeout_s},
        {"retry",
         {{"max_attempts", p.retry.max_attempts}, {"backoff_base_s", p.retry.backoff_base_s}}},
    };
}

gateway::SamplingParams parse_sampling(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown_keys(obj, where,
                        {"temperature", "n_samples", "max_tokens", "seed", "logprobs"});
    gateway::SamplingParams params;
    params.n_samples = 64;
    params.temperature = get_or(obj, "temperature", params.temperature);
    params.n_samples = get_or(obj, "n_samples", params.n_samples);
    params.max_tokens = get_or(obj, "max_tokens", params.max_tokens);
    if (auto it = obj.find("seed"); it != obj.end()) {
        params.seed = it->get<std::uint64_t>();
    }
    params.logprobs_requested = get_or(obj, "logprobs", false);
    return params;
}

json sampling_to_json(const gateway::SamplingParams& p) {
    json out{
        {"temperature", p.temperature},
        {"n_samples", p.n_samples},
        {"max_tokens", p.max_tokens},
        {"logprobs", p.logprobs_requested},
    };
    if (p.seed) out["seed"] = *p.seed;
    return out;
}

VerifierStack parse_stack(const json& obj) {
    const std::string where = "verifier_stack";
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown_keys(obj, where,
                        {"toolv", "toolv_k", "fact_mode", "fact_top_k", "corpus_dir",
                         "gold_documents", "verifier_backend", "rm", "genrm", "prm"});
    VerifierStack stack;
    stack.toolv = toolv_choice_from_string(get_or<std::string>(obj, "toolv", "none"));
    stack.toolv_k = get_or(obj, "toolv_k", stack.toolv_k);
    if (stack.toolv_k < 1) throw ConfigError("toolv_k must be >= 1");
    stack.fact_mode =
        toolv_fact::fact_mode_from_string(get_or<std::string>(obj, "fact_mode", "retrieved"));
    stack.fact_top_k = get_or(obj, "fact_top_k", stack.fact_top_k);
    if (auto it = obj.find("corpus_dir"); it != obj.end()) {
        stack.corpus_dir = it->get<std::string>();
    }
    if (auto it = obj.find("gold_documents"); it != obj.end()) {
        stack.gold_documents = it->get<std::string>();
    }
    if (auto it = obj.find("verifier_backend"); it != obj.end()) {
        stack.verifier_backend = parse_backend(*it, where + ".verifier_backend");
    }
    stack.rm = rm_choice_from_string(get_or<std::string>(obj, "rm", "none"));
    if (auto it = obj.find("genrm"); it != obj.end()) {
        if (!it->is_object()) throw ConfigError(where + ".genrm must be an object");
        reject_unknown_keys(*it, where + ".genrm", {"n_rationales", "temperature", "score_mode"});
        stack.genrm.n_rationales = get_or(*it, "n_rationales", stack.genrm.n_rationales);
        stack.genrm.temperature = get_or(*it, "temperature", stack.genrm.temperature);
        stack.genrm.score_mode = rm_scorers::genrm_score_mode_from_string(
            get_or<std::string>(*it, "score_mode", "verdict_fraction"));
    }
    if (auto it = obj.find("prm"); it != obj.end()) {
        if (!it->is_object()) throw ConfigError(where + ".prm must be an object");
        reject_unknown_keys(*it, where + ".prm", {"backend", "aggregation"});
        PrmConfig prm;
        prm.backend = parse_backend(need(*it, "backend", where + ".prm"), where + ".prm.backend");
        prm.aggregation = rm_scorers::prm_aggregation_from_string(
            get_or<std::string>(*it, "aggregation", "last"));
        stack.prm = std::move(prm);
    }
    if (stack.rm == RmChoice::prm && !stack.prm) {
        throw ConfigError("rm = prm requires a verifier_stack.prm block");
    }
    return stack;
}

json stack_to_json(const VerifierStack& s) {
    json out{
        {"toolv", std::string(to_string(s.toolv))},
        {"toolv_k", s.toolv_k},
        {"fact_mode", std::string(toolv_fact::to_string(s.fact_mode))},
        {"fact_top_k", s.fact_top_k},
        {"rm", std::string(to_string(s.rm))},
        {"genrm",
         {{"n_rationales", s.genrm.n_rationales},
          {"temperature", s.genrm.temperature},
          {"score_mode", std::string(rm_scorers::to_string(s.genrm.score_mode))}}},
    };
    if (s.corpus_dir) out["corpus_dir"] = s.corpus_dir->string();
    if (s.gold_documents) out["gold_documents"] = s.gold_documents->string();
    if (s.verifier_backend) out["verifier_backend"] = backend_to_json(*s.verifier_backend);
    if (s.prm) {
        out["prm"] = json{{"backend", backend_to_json(s.prm->backend)},
                          {"aggregation", std::string(rm_scorers::to_string(s.prm->aggregation))}};
    }
    return out;
}

// --- small file helpers ------------------------------------------------------

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << bytes;
    }
    std::filesystem::rename(tmp, path);
}

std::string dump_double(double v) { return json(v).dump(); }

// One stable filename per problem id: a readable slug plus a short digest so
// distinct ids never collide after sanitizing.
std::string checkpoint_name(const std::string& problem_id) {
    std::string slug;
    for (char c : problem_id) {
        bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
        slug += keep ? c : '_';
    }
    if (slug.size() > 80) slug.resize(80);
    return slug + "-" + gateway::sha256_hex(problem_id).substr(0, 8) + ".json";
}

core::FailureKind failure_kind_from_string(const std::string& s) {
    if (s == "timeout") return core::FailureKind::timeout;
    if (s == "runtime_error") return core::FailureKind::runtime_error;
    if (s == "unparseable") return core::FailureKind::unparseable;
    if (s == "fail_verdict") return core::FailureKind::fail_verdict;
    throw IngestionError("unknown failure kind: " + s);
}

core::VerdictRule verdict_rule_from_string(const std::string& s) {
    if (s == "any_of_k") return core::VerdictRule::any_of_k;
    if (s == "all_of_k") return core::VerdictRule::all_of_k;
    throw IngestionError("unknown verdict rule: " + s);
}

json candidate_to_json(const core::Candidate& c) {
    json out{
        {"index", c.index},
        {"text", c.text},
        {"answer", c.canonical_answer ? json(c.canonical_answer->normalized) : json(nullptr)},
    };
    if (c.tool_verdict) {
        json attempts = json::array();
        for (const auto& a : c.tool_verdict->attempts) {
            json row{
                {"payload", a.payload},
                {"tool_output", a.tool_output},
                {"attempt_pass", a.attempt_pass},
            };
            if (a.failure_kind) row["failure_kind"] = std::string(to_string(*a.failure_kind));
            attempts.push_back(std::move(row));
        }
        out["tool_verdict"] = json{
            {"pass", c.tool_verdict->pass},
            {"rule", std::string(to_string(c.tool_verdict->rule))},
            {"attempts", std::move(attempts)},
        };
    } else {
        out["tool_verdict"] = nullptr;
    }
    out["rm_score"] = c.rm_score ? json(*c.rm_score) : json(nullptr);
    return out;
}

core::Candidate candidate_from_json(const json& row, const std::string& problem_id,
                                    answers::TaskKind task) {
    core::Candidate c;
    c.problem_id = problem_id;
    c.index = row.at("index").get<int>();
    c.text = row.at("text").get<std::string>();
    // the stored "answer" field is informational; extraction is deterministic
    c.canonical_answer = answers::extract_answer(c.text, task);
    if (const auto& tv = row.at("tool_verdict"); !tv.is_null()) {
        core::ToolVerdict verdict;
        verdict.pass = tv.at("pass").get<bool>();
        verdict.rule = verdict_rule_from_string(tv.at("rule").get<std::string>());
        for (const auto& a : tv.at("attempts")) {
            core::Attempt attempt;
            attempt.payload = a.at("payload").get<std::string>();
            attempt.tool_output = a.at("tool_output").get<std::string>();
            attempt.attempt_pass = a.at("attempt_pass").get<bool>();
            if (a.contains("failure_kind")) {
                attempt.failure_kind =
                    failure_kind_from_string(a.at("failure_kind").get<std::string>());
            }
            verdict.attempts.push_back(std::move(attempt));
        }
        c.tool_verdict = std::move(verdict);
    }
    if (const auto& score = row.at("rm_score"); !score.is_null()) {
        c.rm_score = score.get<double>();
    }
    return c;
}

std::optional<std::vector<core::Candidate>> load_checkpoint(const std::filesystem::path& path,
                                                            const std::string& hash,
                                                            const std::string& problem_id,
                                                            answers::TaskKind task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    json doc = json::parse(buf.str(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    if (get_or<std::string>(doc, "config_hash", "") != hash) return std::nullopt;
    if (get_or<std::string>(doc, "problem_id", "") != problem_id) return std::nullopt;
    // a structurally damaged checkpoint is treated as absent and recomputed
    try {
        std::vector<core::Candidate> candidates;
        for (const auto& row : doc.at("candidates")) {
            candidates.push_back(candidate_from_json(row, problem_id, task));
        }
        if (candidates.empty()) return std::nullopt;
        return candidates;
    } catch (const json::exception&) {
        return std::nullopt;
    } catch (const IngestionError&) {
        return std::nullopt;
    }
}

void save_checkpoint(const std::filesystem::path& path, const std::string& hash,
                     const std::string& problem_id,
                     const std::vector<core::Candidate>& candidates) {
    json rows = json::array();
    for (const auto& c : candidates) rows.push_back(candidate_to_json(c));
    json doc{
        {"config_hash", hash},
        {"problem_id", problem_id},
        {"candidates", std::move(rows)},
    };
    atomic_write(path, doc.dump(2) + "\n");
}

double safe_ratio(long long num, long long den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

// --- enums -------------------------------------------------------------------

std::string_view to_string(ToolvChoice c) {
    switch (c) {
        case ToolvChoice::none:
            return "none";
        case ToolvChoice::code:
            return "code";
        case ToolvChoice::fact:
            return "fact";
    }
    throw ContractViolation("unhandled toolv choice");
}

std::string_view to_string(RmChoice c) {
    switch (c) {
        case RmChoice::none:
            return "none";
        case RmChoice::genrm:
            return "genrm";
        case RmChoice::prm:
            return "prm";
    }
    throw ContractViolation("unhandled rm choice");
}

std::string_view to_string(SelectionChoice c) {
    return c == SelectionChoice::weighted_bon ? "weighted_bon" : "majority";
}

ToolvChoice toolv_choice_from_string(std::string_view s) {
    if (s == "none") return ToolvChoice::none;
    if (s == "code") return ToolvChoice::code;
    if (s == "fact") return ToolvChoice::fact;
    throw ConfigError("unknown toolv choice: " + std::string(s));
}

RmChoice rm_choice_from_string(std::string_view s) {
    if (s == "none") return RmChoice::none;
    if (s == "genrm") return RmChoice::genrm;
    if (s == "prm") return RmChoice::prm;
    throw ConfigError("unknown rm choice: " + std::string(s));
}

SelectionChoice selection_choice_from_string(std::string_view s) {
    if (s == "weighted_bon") return SelectionChoice::weighted_bon;
    if (s == "majority") return SelectionChoice::majority;
    throw ConfigError("unknown selection method: " + std::string(s));
}

// --- config ------------------------------------------------------------------

RunConfig parse_run_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
    reject_unknown_keys(doc, "run config",
                        {"dataset_path", "task_kind", "generator", "verifier_stack", "selection",
                         "bon_curve", "cache_root", "output_dir"});
    RunConfig config;
    config.dataset_path = need(doc, "dataset_path", "run config").get<std::string>();
    config.task_kind =
        answers::task_kind_from_string(get_or<std::string>(doc, "task_kind", "math"));

    const json& generator = need(doc, "generator", "run config");
    if (!generator.is_object()) throw ConfigError("generator must be an object");
    reject_unknown_keys(generator, "generator", {"backend", "sampling"});
    config.generator = parse_backend(need(generator, "backend", "generator"), "generator.backend");
    if (auto it = generator.find("sampling"); it != generator.end()) {
        config.sampling = parse_sampling(*it, "generator.sampling");
    } else {
        config.sampling.n_samples = 64;
        config.sampling.temperature = 0.8;
    }

    if (auto it = doc.find("verifier_stack"); it != doc.end()) {
        config.verifier_stack = parse_stack(*it);
    }
    config.selection =
        selection_choice_from_string(get_or<std::string>(doc, "selection", "weighted_bon"));

    if (auto it = doc.find("bon_curve"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("bon_curve must be an object");
        reject_unknown_keys(*it, "bon_curve", {"k_list", "resamples", "seed"});
        config.bon_curve.k_list = get_or(*it, "k_list", config.bon_curve.k_list);
        config.bon_curve.resamples = get_or(*it, "resamples", config.bon_curve.resamples);
        config.bon_curve.seed = get_or<std::uint64_t>(*it, "seed", config.bon_curve.seed);
    }
    if (auto it = doc.find("cache_root"); it != doc.end()) {
        config.cache_root = it->get<std::string>();
    }
    config.output_dir = need(doc, "output_dir", "run config").get<std::string>();

    gateway::validate(config.generator);
    gateway::validate(config.sampling);
    if (config.verifier_stack.verifier_backend) {
        gateway::validate(*config.verifier_stack.verifier_backend);
    }
    rm_scorers::validate(config.verifier_stack.genrm);
    if (config.bon_curve.resamples < 1) throw ConfigError("bon_curve.resamples must be >= 1");
    if (config.bon_curve.k_list.empty()) throw ConfigError("bon_curve.k_list must be nonempty");
    for (int k : config.bon_curve.k_list) {
        if (k < 1 || k > config.sampling.n_samples) {
            throw ConfigError("bon_curve k = " + std::to_string(k) + " outside [1, " +
                              std::to_string(config.sampling.n_samples) + "]");
        }
    }
    if (config.verifier_stack.toolv == ToolvChoice::code &&
        config.task_kind != answers::TaskKind::math) {
        throw ConfigError("toolv = code applies to math datasets only");
    }
    if (config.verifier_stack.toolv == ToolvChoice::fact &&
        config.task_kind != answers::TaskKind::multiple_choice) {
        throw ConfigError("toolv = fact applies to multiple-choice datasets only");
    }
    if (config.verifier_stack.toolv == ToolvChoice::fact) {
        if (config.verifier_stack.fact_mode == toolv_fact::FactMode::retrieved &&
            !config.verifier_stack.corpus_dir) {
            throw ConfigError("fact_mode = retrieved requires verifier_stack.corpus_dir");
        }
        if (config.verifier_stack.fact_mode == toolv_fact::FactMode::gold &&
            !config.verifier_stack.gold_documents) {
            throw ConfigError("fact_mode = gold requires verifier_stack.gold_documents");
        }
    }
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open run config " + path.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ConfigError("run config " + path.string() + " is not valid JSON");
    return parse_run_config(doc);
}

json to_json(const RunConfig& config) {
    json out{
        {"dataset_path", config.dataset_path.string()},
        {"task_kind", std::string(answers::to_string(config.task_kind))},
        {"generator",
         {{"backend", backend_to_json(config.generator)},
          {"sampling", sampling_to_json(config.sampling)}}},
        {"verifier_stack", stack_to_json(config.verifier_stack)},
        {"selection", std::string(to_string(config.selection))},
        {"bon_curve",
         {{"k_list", config.bon_curve.k_list},
          {"resamples", config.bon_curve.resamples},
          {"seed", config.bon_curve.seed}}},
        {"output_dir", config.output_dir.string()},
    };
    if (config.cache_root) out["cache_root"] = config.cache_root->string();
    return out;
}

std::string config_hash(const RunConfig& config) {
    return gateway::sha256_hex(to_json(config).dump());
}

void check_references(const RunConfig& config) {
    if (!std::filesystem::exists(config.dataset_path)) {
        throw ConfigError("dataset not found: " + config.dataset_path.string());
    }
    const auto& stack = config.verifier_stack;
    if (stack.corpus_dir && !std::filesystem::exists(*stack.corpus_dir)) {
        throw ConfigError("corpus_dir not found: " + stack.corpus_dir->string());
    }
    if (stack.gold_documents && !std::filesystem::exists(*stack.gold_documents)) {
        throw ConfigError("gold_documents not found: " + stack.gold_documents->string());
    }
}

// --- dataset -----------------------------------------------------------------

std::vector<core::Problem> load_dataset(const std::filesystem::path& path,
                                        answers::TaskKind task_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open dataset " + path.string());
    std::vector<core::Problem> problems;
    std::string line;
    size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw IngestionError(path.string() + " line " + std::to_string(lineno) + ": " + what);
    };
    auto text_of = [&](const json& v, const char* field) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number()) return v.dump();
        fail(std::string("field '") + field + "' must be a string or number");
        return {};
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (row.is_discarded() || !row.is_object()) fail("not a JSON object");
        core::Problem problem;
        problem.task_kind = task_kind;
        if (!row.contains("id")) fail("missing field 'id'");
        problem.id = text_of(row.at("id"), "id");
        if (!row.contains("question")) fail("missing field 'question'");
        problem.question = text_of(row.at("question"), "question");
        if (task_kind == answers::TaskKind::math) {
            if (!row.contains("answer")) fail("missing field 'answer'");
            problem.gold_answer = text_of(row.at("answer"), "answer");
        } else {
            if (!row.contains("options")) fail("missing field 'options'");
            const json& options = row.at("options");
            if (!options.is_array() || options.size() < 2) {
                fail("field 'options' must be an array of at least 2 strings");
            }
            for (const auto& opt : options) {
                if (!opt.is_string()) fail("field 'options' must contain strings only");
            }
            if (!row.contains("answer_letter")) fail("missing field 'answer_letter'");
            std::string letter = text_of(row.at("answer_letter"), "answer_letter");
            if (letter.size() != 1 || letter[0] < 'A' ||
                letter[0] >= static_cast<char>('A' + options.size())) {
                fail("answer_letter '" + letter + "' does not name one of " +
                     std::to_string(options.size()) + " options");
            }
            problem.gold_answer = letter;
            problem.metadata["options"] = options.dump();
        }
        for (const char* extra : {"subject", "level"}) {
            if (row.contains(extra)) problem.metadata[extra] = text_of(row.at(extra), extra);
        }
        problems.push_back(std::move(problem));
    }
    return problems;
}

// --- confusion ----------------------------------------------------------------

VerifierStats verifier_confusion(const std::vector<LabeledDecision>& decisions) {
    if (decisions.empty()) throw DomainError("verifier_confusion needs at least one decision");
    VerifierStats stats;
    for (const auto& d : decisions) {
        if (d.rejected && !d.correct) ++stats.tp;
        if (d.rejected && d.correct) ++stats.fp;
        if (!d.rejected && !d.correct) ++stats.fn;
        if (!d.rejected && d.correct) ++stats.tn;
    }
    long long total = stats.tp + stats.fp + stats.fn + stats.tn;
    stats.accuracy = safe_ratio(stats.tp + stats.tn, total);
    stats.precision = safe_ratio(stats.tp, stats.tp + stats.fp);
    stats.recall = safe_ratio(stats.tp, stats.tp + stats.fn);
    stats.f1 = (stats.precision + stats.recall) == 0.0
                   ? 0.0
                   : 2.0 * stats.precision * stats.recall / (stats.precision + stats.recall);
    return stats;
}

std::optional<bool> rejection_decision(const core::Candidate& candidate, double threshold) {
    if (candidate.tool_verdict) return !candidate.tool_verdict->pass;
    if (candidate.rm_score) return *candidate.rm_score < threshold;
    return std::nullopt;
}

// --- pipeline -----------------------------------------------------------------

EvalReport run_eval(const RunConfig& config, gateway::LlmClient& client,
                    const prompts::PromptPack& pack) {
    check_references(config);
    auto problems = load_dataset(config.dataset_path, config.task_kind);
    if (problems.empty()) {
        throw IngestionError("dataset " + config.dataset_path.string() + " has no problems");
    }

    const auto& stack = config.verifier_stack;
    std::optional<toolv_fact::CorpusIndex> index;
    std::map<std::string, std::string> gold_docs;
    if (stack.toolv == ToolvChoice::fact) {
        if (stack.fact_mode == toolv_fact::FactMode::retrieved) {
            index = toolv_fact::CorpusIndex::load(*stack.corpus_dir);
        } else {
            gold_docs = toolv_fact::load_gold_documents(*stack.gold_documents);
        }
    }

    const gateway::BackendProfile& verifier_backend =
        stack.verifier_backend ? *stack.verifier_backend : config.generator;
    const auto& solve_tmpl = pack.get(prompts::TemplateName::generate_solution);

    // Stage completion functions; each stage owns its sampling discipline.
    auto stage_fn = [&](prompts::TemplateName name, double temperature, bool logprobs) {
        return [&client, &verifier_backend, tmpl = &pack.get(name), temperature, logprobs,
                max_tokens = config.sampling.max_tokens](
                   const std::map<std::string, std::string>& bindings, int n) {
            gateway::SamplingParams params;
            params.temperature = temperature;
            params.n_samples = n;
            params.max_tokens = max_tokens;
            params.logprobs_requested = logprobs;
            return client.complete(verifier_backend, *tmpl, bindings, params);
        };
    };

    auto problems_dir = config.output_dir / "problems";
    std::filesystem::create_directories(problems_dir);
    const std::string hash = config_hash(config);
    const auto equivalence = [](const answers::CanonicalAnswer& a,
                                const answers::CanonicalAnswer& b) {
        return answers::equivalent(a, b);
    };

    EvalReport report;
    report.config_echo = config;
    std::vector<double> curve_sums(config.bon_curve.k_list.size(), 0.0);
    std::vector<LabeledDecision> decisions;

    for (const auto& problem : problems) {
        auto checkpoint = problems_dir / checkpoint_name(problem.id);
        auto candidates = load_checkpoint(checkpoint, hash, problem.id, config.task_kind);
        if (!candidates) {
            std::vector<core::Candidate> fresh;
            auto completions = client.complete(config.generator, solve_tmpl,
                                               {{"question", problem.question}}, config.sampling);
            fresh.reserve(completions.size());
            for (size_t i = 0; i < completions.size(); ++i) {
                core::Candidate c;
                c.problem_id = problem.id;
                c.index = static_cast<int>(i);
                c.text = completions[i].text;
                c.canonical_answer = answers::extract_answer(c.text, config.task_kind);
                fresh.push_back(std::move(c));
            }
            if (stack.toolv == ToolvChoice::code) {
                auto complete = stage_fn(prompts::TemplateName::code_gen, kToolTemperature, false);
                for (auto& c : fresh) {
                    c.tool_verdict = toolv_code::verify_math(problem, c, stack.toolv_k, complete,
                                                             config.sandbox_policy);
                }
            } else if (stack.toolv == ToolvChoice::fact) {
                auto complete =
                    stage_fn(prompts::TemplateName::fact_check, kToolTemperature, false);
                toolv_fact::FactVerifyConfig fact_config;
                fact_config.k = stack.toolv_k;
                fact_config.mode = stack.fact_mode;
                fact_config.top_k = stack.fact_top_k;
                for (auto& c : fresh) {
                    c.tool_verdict =
                        toolv_fact::verify_fact(problem, c, fact_config,
                                                index ? &*index : nullptr, &gold_docs, complete);
                }
            }
            if (stack.rm == RmChoice::none) {
                for (auto& c : fresh) c.rm_score = 1.0;
            } else if (stack.rm == RmChoice::genrm) {
                bool logprobs =
                    stack.genrm.score_mode == rm_scorers::GenRmScoreMode::yes_logprob;
                auto complete =
                    stage_fn(prompts::TemplateName::genrm_cot, stack.genrm.temperature, logprobs);
                for (auto& c : fresh) {
                    c.rm_score = rm_scorers::score_genrm(problem, c, stack.genrm, complete);
                }
            } else {
                for (auto& c : fresh) {
                    c.rm_score = rm_scorers::score_prm(problem, c, client, stack.prm->backend,
                                                       stack.prm->aggregation);
                }
            }
            save_checkpoint(checkpoint, hash, problem.id, fresh);
            candidates = std::move(fresh);
        }

        auto gold = answers::parse_answer(problem.gold_answer, config.task_kind);

        PerProblem row;
        row.problem_id = problem.id;
        try {
            auto selected = config.selection == SelectionChoice::weighted_bon
                                ? core::select_weighted_bon(*candidates, equivalence)
                                : core::select_majority(*candidates, equivalence);
            row.selected_answer = selected.chosen_answer.normalized;
            row.selected_index = selected.chosen_candidate_index;
            row.method = std::string(core::to_string(selected.method));
            row.correct = answers::equivalent(selected.chosen_answer, gold);
            for (const auto& [answer, score] : selected.group_scores) {
                row.group_scores.emplace_back(answer.normalized, score);
            }
        } catch (const core::NoExtractableAnswers&) {
            row.selected_answer = "";
            row.selected_index = -1;
            row.method = "no_extractable_answer";
            row.correct = false;
        }
        report.per_problem.push_back(std::move(row));

        for (size_t i = 0; i < config.bon_curve.k_list.size(); ++i) {
            int k = config.bon_curve.k_list[i];
            auto seed = rng::derive(config.bon_curve.seed,
                                    problem.id + "/bon@" + std::to_string(k));
            curve_sums[i] += core::bon_at_k(*candidates, gold, k, config.bon_curve.resamples,
                                            seed, equivalence);
        }
        // confusion is only meaningful when some verifier actually decided
        if (stack.toolv != ToolvChoice::none || stack.rm != RmChoice::none) {
            for (const auto& c : *candidates) {
                if (auto rejected = rejection_decision(c)) {
                    bool correct =
                        c.canonical_answer && answers::equivalent(*c.canonical_answer, gold);
                    decisions.push_back({correct, *rejected});
                }
            }
        }
    }

    for (size_t i = 0; i < config.bon_curve.k_list.size(); ++i) {
        report.curve.push_back(
            {config.bon_curve.k_list[i],
             curve_sums[i] / static_cast<double>(report.per_problem.size())});
    }
    if (!decisions.empty()) report.verifier_stats = verifier_confusion(decisions);
    return report;
}

EvalReport run_eval(const RunConfig& config) {
    gateway::LlmClient client(gateway::make_http_transport(), config.cache_root);
    return run_eval(config, client, prompts::default_pack());
}

// --- reports ------------------------------------------------------------------

void emit_reports(const EvalReport& report, const std::filesystem::path& output_dir) {
    std::filesystem::create_directories(output_dir);

    std::string curve = "k,accuracy\n";
    for (const auto& point : report.curve) {
        curve += std::to_string(point.k) + "," + dump_double(point.accuracy) + "\n";
    }
    atomic_write(output_dir / "curve.csv", curve);

    const auto& s = report.verifier_stats;
    std::string confusion = "# rejection is the positive class: tp = rejected and wrong\n";
    confusion += "metric,value\n";
    confusion += "tp," + std::to_string(s.tp) + "\n";
    confusion += "fp," + std::to_string(s.fp) + "\n";
    confusion += "fn," + std::to_string(s.fn) + "\n";
    confusion += "tn," + std::to_string(s.tn) + "\n";
    confusion += "accuracy," + dump_double(s.accuracy) + "\n";
    confusion += "precision," + dump_double(s.precision) + "\n";
    confusion += "recall," + dump_double(s.recall) + "\n";
    confusion += "f1," + dump_double(s.f1) + "\n";
    atomic_write(output_dir / "confusion.csv", confusion);

    std::string per_problem;
    for (const auto& row : report.per_problem) {
        json groups = json::array();
        for (const auto& [answer, score] : row.group_scores) {
            groups.push_back(json::array({answer, score}));
        }
        per_problem += json{{"problem_id", row.problem_id},
                            {"selected_answer", row.selected_answer},
                            {"selected_index", row.selected_index},
                            {"method", row.method},
                            {"correct", row.correct},
                            {"group_scores", std::move(groups)}}
                           .dump() +
                       "\n";
    }
    atomic_write(output_dir / "per_problem.jsonl", per_problem);

    atomic_write(output_dir / "config_echo.json", to_json(report.config_echo).dump(2) + "\n");
}

} // namespace t1::harness
