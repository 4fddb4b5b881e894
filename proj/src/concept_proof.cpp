#include "t1/theory.hpp"

#include "t1/errors.hpp"
#include "t1/toolv_code.hpp"

#include <cctype>

namespace t1::theory {
namespace {

bool word_at(const std::string& text, size_t pos, std::string_view word) {
    if (text.compare(pos, word.size(), word) != 0) return false;
    auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    if (pos > 0 && alnum(text[pos - 1])) return false;
    size_t end = pos + word.size();
    if (end < text.size() && alnum(text[end])) return false;
    return true;
}

// Last standalone True/False token in the reply; the prompt demands the
// verdict at the end, so later tokens override earlier reasoning.
std::optional<bool> parse_nl_verdict(const std::string& reply) {
    std::optional<bool> verdict;
    for (size_t i = 0; i < reply.size(); ++i) {
        if (reply[i] == 'T' && word_at(reply, i, "True")) verdict = true;
        else if (reply[i] == 'F' && word_at(reply, i, "False")) verdict = false;
    }
    return verdict;
}

std::string_view trimmed(std::string_view line) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) {
        line.remove_prefix(1);
    }
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
        line.remove_suffix(1);
    }
    return line;
}

// The checker script's contract: it prints "The calculation is correct" or
// "The calculation is incorrect". Last such line wins.
std::optional<bool> parse_tool_stdout(const std::string& stdout_text) {
    std::optional<bool> verdict;
    size_t start = 0;
    while (start <= stdout_text.size()) {
        size_t nl = stdout_text.find('\n', start);
        size_t end = nl == std::string::npos ? stdout_text.size() : nl;
        auto line = trimmed(std::string_view(stdout_text).substr(start, end - start));
        if (line == "The calculation is correct") verdict = true;
        else if (line == "The calculation is incorrect") verdict = false;
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return verdict;
}

} // namespace

ConceptRunResult run_concept_proof(const ConceptProofSpec& spec, ConceptMode mode,
                                   const Responder& responder,
                                   const prompts::PromptPack& pack,
                                   const sandbox::SandboxPolicy& policy) {
    if (!responder) throw ConfigError("run_concept_proof needs a responder");
    const auto& tmpl = pack.get(mode == ConceptMode::natural_language
                                    ? prompts::TemplateName::check_calc_nl
                                    : prompts::TemplateName::check_calc_code);

    ConceptRunResult result;
    auto items = generate_concept_proof_set(spec);
    result.per_item.reserve(items.size());
    long long correct = 0;

    for (auto& item : items) {
        auto rendered = prompts::render(tmpl, {{"exp", item.expression},
                                               {"ans", std::to_string(item.claimed)}});
        std::string reply = responder(rendered);

        ConceptItemOutcome outcome;
        outcome.item = std::move(item);
        if (mode == ConceptMode::natural_language) {
            outcome.predicted = parse_nl_verdict(reply);
            outcome.detail = outcome.predicted
                                 ? (*outcome.predicted ? "True" : "False")
                                 : "no trailing True/False token";
        } else {
            auto code = toolv_code::extract_code_block(reply);
            if (!code) {
                outcome.detail = "no code block in reply";
            } else {
                auto run = sandbox::run_sandboxed(*code, policy);
                if (run.exit != sandbox::ExitClass::ok) {
                    outcome.detail = "sandbox exit: " + std::string(to_string(run.exit));
                } else {
                    outcome.predicted = parse_tool_stdout(run.stdout_text);
                    outcome.detail = outcome.predicted
                                         ? (*outcome.predicted ? "The calculation is correct"
                                                               : "The calculation is incorrect")
                                         : "no verdict line in script output";
                }
            }
        }
        outcome.correct = outcome.predicted && *outcome.predicted == outcome.item.label;
        correct += outcome.correct;
        result.per_item.push_back(std::move(outcome));
    }

    result.accuracy = result.per_item.empty()
                          ? 0.0
                          : static_cast<double>(correct) /
                                static_cast<double>(result.per_item.size());
    return result;
}

} // namespace t1::theory
