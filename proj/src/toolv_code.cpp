#include "t1/toolv_code.hpp"

#include "t1/errors.hpp"

namespace t1::toolv_code {
namespace {

// Positions of a complete fenced block starting at `open` (a "```" offset):
// content begins after the fence's line break and ends before the closing
// fence. Returns false when the block never closes.
bool fence_bounds(const std::string& text, size_t open, size_t& content_begin,
                  size_t& content_end, size_t& after_close) {
    size_t line_end = text.find('\n', open + 3);
    if (line_end == std::string::npos) return false;
    content_begin = line_end + 1;
    size_t close = text.find("```", content_begin);
    if (close == std::string::npos) return false;
    content_end = close;
    if (content_end > content_begin && text[content_end - 1] == '\n') --content_end;
    after_close = close + 3;
    return true;
}

} // namespace

std::optional<std::string> extract_code_block(const std::string& completion_text) {
    std::optional<std::string> last;
    size_t pos = 0;
    while ((pos = completion_text.find("```", pos)) != std::string::npos) {
        size_t begin, end, after;
        if (!fence_bounds(completion_text, pos, begin, end, after)) break;
        last = completion_text.substr(begin, end - begin);
        pos = after;
    }
    return last;
}

core::Attempt attempt_from_completion(const std::string& completion_text,
                                      const sandbox::SandboxPolicy& policy) {
    core::Attempt attempt;
    auto code = extract_code_block(completion_text);
    if (!code) {
        attempt.payload = completion_text;
        attempt.attempt_pass = false;
        attempt.failure_kind = core::FailureKind::unparseable;
        return attempt;
    }
    auto run = sandbox::run_sandboxed(*code, policy);
    attempt.payload = run.code;
    attempt.tool_output = !run.stdout_text.empty() ? run.stdout_text : run.stderr_text;
    switch (run.exit) {
        case sandbox::ExitClass::timeout:
            attempt.failure_kind = core::FailureKind::timeout;
            return attempt;
        case sandbox::ExitClass::error:
            attempt.failure_kind = core::FailureKind::runtime_error;
            return attempt;
        case sandbox::ExitClass::ok:
            break;
    }
    switch (run.verdict) {
        case sandbox::CodeVerdict::pass:
            attempt.attempt_pass = true;
            return attempt;
        case sandbox::CodeVerdict::fail:
            attempt.failure_kind = core::FailureKind::fail_verdict;
            return attempt;
        case sandbox::CodeVerdict::unparseable:
            attempt.failure_kind = core::FailureKind::unparseable;
            return attempt;
    }
    return attempt;
}

core::ToolVerdict verify_math(const core::Problem& problem, const core::Candidate& candidate,
                              int k, const CompletionFn& complete,
                              const sandbox::SandboxPolicy& policy) {
    if (problem.task_kind != answers::TaskKind::math) {
        throw ContractViolation("verify_math requires a math problem; got '" + problem.id +
                                "' with task_kind " +
                                std::string(answers::to_string(problem.task_kind)));
    }
    if (k < 1) throw ContractViolation("verify_math requires k >= 1");

    std::map<std::string, std::string> bindings{
        {"question", problem.question},
        {"solution", candidate.text},
    };
    auto completions = complete(bindings, k);
    std::vector<core::Attempt> attempts;
    attempts.reserve(completions.size());
    for (const auto& completion : completions) {
        attempts.push_back(attempt_from_completion(completion.text, policy));
    }
    return core::make_verdict(core::VerdictRule::any_of_k, std::move(attempts));
}

} // namespace t1::toolv_code
