#pragma once

#include "t1/core.hpp"
#include "t1/gateway.hpp"
#include "t1/sandbox.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace t1::toolv_code {

/// Contents of the last complete fenced code block (``` ... ```), language
/// tag stripped. Absent when the text has no complete fence pair.
std::optional<std::string> extract_code_block(const std::string& completion_text);

using CompletionFn = gateway::CompletionFn;

/// Converts one model completion into a verification attempt: extract the
/// snippet, run it sandboxed, classify. Completions without a code block are
/// unparseable attempts, never exceptions.
core::Attempt attempt_from_completion(const std::string& completion_text,
                                      const sandbox::SandboxPolicy& policy);

/// Math-task tool verification: k checker-code completions, each executed in
/// the sandbox; verdicts fold as any_of_k (one passing checker accepts the
/// candidate).
core::ToolVerdict verify_math(const core::Problem& problem, const core::Candidate& candidate,
                              int k, const CompletionFn& complete,
                              const sandbox::SandboxPolicy& policy = {});

} // namespace t1::toolv_code
