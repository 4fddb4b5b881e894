#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace t1::sandbox {

/// How untrusted snippets run. The interpreter command is configuration:
/// every element is passed as argv, with the token "{script}" replaced by the
/// path of a temp file holding the snippet. A command without "{script}"
/// receives the snippet on stdin instead.
struct SandboxPolicy {
    std::vector<std::string> interpreter_cmd = {"python3", "-I", "{script}"};
    double wall_timeout_s = 5.0;
    int memory_limit_mb = 512;
    bool allow_network = false;  // must stay false; checked at run time
    // Parent directory for per-execution workdirs; system temp dir if unset.
    std::optional<std::filesystem::path> workdir_root;
};

enum class ExitClass { ok, timeout, error };

enum class CodeVerdict { pass, fail, unparseable };

std::string_view to_string(ExitClass e);
std::string_view to_string(CodeVerdict v);

struct CodeAttempt {
    std::string code;
    std::string stdout_text;
    std::string stderr_text;
    ExitClass exit = ExitClass::error;
    CodeVerdict verdict = CodeVerdict::unparseable;
    // Workdir the snippet ran in; already removed when the call returns.
    std::string workdir;
};

/// Verdict grammar: the last non-empty stdout line must be exactly "True"
/// (pass) or "False" (fail); anything else is unparseable. A snippet that
/// timed out or exited nonzero is unparseable regardless of its output.
CodeVerdict parse_verdict(const std::string& stdout_text, ExitClass exit);

/// Runs one snippet in a fresh empty workdir under OS-enforced limits:
/// address-space and CPU rlimits, no core dumps, its own process group
/// (killed wholesale on timeout), its own network namespace where the host
/// allows it, and a minimal environment. Captures stdout/stderr and removes
/// the workdir afterwards.
///
/// A missing or non-executable interpreter raises EnvironmentError; every
/// failure of the snippet itself is data in the returned CodeAttempt.
CodeAttempt run_sandboxed(const std::string& code, const SandboxPolicy& policy = {});

} // namespace t1::sandbox
