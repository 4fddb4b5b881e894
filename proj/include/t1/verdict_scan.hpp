#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace t1::verdicts {

/// Scans rationale lines from the end upward for one starting with `prefix`
/// and reads the verdict word after it: case-insensitive "yes" -> true,
/// "no" -> false, anything else (or no such line) -> nullopt. Prompts demand
/// the verdict line last, but models pad with whitespace or afterthoughts.
std::optional<bool> trailing_yes_no(const std::string& text, std::string_view prefix);

} // namespace t1::verdicts
