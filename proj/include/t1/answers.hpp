#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace t1::answers {

enum class TaskKind { math, multiple_choice };

enum class AnswerKind { rational, decimal, symbolic, choice_letter, text };

std::string_view to_string(AnswerKind k);
std::string_view to_string(TaskKind k);
TaskKind task_kind_from_string(std::string_view s);
AnswerKind answer_kind_from_string(std::string_view s);

/// A final answer in canonical form.
///
/// `normalized` is the grouping key: exact numerics render as "p/q" in lowest
/// terms (q > 0, sign on p), symbolic values as a fixed-order product
/// "p/q*sqrt(m)*pi", choice letters as a single uppercase letter, and
/// everything outside the supported grammar as the cleaned, lowercased,
/// whitespace-collapsed source text.
struct CanonicalAnswer {
    std::string raw;
    AnswerKind kind = AnswerKind::text;
    std::string normalized;
    std::optional<double> numeric_value;

    friend bool operator==(const CanonicalAnswer&, const CanonicalAnswer&) = default;
};

/// Parses a raw answer span into canonical form. Supported grammar: integers,
/// rationals, decimals, products/quotients of those with sqrt(k) and pi, and
/// (for multiple_choice) option letters A..J. Anything else becomes
/// AnswerKind::text with a cleaned string as its normalized form.
CanonicalAnswer parse_answer(std::string_view raw, TaskKind task);

/// Pulls the final answer out of free-form solution text.
///
/// math: content of the last \boxed{...}; failing that, the last
/// "final answer is ..." clause. multiple_choice: the last boxed letter,
/// "answer is (X)"-style pattern, parenthesized standalone letter, or a line
/// consisting solely of one letter. Absence is a value, not an error.
std::optional<CanonicalAnswer> extract_answer(std::string_view solution_text, TaskKind task);

/// Semantic equivalence. Checks run in a fixed order:
///   1. if either side is a choice letter: both must be letters and equal;
///   2. if both have numeric values: |va-vb| <= 1e-6 * max(1, |va|, |vb|);
///   3. if both parsed exactly: structural equality of the exact form;
///   4. otherwise: equality of normalized strings.
bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b);

/// Convenience: parse and return the normalized rendering.
std::string normalize(std::string_view raw, TaskKind task);

} // namespace t1::answers
