#pragma once

#include "t1/answers.hpp"
#include "t1/errors.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace t1::core {

struct Problem {
    std::string id;
    std::string question;
    std::string gold_answer;  // raw, as given by the dataset
    answers::TaskKind task_kind = answers::TaskKind::math;
    // Free-form tags (subject, level). Multiple-choice problems carry their
    // ordered options under "options" as a JSON array of strings.
    std::map<std::string, std::string> metadata;
};

enum class VerdictRule { any_of_k, all_of_k };

enum class FailureKind { timeout, runtime_error, unparseable, fail_verdict };

std::string_view to_string(VerdictRule r);
std::string_view to_string(FailureKind k);

struct Attempt {
    std::string payload;      // code or rationale sent to the tool
    std::string tool_output;  // what came back
    bool attempt_pass = false;
    std::optional<FailureKind> failure_kind;  // set iff !attempt_pass
};

struct ToolVerdict {
    bool pass = false;
    VerdictRule rule = VerdictRule::any_of_k;
    std::vector<Attempt> attempts;
};

/// Folds attempt verdicts under the rule (any_of_k: OR, all_of_k: AND).
/// Empty attempt list violates the ToolVerdict contract.
ToolVerdict make_verdict(VerdictRule rule, std::vector<Attempt> attempts);

struct Candidate {
    std::string problem_id;
    int index = 0;  // 0-based sample index, unique per problem
    std::string text;
    std::optional<answers::CanonicalAnswer> canonical_answer;
    std::optional<ToolVerdict> tool_verdict;  // absent = tool stage disabled
    std::optional<double> rm_score;           // in [0,1]
};

enum class SelectionMethod { weighted_bon, majority, rm_fallback };

std::string_view to_string(SelectionMethod m);

/// How member scores aggregate into a group score. Sum is the default
/// weighted protocol; mean exists as an ablation switch.
enum class Aggregation { sum, mean };

struct SelectionResult {
    answers::CanonicalAnswer chosen_answer;
    int chosen_candidate_index = 0;
    // Group representatives (first occurrence order) with their final scores.
    // Representatives are pairwise non-equivalent, so this is a map keyed by
    // answer class.
    std::vector<std::pair<answers::CanonicalAnswer, double>> group_scores;
    SelectionMethod method = SelectionMethod::weighted_bon;
};

class EmptyCandidateList : public DomainError {
public:
    EmptyCandidateList() : DomainError("selection requires at least one candidate") {}
};

class NoExtractableAnswers : public DomainError {
public:
    NoExtractableAnswers()
        : DomainError("no candidate has an extractable answer to select from") {}
};

using Equivalence =
    std::function<bool(const answers::CanonicalAnswer&, const answers::CanonicalAnswer&)>;

/// Filter x reward product. A failed verdict annihilates the score; an absent
/// verdict means the tool stage is disabled and the reward passes through.
/// Missing rm_score is a contract violation naming the candidate.
double combined_score(const Candidate& candidate);

/// Weighted best-of-N: groups candidates by answer equivalence, scores each
/// group by aggregated combined scores, picks the argmax group. Ties go to
/// the group containing the lowest candidate index. Candidates without an
/// extractable answer join no group. When every group scores 0 the selection
/// repeats on rm_score alone and reports method = rm_fallback.
SelectionResult select_weighted_bon(const std::vector<Candidate>& candidates,
                                    const Equivalence& equivalence,
                                    Aggregation aggregation = Aggregation::sum);

/// Majority vote: group score = member count, same tie rule, no verifier.
SelectionResult select_majority(const std::vector<Candidate>& candidates,
                                const Equivalence& equivalence);

/// Accuracy of weighted best-of-N over random k-subsets of the pool: draws
/// `resamples` uniform k-subsets without replacement (deterministic in seed),
/// selects on each, and returns the fraction whose chosen answer is
/// equivalent to gold. k = |candidates| evaluates the full pool exactly once.
/// A subset with no extractable answer counts as a miss.
double bon_at_k(const std::vector<Candidate>& candidates,
                const answers::CanonicalAnswer& gold, int k, int resamples,
                std::uint64_t seed, const Equivalence& equivalence,
                Aggregation aggregation = Aggregation::sum);

} // namespace t1::core
