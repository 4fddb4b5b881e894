#include "t1/core.hpp"

#include "t1/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace t1::core {

std::string_view to_string(VerdictRule r) {
    return r == VerdictRule::any_of_k ? "any_of_k" : "all_of_k";
}

std::string_view to_string(FailureKind k) {
    switch (k) {
        case FailureKind::timeout: return "timeout";
        case FailureKind::runtime_error: return "runtime_error";
        case FailureKind::unparseable: return "unparseable";
        case FailureKind::fail_verdict: return "fail_verdict";
    }
    return "unparseable";
}

std::string_view to_string(SelectionMethod m) {
    switch (m) {
        case SelectionMethod::weighted_bon: return "weighted_bon";
        case SelectionMethod::majority: return "majority";
        case SelectionMethod::rm_fallback: return "rm_fallback";
    }
    return "weighted_bon";
}

ToolVerdict make_verdict(VerdictRule rule, std::vector<Attempt> attempts) {
    if (attempts.empty()) {
        throw ContractViolation("ToolVerdict requires at least one attempt");
    }
    bool pass = rule == VerdictRule::all_of_k;
    for (const auto& a : attempts) {
        if (rule == VerdictRule::any_of_k) pass = pass || a.attempt_pass;
        else pass = pass && a.attempt_pass;
    }
    return ToolVerdict{pass, rule, std::move(attempts)};
}

double combined_score(const Candidate& candidate) {
    if (!candidate.rm_score) {
        throw ContractViolation("candidate " + candidate.problem_id + "#" +
                                std::to_string(candidate.index) +
                                " has no rm_score; combined score undefined");
    }
    if (candidate.tool_verdict && !candidate.tool_verdict->pass) return 0.0;
    return *candidate.rm_score;
}

namespace {

struct Group {
    const answers::CanonicalAnswer* representative = nullptr;
    int min_index = std::numeric_limits<int>::max();
    int count = 0;
    double combined_sum = 0.0;
    double rm_sum = 0.0;
    // best member by combined score / by rm score (score desc, index asc)
    int best_combined_index = -1;
    double best_combined = -1.0;
    int best_rm_index = -1;
    double best_rm = -1.0;
};

// Groups candidates by equivalence against each group's first-seen
// representative, in list order. Candidates without an answer join nothing.
std::vector<Group> build_groups(const std::vector<Candidate>& candidates,
                                const Equivalence& equivalence, bool need_scores) {
    if (candidates.empty()) throw EmptyCandidateList();
    std::vector<Group> groups;
    for (const auto& c : candidates) {
        if (!c.canonical_answer) continue;
        Group* g = nullptr;
        for (auto& existing : groups) {
            if (equivalence(*existing.representative, *c.canonical_answer)) {
                g = &existing;
                break;
            }
        }
        if (!g) {
            groups.emplace_back();
            g = &groups.back();
            g->representative = &*c.canonical_answer;
        }
        g->min_index = std::min(g->min_index, c.index);
        g->count += 1;
        if (need_scores) {
            double combined = combined_score(c);
            double rm = *c.rm_score;
            g->combined_sum += combined;
            g->rm_sum += rm;
            if (combined > g->best_combined ||
                (combined == g->best_combined && c.index < g->best_combined_index)) {
                g->best_combined = combined;
                g->best_combined_index = c.index;
            }
            if (rm > g->best_rm || (rm == g->best_rm && c.index < g->best_rm_index)) {
                g->best_rm = rm;
                g->best_rm_index = c.index;
            }
        }
    }
    if (groups.empty()) throw NoExtractableAnswers();
    return groups;
}

// Argmax over group scores; ties go to the group holding the lowest
// candidate index.
size_t argmax_group(const std::vector<Group>& groups,
                    const std::function<double(const Group&)>& score) {
    size_t best = 0;
    for (size_t i = 1; i < groups.size(); ++i) {
        double si = score(groups[i]);
        double sb = score(groups[best]);
        if (si > sb || (si == sb && groups[i].min_index < groups[best].min_index)) {
            best = i;
        }
    }
    return best;
}

SelectionResult assemble(const std::vector<Group>& groups, size_t winner,
                         const std::function<double(const Group&)>& score,
                         int chosen_index, SelectionMethod method) {
    SelectionResult result;
    result.chosen_answer = *groups[winner].representative;
    result.chosen_candidate_index = chosen_index;
    result.method = method;
    result.group_scores.reserve(groups.size());
    for (const auto& g : groups) {
        result.group_scores.emplace_back(*g.representative, score(g));
    }
    return result;
}

} // namespace

SelectionResult select_weighted_bon(const std::vector<Candidate>& candidates,
                                    const Equivalence& equivalence,
                                    Aggregation aggregation) {
    auto groups = build_groups(candidates, equivalence, /*need_scores=*/true);
    auto agg = [aggregation](double sum, int count) {
        return aggregation == Aggregation::mean ? sum / count : sum;
    };
    auto combined = [&](const Group& g) { return agg(g.combined_sum, g.count); };
    size_t winner = argmax_group(groups, combined);
    if (combined(groups[winner]) > 0.0) {
        return assemble(groups, winner, combined, groups[winner].best_combined_index,
                        SelectionMethod::weighted_bon);
    }
    // Every candidate was filtered out: fall back to reward scores alone so a
    // choice is still made.
    auto rm_only = [&](const Group& g) { return agg(g.rm_sum, g.count); };
    winner = argmax_group(groups, rm_only);
    return assemble(groups, winner, rm_only, groups[winner].best_rm_index,
                    SelectionMethod::rm_fallback);
}

SelectionResult select_majority(const std::vector<Candidate>& candidates,
                                const Equivalence& equivalence) {
    auto groups = build_groups(candidates, equivalence, /*need_scores=*/false);
    auto count = [](const Group& g) { return static_cast<double>(g.count); };
    size_t winner = argmax_group(groups, count);
    return assemble(groups, winner, count, groups[winner].min_index,
                    SelectionMethod::majority);
}

double bon_at_k(const std::vector<Candidate>& candidates,
                const answers::CanonicalAnswer& gold, int k, int resamples,
                std::uint64_t seed, const Equivalence& equivalence,
                Aggregation aggregation) {
    const int n = static_cast<int>(candidates.size());
    if (candidates.empty()) throw EmptyCandidateList();
    if (k < 1 || k > n) {
        throw DomainError("bon_at_k: k = " + std::to_string(k) +
                          " outside [1, " + std::to_string(n) + "]");
    }
    if (resamples < 1) throw DomainError("bon_at_k: resamples must be >= 1");

    auto correct_on = [&](const std::vector<Candidate>& subset) {
        bool any = std::any_of(subset.begin(), subset.end(),
                               [](const Candidate& c) { return c.canonical_answer.has_value(); });
        if (!any) return false;
        auto result = select_weighted_bon(subset, equivalence, aggregation);
        return equivalence(result.chosen_answer, gold);
    };

    if (k == n) return correct_on(candidates) ? 1.0 : 0.0;

    rng::Stream stream(seed);
    std::vector<int> positions(n);
    std::iota(positions.begin(), positions.end(), 0);
    int hits = 0;
    std::vector<Candidate> subset;
    subset.reserve(k);
    for (int r = 0; r < resamples; ++r) {
        // Partial Fisher-Yates: first k entries become a uniform k-subset.
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(stream.next_below(n - i));
            std::swap(positions[i], positions[j]);
        }
        std::sort(positions.begin(), positions.begin() + k);
        subset.clear();
        for (int i = 0; i < k; ++i) subset.push_back(candidates[positions[i]]);
        if (correct_on(subset)) ++hits;
    }
    return static_cast<double>(hits) / resamples;
}

} // namespace t1::core
