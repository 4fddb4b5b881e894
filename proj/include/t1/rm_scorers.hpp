#pragma once

#include "t1/core.hpp"
#include "t1/gateway.hpp"

#include <string>
#include <vector>

namespace t1::rm_scorers {

enum class GenRmScoreMode { verdict_fraction, yes_logprob };

std::string_view to_string(GenRmScoreMode m);
GenRmScoreMode genrm_score_mode_from_string(std::string_view s);

struct GenRMConfig {
    int n_rationales = 8;
    double temperature = 0.6;
    GenRmScoreMode score_mode = GenRmScoreMode::verdict_fraction;
};

void validate(const GenRMConfig& cfg);

/// Final verdict of one grading rationale ("Verification: Is the answer
/// correct (Yes/No)? X"), scanning upward past trailing noise. nullopt when
/// no verification line parses.
std::optional<bool> parse_genrm_verdict(const std::string& rationale);

/// Self-verification score: mean over n_rationales graded completions.
/// verdict_fraction scores each rationale 1 (Yes) or 0 (anything else);
/// yes_logprob scores the sampled final verdict token's probability mass on
/// Yes (p for a Yes token, 1-p for a No token; rationales without a
/// recognizable verdict token score 0).
double score_genrm(const core::Problem& problem, const core::Candidate& candidate,
                   const GenRMConfig& cfg, const gateway::CompletionFn& complete);

enum class PrmAggregation { last, min, product };

std::string_view to_string(PrmAggregation a);
PrmAggregation prm_aggregation_from_string(std::string_view s);

/// Folds per-step scores into a solution score. Empty input is a domain
/// error; anything outside [0,1] is a protocol violation upstream.
double aggregate_steps(const std::vector<double>& step_scores, PrmAggregation agg);

/// Splits a solution into scoring units: "## Step" headings when present
/// (with any nonempty prelude as its own unit), else blank-line paragraphs,
/// else the whole text as one unit. Never returns empty.
std::vector<std::string> split_steps(const std::string& solution_text);

/// External step-scoring endpoint adapter. Wire contract, exact:
///   POST {endpoint}/score  {"question": str, "steps": [str]}
///   200 -> {"scores": [float]} with len(scores) == len(steps), each in [0,1]
/// Anything else is a protocol error.
double score_prm(const core::Problem& problem, const core::Candidate& candidate,
                 gateway::LlmClient& client, const gateway::BackendProfile& endpoint,
                 PrmAggregation agg = PrmAggregation::last);

} // namespace t1::rm_scorers
