#pragma once

#include "t1/prompts.hpp"
#include "t1/sandbox.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace t1::theory {

/// Verifier noise: a correct candidate is accepted with probability q, an
/// incorrect one rejected with probability p. Both must exceed 1/2 (the
/// verifier beats coin-flipping) and N >= 1.
struct VerifierNoiseModel {
    double p = 1.0;
    double q = 1.0;
    int N = 1;
};

/// Throws DomainError when the model leaves the admissible region
/// p, q in (1/2, 1], N >= 1.
void validate(const VerifierNoiseModel& model);

/// Probability that best-of-N selection under the noise model returns the
/// correct label, for a generator that is right half the time:
///
///   pi^N(1|x) = q/(q+1-p) * [1 - ((1+p-q)/2)^N]
///             + (1-q)/(1-q+p) * ((1+p-q)/2)^N
double bon_accuracy_closed_form(const VerifierNoiseModel& model);

struct MonteCarloEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;  // binomial
    long long trials = 0;
};

/// Literal simulation of the selection process: N labels drawn uniformly from
/// {0,1}; noisy verdicts per the (p,q) tables; a uniform choice among
/// verdict-1 candidates when any exist, otherwise among all N. Trials run in
/// a fixed number of independently seeded shards, so the estimate does not
/// depend on thread count.
MonteCarloEstimate bon_accuracy_monte_carlo(const VerifierNoiseModel& model,
                                            long long trials, std::uint64_t seed);

/// Closed-form accuracy across an ascending p grid at fixed q and N.
/// The accuracy is strictly increasing in p for N >= 2; N = 1 is rejected
/// because a single sample makes the verifier irrelevant.
std::vector<std::pair<double, double>> monotonicity_sweep(double q, int N,
                                                          const std::vector<double>& p_grid);

// ---------------------------------------------------------------------------
// Memorization toy task
// ---------------------------------------------------------------------------

/// Universe: triples (a, b, c) with a, b in [0, M), c in [0, 2M-1), labeled
/// by whether a + b = c. A training sample is a uniform subset of the
/// universe; train_fraction of it, rounded down.
struct ToyAdditionTask {
    int M = 10;
    double train_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct ToyMemorizationResult {
    double tabular_error = 0.0;
    double tool_error = 0.0;
    long long tabular_entries = 0;
    long long tool_entries = 0;
    long long universe_size = 0;
};

/// Compares two learners over the full universe. The tabular learner stores
/// every training triple verbatim; on unseen triples it predicts the label of
/// the nearest memorized c for the same (a, b) (ties toward the smaller c)
/// and false when that (a, b) was never seen. The tool learner evaluates
/// a + b = c directly: zero error, zero stored entries.
ToyMemorizationResult run_toy_memorization(const ToyAdditionTask& task);

// ---------------------------------------------------------------------------
// Concept-proof arithmetic verification
// ---------------------------------------------------------------------------

struct ConceptProofSpec {
    int n_terms = 5;  // operands per expression, admissible range [3, 10]
    int n_correct = 500;
    int n_incorrect = 500;
    int digit_lo = 100;
    int digit_hi = 999;
    double perturb_rel = 0.05;
    std::uint64_t seed = 0;
};

void validate(const ConceptProofSpec& spec);

struct ConceptItem {
    std::string expression;  // e.g. "123 + 456 - 789"
    long long claimed = 0;
    bool label = false;  // true iff claimed equals the expression's value
};

/// Balanced dataset: n_correct items claiming the true value and n_incorrect
/// claiming a perturbed one. Perturbations are nonzero integers of magnitude
/// at most max(1, floor(perturb_rel * |true value|)). Deterministic in seed.
std::vector<ConceptItem> generate_concept_proof_set(const ConceptProofSpec& spec);

/// Independent chain evaluator for the expression grammar above (integers
/// joined by + and -). Malformed input throws DomainError.
long long eval_expression(const std::string& expression);

enum class ConceptMode { natural_language, tool };

std::string_view to_string(ConceptMode m);
ConceptMode concept_mode_from_string(std::string_view s);

/// One completion for one rendered prompt. The harness binds this to a live
/// backend; tests script it.
using Responder = std::function<std::string(const prompts::RenderedPrompt&)>;

struct ConceptItemOutcome {
    ConceptItem item;
    std::optional<bool> predicted;  // absent when the output was unparseable
    bool correct = false;           // predicted present and equal to label
    std::string detail;             // verdict line or failure note
};

struct ConceptRunResult {
    double accuracy = 0.0;
    std::vector<ConceptItemOutcome> per_item;
};

/// Judges every item of the generated set. natural_language mode asks for a
/// step-by-step check and reads the last standalone True/False token of the
/// reply. tool mode asks for a checker script, executes it in the sandbox,
/// and reads the last "The calculation is correct"/"incorrect" line printed.
/// Unparseable replies count as wrong, never as exceptions.
ConceptRunResult run_concept_proof(const ConceptProofSpec& spec, ConceptMode mode,
                                   const Responder& responder,
                                   const prompts::PromptPack& pack = prompts::default_pack(),
                                   const sandbox::SandboxPolicy& policy = {});

} // namespace t1::theory
