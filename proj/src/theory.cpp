#include "t1/theory.hpp"

#include "t1/errors.hpp"
#include "t1/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <thread>
#include <vector>

namespace t1::theory {
namespace {

constexpr int kMonteCarloShards = 8;

// verdict = (u < threshold). Exact at the endpoints, 2^-64 granular between.
std::uint64_t probability_threshold(double prob) {
    if (prob >= 1.0) return ~std::uint64_t{0};
    if (prob <= 0.0) return 0;
    return static_cast<std::uint64_t>(
        static_cast<long double>(prob) * 18446744073709551616.0L);
}

long long shard_hits(const VerifierNoiseModel& model, long long trials, std::uint64_t seed) {
    rng::Stream stream(seed);
    const int n = model.N;
    const std::uint64_t accept_correct = probability_threshold(model.q);      // y=1 -> r=1
    const std::uint64_t accept_incorrect = probability_threshold(1.0 - model.p);  // y=0 -> r=1
    const bool q_is_one = model.q >= 1.0;
    const bool p_is_one = model.p >= 1.0;

    long long hits = 0;
    for (long long t = 0; t < trials; ++t) {
        // One word of label bits per trial (N <= 64 enforced by caller).
        std::uint64_t labels = stream.next_u64();
        int n_correct = 0;
        int accepted_total = 0;
        int accepted_correct = 0;
        for (int i = 0; i < n; ++i) {
            bool label = (labels >> i) & 1;
            n_correct += label;
            bool accepted;
            if (label) {
                accepted = q_is_one || stream.next_u64() < accept_correct;
            } else {
                accepted = !p_is_one && stream.next_u64() < accept_incorrect;
            }
            if (accepted) {
                ++accepted_total;
                accepted_correct += label;
            }
        }
        if (accepted_total > 0) {
            // Uniform choice among accepted candidates; the first
            // accepted_correct of them are the correct ones.
            hits += stream.next_below(accepted_total) < static_cast<std::uint64_t>(accepted_correct);
        } else {
            hits += stream.next_below(n) < static_cast<std::uint64_t>(n_correct);
        }
    }
    return hits;
}

} // namespace

void validate(const VerifierNoiseModel& model) {
    if (!(model.p > 0.5) || !(model.p <= 1.0) || !(model.q > 0.5) || !(model.q <= 1.0)) {
        throw DomainError("verifier noise (p, q) must lie in (1/2, 1]; got p = " +
                          std::to_string(model.p) + ", q = " + std::to_string(model.q));
    }
    if (model.N < 1) {
        throw DomainError("N must be >= 1; got " + std::to_string(model.N));
    }
}

double bon_accuracy_closed_form(const VerifierNoiseModel& model) {
    validate(model);
    const double p = model.p;
    const double q = model.q;
    const double all_rejected = std::pow((1.0 + p - q) / 2.0, model.N);
    return q / (q + 1.0 - p) * (1.0 - all_rejected) +
           (1.0 - q) / (1.0 - q + p) * all_rejected;
}

MonteCarloEstimate bon_accuracy_monte_carlo(const VerifierNoiseModel& model,
                                            long long trials, std::uint64_t seed) {
    validate(model);
    if (trials < 1) throw DomainError("trials must be >= 1");
    if (model.N > 64) {
        throw DomainError("Monte Carlo simulation supports N <= 64; got " +
                          std::to_string(model.N));
    }

    long long per_shard[kMonteCarloShards];
    std::uint64_t shard_seed[kMonteCarloShards];
    for (int s = 0; s < kMonteCarloShards; ++s) {
        per_shard[s] = trials / kMonteCarloShards + (s < trials % kMonteCarloShards ? 1 : 0);
        shard_seed[s] = rng::derive(seed, "mc-shard-" + std::to_string(s));
    }

    long long hits[kMonteCarloShards] = {};
    unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(),
                                          kMonteCarloShards);
    if (workers > 1) {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int s; (s = next.fetch_add(1)) < kMonteCarloShards;) {
                    hits[s] = shard_hits(model, per_shard[s], shard_seed[s]);
                }
            });
        }
        for (auto& th : pool) th.join();
    } else {
        for (int s = 0; s < kMonteCarloShards; ++s) {
            hits[s] = shard_hits(model, per_shard[s], shard_seed[s]);
        }
    }

    long long total_hits = 0;
    for (long long h : hits) total_hits += h;
    MonteCarloEstimate out;
    out.trials = trials;
    out.estimate = static_cast<double>(total_hits) / static_cast<double>(trials);
    out.standard_error = std::sqrt(out.estimate * (1.0 - out.estimate) /
                                   static_cast<double>(trials));
    return out;
}

std::vector<std::pair<double, double>> monotonicity_sweep(double q, int N,
                                                          const std::vector<double>& p_grid) {
    if (N < 2) {
        throw DomainError("monotonicity requires N >= 2; a single sample makes the "
                          "verifier irrelevant");
    }
    if (p_grid.empty()) throw DomainError("empty p grid");
    if (!std::is_sorted(p_grid.begin(), p_grid.end())) {
        throw DomainError("p grid must be ascending");
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(p_grid.size());
    for (double p : p_grid) {
        out.emplace_back(p, bon_accuracy_closed_form({p, q, N}));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Memorization toy task
// ---------------------------------------------------------------------------

ToyMemorizationResult run_toy_memorization(const ToyAdditionTask& task) {
    if (task.M < 2) throw DomainError("toy task requires M >= 2");
    if (task.train_fraction < 0.0 || task.train_fraction > 1.0) {
        throw DomainError("train_fraction must lie in [0, 1]");
    }
    const long long m = task.M;
    const long long c_range = 2 * m - 1;
    const long long universe = m * m * c_range;
    const long long train_count =
        static_cast<long long>(std::floor(task.train_fraction * static_cast<double>(universe)));

    // Selection sampling (uniform without replacement, single pass): seen[ab]
    // collects the memorized c values per (a, b) pair, kept sorted by
    // construction since t is visited in increasing order.
    std::vector<std::vector<int>> seen(static_cast<size_t>(m * m));
    rng::Stream stream(rng::derive(task.seed, "toy-train"));
    long long needed = train_count;
    for (long long t = 0; t < universe && needed > 0; ++t) {
        if (stream.next_below(static_cast<std::uint64_t>(universe - t)) <
            static_cast<std::uint64_t>(needed)) {
            seen[static_cast<size_t>(t / c_range)].push_back(static_cast<int>(t % c_range));
            --needed;
        }
    }

    long long tabular_wrong = 0;
    long long tool_wrong = 0;
    for (long long ab = 0; ab < m * m; ++ab) {
        const int a = static_cast<int>(ab / m);
        const int b = static_cast<int>(ab % m);
        const int sum = a + b;
        const auto& memorized = seen[static_cast<size_t>(ab)];
        for (int c = 0; c < c_range; ++c) {
            const bool truth = c == sum;
            bool tabular_prediction = false;
            if (!memorized.empty()) {
                auto it = std::lower_bound(memorized.begin(), memorized.end(), c);
                if (it != memorized.end() && *it == c) {
                    tabular_prediction = truth;  // memorized verbatim
                } else {
                    // nearest memorized c; ties toward the smaller value
                    int best;
                    if (it == memorized.end()) best = memorized.back();
                    else if (it == memorized.begin()) best = *it;
                    else {
                        int lo = *(it - 1), hi = *it;
                        best = (c - lo <= hi - c) ? lo : hi;
                    }
                    tabular_prediction = best == sum;
                }
            }
            tabular_wrong += tabular_prediction != truth;
            const bool tool_prediction = a + b == c;
            tool_wrong += tool_prediction != truth;
        }
    }

    ToyMemorizationResult out;
    out.universe_size = universe;
    out.tabular_entries = train_count;
    out.tool_entries = 0;
    out.tabular_error = static_cast<double>(tabular_wrong) / static_cast<double>(universe);
    out.tool_error = static_cast<double>(tool_wrong) / static_cast<double>(universe);
    return out;
}

// ---------------------------------------------------------------------------
// Concept-proof dataset
// ---------------------------------------------------------------------------

void validate(const ConceptProofSpec& spec) {
    if (spec.n_terms < 3 || spec.n_terms > 10) {
        throw DomainError("n_terms must lie in [3, 10]; got " + std::to_string(spec.n_terms));
    }
    if (spec.n_correct < 0 || spec.n_incorrect < 0) {
        throw DomainError("item counts must be nonnegative");
    }
    if (spec.digit_lo > spec.digit_hi || spec.digit_lo < 0) {
        throw DomainError("bad operand range");
    }
    if (spec.perturb_rel <= 0.0) throw DomainError("perturb_rel must be positive");
}

std::vector<ConceptItem> generate_concept_proof_set(const ConceptProofSpec& spec) {
    validate(spec);
    std::vector<ConceptItem> items;
    items.reserve(static_cast<size_t>(spec.n_correct + spec.n_incorrect));

    auto build_expression = [&](rng::Stream& stream, long long& value) {
        std::string expr;
        value = 0;
        const std::uint64_t span =
            static_cast<std::uint64_t>(spec.digit_hi - spec.digit_lo + 1);
        for (int term = 0; term < spec.n_terms; ++term) {
            long long operand = spec.digit_lo + static_cast<long long>(stream.next_below(span));
            if (term == 0) {
                expr += std::to_string(operand);
                value = operand;
            } else {
                bool add = stream.next_below(2) == 0;
                expr += add ? " + " : " - ";
                expr += std::to_string(operand);
                value += add ? operand : -operand;
            }
        }
        return expr;
    };

    for (int i = 0; i < spec.n_correct; ++i) {
        rng::Stream stream(rng::derive(spec.seed, "concept-correct-" + std::to_string(i)));
        ConceptItem item;
        item.expression = build_expression(stream, item.claimed);
        item.label = true;
        items.push_back(std::move(item));
    }
    for (int i = 0; i < spec.n_incorrect; ++i) {
        rng::Stream stream(rng::derive(spec.seed, "concept-incorrect-" + std::to_string(i)));
        ConceptItem item;
        long long truth = 0;
        item.expression = build_expression(stream, truth);
        const long long bound = std::max<long long>(
            1, static_cast<long long>(std::floor(spec.perturb_rel *
                                                 static_cast<double>(std::llabs(truth)))));
        // delta uniform over [-bound, bound] \ {0}
        long long delta = static_cast<long long>(stream.next_below(
                              static_cast<std::uint64_t>(2 * bound))) -
                          bound;
        if (delta >= 0) ++delta;
        item.claimed = truth + delta;
        item.label = false;
        items.push_back(std::move(item));
    }
    return items;
}

long long eval_expression(const std::string& expression) {
    long long total = 0;
    int sign = 1;
    bool expect_operand = true;
    bool any = false;
    size_t i = 0;
    const size_t n = expression.size();
    while (i < n) {
        char c = expression[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '+' || c == '-') {
            if (expect_operand) throw DomainError("misplaced operator in: " + expression);
            sign = c == '+' ? 1 : -1;
            expect_operand = true;
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            if (!expect_operand) throw DomainError("missing operator in: " + expression);
            long long value = 0;
            while (i < n && std::isdigit(static_cast<unsigned char>(expression[i]))) {
                value = value * 10 + (expression[i] - '0');
                ++i;
            }
            total += sign * value;
            expect_operand = false;
            any = true;
        } else {
            throw DomainError("unexpected character '" + std::string(1, c) +
                              "' in: " + expression);
        }
    }
    if (expect_operand || !any) throw DomainError("incomplete expression: " + expression);
    return total;
}

std::string_view to_string(ConceptMode m) {
    return m == ConceptMode::natural_language ? "natural_language" : "tool";
}

ConceptMode concept_mode_from_string(std::string_view s) {
    if (s == "natural_language" || s == "nl") return ConceptMode::natural_language;
    if (s == "tool") return ConceptMode::tool;
    throw ConfigError("unknown concept-proof mode: " + std::string(s));
}

} // namespace t1::theory
