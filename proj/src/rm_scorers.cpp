#include "t1/rm_scorers.hpp"

#include "t1/errors.hpp"
#include "t1/verdict_scan.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace t1::rm_scorers {
namespace {

using nlohmann::json;

constexpr std::string_view kVerdictPrefix = "Verification: Is the answer correct (Yes/No)?";

std::string letters_lower(const std::string& token) {
    std::string out;
    for (char c : token) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

// Sampled-token estimate of the Yes probability: the last Yes/No token's
// probability mass, complemented for No. One-sided (only the sampled
// token's logprob is on the wire) but unbiased enough for reranking.
double yes_probability(const gateway::Completion& completion) {
    if (!completion.token_logprobs) {
        throw ConfigError(
            "yes_logprob scoring needs token logprobs from the backend; "
            "use verdict_fraction instead");
    }
    for (auto it = completion.token_logprobs->rbegin();
         it != completion.token_logprobs->rend(); ++it) {
        auto word = letters_lower(it->token);
        if (word == "yes") return std::exp(it->logprob);
        if (word == "no") return 1.0 - std::exp(it->logprob);
    }
    return 0.0;
}

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string strip_outer_blank(const std::string& text) {
    size_t begin = 0, end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return text.substr(begin, end - begin);
}

} // namespace

std::string_view to_string(GenRmScoreMode m) {
    return m == GenRmScoreMode::verdict_fraction ? "verdict_fraction" : "yes_logprob";
}

GenRmScoreMode genrm_score_mode_from_string(std::string_view s) {
    if (s == "verdict_fraction") return GenRmScoreMode::verdict_fraction;
    if (s == "yes_logprob") return GenRmScoreMode::yes_logprob;
    throw ConfigError("unknown GenRM score mode: " + std::string(s));
}

void validate(const GenRMConfig& cfg) {
    if (cfg.n_rationales < 1) throw ConfigError("GenRM needs n_rationales >= 1");
    if (cfg.temperature < 0) throw ConfigError("GenRM temperature must be >= 0");
}

std::optional<bool> parse_genrm_verdict(const std::string& rationale) {
    return verdicts::trailing_yes_no(rationale, kVerdictPrefix);
}

double score_genrm(const core::Problem& problem, const core::Candidate& candidate,
                   const GenRMConfig& cfg, const gateway::CompletionFn& complete) {
    validate(cfg);
    std::map<std::string, std::string> bindings{
        {"question", problem.question},
        {"solution", candidate.text},
    };
    auto completions = complete(bindings, cfg.n_rationales);
    if (completions.empty()) throw DomainError("GenRM scoring got zero rationales");
    double total = 0.0;
    for (const auto& completion : completions) {
        if (cfg.score_mode == GenRmScoreMode::verdict_fraction) {
            total += parse_genrm_verdict(completion.text) == true ? 1.0 : 0.0;
        } else {
            total += yes_probability(completion);
        }
    }
    return total / static_cast<double>(completions.size());
}

std::string_view to_string(PrmAggregation a) {
    switch (a) {
        case PrmAggregation::last: return "last";
        case PrmAggregation::min: return "min";
        case PrmAggregation::product: return "product";
    }
    return "last";
}

PrmAggregation prm_aggregation_from_string(std::string_view s) {
    if (s == "last") return PrmAggregation::last;
    if (s == "min") return PrmAggregation::min;
    if (s == "product") return PrmAggregation::product;
    throw ConfigError("unknown PRM aggregation: " + std::string(s));
}

double aggregate_steps(const std::vector<double>& step_scores, PrmAggregation agg) {
    if (step_scores.empty()) throw DomainError("step aggregation needs at least one score");
    switch (agg) {
        case PrmAggregation::last:
            return step_scores.back();
        case PrmAggregation::min:
            return *std::min_element(step_scores.begin(), step_scores.end());
        case PrmAggregation::product: {
            double product = 1.0;
            for (double s : step_scores) product *= s;
            return product;
        }
    }
    return step_scores.back();
}

std::vector<std::string> split_steps(const std::string& solution_text) {
    auto lines = split_lines(solution_text);

    std::vector<size_t> heading_lines;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].rfind("## Step", 0) == 0) heading_lines.push_back(i);
    }

    std::vector<std::string> steps;
    if (!heading_lines.empty()) {
        auto join = [&lines](size_t from, size_t to) {
            std::string out;
            for (size_t i = from; i < to; ++i) {
                if (i > from) out += '\n';
                out += lines[i];
            }
            return out;
        };
        auto prelude = strip_outer_blank(join(0, heading_lines[0]));
        if (!prelude.empty()) steps.push_back(prelude);
        for (size_t h = 0; h < heading_lines.size(); ++h) {
            size_t end = h + 1 < heading_lines.size() ? heading_lines[h + 1] : lines.size();
            steps.push_back(strip_outer_blank(join(heading_lines[h], end)));
        }
        return steps;
    }

    std::string paragraph;
    for (const auto& line : lines) {
        if (is_blank(line)) {
            auto cleaned = strip_outer_blank(paragraph);
            if (!cleaned.empty()) steps.push_back(cleaned);
            paragraph.clear();
        } else {
            if (!paragraph.empty()) paragraph += '\n';
            paragraph += line;
        }
    }
    auto cleaned = strip_outer_blank(paragraph);
    if (!cleaned.empty()) steps.push_back(cleaned);

    if (steps.empty()) steps.push_back(solution_text);  // whole text as one unit
    return steps;
}

double score_prm(const core::Problem& problem, const core::Candidate& candidate,
                 gateway::LlmClient& client, const gateway::BackendProfile& endpoint,
                 PrmAggregation agg) {
    auto steps = split_steps(candidate.text);
    json request = {{"question", problem.question}, {"steps", steps}};
    auto body = client.cached_post(endpoint, "/score", request.dump());

    json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.contains("scores") || !doc["scores"].is_array()) {
        throw ProtocolError("PRM endpoint '" + endpoint.name +
                            "' returned no scores array: " + body.substr(0, 200));
    }
    std::vector<double> scores;
    for (const auto& value : doc["scores"]) {
        if (!value.is_number()) {
            throw ProtocolError("PRM endpoint '" + endpoint.name + "' returned a non-number");
        }
        scores.push_back(value.get<double>());
    }
    if (scores.size() != steps.size()) {
        throw ProtocolError("PRM endpoint '" + endpoint.name + "' returned " +
                            std::to_string(scores.size()) + " scores for " +
                            std::to_string(steps.size()) + " steps");
    }
    for (double s : scores) {
        if (s < 0.0 || s > 1.0 || !std::isfinite(s)) {
            throw ProtocolError("PRM endpoint '" + endpoint.name +
                                "' returned out-of-range score " + std::to_string(s));
        }
    }
    return aggregate_steps(scores, agg);
}

} // namespace t1::rm_scorers
