#pragma once

#include "t1/core.hpp"
#include "t1/gateway.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace t1::toolv_fact {

struct Document {
    std::string id;
    std::string title;
    std::string text;
};

struct ScoredDoc {
    std::string doc_id;
    std::string title;
    std::string text;
    double score = 0.0;
};

/// Lowercase, ASCII-fold accented Latin letters, split on anything
/// non-alphanumeric, drop tokens shorter than 2 characters. Non-Latin
/// codepoints act as separators.
std::vector<std::string> tokenize(const std::string& text);

/// BM25 inverted index over a document corpus.
///
/// Scoring, with k1 = 0.9 and b = 0.4:
///   idf(t)      = ln(1 + (doc_count - df + 0.5) / (df + 0.5))
///   tf_part(t,d) = tf * (k1 + 1) / (tf + k1 * (1 - b + b * len_d / avg_len))
///   score(q,d)  = sum over query token occurrences of idf * tf_part
/// len_d counts kept tokens, so it equals the sum of the doc's term
/// frequencies. Documents matching no query term are never returned.
class CorpusIndex {
public:
    /// Indexes the documents. Duplicate ids are ingestion errors.
    static CorpusIndex build(const std::vector<Document>& documents);

    /// Reads an index directory written by save(); stats and postings are
    /// cross-checked against the doc store on load.
    static CorpusIndex load(const std::filesystem::path& dir);

    /// Writes manifest.json, docs.jsonl and postings.jsonl. Deterministic:
    /// re-saving a loaded index reproduces the bytes.
    void save(const std::filesystem::path& dir) const;

    /// Top-k documents by BM25 score; order (score desc, doc_id asc).
    std::vector<ScoredDoc> retrieve(const std::string& query, int top_k = 3) const;

    long long doc_count() const { return static_cast<long long>(docs_.size()); }
    double avg_doc_len() const;
    double k1() const { return k1_; }
    double b() const { return b_; }

private:
    struct DocEntry {
        std::string id;
        std::string title;
        std::string text;
        long long len = 0;
    };

    std::vector<DocEntry> docs_;  // sorted by id
    // term -> (doc position, tf); positions ascend, so postings follow doc-id
    // order by construction
    std::map<std::string, std::vector<std::pair<int, int>>> postings_;
    long long total_len_ = 0;
    double k1_ = 0.9;
    double b_ = 0.4;
};

enum class FactVerdict { yes, no, unparseable };

std::string_view to_string(FactVerdict v);

struct FactCheckAttempt {
    std::string rationale;
    FactVerdict verdict = FactVerdict::unparseable;
};

/// Reads the final verification line ("Verification: Are all statements
/// correct? (Yes/No)? X"), scanning upward past trailing noise.
FactVerdict parse_fact_verdict(const std::string& rationale);

/// Sidecar of reference documents: JSONL {problem_id, gold_text}.
std::map<std::string, std::string> load_gold_documents(const std::filesystem::path& path);

/// Corpus ingestion: JSONL {id, title, text}, one document per line. Numeric
/// ids are accepted and stringified. Malformed lines raise IngestionError
/// with the line number; duplicate ids are caught by CorpusIndex::build.
std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path);

enum class FactMode { retrieved, gold };

std::string_view to_string(FactMode m);
FactMode fact_mode_from_string(std::string_view s);

struct FactVerifyConfig {
    int k = 4;                     // rationales per candidate, all must pass
    FactMode mode = FactMode::retrieved;
    int top_k = 3;                 // documents fetched in retrieved mode
    bool allow_any_task = false;   // lift the multiple-choice-only gate
};

/// The document block handed to the fact-check prompt: top-k retrieved docs
/// as "title\ntext" joined by blank lines, or the problem's gold document.
/// The retrieval query is the question plus the solution text, truncated to
/// the first 512 tokens.
std::string document_context(const core::Problem& problem, const std::string& solution_text,
                             const FactVerifyConfig& config, const CorpusIndex* index,
                             const std::map<std::string, std::string>* gold_documents);

/// Knowledge-task verification: retrieve (or look up) supporting documents,
/// request k fact-check rationales over them, fold verdicts as all_of_k.
core::ToolVerdict verify_fact(const core::Problem& problem, const core::Candidate& candidate,
                              const FactVerifyConfig& config, const CorpusIndex* index,
                              const std::map<std::string, std::string>* gold_documents,
                              const gateway::CompletionFn& complete);

} // namespace t1::toolv_fact
