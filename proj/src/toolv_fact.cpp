#include "t1/toolv_fact.hpp"

#include "t1/errors.hpp"
#include "t1/verdict_scan.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace t1::toolv_fact {
namespace {

using nlohmann::json;

constexpr int kQueryTokenLimit = 512;
constexpr std::string_view kVerdictPrefix = "Verification: Are all statements correct? (Yes/No)?";

// Decodes one UTF-8 codepoint at i (advancing it); invalid bytes decode as
// U+FFFD and advance by one so tokenization never stalls.
char32_t next_codepoint(const std::string& s, size_t& i) {
    unsigned char c = s[i];
    int extra = 0;
    char32_t cp = c;
    if (c < 0x80) {
        extra = 0;
    } else if ((c >> 5) == 0x6) {
        cp = c & 0x1f;
        extra = 1;
    } else if ((c >> 4) == 0xe) {
        cp = c & 0x0f;
        extra = 2;
    } else if ((c >> 3) == 0x1e) {
        cp = c & 0x07;
        extra = 3;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + extra >= s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k <= extra; ++k) {
        unsigned char cont = s[i + k];
        if ((cont >> 6) != 0x2) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (cont & 0x3f);
    }
    i += extra + 1;
    return cp;
}

// ASCII fold for the Latin-1 supplement and the ligatures common in English
// corpora. Returns empty for codepoints that act as separators.
std::string fold_codepoint(char32_t cp) {
    if (cp >= 'a' && cp <= 'z') return std::string(1, static_cast<char>(cp));
    if (cp >= 'A' && cp <= 'Z') return std::string(1, static_cast<char>(cp - 'A' + 'a'));
    if (cp >= '0' && cp <= '9') return std::string(1, static_cast<char>(cp));
    switch (cp) {
        case U'à': case U'á': case U'â': case U'ã':
        case U'ä': case U'å': case U'À': case U'Á':
        case U'Â': case U'Ã': case U'Ä': case U'Å':
        case U'ā': case U'ă':
            return "a";
        case U'ç': case U'Ç': case U'ć': case U'č':
            return "c";
        case U'è': case U'é': case U'ê': case U'ë':
        case U'È': case U'É': case U'Ê': case U'Ë':
        case U'ē': case U'ě':
            return "e";
        case U'ì': case U'í': case U'î': case U'ï':
        case U'Ì': case U'Í': case U'Î': case U'Ï':
            return "i";
        case U'ñ': case U'Ñ': case U'ń':
            return "n";
        case U'ò': case U'ó': case U'ô': case U'õ':
        case U'ö': case U'ø': case U'Ò': case U'Ó':
        case U'Ô': case U'Õ': case U'Ö': case U'Ø':
        case U'ō':
            return "o";
        case U'ù': case U'ú': case U'û': case U'ü':
        case U'Ù': case U'Ú': case U'Û': case U'Ü':
        case U'ū':
            return "u";
        case U'ý': case U'ÿ': case U'Ý':
            return "y";
        case U'ß':
            return "ss";
        case U'æ': case U'Æ':
            return "ae";
        case U'œ': case U'Œ':
            return "oe";
        default:
            return {};
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw EnvironmentError("cannot write " + path.string());
}

} // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    size_t i = 0;
    while (i < text.size()) {
        auto folded = fold_codepoint(next_codepoint(text, i));
        if (folded.empty()) {
            if (current.size() >= 2) tokens.push_back(current);
            current.clear();
        } else {
            current += folded;
        }
    }
    if (current.size() >= 2) tokens.push_back(current);
    return tokens;
}

CorpusIndex CorpusIndex::build(const std::vector<Document>& documents) {
    CorpusIndex index;
    index.docs_.reserve(documents.size());
    for (const auto& doc : documents) {
        index.docs_.push_back(DocEntry{doc.id, doc.title, doc.text, 0});
    }
    std::sort(index.docs_.begin(), index.docs_.end(),
              [](const DocEntry& a, const DocEntry& b) { return a.id < b.id; });
    for (size_t i = 1; i < index.docs_.size(); ++i) {
        if (index.docs_[i].id == index.docs_[i - 1].id) {
            throw IngestionError("duplicate document id: " + index.docs_[i].id);
        }
    }
    for (size_t i = 0; i < index.docs_.size(); ++i) {
        auto& entry = index.docs_[i];
        std::map<std::string, int> tf;
        for (const auto& token : tokenize(entry.title + " " + entry.text)) {
            ++tf[token];
            ++entry.len;
        }
        index.total_len_ += entry.len;
        for (const auto& [term, count] : tf) {
            index.postings_[term].emplace_back(static_cast<int>(i), count);
        }
    }
    return index;
}

double CorpusIndex::avg_doc_len() const {
    if (docs_.empty()) return 0.0;
    return static_cast<double>(total_len_) / static_cast<double>(docs_.size());
}

std::vector<ScoredDoc> CorpusIndex::retrieve(const std::string& query, int top_k) const {
    if (top_k < 1) throw DomainError("retrieve requires top_k >= 1");
    std::map<int, double> scores;
    const double n = static_cast<double>(docs_.size());
    const double avg = avg_doc_len();
    for (const auto& token : tokenize(query)) {
        auto it = postings_.find(token);
        if (it == postings_.end()) continue;
        const auto& posting = it->second;
        const double df = static_cast<double>(posting.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const auto& [doc_pos, tf] : posting) {
            const double norm =
                k1_ * (1.0 - b_ + b_ * static_cast<double>(docs_[doc_pos].len) / avg);
            scores[doc_pos] += idf * (tf * (k1_ + 1.0)) / (tf + norm);
        }
    }
    std::vector<std::pair<int, double>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [this](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return docs_[a.first].id < docs_[b.first].id;
    });
    if (static_cast<int>(ranked.size()) > top_k) ranked.resize(top_k);
    std::vector<ScoredDoc> out;
    out.reserve(ranked.size());
    for (const auto& [doc_pos, score] : ranked) {
        out.push_back({docs_[doc_pos].id, docs_[doc_pos].title, docs_[doc_pos].text, score});
    }
    return out;
}

void CorpusIndex::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json manifest = {
        {"format_version", 1},
        {"doc_count", docs_.size()},
        {"total_len", total_len_},
        {"k1", k1_},
        {"b", b_},
    };
    write_text_file(dir / "manifest.json", manifest.dump() + "\n");

    std::ostringstream docs_out;
    for (const auto& doc : docs_) {
        json row = {{"id", doc.id}, {"title", doc.title}, {"text", doc.text}, {"len", doc.len}};
        docs_out << row.dump() << '\n';
    }
    write_text_file(dir / "docs.jsonl", docs_out.str());

    std::ostringstream postings_out;
    for (const auto& [term, posting] : postings_) {
        json rows = json::array();
        for (const auto& [doc_pos, tf] : posting) {
            rows.push_back(json::array({docs_[doc_pos].id, tf}));
        }
        postings_out << json{{"term", term}, {"postings", rows}}.dump() << '\n';
    }
    write_text_file(dir / "postings.jsonl", postings_out.str());
}

CorpusIndex CorpusIndex::load(const std::filesystem::path& dir) {
    auto read_lines = [](const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IngestionError("cannot open index file " + path.string());
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) lines.push_back(line);
        }
        return lines;
    };
    auto parse = [](const std::string& line, const std::filesystem::path& path, size_t lineno) {
        json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded()) {
            throw IngestionError(path.string() + " line " + std::to_string(lineno) +
                                 ": not valid JSON");
        }
        return doc;
    };

    std::ifstream manifest_in(dir / "manifest.json");
    if (!manifest_in) throw IngestionError("cannot open " + (dir / "manifest.json").string());
    json manifest = json::parse(manifest_in, nullptr, /*allow_exceptions=*/false);
    if (manifest.is_discarded()) {
        throw IngestionError((dir / "manifest.json").string() + ": not valid JSON");
    }

    CorpusIndex index;
    try {
        if (manifest.at("format_version").get<int>() != 1) {
            throw IngestionError("index " + dir.string() + ": unsupported format_version");
        }
        index.k1_ = manifest.at("k1").get<double>();
        index.b_ = manifest.at("b").get<double>();
        index.total_len_ = manifest.at("total_len").get<long long>();

        size_t lineno = 0;
        for (const auto& line : read_lines(dir / "docs.jsonl")) {
            json doc = parse(line, dir / "docs.jsonl", ++lineno);
            index.docs_.push_back(DocEntry{doc.at("id").get<std::string>(),
                                           doc.at("title").get<std::string>(),
                                           doc.at("text").get<std::string>(),
                                           doc.at("len").get<long long>()});
        }

        std::map<std::string, int> id_to_pos;
        for (size_t i = 0; i < index.docs_.size(); ++i) {
            if (!id_to_pos.emplace(index.docs_[i].id, static_cast<int>(i)).second) {
                throw IngestionError("index " + dir.string() + ": duplicate doc id " +
                                     index.docs_[i].id);
            }
            if (i > 0 && index.docs_[i].id < index.docs_[i - 1].id) {
                throw IngestionError("index " + dir.string() + ": docs.jsonl not sorted by id");
            }
        }

        lineno = 0;
        for (const auto& line : read_lines(dir / "postings.jsonl")) {
            json row = parse(line, dir / "postings.jsonl", ++lineno);
            auto term = row.at("term").get<std::string>();
            auto& posting = index.postings_[term];
            for (const auto& pair : row.at("postings")) {
                auto id = pair.at(0).get<std::string>();
                auto tf = pair.at(1).get<int>();
                auto it = id_to_pos.find(id);
                if (it == id_to_pos.end()) {
                    throw IngestionError("index " + dir.string() + ": postings reference " +
                                         "unknown doc " + id);
                }
                if (tf < 1) {
                    throw IngestionError("index " + dir.string() + ": nonpositive tf for " + id);
                }
                posting.emplace_back(it->second, tf);
            }
            if (!std::is_sorted(posting.begin(), posting.end(),
                                [](const auto& a, const auto& b) { return a.first < b.first; })) {
                throw IngestionError("index " + dir.string() + ": postings for term '" + term +
                                     "' not sorted by doc id");
            }
        }
    } catch (const json::exception& e) {
        throw IngestionError("index " + dir.string() + ": " + e.what());
    }

    if (static_cast<long long>(index.docs_.size()) !=
        manifest.at("doc_count").get<long long>()) {
        throw IngestionError("index " + dir.string() +
                             ": manifest doc_count disagrees with docs.jsonl");
    }
    // Every kept token is indexed, so a doc's len must equal its tf total.
    std::vector<long long> tf_totals(index.docs_.size(), 0);
    for (const auto& [term, posting] : index.postings_) {
        for (const auto& [doc_pos, tf] : posting) tf_totals[doc_pos] += tf;
    }
    long long total = 0;
    for (size_t i = 0; i < index.docs_.size(); ++i) {
        if (tf_totals[i] != index.docs_[i].len) {
            throw IngestionError("index " + dir.string() + ": stored len for doc " +
                                 index.docs_[i].id + " disagrees with postings");
        }
        total += index.docs_[i].len;
    }
    if (total != index.total_len_) {
        throw IngestionError("index " + dir.string() +
                             ": manifest total_len disagrees with documents");
    }
    return index;
}

std::string_view to_string(FactVerdict v) {
    switch (v) {
        case FactVerdict::yes: return "yes";
        case FactVerdict::no: return "no";
        case FactVerdict::unparseable: return "unparseable";
    }
    return "unparseable";
}

FactVerdict parse_fact_verdict(const std::string& rationale) {
    auto verdict = verdicts::trailing_yes_no(rationale, kVerdictPrefix);
    if (!verdict) return FactVerdict::unparseable;
    return *verdict ? FactVerdict::yes : FactVerdict::no;
}

std::map<std::string, std::string> load_gold_documents(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open gold document sidecar " + path.string());
    std::map<std::string, std::string> gold;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (row.is_discarded() || !row.contains("problem_id") || !row.contains("gold_text")) {
            throw IngestionError(path.string() + " line " + std::to_string(lineno) +
                                 ": expected {problem_id, gold_text}");
        }
        gold[row.at("problem_id").get<std::string>()] = row.at("gold_text").get<std::string>();
    }
    return gold;
}

std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open corpus file " + path.string());
    std::vector<Document> documents;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (row.is_discarded() || !row.is_object() || !row.contains("id") ||
            !row.contains("title") || !row.contains("text")) {
            throw IngestionError(path.string() + " line " + std::to_string(lineno) +
                                 ": expected {id, title, text}");
        }
        Document doc;
        const auto& id = row.at("id");
        doc.id = id.is_string() ? id.get<std::string>() : id.dump();
        doc.title = row.at("title").get<std::string>();
        doc.text = row.at("text").get<std::string>();
        documents.push_back(std::move(doc));
    }
    return documents;
}

std::string_view to_string(FactMode m) {
    return m == FactMode::retrieved ? "retrieved" : "gold";
}

FactMode fact_mode_from_string(std::string_view s) {
    if (s == "retrieved") return FactMode::retrieved;
    if (s == "gold") return FactMode::gold;
    throw ConfigError("unknown fact-check mode: " + std::string(s));
}

std::string document_context(const core::Problem& problem, const std::string& solution_text,
                             const FactVerifyConfig& config, const CorpusIndex* index,
                             const std::map<std::string, std::string>* gold_documents) {
    if (config.mode == FactMode::gold) {
        if (!gold_documents) {
            throw ConfigError("gold fact-check mode needs a gold document sidecar");
        }
        auto it = gold_documents->find(problem.id);
        if (it == gold_documents->end()) {
            throw ConfigError("no gold document for problem '" + problem.id + "'");
        }
        return it->second;
    }
    if (!index) throw ConfigError("retrieved fact-check mode needs a corpus index");
    auto query_tokens = tokenize(problem.question + " " + solution_text);
    if (query_tokens.size() > static_cast<size_t>(kQueryTokenLimit)) {
        query_tokens.resize(kQueryTokenLimit);
    }
    std::string query;
    for (const auto& token : query_tokens) {
        if (!query.empty()) query += ' ';
        query += token;
    }
    std::string joined;
    for (const auto& doc : index->retrieve(query, config.top_k)) {
        if (!joined.empty()) joined += "\n\n";
        joined += doc.title + "\n" + doc.text;
    }
    return joined;
}

core::ToolVerdict verify_fact(const core::Problem& problem, const core::Candidate& candidate,
                              const FactVerifyConfig& config, const CorpusIndex* index,
                              const std::map<std::string, std::string>* gold_documents,
                              const gateway::CompletionFn& complete) {
    if (problem.task_kind != answers::TaskKind::multiple_choice && !config.allow_any_task) {
        throw ContractViolation("verify_fact expects a multiple-choice problem; got '" +
                                problem.id + "' (set allow_any_task to override)");
    }
    if (config.k < 1) throw ContractViolation("verify_fact requires k >= 1");

    std::string document = document_context(problem, candidate.text, config, index, gold_documents);

    std::map<std::string, std::string> bindings{
        {"question", problem.question},
        {"document", document},
        {"solution", candidate.text},
    };
    auto completions = complete(bindings, config.k);
    std::vector<core::Attempt> attempts;
    attempts.reserve(completions.size());
    for (const auto& completion : completions) {
        core::Attempt attempt;
        attempt.payload = completion.text;
        auto verdict = parse_fact_verdict(completion.text);
        attempt.tool_output = std::string(to_string(verdict));
        switch (verdict) {
            case FactVerdict::yes:
                attempt.attempt_pass = true;
                break;
            case FactVerdict::no:
                attempt.failure_kind = core::FailureKind::fail_verdict;
                break;
            case FactVerdict::unparseable:
                attempt.failure_kind = core::FailureKind::unparseable;
                break;
        }
        attempts.push_back(std::move(attempt));
    }
    return core::make_verdict(core::VerdictRule::all_of_k, std::move(attempts));
}

} // namespace t1::toolv_fact
