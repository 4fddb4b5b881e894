#include "t1/verdict_scan.hpp"

#include <cctype>

namespace t1::verdicts {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// First run of letters in `s`, lowercased.
std::string leading_word(std::string_view s) {
    std::string word;
    for (char c : s) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!word.empty()) {
            break;
        }
    }
    return word;
}

} // namespace

std::optional<bool> trailing_yes_no(const std::string& text, std::string_view prefix) {
    size_t end = text.size();
    while (end > 0) {
        size_t nl = text.rfind('\n', end - 1);
        size_t begin = nl == std::string::npos ? 0 : nl + 1;
        std::string_view line = trim(std::string_view(text).substr(begin, end - begin));
        if (line.substr(0, prefix.size()) == prefix) {
            auto word = leading_word(line.substr(prefix.size()));
            if (word == "yes") return true;
            if (word == "no") return false;
            return std::nullopt;
        }
        if (nl == std::string::npos) break;
        end = nl;
    }
    return std::nullopt;
}

} // namespace t1::verdicts
