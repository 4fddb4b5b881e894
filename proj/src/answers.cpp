#include "t1/answers.hpp"

#include "t1/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace t1::answers {
namespace {

// ---------------------------------------------------------------------------
// LaTeX cleaning
// ---------------------------------------------------------------------------

bool starts_with_at(std::string_view s, size_t pos, std::string_view word) {
    return s.size() - pos >= word.size() && s.compare(pos, word.size(), word) == 0;
}

// Reads a {...} group starting at `pos` (which must point at '{'); returns the
// inner span and advances pos past the closing brace. Unbalanced -> nullopt.
std::optional<std::string_view> read_brace_group(std::string_view s, size_t& pos) {
    if (pos >= s.size() || s[pos] != '{') return std::nullopt;
    int depth = 0;
    size_t start = pos + 1;
    for (size_t i = pos; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        else if (s[i] == '}') {
            --depth;
            if (depth == 0) {
                auto inner = s.substr(start, i - start);
                pos = i + 1;
                return inner;
            }
        }
    }
    return std::nullopt;
}

std::string clean_latex(std::string_view in);

// Argument of \sqrt et al: either a braced group or a single token.
std::string read_command_arg(std::string_view s, size_t& pos) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    if (auto g = read_brace_group(s, pos)) return clean_latex(*g);
    if (pos < s.size()) {
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
            return std::string(s.substr(start, pos - start));
        }
        ++pos;
        return std::string(1, c);
    }
    return {};
}

const std::pair<std::string_view, std::string_view> kSimpleCommands[] = {
    {"cdot", "*"}, {"times", "*"}, {"div", "/"},   {"pi", "pi"},
    {"left", ""},  {"right", ""},  {"Big", ""},    {"big", ""},
    {"Bigg", ""},  {"bigg", ""},   {"quad", " "},  {"qquad", " "},
    {"%", "%"},    {"$", "$"},     {"#", "#"},     {"&", "&"},
    {",", " "},    {";", " "},     {"!", ""},      {":", " "},
    {" ", " "},
};

const std::string_view kContentCommands[] = {
    "text", "mathrm", "mathbf", "mathit", "operatorname", "textbf", "mbox",
};

std::string clean_latex(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    size_t i = 0;
    while (i < in.size()) {
        char c = in[i];
        if (c == '\\') {
            size_t j = i + 1;
            if (starts_with_at(in, j, "frac") || starts_with_at(in, j, "dfrac") ||
                starts_with_at(in, j, "tfrac")) {
                j += in[j] == 'f' ? 4 : 5;
                size_t p = j;
                while (p < in.size() && in[p] == ' ') ++p;
                std::string num, den;
                if (p < in.size() && in[p] == '{') {
                    auto a = read_brace_group(in, p);
                    while (p < in.size() && in[p] == ' ') ++p;
                    auto b = read_brace_group(in, p);
                    if (a && b) {
                        num = clean_latex(*a);
                        den = clean_latex(*b);
                    }
                } else if (p + 1 < in.size()) {
                    // \frac12 shorthand: two single-character arguments.
                    num = std::string(1, in[p]);
                    den = std::string(1, in[p + 1]);
                    p += 2;
                }
                if (!num.empty() && !den.empty()) {
                    out += "(" + num + ")/(" + den + ")";
                    i = p;
                    continue;
                }
                i = j;  // malformed: drop the command name, keep going
                continue;
            }
            if (starts_with_at(in, j, "sqrt")) {
                j += 4;
                while (j < in.size() && j < in.size() && in[j] == ' ') ++j;
                if (j < in.size() && in[j] == '[') {
                    // \sqrt[n]{...}: outside the supported grammar, keep a
                    // textual rendering so it falls through to text kind.
                    size_t close = in.find(']', j);
                    if (close != std::string_view::npos) {
                        std::string_view idx = in.substr(j + 1, close - j - 1);
                        size_t p = close + 1;
                        std::string arg = read_command_arg(in, p);
                        out += "root" + std::string(idx) + "(" + arg + ")";
                        i = p;
                        continue;
                    }
                }
                size_t p = j;
                std::string arg = read_command_arg(in, p);
                out += "sqrt(" + arg + ")";
                i = p;
                continue;
            }
            bool matched = false;
            for (auto cmd : kContentCommands) {
                if (starts_with_at(in, j, cmd)) {
                    size_t p = j + cmd.size();
                    while (p < in.size() && in[p] == ' ') ++p;
                    if (auto g = read_brace_group(in, p)) {
                        out += clean_latex(*g);
                        i = p;
                        matched = true;
                    }
                    break;
                }
            }
            if (matched) continue;
            for (auto [cmd, repl] : kSimpleCommands) {
                if (starts_with_at(in, j, cmd)) {
                    // Word commands must not swallow a longer identifier
                    // (\pine stays intact); symbol commands match as-is.
                    bool word = std::isalpha(static_cast<unsigned char>(cmd[0]));
                    size_t end = j + cmd.size();
                    if (word && end < in.size() &&
                        std::isalpha(static_cast<unsigned char>(in[end]))) {
                        continue;
                    }
                    out += repl;
                    i = end;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            // Unknown command: keep its name without the backslash.
            size_t end = j;
            while (end < in.size() && std::isalpha(static_cast<unsigned char>(in[end]))) ++end;
            if (end == j) {
                ++i;  // lone backslash
                continue;
            }
            out.append(in.substr(j, end - j));
            i = end;
            continue;
        }
        if (c == '$') {
            ++i;
            continue;
        }
        if (c == '{') {
            out += '(';
            ++i;
            continue;
        }
        if (c == '}') {
            out += ')';
            ++i;
            continue;
        }
        // UTF-8 replacements for common math glyphs.
        if (static_cast<unsigned char>(c) == 0xCF && i + 1 < in.size() &&
            static_cast<unsigned char>(in[i + 1]) == 0x80) {
            out += "pi";
            i += 2;
            continue;
        }
        if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < in.size() &&
            static_cast<unsigned char>(in[i + 1]) == 0x88 &&
            static_cast<unsigned char>(in[i + 2]) == 0x92) {
            out += '-';  // U+2212 minus sign
            i += 3;
            continue;
        }
        if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < in.size() &&
            static_cast<unsigned char>(in[i + 1]) == 0x88 &&
            static_cast<unsigned char>(in[i + 2]) == 0x9A) {
            out += "sqrt";  // U+221A radical sign
            i += 3;
            continue;
        }
        if (static_cast<unsigned char>(c) == 0xC3 && i + 1 < in.size()) {
            unsigned char n = static_cast<unsigned char>(in[i + 1]);
            if (n == 0x97) {
                out += '*';  // U+00D7 multiplication sign
                i += 2;
                continue;
            }
            if (n == 0xB7) {
                out += '/';  // U+00F7 division sign
                i += 2;
                continue;
            }
        }
        if (static_cast<unsigned char>(c) == 0xC2 && i + 1 < in.size() &&
            static_cast<unsigned char>(in[i + 1]) == 0xB7) {
            out += '*';  // U+00B7 middle dot
            i += 2;
            continue;
        }
        out += c;
        ++i;
    }
    return out;
}

// Thousands separators: "1,234,567" -> "1234567". Only a comma wedged between
// a digit and exactly three digits (not followed by a fourth) is dropped.
std::string strip_thousands(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == ',' && i > 0 && i + 3 < s.size() &&
            std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
            std::isdigit(static_cast<unsigned char>(s[i + 1])) &&
            std::isdigit(static_cast<unsigned char>(s[i + 2])) &&
            std::isdigit(static_cast<unsigned char>(s[i + 3])) &&
            (i + 4 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 4])))) {
            continue;
        }
        out += s[i];
    }
    return out;
}

std::string collapse_ws_lower(std::string_view s) {
    std::string out;
    bool in_space = true;  // trims leading space
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string_view trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// ---------------------------------------------------------------------------
// Exact arithmetic: (num/den) * sqrt(radicand) * pi^pi_pow
// ---------------------------------------------------------------------------

struct Exact {
    long long num = 0;
    long long den = 1;       // > 0
    long long radicand = 1;  // square-free, >= 1
    int pi_pow = 0;
};

constexpr long long kExactLimit = 1'000'000'000'000'000'000LL;  // 1e18

std::optional<long long> checked_mul(long long a, long long b) {
    __int128 r = static_cast<__int128>(a) * b;
    if (r > kExactLimit || r < -kExactLimit) return std::nullopt;
    return static_cast<long long>(r);
}

// Pulls the largest perfect-square divisor out of r: r = s^2 * m with m
// square-free. Returns {s, m}. Gives up (nullopt) on radicands too large to
// factor by trial division.
std::optional<std::pair<long long, long long>> square_free(long long r) {
    if (r <= 0) return std::nullopt;
    if (r > 1'000'000'000'000LL) return std::nullopt;
    long long s = 1, m = 1;
    for (long long p = 2; p * p <= r; ++p) {
        if (r % p) continue;
        int e = 0;
        while (r % p == 0) {
            r /= p;
            ++e;
        }
        for (int k = 0; k < e / 2; ++k) s *= p;
        if (e % 2) m *= p;
    }
    m *= r;  // leftover prime
    return std::make_pair(s, m);
}

std::optional<Exact> normalize_exact(Exact e) {
    if (e.den == 0) return std::nullopt;
    if (e.num == 0) return Exact{0, 1, 1, 0};
    auto sf = square_free(e.radicand);
    if (!sf) return std::nullopt;
    auto mul = checked_mul(e.num, sf->first);
    if (!mul) return std::nullopt;
    e.num = *mul;
    e.radicand = sf->second;
    if (e.den < 0) {
        e.num = -e.num;
        e.den = -e.den;
    }
    long long g = std::gcd(std::abs(e.num), e.den);
    e.num /= g;
    e.den /= g;
    return e;
}

std::optional<Exact> exact_mul(const Exact& a, const Exact& b) {
    auto n = checked_mul(a.num, b.num);
    auto d = checked_mul(a.den, b.den);
    auto r = checked_mul(a.radicand, b.radicand);
    if (!n || !d || !r) return std::nullopt;
    return normalize_exact(Exact{*n, *d, *r, a.pi_pow + b.pi_pow});
}

std::optional<Exact> exact_div(const Exact& a, const Exact& b) {
    if (b.num == 0) return std::nullopt;
    // 1/sqrt(r) = sqrt(r)/r, so the divisor's radicand joins the numerator's
    // radical and its value multiplies the denominator.
    auto n = checked_mul(a.num, b.den);
    auto d1 = checked_mul(a.den, b.num);
    if (!n || !d1) return std::nullopt;
    auto d = checked_mul(*d1, b.radicand);
    auto r = checked_mul(a.radicand, b.radicand);
    if (!d || !r) return std::nullopt;
    return normalize_exact(Exact{*n, *d, *r, a.pi_pow - b.pi_pow});
}

std::optional<Exact> exact_pow(Exact base, long long exp) {
    if (exp < 0 || exp > 63) return std::nullopt;
    Exact acc{1, 1, 1, 0};
    for (long long k = 0; k < exp; ++k) {
        auto next = exact_mul(acc, base);
        if (!next) return std::nullopt;
        acc = *next;
    }
    return acc;
}

double exact_value(const Exact& e) {
    return static_cast<double>(e.num) / static_cast<double>(e.den) *
           std::sqrt(static_cast<double>(e.radicand)) *
           std::pow(3.14159265358979323846, e.pi_pow);
}

// ---------------------------------------------------------------------------
// Expression grammar (products and quotients of numbers, sqrt, pi)
// ---------------------------------------------------------------------------
//
//   value   := sign* product
//   product := factor (('*' | '/' | adjacency) factor)*
//   factor  := primary ('^' primary)?
//   primary := number | 'sqrt' arg | 'pi' | '(' value ')'
//
// Every node carries both an exact form (when representable in int64 range)
// and a double, so oversized integers still compare numerically.

struct Value {
    std::optional<Exact> exact;
    double approx = 0.0;
    bool saw_decimal_point = false;
};

struct Parser {
    std::string_view s;
    size_t pos = 0;
    bool failed = false;

    void skip_ws() {
        while (pos < s.size() && s[pos] == ' ') ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < s.size() ? s[pos] : '\0';
    }

    bool peek_word(std::string_view w) {
        skip_ws();
        if (!starts_with_at(s, pos, w)) return false;
        size_t end = pos + w.size();
        return end >= s.size() || !std::isalpha(static_cast<unsigned char>(s[end]));
    }

    Value fail() {
        failed = true;
        return {};
    }

    Value parse_number() {
        skip_ws();
        size_t start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        bool dot = false;
        if (pos < s.size() && s[pos] == '.') {
            dot = true;
            ++pos;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        if (pos == start || (dot && pos == start + 1)) return fail();
        long long exp10 = 0;
        size_t mantissa_end = pos;
        if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
            size_t save = pos;
            ++pos;
            size_t exp_start = pos;
            if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
            size_t digits_start = pos;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
            if (pos == digits_start) {
                pos = save;  // "2e" is not an exponent
            } else {
                auto span = s.substr(exp_start, pos - exp_start);
                auto [p, ec] = std::from_chars(span.data(), span.data() + span.size(), exp10);
                if (ec != std::errc{} || exp10 > 100 || exp10 < -100) return fail();
            }
        }
        std::string_view mantissa = s.substr(start, mantissa_end - start);
        // Exact path: shift the decimal point into a power of ten.
        std::optional<Exact> exact;
        {
            long long digits = 0;
            long long frac_digits = 0;
            bool overflow = false;
            bool past_dot = false;
            for (char c : mantissa) {
                if (c == '.') {
                    past_dot = true;
                    continue;
                }
                auto next = checked_mul(digits, 10);
                if (!next || *next > kExactLimit - (c - '0')) {
                    overflow = true;
                    break;
                }
                digits = *next + (c - '0');
                if (past_dot) ++frac_digits;
            }
            if (!overflow) {
                Exact e{digits, 1, 1, 0};
                long long net = exp10 - frac_digits;
                bool ok = true;
                for (long long k = 0; k < std::abs(net) && ok; ++k) {
                    if (net > 0) {
                        auto n = checked_mul(e.num, 10);
                        if (!n) ok = false;
                        else e.num = *n;
                    } else {
                        auto d = checked_mul(e.den, 10);
                        if (!d) ok = false;
                        else e.den = *d;
                    }
                }
                if (ok) {
                    if (auto norm = normalize_exact(e)) exact = *norm;
                }
            }
        }
        double approx = 0.0;
        {
            std::string buf(s.substr(start, pos - start));
            auto [p, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), approx);
            if (ec != std::errc{}) return fail();
        }
        return Value{exact, approx, dot || exp10 != 0};
    }

    Value parse_primary() {
        skip_ws();
        if (pos >= s.size()) return fail();
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (c == '(') {
            ++pos;
            Value v = parse_value();
            if (failed || !eat(')')) return fail();
            return v;
        }
        if (peek_word("sqrt")) {
            pos += 4;
            Value arg;
            if (peek() == '(') {
                ++pos;
                arg = parse_value();
                if (failed || !eat(')')) return fail();
            } else if (std::isdigit(static_cast<unsigned char>(peek()))) {
                arg = parse_number();
            } else {
                return fail();
            }
            if (failed || arg.approx < 0) return fail();
            // sqrt(p/q) = sqrt(p*q)/q keeps rationals under the radical exact.
            std::optional<Exact> exact;
            if (arg.exact && arg.exact->pi_pow == 0 && arg.exact->radicand == 1 &&
                arg.exact->num >= 0) {
                if (arg.exact->num == 0) {
                    exact = Exact{0, 1, 1, 0};
                } else if (auto r = checked_mul(arg.exact->num, arg.exact->den)) {
                    exact = normalize_exact(Exact{1, arg.exact->den, *r, 0});
                }
            }
            return Value{exact, std::sqrt(arg.approx), arg.saw_decimal_point};
        }
        if (peek_word("pi")) {
            pos += 2;
            return Value{Exact{1, 1, 1, 1}, 3.14159265358979323846, false};
        }
        return fail();
    }

    Value parse_factor() {
        Value base = parse_primary();
        if (failed) return {};
        if (peek() == '^') {
            ++pos;
            bool neg = false;
            while (peek() == '-' || peek() == '+') {
                if (s[pos] == '-') neg = !neg;
                ++pos;
            }
            Value exp = parse_primary();
            if (failed) return {};
            if (neg) {
                exp.approx = -exp.approx;
                if (exp.exact) exp.exact->num = -exp.exact->num;
            }
            double a = std::pow(base.approx, exp.approx);
            if (!std::isfinite(a)) return fail();
            std::optional<Exact> exact;
            if (base.exact && exp.exact && exp.exact->den == 1 &&
                exp.exact->radicand == 1 && exp.exact->pi_pow == 0) {
                long long e = exp.exact->num;
                if (e >= 0) {
                    exact = exact_pow(*base.exact, e);
                } else if (auto p = exact_pow(*base.exact, -e)) {
                    exact = exact_div(Exact{1, 1, 1, 0}, *p);
                }
            }
            return Value{exact, a, base.saw_decimal_point || exp.saw_decimal_point};
        }
        return base;
    }

    bool at_factor_start() {
        char c = peek();
        return std::isdigit(static_cast<unsigned char>(c)) || c == '(' || c == '.' ||
               peek_word("sqrt") || peek_word("pi");
    }

    Value parse_product() {
        Value acc = parse_factor();
        if (failed) return {};
        for (;;) {
            skip_ws();
            char op;
            if (peek() == '*') {
                op = '*';
                ++pos;
            } else if (peek() == '/') {
                op = '/';
                ++pos;
            } else if (at_factor_start()) {
                op = '*';  // adjacency: 3sqrt(3), 2pi, (1/2)pi
            } else {
                break;
            }
            Value rhs = parse_factor();
            if (failed) return {};
            if (op == '/') {
                if (rhs.approx == 0.0) return fail();
                acc.approx /= rhs.approx;
                acc.exact = (acc.exact && rhs.exact) ? exact_div(*acc.exact, *rhs.exact)
                                                     : std::nullopt;
            } else {
                acc.approx *= rhs.approx;
                acc.exact = (acc.exact && rhs.exact) ? exact_mul(*acc.exact, *rhs.exact)
                                                     : std::nullopt;
            }
            acc.saw_decimal_point = acc.saw_decimal_point || rhs.saw_decimal_point;
            if (!std::isfinite(acc.approx)) return fail();
        }
        return acc;
    }

    Value parse_value() {
        bool neg = false;
        while (peek() == '-' || peek() == '+') {
            if (s[pos] == '-') neg = !neg;
            ++pos;
        }
        Value v = parse_product();
        if (failed) return {};
        if (neg) {
            v.approx = -v.approx;
            if (v.exact) v.exact->num = -v.exact->num;
        }
        return v;
    }
};

std::optional<Value> parse_expression(std::string_view cleaned) {
    Parser p{cleaned};
    Value v = p.parse_value();
    p.skip_ws();
    if (p.failed || p.pos != cleaned.size()) return std::nullopt;
    if (!std::isfinite(v.approx)) return std::nullopt;
    return v;
}

std::string render_exact(const Exact& e) {
    std::string out = std::to_string(e.num) + "/" + std::to_string(e.den);
    if (e.radicand != 1) out += "*sqrt(" + std::to_string(e.radicand) + ")";
    if (e.pi_pow == 1) out += "*pi";
    else if (e.pi_pow != 0) out += "*pi^" + std::to_string(e.pi_pow);
    return out;
}

std::string render_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

// Option letter: a single A..J, optionally wrapped in () or {} and with
// trailing ')', '.', or ':' punctuation.
std::optional<char> parse_option_letter(std::string_view cleaned) {
    std::string_view s = trim(cleaned);
    if (!s.empty() && (s.front() == '(' || s.front() == '[')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ')' || s.back() == ']' || s.back() == '.' ||
                          s.back() == ':' || s.back() == '$')) {
        s.remove_suffix(1);
    }
    s = trim(s);
    if (s.size() != 1) return std::nullopt;
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (c < 'A' || c > 'J') return std::nullopt;
    return c;
}

} // namespace

std::string_view to_string(AnswerKind k) {
    switch (k) {
        case AnswerKind::rational: return "rational";
        case AnswerKind::decimal: return "decimal";
        case AnswerKind::symbolic: return "symbolic";
        case AnswerKind::choice_letter: return "choice_letter";
        case AnswerKind::text: return "text";
    }
    return "text";
}

std::string_view to_string(TaskKind k) {
    return k == TaskKind::math ? "math" : "multiple_choice";
}

TaskKind task_kind_from_string(std::string_view s) {
    if (s == "math") return TaskKind::math;
    if (s == "multiple_choice") return TaskKind::multiple_choice;
    throw ConfigError("unknown task kind: " + std::string(s));
}

AnswerKind answer_kind_from_string(std::string_view s) {
    if (s == "rational") return AnswerKind::rational;
    if (s == "decimal") return AnswerKind::decimal;
    if (s == "symbolic") return AnswerKind::symbolic;
    if (s == "choice_letter") return AnswerKind::choice_letter;
    if (s == "text") return AnswerKind::text;
    throw ConfigError("unknown answer kind: " + std::string(s));
}

CanonicalAnswer parse_answer(std::string_view raw, TaskKind task) {
    CanonicalAnswer out;
    out.raw = std::string(raw);
    std::string cleaned = strip_thousands(clean_latex(trim(raw)));

    if (task == TaskKind::multiple_choice) {
        if (auto letter = parse_option_letter(cleaned)) {
            out.kind = AnswerKind::choice_letter;
            out.normalized = std::string(1, *letter);
            return out;
        }
    }

    if (auto v = parse_expression(cleaned)) {
        out.numeric_value = v->exact ? exact_value(*v->exact) : v->approx;
        if (v->exact) {
            const Exact& e = *v->exact;
            if (e.radicand == 1 && e.pi_pow == 0) {
                out.kind = v->saw_decimal_point ? AnswerKind::decimal : AnswerKind::rational;
            } else {
                out.kind = AnswerKind::symbolic;
            }
            out.normalized = render_exact(e);
        } else {
            out.kind = AnswerKind::decimal;
            out.normalized = render_double(v->approx);
        }
        return out;
    }

    out.kind = AnswerKind::text;
    out.normalized = collapse_ws_lower(cleaned);
    return out;
}

namespace {

// Last \boxed{...} (or \fbox{...}) content with balanced braces.
std::optional<std::string> last_boxed(std::string_view text) {
    std::optional<std::string> found;
    for (size_t i = 0; i + 6 < text.size(); ++i) {
        size_t content = 0;
        if (text.compare(i, 7, "\\boxed{") == 0) content = i + 6;
        else if (text.compare(i, 6, "\\fbox{") == 0) content = i + 5;
        else continue;
        size_t pos = content;
        if (auto g = read_brace_group(text, pos)) {
            if (!trim(*g).empty()) found = std::string(*g);
            i = pos - 1;
        }
    }
    return found;
}

// Clause following the last "answer is" (also matches "final answer is"):
// runs to end of line or to a sentence-ending period.
std::optional<std::string> last_answer_clause(std::string_view text) {
    static constexpr std::string_view kPhrase = "answer is";
    size_t best = std::string_view::npos;
    for (size_t i = 0; i + kPhrase.size() <= text.size(); ++i) {
        bool match = true;
        for (size_t k = 0; k < kPhrase.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(text[i + k])) != kPhrase[k]) {
                match = false;
                break;
            }
        }
        if (match) best = i;
    }
    if (best == std::string_view::npos) return std::nullopt;
    size_t start = best + kPhrase.size();
    while (start < text.size() && (text[start] == ':' || text[start] == ' ')) ++start;
    size_t end = start;
    while (end < text.size() && text[end] != '\n') {
        // Sentence-ending '.' or ', ' terminates the clause; '.' or ',' inside
        // a number ("3.5", "1,234") does not.
        bool digit_next =
            end + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[end + 1]));
        if ((text[end] == '.' || text[end] == ',') && !digit_next) break;
        ++end;
    }
    auto clause = trim(text.substr(start, end - start));
    if (clause.empty()) return std::nullopt;
    return std::string(clause);
}

// Multiple-choice matchers collect (position, letter) and the rightmost wins.
struct LetterHit {
    size_t pos;
    char letter;
};

void match_boxed_letters(std::string_view text, std::vector<LetterHit>& hits) {
    for (size_t i = 0; i + 6 < text.size(); ++i) {
        if (text.compare(i, 7, "\\boxed{") != 0) continue;
        size_t pos = i + 6;
        if (auto g = read_brace_group(text, pos)) {
            if (auto letter = parse_option_letter(clean_latex(*g))) {
                hits.push_back({i, *letter});
            }
        }
    }
}

void match_answer_phrases(std::string_view text, std::vector<LetterHit>& hits) {
    static constexpr std::string_view kPhrases[] = {"answer is", "answer:"};
    for (auto phrase : kPhrases) {
        for (size_t i = 0; i + phrase.size() <= text.size(); ++i) {
            bool match = true;
            for (size_t k = 0; k < phrase.size(); ++k) {
                if (std::tolower(static_cast<unsigned char>(text[i + k])) != phrase[k]) {
                    match = false;
                    break;
                }
            }
            if (!match) continue;
            size_t start = i + phrase.size();
            while (start < text.size() && (text[start] == ' ' || text[start] == ':')) ++start;
            size_t end = start;
            while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])) &&
                   end - start < 8) {
                ++end;
            }
            auto token = text.substr(start, end - start);
            if (auto letter = parse_option_letter(clean_latex(token))) {
                hits.push_back({i, *letter});
            }
        }
    }
}

void match_parenthesized(std::string_view text, std::vector<LetterHit>& hits) {
    for (size_t i = 0; i + 2 < text.size(); ++i) {
        if (text[i] != '(' || text[i + 2] != ')') continue;
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i + 1])));
        if (c < 'A' || c > 'J') continue;
        hits.push_back({i, c});
    }
}

void match_letter_lines(std::string_view text, std::vector<LetterHit>& hits) {
    size_t line_start = 0;
    for (size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            auto line = text.substr(line_start, i - line_start);
            auto t = trim(line);
            // accept "B", "B.", "B)", "(B)"; longer lines never qualify
            if (!t.empty() && t.size() <= 4) {
                if (auto letter = parse_option_letter(t)) {
                    hits.push_back({line_start, *letter});
                }
            }
            line_start = i + 1;
        }
    }
}

} // namespace

std::optional<CanonicalAnswer> extract_answer(std::string_view solution_text, TaskKind task) {
    if (task == TaskKind::math) {
        if (auto boxed = last_boxed(solution_text)) {
            auto parsed = parse_answer(*boxed, task);
            if (!parsed.normalized.empty()) return parsed;
        }
        if (auto clause = last_answer_clause(solution_text)) {
            auto parsed = parse_answer(*clause, task);
            if (!parsed.normalized.empty()) return parsed;
        }
        return std::nullopt;
    }

    std::vector<LetterHit> hits;
    match_boxed_letters(solution_text, hits);
    match_answer_phrases(solution_text, hits);
    match_parenthesized(solution_text, hits);
    match_letter_lines(solution_text, hits);
    if (hits.empty()) {
        // Fall back to a boxed or stated non-letter answer (some options are
        // numeric and models answer with the value).
        if (auto boxed = last_boxed(solution_text)) {
            auto parsed = parse_answer(*boxed, task);
            if (!parsed.normalized.empty()) return parsed;
        }
        if (auto clause = last_answer_clause(solution_text)) {
            auto parsed = parse_answer(*clause, task);
            if (!parsed.normalized.empty()) return parsed;
        }
        return std::nullopt;
    }
    auto best = std::max_element(hits.begin(), hits.end(),
                                 [](const LetterHit& a, const LetterHit& b) {
                                     return a.pos < b.pos;
                                 });
    CanonicalAnswer out;
    out.raw = std::string(1, best->letter);
    out.kind = AnswerKind::choice_letter;
    out.normalized = out.raw;
    return out;
}

bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b) {
    bool a_letter = a.kind == AnswerKind::choice_letter;
    bool b_letter = b.kind == AnswerKind::choice_letter;
    if (a_letter || b_letter) {
        return a_letter && b_letter && a.normalized == b.normalized;
    }
    if (a.numeric_value && b.numeric_value) {
        double va = *a.numeric_value;
        double vb = *b.numeric_value;
        double tol = 1e-6 * std::max({1.0, std::abs(va), std::abs(vb)});
        return std::abs(va - vb) <= tol;
    }
    return !a.normalized.empty() && a.normalized == b.normalized;
}

std::string normalize(std::string_view raw, TaskKind task) {
    return parse_answer(raw, task).normalized;
}

} // namespace t1::answers
