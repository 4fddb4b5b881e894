#include "t1/prompts.hpp"

#include "t1/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>

namespace t1::prompts {
namespace {

using nlohmann::json;

constexpr std::string_view kCheckCalcNl =
    "Evaluate the below calculation. Is this calculation correct? If correct, return True. "
    "Return False otherwise.\n"
    "\n"
    "# Calculation: {exp} = {ans}\n"
    "\n"
    "If the calculation is correct, return True. If not, return False.\n"
    "\n"
    "Think step-by-step, and MUST output True or False at the end of your verification.";

constexpr std::string_view kCheckCalcCode =
    "Generate a simple Python script that evaluates the correctness of a given mathematical "
    "calculation.\n"
    "\n"
    "# Calculation: {exp} = {ans}\n"
    "\n"
    "The script should print `The calculation is correct` if the calculation is correct, "
    "otherwise print `The calculation is incorrect`.\n"
    "\n"
    "### Constraints:\n"
    "- The output must be a single Python code block without any function definition.\n"
    "- The script should evaluate the expression as a boolean comparison.\n"
    "\n"
    "If the evaluated result of `{exp}` matches `{ans}`, print `The calculation is correct`, "
    "otherwise print `The calculation is incorrect`.";

constexpr std::string_view kCodeGenSystem =
    "Write a Python code block that verifies whether a given solution is correct based on the "
    "provided question, following these guidelines:\n"
    "\n"
    "- The code should be a single Python block, formatted as:\n"
    "```python\n"
    "CODE\n"
    "```\n"
    "- The code should only print True if the solution is verified as correct. Otherwise, it "
    "should only print False if the solution is incorrect.\n"
    "- Use only the following built-in modules where necessary:\n"
    "  - `math` (for floating-point comparisons using math.isclose())\n"
    "  - `sympy` (for symbolic calculations, including π and fractions)\n"
    "  - `cmath` (for complex number operations)\n"
    "- For floating-point comparisons, use math.isclose() instead of ==.\n"
    "- Use `sympy.pi` for π and `sympy.Rational` for fractions.\n"
    "- Simplify all fractions and square roots without converting them to decimal values.";

constexpr std::string_view kCodeGenUser =
    "### Input\n"
    "\n"
    "- Question: {question}\n"
    "\n"
    "- Solution: {solution}\n"
    "\n"
    "### Output:\n"
    "\n"
    "Return python code only.";

constexpr std::string_view kFactCheckSystem = "You are a domain expert.";

constexpr std::string_view kFactCheckUser =
    "Check the factual correctness of each statement in the provided solution to the question, "
    "using only the information available in the given document.\n"
    "- Evaluate only the explicit factual claims made in the solution. Do not verify or "
    "evaluate the final conclusion or answer itself (e.g., The answer is ...).\n"
    "- If a statement is factually incorrect based on the document, mark it as incorrect.\n"
    "- If a statement cannot be verified using the document (i.e., the document does not "
    "confirm or deny it), treat it as not verifiable, and assume it is correct for the purpose "
    "of final verification.\n"
    "\n"
    "<question>{question}</question>\n"
    "\n"
    "<document>{document}</document>\n"
    "\n"
    "<solution>{solution}</solution>\n"
    "\n"
    "At the end of the fact check, provide a final summary in the following format:\n"
    "Verification: Are all statements correct? (Yes/No)? X\n"
    "(where X is either Yes or No).\n"
    "\n"
    "If any verifiably false statement is found, output:\n"
    "Verification: Are all statements correct? (Yes/No)? No\n"
    "\n"
    "If no false statements are found (i.e., all are either correct or unverifiable), output:\n"
    "Verification: Are all statements correct? (Yes/No)? Yes";

constexpr std::string_view kGenerateSolutionUser =
    "Solve the following problem step by step.\n"
    "\n"
    "{question}\n"
    "\n"
    "Reason carefully. End your response with the final answer on its own line in the form:\n"
    "The final answer is: $\\boxed{...}$ (with your answer inside the box)";

constexpr std::string_view kGenRmCotUser =
    "You are a careful grader. Verify the solution to the question step by step, checking "
    "each claim and each calculation. At the end of your verification, state your final "
    "grade on its own line in exactly this format:\n"
    "Verification: Is the answer correct (Yes/No)? X\n"
    "(where X is either Yes or No).\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Solution: {solution}";

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Scans `{name}` slots: an identifier between braces. Braces around anything
// else ("{...}", "{ 1, 2 }") are literal text, which keeps LaTeX in prompt
// bodies intact without an escape syntax.
template <typename OnPlaceholder>
void scan(std::string_view text, OnPlaceholder&& on_placeholder) {
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            size_t j = i + 1;
            while (j < text.size() && ident_char(text[j])) ++j;
            if (j > i + 1 && j < text.size() && text[j] == '}') {
                on_placeholder(text.substr(i + 1, j - i - 1), i, j + 1);
                i = j + 1;
                continue;
            }
        }
        ++i;
    }
}

std::string render_text(const PromptTemplate& tmpl, std::string_view text,
                        const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(text.size());
    std::vector<std::string> missing;
    size_t copied = 0;
    scan(text, [&](std::string_view name, size_t begin, size_t end) {
        out.append(text.substr(copied, begin - copied));
        auto it = bindings.find(std::string(name));
        if (it == bindings.end()) {
            missing.emplace_back(name);
        } else {
            out.append(it->second);
        }
        copied = end;
    });
    out.append(text.substr(copied));
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) {
            if (!list.empty()) list += ", ";
            list += m;
        }
        throw TemplateError("template " + std::string(to_string(tmpl.name)) +
                            ": no binding for placeholder(s): " + list);
    }
    return out;
}

} // namespace

std::string_view to_string(TemplateName n) {
    switch (n) {
        case TemplateName::generate_solution: return "generate_solution";
        case TemplateName::genrm_cot: return "genrm_cot";
        case TemplateName::code_gen: return "code_gen";
        case TemplateName::fact_check: return "fact_check";
        case TemplateName::check_calc_nl: return "check_calc_nl";
        case TemplateName::check_calc_code: return "check_calc_code";
    }
    return "generate_solution";
}

TemplateName template_name_from_string(std::string_view s) {
    if (s == "generate_solution") return TemplateName::generate_solution;
    if (s == "genrm_cot") return TemplateName::genrm_cot;
    if (s == "code_gen") return TemplateName::code_gen;
    if (s == "fact_check") return TemplateName::fact_check;
    if (s == "check_calc_nl") return TemplateName::check_calc_nl;
    if (s == "check_calc_code") return TemplateName::check_calc_code;
    throw ConfigError("unknown template name: " + std::string(s));
}

std::vector<std::string> placeholders(const PromptTemplate& tmpl) {
    std::vector<std::string> names;
    auto collect = [&](std::string_view text) {
        scan(text, [&](std::string_view name, size_t, size_t) {
            std::string n(name);
            if (std::find(names.begin(), names.end(), n) == names.end()) {
                names.push_back(std::move(n));
            }
        });
    };
    if (tmpl.system) collect(*tmpl.system);
    collect(tmpl.user);
    return names;
}

RenderedPrompt render(const PromptTemplate& tmpl,
                      const std::map<std::string, std::string>& bindings) {
    RenderedPrompt out;
    if (tmpl.system) out.system = render_text(tmpl, *tmpl.system, bindings);
    out.user = render_text(tmpl, tmpl.user, bindings);
    return out;
}

const PromptTemplate& PromptPack::get(TemplateName n) const {
    auto it = templates.find(n);
    if (it == templates.end()) {
        throw ConfigError("prompt pack '" + name + "' has no template " +
                          std::string(to_string(n)));
    }
    return it->second;
}

const PromptPack& default_pack() {
    static const PromptPack pack = [] {
        PromptPack p;
        p.format_version = 1;
        p.name = "default";
        auto add = [&](TemplateName n, std::optional<std::string> system, std::string_view user) {
            p.templates[n] = PromptTemplate{n, std::move(system), std::string(user)};
        };
        add(TemplateName::generate_solution, std::nullopt, kGenerateSolutionUser);
        add(TemplateName::genrm_cot, std::nullopt, kGenRmCotUser);
        add(TemplateName::code_gen, std::string(kCodeGenSystem), kCodeGenUser);
        add(TemplateName::fact_check, std::string(kFactCheckSystem), kFactCheckUser);
        add(TemplateName::check_calc_nl, std::nullopt, kCheckCalcNl);
        add(TemplateName::check_calc_code, std::nullopt, kCheckCalcCode);
        return p;
    }();
    return pack;
}

PromptPack load_pack(const std::filesystem::path& dir) {
    auto file = dir / "pack.json";
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open prompt pack: " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("prompt pack " + file.string() + " is not valid JSON: " + e.what());
    }
    PromptPack pack;
    try {
        pack.format_version = doc.at("format_version").get<int>();
        pack.name = doc.at("name").get<std::string>();
        for (const auto& [key, value] : doc.at("templates").items()) {
            PromptTemplate tmpl;
            tmpl.name = template_name_from_string(key);
            if (value.contains("system") && !value.at("system").is_null()) {
                tmpl.system = value.at("system").get<std::string>();
            }
            tmpl.user = value.at("user").get<std::string>();
            pack.templates[tmpl.name] = std::move(tmpl);
        }
    } catch (const json::exception& e) {
        throw ConfigError("prompt pack " + file.string() + ": " + e.what());
    }
    if (pack.format_version != 1) {
        throw ConfigError("prompt pack " + file.string() + ": unsupported format_version " +
                          std::to_string(pack.format_version));
    }
    return pack;
}

void save_pack(const PromptPack& pack, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json templates = json::object();
    for (const auto& [name, tmpl] : pack.templates) {
        json t;
        if (tmpl.system) t["system"] = *tmpl.system;
        t["user"] = tmpl.user;
        templates[std::string(to_string(name))] = std::move(t);
    }
    json doc = {
        {"format_version", pack.format_version},
        {"name", pack.name},
        {"templates", std::move(templates)},
    };
    auto file = dir / "pack.json";
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot write prompt pack: " + file.string());
    out << doc.dump(2) << '\n';
}

} // namespace t1::prompts
