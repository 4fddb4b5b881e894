#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace t1::prompts {

enum class TemplateName {
    generate_solution,
    genrm_cot,
    code_gen,
    fact_check,
    check_calc_nl,
    check_calc_code,
};

std::string_view to_string(TemplateName n);
TemplateName template_name_from_string(std::string_view s);

/// A chat prompt with `{placeholder}` slots in the user (and optionally
/// system) text. Placeholders are single identifiers; anything else between
/// braces is literal text.
struct PromptTemplate {
    TemplateName name = TemplateName::generate_solution;
    std::optional<std::string> system;
    std::string user;
};

struct RenderedPrompt {
    std::optional<std::string> system;
    std::string user;
};

/// Placeholder names referenced by the template, in first-appearance order.
std::vector<std::string> placeholders(const PromptTemplate& tmpl);

/// Substitutes bindings into the template. Any placeholder without a binding
/// aborts rendering with a TemplateError listing every missing name.
/// Substituted values are inserted verbatim and never re-scanned.
RenderedPrompt render(const PromptTemplate& tmpl,
                      const std::map<std::string, std::string>& bindings);

/// A versioned set of templates, persistable to disk as `pack.json`.
struct PromptPack {
    int format_version = 1;
    std::string name;
    std::map<TemplateName, PromptTemplate> templates;

    const PromptTemplate& get(TemplateName n) const;
};

/// The built-in pack: verification and calculation-check prompts carry their
/// published texts byte-for-byte; solving and grading prompts are this
/// project's own.
const PromptPack& default_pack();

/// Reads `pack.json` from dir. Unknown template names or missing fields are
/// configuration errors.
PromptPack load_pack(const std::filesystem::path& dir);

/// Writes `pack.json` (pretty-printed, sorted keys) into dir, creating it.
void save_pack(const PromptPack& pack, const std::filesystem::path& dir);

} // namespace t1::prompts
