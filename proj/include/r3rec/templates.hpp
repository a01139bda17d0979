#pragma once
/// @file templates.hpp
/// @brief Versioned prompt templates with {{placeholder}} substitution.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace r3rec {

inline constexpr std::string_view kJudgeTemplate = "judge-v1";
inline constexpr std::string_view kSlateTemplate = "slate-v1";
inline constexpr std::string_view kTagsTemplate = "tags-v1";

class TemplateRegistry {
public:
    /// The templates compiled into the library (templates/*.txt).
    static TemplateRegistry builtin();

    /// Adds or replaces every `<name>.txt` in `dir` under id `<name>` with
    /// '_' mapped to '-'.
    void load_directory(const std::filesystem::path& dir);
    void add(std::string id, std::string text);

    bool contains(std::string_view id) const;
    /// Throws InvalidInput when the id is unknown.
    const std::string& get(std::string_view id) const;
    /// FNV-1a of the template text, as 16 hex digits.
    std::string hash(std::string_view id) const;

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

/// Replaces each {{name}} with vars.at(name). Throws InvalidInput for a
/// placeholder without a value or an unterminated "{{".
std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);

}  // namespace r3rec
