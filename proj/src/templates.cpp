#include "r3rec/templates.hpp"

#include <algorithm>

#include "r3rec/common.hpp"
#include "r3rec/io.hpp"
#include "r3rec/random.hpp"

namespace r3rec {

namespace detail {
const std::map<std::string, std::string>& builtin_template_sources();
}

TemplateRegistry TemplateRegistry::builtin() {
    TemplateRegistry r;
    for (const auto& [id, text] : detail::builtin_template_sources()) r.add(id, text);
    return r;
}

void TemplateRegistry::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw InvalidInput("template directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::string id = entry.path().stem().string();
        std::replace(id.begin(), id.end(), '_', '-');
        add(std::move(id), read_file(entry.path()));
    }
}

void TemplateRegistry::add(std::string id, std::string text) { templates_[std::move(id)] = std::move(text); }

bool TemplateRegistry::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const std::string& TemplateRegistry::get(std::string_view id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw InvalidInput("prompt template missing: " + std::string(id));
    return it->second;
}

std::string TemplateRegistry::hash(std::string_view id) const { return hex64(fnv1a64(get(id))); }

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(text.size() * 2);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        const auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) throw InvalidInput("unterminated placeholder in template");
        const std::string name(text.substr(open + 2, close - open - 2));
        auto it = vars.find(name);
        if (it == vars.end()) throw InvalidInput("template placeholder without a value: " + name);
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

}  // namespace r3rec
