#include "figcap/prompt_templates.hpp"

#include <fstream>
#include <sstream>

#include "figcap/errors.hpp"
#include "figcap/hash.hpp"

namespace figcap::promptkit {

namespace {

std::string read_template(const std::filesystem::path& dir, const char* name) {
    const auto path = dir / name;
    std::ifstream in(path);
    if (!in)
        throw ConfigError("missing prompt template: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    // Trailing newline is an editor artifact, not wording.
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
        text.pop_back();
    if (text.empty())
        throw ConfigError("empty prompt template: " + path.string());
    return text;
}

} // namespace

std::string render_placeholders(std::string_view tmpl,
                                const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        const auto close = tmpl.find('}', open + 1);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const std::string key(tmpl.substr(open + 1, close - open - 1));
        auto it = vars.find(key);
        if (it != vars.end()) {
            out.append(it->second);
        } else {
            out.append(tmpl.substr(open, close - open + 1));
        }
        pos = close + 1;
    }
    return out;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("prompt template directory not found: " + dir.string());

    PromptTemplates t;
    t.caption_intro = read_template(dir, "caption_intro.txt");
    t.mode_plain = read_template(dir, "mode_plain.txt");
    t.mode_predicted_q = read_template(dir, "mode_predicted_q.txt");
    t.mode_forced_q = read_template(dir, "mode_forced_q.txt");
    t.quality_rubric = read_template(dir, "quality_rubric.txt");

    // Filenames are sorted already; keep the digest independent of load order.
    std::string blob;
    const std::pair<const char*, const std::string*> parts[] = {
        {"caption_intro.txt", &t.caption_intro},
        {"mode_forced_q.txt", &t.mode_forced_q},
        {"mode_plain.txt", &t.mode_plain},
        {"mode_predicted_q.txt", &t.mode_predicted_q},
        {"quality_rubric.txt", &t.quality_rubric},
    };
    for (const auto& [name, content] : parts) {
        blob += name;
        blob += '\0';
        blob += *content;
        blob += '\0';
    }
    t.digest = sha256_hex(blob);
    return t;
}

} // namespace figcap::promptkit
