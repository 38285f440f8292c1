#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace figcap::promptkit {

/// Substitutes every "{name}" placeholder; unknown placeholders are left
/// verbatim so template typos stay visible in output.
std::string render_placeholders(std::string_view tmpl,
                                const std::map<std::string, std::string>& vars);

/// The versioned prompt wording, loaded from a template directory. Reports
/// record `digest` so results can be tied to the exact wording used.
struct PromptTemplates {
    std::string caption_intro;    // caption_intro.txt
    std::string mode_plain;       // mode_plain.txt
    std::string mode_predicted_q; // mode_predicted_q.txt
    std::string mode_forced_q;    // mode_forced_q.txt, placeholder {score}
    std::string quality_rubric;   // quality_rubric.txt, placeholder {caption}

    std::string digest; // sha256 over sorted (filename, content) pairs

    /// Throws ConfigError when the directory or a required file is missing.
    static PromptTemplates load(const std::filesystem::path& dir);
};

} // namespace figcap::promptkit
