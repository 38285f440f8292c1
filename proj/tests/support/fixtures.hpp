#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "figcap/corpus.hpp"
#include "figcap/prompt_templates.hpp"

namespace testfix {

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "figcap_test") {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        const auto unique = std::to_string(rd()) + "_" + std::to_string(counter.fetch_add(1));
        path_ = std::filesystem::temp_directory_path() / (tag + "_" + unique);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline const figcap::promptkit::PromptTemplates& templates() {
    static const auto loaded =
        figcap::promptkit::PromptTemplates::load(FIGCAP_SOURCE_TEMPLATES);
    return loaded;
}

inline void write_lines(const std::filesystem::path& path,
                        const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& line : lines)
        out << line << '\n';
}

inline figcap::corpus::FigureRecord make_record(const std::string& figure_id,
                                                const std::string& paper_id,
                                                const std::string& caption) {
    figcap::corpus::FigureRecord rec;
    rec.figure_id = figure_id;
    rec.paper_id = paper_id;
    rec.caption = caption;
    rec.paragraphs = {"paragraph about " + figure_id};
    rec.mentions = {"see " + figure_id};
    rec.ocr_text = {"ocr " + figure_id};
    return rec;
}

} // namespace testfix
