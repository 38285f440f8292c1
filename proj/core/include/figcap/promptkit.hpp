#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "figcap/corpus.hpp"
#include "figcap/prompt_templates.hpp"
#include "figcap/types.hpp"

namespace figcap::promptkit {

/// Which optional text fields accompany each figure. Figures and profile
/// captions are always included.
struct InputConfig {
    bool use_paragraphs = false;
    bool use_mentions = false;
    bool use_ocr = false;

    bool operator==(const InputConfig&) const = default;
};

/// The four configurations reported in the ablation table, smallest first.
enum class ConfigPreset { kFC, kFPC, kFPMC, kFPMOC };

inline constexpr ConfigPreset kAllPresets[] = {ConfigPreset::kFC, ConfigPreset::kFPC,
                                               ConfigPreset::kFPMC, ConfigPreset::kFPMOC};

InputConfig preset_config(ConfigPreset preset);
const char* preset_name(ConfigPreset preset);              // "fc", "fpc", ...
std::optional<ConfigPreset> parse_preset(std::string_view name);
std::string preset_profile_label(ConfigPreset preset);     // "F + P + M + O + C"
std::string preset_target_label(ConfigPreset preset);      // "F + P + M + O"

/// True when the config is one of the four named presets.
bool is_paper_preset(const InputConfig& config);

/// How a generation prompt asks for quality.
///   Plain      - just write the caption.
///   PredictedQ - predict a 1..6 quality score, then write the caption.
///   ForcedQ(q) - assert quality q up front and write a caption at that level.
class GenerationMode {
public:
    enum class Kind { kPlain, kPredictedQ, kForcedQ };

    static GenerationMode plain() { return GenerationMode(Kind::kPlain, std::nullopt); }
    static GenerationMode predicted_q() {
        return GenerationMode(Kind::kPredictedQ, std::nullopt);
    }
    static GenerationMode forced_q(QualityScore score) {
        return GenerationMode(Kind::kForcedQ, score);
    }

    Kind kind() const { return kind_; }
    QualityScore forced_score() const; // throws unless kind == kForcedQ

    std::string to_string() const; // "plain" | "predicted-q" | "forced-q=6"
    static std::optional<GenerationMode> parse(std::string_view text);

    bool operator==(const GenerationMode&) const = default;

private:
    GenerationMode(Kind kind, std::optional<QualityScore> forced)
        : kind_(kind), forced_(forced) {}

    Kind kind_;
    std::optional<QualityScore> forced_;
};

/// Image handling during assembly.
///   kOmit    - never emit image blocks (text-only runs).
///   kRequire - emit image blocks; a missing or dangling ref is an error.
///   kLenient - emit image blocks for whatever refs exist, verbatim.
enum class ImagePolicy { kOmit, kRequire, kLenient };

/// Builds the model input: profile blocks first (image, paragraphs, mentions,
/// OCR, caption per profile), then the target block (same minus caption),
/// framed by the intro and the mode-specific instruction blocks. Every field
/// lands in its own text block, so configs grow by block inclusion.
///
/// max_field_chars is a hard cap per field string (paragraph, mention, OCR
/// item, profile caption); 0 means uncapped. Truncation is the only budget
/// control this layer offers.
MessageSequence assemble_messages(const corpus::CaptionTask& task, const InputConfig& config,
                                  const GenerationMode& mode, const PromptTemplates& templates,
                                  ImagePolicy images = ImagePolicy::kOmit,
                                  std::size_t max_field_chars = 0);

struct GenerationResult {
    std::string caption;
    std::optional<QualityScore> predicted_quality; // present iff PredictedQ
    std::string raw_response;
};

/// Parses a model reply according to the mode's output protocol. Plain and
/// ForcedQ replies are the trimmed text (an echoed "Caption:" label is
/// stripped); PredictedQ replies must carry "Quality: <1-6>" then "Caption:".
GenerationResult parse_generation(std::string_view raw, const GenerationMode& mode);

/// The dual-output wire form: "Quality: <q>\nCaption: <caption>".
std::string render_quality_caption(QualityScore quality, std::string_view caption);

/// JSON form used in SFT exports and cache keys; see docs/formats.md.
std::string serialize_messages_json(const MessageSequence& seq);

struct SftExportOptions {
    InputConfig config;
    bool quality_aware = false;
    std::optional<QualityScore> min_score; // drop targets scored below this
    ImagePolicy images = ImagePolicy::kLenient;
    std::size_t max_field_chars = 0;
};

struct SftExportStats {
    std::size_t written = 0;
    std::size_t filtered_out = 0;
};

/// One JSON line per task: {"figure_id", "messages", "target"}. Targets are
/// the gold caption, prefixed by its quality line when quality_aware. Tasks
/// whose target score falls below min_score are skipped and counted.
SftExportStats export_sft_records(const std::vector<corpus::CaptionTask>& tasks,
                                  const SftExportOptions& options,
                                  const std::map<std::string, QualityScore>& scores,
                                  const PromptTemplates& templates, std::ostream& out);

} // namespace figcap::promptkit
