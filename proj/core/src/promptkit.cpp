#include "figcap/promptkit.hpp"

#include <cctype>
#include <filesystem>
#include <ostream>

#include <json.hpp>

#include "figcap/errors.hpp"

namespace figcap {

std::string sequence_text(const MessageSequence& seq) {
    std::string out;
    for (const auto& block : seq) {
        if (block.type != MessageBlock::Type::kText)
            continue;
        if (!out.empty())
            out.push_back('\n');
        out += block.content;
    }
    return out;
}

} // namespace figcap

namespace figcap::promptkit {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin])))
        ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1])))
        --end;
    return std::string(s.substr(begin, end - begin));
}

std::string clip(const std::string& field, std::size_t max_chars) {
    if (max_chars == 0 || field.size() <= max_chars)
        return field;
    return field.substr(0, max_chars);
}

std::string join(const std::vector<std::string>& items, const char* sep,
                 std::size_t max_chars) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0)
            out += sep;
        out += clip(items[i], max_chars);
    }
    return out;
}

void append_image(MessageSequence& seq, const corpus::FigureRecord& figure,
                  ImagePolicy policy) {
    switch (policy) {
    case ImagePolicy::kOmit:
        return;
    case ImagePolicy::kRequire:
        if (figure.image_ref.empty())
            throw MissingImageError("figure has no image_ref: " + figure.figure_id);
        if (!std::filesystem::exists(figure.image_ref))
            throw MissingImageError("image_ref does not resolve: " + figure.image_ref +
                                    " (figure " + figure.figure_id + ")");
        seq.push_back(MessageBlock::image(figure.image_ref));
        return;
    case ImagePolicy::kLenient:
        if (!figure.image_ref.empty())
            seq.push_back(MessageBlock::image(figure.image_ref));
        return;
    }
}

// Emits the per-figure field blocks: image, paragraphs, mentions, OCR.
void append_figure_fields(MessageSequence& seq, const corpus::FigureRecord& figure,
                          const InputConfig& config, ImagePolicy images,
                          std::size_t max_field_chars) {
    append_image(seq, figure, images);
    if (config.use_paragraphs && !figure.paragraphs.empty())
        seq.push_back(MessageBlock::text(
            "Paragraphs:\n" + join(figure.paragraphs, "\n\n", max_field_chars)));
    if (config.use_mentions && !figure.mentions.empty())
        seq.push_back(MessageBlock::text("Mentions:\n" +
                                         join(figure.mentions, "\n\n", max_field_chars)));
    if (config.use_ocr && !figure.ocr_text.empty())
        seq.push_back(MessageBlock::text("OCR text: " +
                                         join(figure.ocr_text, "; ", max_field_chars)));
}

// Text after an anchor like "Quality:", or npos when the anchor is missing.
std::size_t find_after_anchor(std::string_view text, std::string_view anchor,
                              std::size_t from = 0) {
    const auto pos = text.find(anchor, from);
    if (pos == std::string_view::npos)
        return std::string_view::npos;
    return pos + anchor.size();
}

} // namespace

InputConfig preset_config(ConfigPreset preset) {
    switch (preset) {
    case ConfigPreset::kFC:
        return {false, false, false};
    case ConfigPreset::kFPC:
        return {true, false, false};
    case ConfigPreset::kFPMC:
        return {true, true, false};
    case ConfigPreset::kFPMOC:
        return {true, true, true};
    }
    throw InvalidArgumentError("unknown config preset");
}

const char* preset_name(ConfigPreset preset) {
    switch (preset) {
    case ConfigPreset::kFC:
        return "fc";
    case ConfigPreset::kFPC:
        return "fpc";
    case ConfigPreset::kFPMC:
        return "fpmc";
    case ConfigPreset::kFPMOC:
        return "fpmoc";
    }
    throw InvalidArgumentError("unknown config preset");
}

std::optional<ConfigPreset> parse_preset(std::string_view name) {
    if (name == "fc")
        return ConfigPreset::kFC;
    if (name == "fpc")
        return ConfigPreset::kFPC;
    if (name == "fpmc")
        return ConfigPreset::kFPMC;
    if (name == "fpmoc")
        return ConfigPreset::kFPMOC;
    return std::nullopt;
}

std::string preset_profile_label(ConfigPreset preset) {
    switch (preset) {
    case ConfigPreset::kFC:
        return "F + C";
    case ConfigPreset::kFPC:
        return "F + P + C";
    case ConfigPreset::kFPMC:
        return "F + P + M + C";
    case ConfigPreset::kFPMOC:
        return "F + P + M + O + C";
    }
    throw InvalidArgumentError("unknown config preset");
}

std::string preset_target_label(ConfigPreset preset) {
    switch (preset) {
    case ConfigPreset::kFC:
        return "F";
    case ConfigPreset::kFPC:
        return "F + P";
    case ConfigPreset::kFPMC:
        return "F + P + M";
    case ConfigPreset::kFPMOC:
        return "F + P + M + O";
    }
    throw InvalidArgumentError("unknown config preset");
}

bool is_paper_preset(const InputConfig& config) {
    for (const auto preset : kAllPresets)
        if (preset_config(preset) == config)
            return true;
    return false;
}

QualityScore GenerationMode::forced_score() const {
    if (kind_ != Kind::kForcedQ || !forced_)
        throw InvalidArgumentError("forced_score() on a non-ForcedQ mode");
    return *forced_;
}

std::string GenerationMode::to_string() const {
    switch (kind_) {
    case Kind::kPlain:
        return "plain";
    case Kind::kPredictedQ:
        return "predicted-q";
    case Kind::kForcedQ:
        return "forced-q=" + std::to_string(forced_->value());
    }
    throw InvalidArgumentError("unknown generation mode");
}

std::optional<GenerationMode> GenerationMode::parse(std::string_view text) {
    if (text == "plain")
        return plain();
    if (text == "predicted-q")
        return predicted_q();
    constexpr std::string_view kForcedPrefix = "forced-q=";
    if (text.size() == kForcedPrefix.size() + 1 && text.starts_with(kForcedPrefix)) {
        const char digit = text.back();
        if (digit >= '1' && digit <= '6')
            return forced_q(QualityScore(digit - '0'));
    }
    return std::nullopt;
}

MessageSequence assemble_messages(const corpus::CaptionTask& task, const InputConfig& config,
                                  const GenerationMode& mode, const PromptTemplates& templates,
                                  ImagePolicy images, std::size_t max_field_chars) {
    MessageSequence seq;
    seq.push_back(MessageBlock::text(templates.caption_intro));

    if (mode.kind() == GenerationMode::Kind::kForcedQ) {
        seq.push_back(MessageBlock::text(render_placeholders(
            templates.mode_forced_q,
            {{"score", std::to_string(mode.forced_score().value())}})));
    }

    for (std::size_t i = 0; i < task.profiles.size(); ++i) {
        const auto& profile = task.profiles[i];
        seq.push_back(MessageBlock::text("=== Profile figure " + std::to_string(i + 1) +
                                         " [" + profile.figure_id + "] ==="));
        append_figure_fields(seq, profile, config, images, max_field_chars);
        seq.push_back(
            MessageBlock::text("Caption: " + clip(profile.caption, max_field_chars)));
    }

    seq.push_back(
        MessageBlock::text("=== Target figure [" + task.target.figure_id + "] ==="));
    append_figure_fields(seq, task.target, config, images, max_field_chars);

    switch (mode.kind()) {
    case GenerationMode::Kind::kPlain:
        seq.push_back(MessageBlock::text(templates.mode_plain));
        break;
    case GenerationMode::Kind::kPredictedQ:
        seq.push_back(MessageBlock::text(templates.mode_predicted_q));
        break;
    case GenerationMode::Kind::kForcedQ:
        break; // the conditioning prefix already carries the instruction
    }
    return seq;
}

GenerationResult parse_generation(std::string_view raw, const GenerationMode& mode) {
    GenerationResult result;
    result.raw_response = std::string(raw);

    if (mode.kind() == GenerationMode::Kind::kPredictedQ) {
        const auto q_pos = find_after_anchor(raw, "Quality:");
        if (q_pos == std::string_view::npos)
            throw GenerationParseError("PredictedQ reply without a Quality: line");
        std::size_t i = q_pos;
        while (i < raw.size() && raw[i] == ' ')
            ++i;
        if (i >= raw.size() || !std::isdigit(static_cast<unsigned char>(raw[i])))
            throw GenerationParseError("PredictedQ reply without a quality digit");
        // Reject multi-digit values like "12" rather than truncating them.
        if (i + 1 < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i + 1])))
            throw GenerationParseError("PredictedQ quality is not a 1..6 score");
        const auto score = QualityScore::try_from(raw[i] - '0');
        if (!score)
            throw GenerationParseError("PredictedQ quality out of range 1..6");
        result.predicted_quality = *score;

        const auto c_pos = find_after_anchor(raw, "Caption:", i);
        if (c_pos == std::string_view::npos)
            throw GenerationParseError("PredictedQ reply without a Caption: line");
        result.caption = trim(raw.substr(c_pos));
    } else {
        std::string text = trim(raw);
        constexpr std::string_view kLabel = "Caption:";
        if (text.starts_with(kLabel))
            text = trim(std::string_view(text).substr(kLabel.size()));
        result.caption = std::move(text);
    }

    if (result.caption.empty())
        throw GenerationParseError("model reply contained an empty caption");
    return result;
}

std::string render_quality_caption(QualityScore quality, std::string_view caption) {
    std::string out = "Quality: " + std::to_string(quality.value());
    out += "\nCaption: ";
    out += caption;
    return out;
}

std::string serialize_messages_json(const MessageSequence& seq) {
    json arr = json::array();
    for (const auto& block : seq) {
        if (block.type == MessageBlock::Type::kText)
            arr.push_back({{"type", "text"}, {"text", block.content}});
        else
            arr.push_back({{"type", "image"}, {"image", block.content}});
    }
    return arr.dump();
}

SftExportStats export_sft_records(const std::vector<corpus::CaptionTask>& tasks,
                                  const SftExportOptions& options,
                                  const std::map<std::string, QualityScore>& scores,
                                  const PromptTemplates& templates, std::ostream& out) {
    const bool needs_scores = options.quality_aware || options.min_score.has_value();
    const GenerationMode mode =
        options.quality_aware ? GenerationMode::predicted_q() : GenerationMode::plain();

    SftExportStats stats;
    for (const auto& task : tasks) {
        const auto& target = task.target;
        if (target.caption.empty())
            throw InvalidArgumentError("SFT export target has no ground-truth caption: " +
                                       target.figure_id);

        std::optional<QualityScore> score;
        if (needs_scores) {
            auto it = scores.find(target.figure_id);
            if (it == scores.end())
                throw InvalidArgumentError("SFT export target has no quality score: " +
                                           target.figure_id);
            score = it->second;
        }
        if (options.min_score && *score < *options.min_score) {
            ++stats.filtered_out;
            continue;
        }

        const auto messages = assemble_messages(task, options.config, mode, templates,
                                                options.images, options.max_field_chars);
        json record;
        record["figure_id"] = target.figure_id;
        record["messages"] = json::parse(serialize_messages_json(messages));
        record["target"] = options.quality_aware
                               ? render_quality_caption(*score, target.caption)
                               : target.caption;
        out << record.dump() << '\n';
        ++stats.written;
    }
    return stats;
}

} // namespace figcap::promptkit
