#include "figcap/quality.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <future>
#include <vector>

#include <json.hpp>

#include "figcap/errors.hpp"
#include "figcap/modelgw.hpp"

namespace figcap::quality {

using nlohmann::json;

namespace {

bool is_digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

// A digit counts as standalone when its neighbours are not alphanumeric,
// so "6." parses but "16" and "q6" do not.
std::optional<int> standalone_score_at(std::string_view text, std::size_t i) {
    if (!is_digit(text[i]))
        return std::nullopt;
    if (i > 0 && std::isalnum(static_cast<unsigned char>(text[i - 1])))
        return std::nullopt;
    if (i + 1 < text.size() && std::isalnum(static_cast<unsigned char>(text[i + 1])))
        return std::nullopt;
    const int value = text[i] - '0';
    if (value < QualityScore::kMin || value > QualityScore::kMax)
        return std::nullopt;
    return value;
}

} // namespace

MessageSequence build_quality_prompt(const corpus::FigureRecord& figure,
                                     std::string_view caption,
                                     const promptkit::PromptTemplates& templates,
                                     promptkit::ImagePolicy images) {
    if (caption.empty())
        throw InvalidArgumentError("cannot rate an empty caption (figure " +
                                   figure.figure_id + ")");

    MessageSequence seq;
    switch (images) {
    case promptkit::ImagePolicy::kOmit:
        break;
    case promptkit::ImagePolicy::kRequire:
        if (figure.image_ref.empty())
            throw MissingImageError("figure has no image_ref: " + figure.figure_id);
        if (!std::filesystem::exists(figure.image_ref))
            throw MissingImageError("image_ref does not resolve: " + figure.image_ref +
                                    " (figure " + figure.figure_id + ")");
        seq.push_back(MessageBlock::image(figure.image_ref));
        break;
    case promptkit::ImagePolicy::kLenient:
        if (!figure.image_ref.empty())
            seq.push_back(MessageBlock::image(figure.image_ref));
        break;
    }
    seq.push_back(MessageBlock::text(promptkit::render_placeholders(
        templates.quality_rubric, {{"caption", std::string(caption)}})));
    return seq;
}

QualityScore parse_score(std::string_view model_text) {
    constexpr std::string_view kAnchor = "Score:";
    const auto anchor = model_text.find(kAnchor);
    if (anchor != std::string_view::npos) {
        for (std::size_t i = anchor + kAnchor.size(); i < model_text.size(); ++i) {
            if (is_digit(model_text[i])) {
                if (auto score = standalone_score_at(model_text, i))
                    return QualityScore(*score);
                break; // anchored digit out of range; fall back to full scan
            }
            if (!std::isspace(static_cast<unsigned char>(model_text[i])))
                break; // something other than whitespace before the digit
        }
    }
    for (std::size_t i = 0; i < model_text.size(); ++i) {
        if (auto score = standalone_score_at(model_text, i))
            return QualityScore(*score);
    }
    throw UnparseableScoreError(std::string(model_text));
}

std::vector<ScoredCaption> ScoredBatch::succeeded() const {
    std::vector<ScoredCaption> out;
    out.reserve(items.size());
    for (const auto& item : items)
        if (item)
            out.push_back(*item);
    return out;
}

ScoredBatch score_captions(modelgw::Gateway& gateway, const ScoreOptions& options,
                           std::span<const ScoreItem> items,
                           const promptkit::PromptTemplates& templates) {
    if (!gateway.has_backend(options.backend_id))
        throw ConfigError("backend not configured: " + options.backend_id);
    const std::string scorer_id = options.backend_id;

    ScoredBatch batch;
    batch.items.resize(items.size());

    auto score_one = [&](std::size_t i) -> std::optional<ScoreFailure> {
        const auto& item = items[i];
        try {
            corpus::FigureRecord figure;
            figure.figure_id = item.figure_id;
            figure.image_ref = item.image_ref;
            const auto prompt =
                build_quality_prompt(figure, item.caption, templates, options.images);
            const auto response = gateway.send(options.backend_id, prompt);
            ScoredCaption scored;
            scored.figure_id = item.figure_id;
            scored.caption = item.caption;
            scored.score = parse_score(response.text);
            scored.scorer_id = scorer_id;
            scored.raw_response = response.text;
            batch.items[i] = std::move(scored);
            return std::nullopt;
        } catch (const Error& ex) {
            return ScoreFailure{i, item.figure_id, ex.what()};
        }
    };

    const std::size_t workers = options.max_concurrency == 0 ? 1 : options.max_concurrency;
    if (workers <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (auto failure = score_one(i))
                batch.failures.push_back(std::move(*failure));
        }
        return batch;
    }

    // Windowed fan-out, drained oldest-first: results land by index and
    // failures stay in input order whatever the completion timing.
    std::vector<std::future<std::optional<ScoreFailure>>> window;
    std::size_t next = 0;
    while (next < items.size() || !window.empty()) {
        while (next < items.size() && window.size() < workers) {
            window.push_back(std::async(std::launch::async, score_one, next));
            ++next;
        }
        if (auto failure = window.front().get())
            batch.failures.push_back(std::move(*failure));
        window.erase(window.begin());
    }
    return batch;
}

FilterResult filter_by_quality(std::span<const ScoredCaption> records,
                               QualityScore threshold) {
    FilterResult result;
    for (const auto& record : records) {
        if (record.score >= threshold)
            result.kept.push_back(record);
        else
            result.dropped.push_back(record);
    }
    return result;
}

metrics::AgreementReport evaluate_agreement(std::span<const QualityScore> pred,
                                            std::span<const QualityScore> gold) {
    if (pred.size() != gold.size())
        throw InvalidArgumentError("evaluate_agreement: input lengths differ");
    if (pred.size() < 2)
        throw InvalidArgumentError("evaluate_agreement: need at least 2 pairs");

    std::vector<double> a_real(pred.size());
    std::vector<double> b_real(gold.size());
    std::vector<int> a_int(pred.size());
    std::vector<int> b_int(gold.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        a_int[i] = pred[i].value();
        b_int[i] = gold[i].value();
        a_real[i] = static_cast<double>(a_int[i]);
        b_real[i] = static_cast<double>(b_int[i]);
    }

    metrics::AgreementReport report;
    report.spearman = metrics::spearman(a_real, b_real);
    report.qwk = metrics::qwk(a_int, b_int, QualityScore::kLevels);
    report.confusion = metrics::confusion(a_int, b_int, QualityScore::kLevels);
    return report;
}

void write_scored_captions(const std::filesystem::path& path,
                           std::span<const ScoredCaption> records) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw Error("cannot write scored captions: " + path.string());
    for (const auto& record : records) {
        json obj;
        obj["figure_id"] = record.figure_id;
        obj["caption"] = record.caption;
        obj["score"] = record.score.value();
        obj["scorer_id"] = record.scorer_id;
        obj["raw_response"] = record.raw_response;
        out << obj.dump() << '\n';
    }
}

std::vector<ScoredCaption> read_scored_captions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read scored captions: " + path.string());

    std::vector<ScoredCaption> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& ex) {
            throw SchemaError(std::string("malformed scored-caption line: ") + ex.what(), "",
                              line_no);
        }
        ScoredCaption record;
        try {
            record.figure_id = obj.at("figure_id").get<std::string>();
            record.caption = obj.at("caption").get<std::string>();
            record.score = QualityScore(obj.at("score").get<int>());
            record.scorer_id = obj.value("scorer_id", "");
            record.raw_response = obj.value("raw_response", "");
        } catch (const json::exception& ex) {
            throw SchemaError(std::string("scored-caption line missing fields: ") + ex.what(),
                              "", line_no);
        }
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace figcap::quality
