#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "figcap/corpus.hpp"
#include "figcap/metrics.hpp"
#include "figcap/prompt_templates.hpp"
#include "figcap/promptkit.hpp"
#include "figcap/types.hpp"

namespace figcap::modelgw {
class Gateway;
}

namespace figcap::quality {

/// One rated caption. raw_response re-parses to score (round-trip invariant).
struct ScoredCaption {
    std::string figure_id;
    std::string caption;
    QualityScore score{1};
    std::string scorer_id;
    std::string raw_response;

    bool operator==(const ScoredCaption&) const = default;
};

/// Rubric prompt for one (figure, caption) pair: the figure image (per
/// policy), the 1..6 rubric with the caption inlined, and the "Score:"
/// answer instruction. Throws InvalidArgumentError on an empty caption.
MessageSequence build_quality_prompt(const corpus::FigureRecord& figure,
                                     std::string_view caption,
                                     const promptkit::PromptTemplates& templates,
                                     promptkit::ImagePolicy images =
                                         promptkit::ImagePolicy::kOmit);

/// First 1..6 integer after the "Score:" anchor; falls back to the first
/// standalone 1..6 integer anywhere. Throws UnparseableScoreError (carrying
/// the raw text) when neither matches.
QualityScore parse_score(std::string_view model_text);

/// What gets scored: only the id, image and caption matter to the rubric.
struct ScoreItem {
    std::string figure_id;
    std::string image_ref;
    std::string caption;

    static ScoreItem from_record(const corpus::FigureRecord& record) {
        return {record.figure_id, record.image_ref, record.caption};
    }
    static ScoreItem from_record(const corpus::FigureRecord& record, std::string caption) {
        return {record.figure_id, record.image_ref, std::move(caption)};
    }
};

struct ScoreFailure {
    std::size_t index = 0;
    std::string figure_id;
    std::string error;
};

/// Order-preserving batch result; items[i] is empty when item i failed.
struct ScoredBatch {
    std::vector<std::optional<ScoredCaption>> items;
    std::vector<ScoreFailure> failures;

    std::vector<ScoredCaption> succeeded() const;
};

struct ScoreOptions {
    std::string backend_id;
    promptkit::ImagePolicy images = promptkit::ImagePolicy::kOmit;
    std::size_t max_concurrency = 1;
};

/// Scores every item through the gateway (cached, retried). One bad reply
/// is recorded as a per-item failure and never aborts the batch.
ScoredBatch score_captions(modelgw::Gateway& gateway, const ScoreOptions& options,
                           std::span<const ScoreItem> items,
                           const promptkit::PromptTemplates& templates);

struct FilterResult {
    std::vector<ScoredCaption> kept;    // score >= threshold, input order
    std::vector<ScoredCaption> dropped; // the rest, input order
};

/// Inclusive threshold split; default keeps scores 3..6.
FilterResult filter_by_quality(std::span<const ScoredCaption> records,
                               QualityScore threshold = QualityScore(3));

/// Spearman + QWK (K=6) + 6x6 confusion between two aligned score lists.
metrics::AgreementReport evaluate_agreement(std::span<const QualityScore> pred,
                                            std::span<const QualityScore> gold);

/// Line-delimited scored-caption files (the SFT corpus for evaluator
/// training); see docs/formats.md.
void write_scored_captions(const std::filesystem::path& path,
                           std::span<const ScoredCaption> records);
std::vector<ScoredCaption> read_scored_captions(const std::filesystem::path& path);

} // namespace figcap::quality
