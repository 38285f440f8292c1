#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "figcap/corpus.hpp"
#include "figcap/metrics.hpp"
#include "figcap/modelgw.hpp"
#include "figcap/promptkit.hpp"
#include "figcap/quality.hpp"
#include "figcap/types.hpp"

namespace figcap::runner {

/// Everything that determines one generation run. Serialized into the run
/// manifest so a directory can only ever be resumed with the same spec.
struct ExperimentSpec {
    std::string dataset_path; // informational, recorded in the manifest
    std::string split_name;
    promptkit::InputConfig config;
    promptkit::GenerationMode mode = promptkit::GenerationMode::plain();
    std::string backend_id;
    std::filesystem::path output_dir;
    std::optional<std::string> quality_backend_id;
    std::string template_digest;
    std::uint64_t seed = 17;
    bool include_images = false;
    double max_failure_fraction = 0.5;
    std::size_t max_field_chars = 0; // prompt field cap, 0 = uncapped
};

struct PredictionRecord {
    std::string figure_id;
    bool ok = false;
    std::string generated_caption;
    std::optional<QualityScore> predicted_quality;
    std::string raw_response;
    std::string request_key;
    std::string error;

    bool operator==(const PredictionRecord&) const = default;
};

/// Append-only store of per-task outcomes, one JSON line per record.
/// Opening an existing file makes a run resumable: records already present
/// are never regenerated.
class PredictionStore {
public:
    PredictionStore() = default;

    /// Binds to `file`, loading any existing records.
    static PredictionStore open(const std::filesystem::path& file);

    const std::vector<PredictionRecord>& records() const { return records_; }
    const PredictionRecord* find(const std::string& figure_id) const;
    std::size_t size() const { return records_.size(); }
    std::size_t failure_count() const;

    /// Appends in memory and, when bound to a file, writes through.
    void append(PredictionRecord record);

    const std::filesystem::path& file() const { return file_; }

private:
    std::filesystem::path file_;
    std::vector<PredictionRecord> records_;
    std::map<std::string, std::size_t> by_figure_;
};

struct RunOptions {
    std::size_t stop_after = 0;      // stop after N newly processed tasks (0 = all)
    std::size_t max_concurrency = 0; // 0 = the backend config's value
};

/// Generates one prediction (or one recorded failure) per task, writing
/// predictions in task order so interrupted runs resume cleanly. Writes the
/// manifest first and refuses to reuse a directory whose manifest differs.
/// Throws AggregateFailureError when more than max_failure_fraction of the
/// tasks failed.
PredictionStore run_generation(const corpus::Dataset& ds, const ExperimentSpec& spec,
                               modelgw::Gateway& gateway,
                               const promptkit::PromptTemplates& templates,
                               const RunOptions& options = {});

struct GroupEval {
    metrics::MetricReport report;
    std::size_t failures = 0; // tasks whose generation failed (scored as zeros)

    bool operator==(const GroupEval&) const = default;
};

/// Macro-averaged metrics of generated vs gold captions per profile-count
/// group. Failed generations count as all-zero samples; a task with no
/// record at all raises MissingPredictionError.
std::map<std::string, GroupEval> evaluate_by_profile_count(const PredictionStore& store,
                                                           const corpus::Dataset& ds);

/// One full generation + evaluation per input preset, sharing the gateway
/// cache. Runs land in spec.output_dir/<preset>. Returns the "All" group
/// of each preset, keyed in ablation row order (FC first).
std::map<promptkit::ConfigPreset, GroupEval> run_ablation(
    const corpus::Dataset& ds, const ExperimentSpec& base_spec, modelgw::Gateway& gateway,
    const promptkit::PromptTemplates& templates,
    std::span<const promptkit::ConfigPreset> presets = promptkit::kAllPresets,
    const RunOptions& options = {});

/// One row of the quality/overlap trade-off table: tasks bucketed by the
/// quality of their gold captions.
struct TradeoffRow {
    int target_quality_bucket = 1;
    std::optional<double> mean_quality_forced;    // null when nothing scorable
    std::optional<double> mean_quality_predicted;
    std::optional<double> rouge_l_forced;
    std::optional<double> rouge_l_predicted;
    std::size_t n = 0;
    std::size_t failed_forced = 0; // generation failed or its score did
    std::size_t failed_predicted = 0;
};

struct TradeoffReport {
    std::vector<TradeoffRow> rows; // exactly 6, buckets 1..6 in order
    std::array<std::size_t, 6> forced_quality_hist{};
    std::array<std::size_t, 6> predicted_quality_hist{};
    std::optional<double> forced_mean_quality;
    std::optional<double> predicted_mean_quality;
    std::size_t tasks = 0;
};

struct TradeoffOptions {
    std::string quality_backend_id;
    promptkit::ImagePolicy images = promptkit::ImagePolicy::kOmit;
    std::size_t max_concurrency = 1;
};

/// Scores both strategies' generations with the quality backend and buckets
/// them by gold-caption quality. Both stores must cover every task; every
/// gold caption must appear in gold_scores.
TradeoffReport quality_tradeoff_report(const corpus::Dataset& ds,
                                       const PredictionStore& forced,
                                       const PredictionStore& predicted,
                                       const std::map<std::string, QualityScore>& gold_scores,
                                       modelgw::Gateway& gateway,
                                       const TradeoffOptions& options,
                                       const promptkit::PromptTemplates& templates);

// --- report emission (deterministic bytes for identical inputs) ----------

struct EmitOptions {
    bool markdown = true;
    bool csv = true;
};

/// Writes <basename>.json always, plus .md/.csv per options; returns the
/// paths written.
std::vector<std::filesystem::path> emit_profile_count_report(
    const std::map<std::string, GroupEval>& groups, const std::filesystem::path& out_dir,
    const std::string& basename, const EmitOptions& options = {});

std::vector<std::filesystem::path> emit_ablation_report(
    const std::map<promptkit::ConfigPreset, GroupEval>& rows,
    const std::filesystem::path& out_dir, const std::string& basename,
    const EmitOptions& options = {});

std::vector<std::filesystem::path> emit_tradeoff_report(const TradeoffReport& report,
                                                        const std::filesystem::path& out_dir,
                                                        const std::string& basename,
                                                        const EmitOptions& options = {});

std::vector<std::filesystem::path> emit_agreement_report(
    const metrics::AgreementReport& report, const std::filesystem::path& out_dir,
    const std::string& basename, const EmitOptions& options = {});

/// Re-renders a previously written .json results file (any kind above).
std::vector<std::filesystem::path> render_report_file(const std::filesystem::path& results_json,
                                                      const std::filesystem::path& out_dir,
                                                      const EmitOptions& options = {});

/// Self-contained SVG heatmap of a 6x6 agreement matrix: shaded cells with
/// counts, axis labels 1..6. No plotting framework involved.
void emit_confusion_plot(const metrics::AgreementReport& report,
                         const std::filesystem::path& path,
                         const std::string& row_label = "evaluator A",
                         const std::string& col_label = "evaluator B");

} // namespace figcap::runner
