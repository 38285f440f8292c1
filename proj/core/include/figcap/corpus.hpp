#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace figcap::corpus {

/// One figure with its ground-truth caption and the text fields attached to
/// it in the source paper (explanatory paragraphs, direct mentions, OCR).
struct FigureRecord {
    std::string figure_id;
    std::string paper_id;
    std::string image_ref; // path/URI; empty = no image (text-only runs)
    std::string caption;
    std::vector<std::string> paragraphs;
    std::vector<std::string> mentions;
    std::vector<std::string> ocr_text;

    bool operator==(const FigureRecord&) const = default;
};

/// A generation target plus N >= 0 profile figures from the same paper.
/// Profile order is the order given by the task file.
struct CaptionTask {
    FigureRecord target;
    std::vector<FigureRecord> profiles;

    std::size_t profile_count() const { return profiles.size(); }

    bool operator==(const CaptionTask&) const = default;
};

/// Immutable after load; safe to share across threads.
struct Dataset {
    std::vector<FigureRecord> records;
    std::vector<CaptionTask> tasks;
    std::string split_name;

    const FigureRecord* find(const std::string& figure_id) const;

    bool operator==(const Dataset& other) const {
        return records == other.records && tasks == other.tasks &&
               split_name == other.split_name;
    }

    // Loader-internal; maps figure_id -> index into records.
    std::unordered_map<std::string, std::size_t> index;
};

/// Task definition as read from the task file, before id resolution.
struct TaskIds {
    std::string target_id;
    std::vector<std::string> profile_ids;
    std::size_t source_line = 0; // 1-based line in tasks.jsonl, 0 = synthetic
};

/// Validates every invariant (unique non-empty ids, resolvable tasks, same
/// paper, target not among its own profiles) and builds the id index.
/// Throws SchemaError with field/line context on the first violation.
Dataset assemble_dataset(std::vector<FigureRecord> records, std::vector<TaskIds> task_ids,
                         std::string split_name);

/// Loads `records.jsonl` (+ optional `tasks.jsonl`) from a dataset directory.
/// Without a task file every record becomes an N=0 task, in record order.
/// See docs/formats.md for the line schemas.
Dataset load_dataset(const std::filesystem::path& dir, std::string split_name);

/// Writes records.jsonl + tasks.jsonl so that load_dataset() round-trips.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Task indices grouped by profile count. Literal-N labels ("0", "1", ...)
/// appear only when tasks with that N exist; "All" is always present and
/// holds every task.
std::map<std::string, std::vector<std::size_t>> group_by_profile_count(const Dataset& ds);

/// Group labels in emission order: numeric ascending, then "All".
std::vector<std::string> ordered_group_labels(
    const std::map<std::string, std::vector<std::size_t>>& groups);

} // namespace figcap::corpus
