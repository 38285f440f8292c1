#include "figcap/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "figcap/errors.hpp"

namespace figcap::corpus {

using nlohmann::json;

namespace {

std::string require_string(const json& obj, const char* field, std::size_t line) {
    auto it = obj.find(field);
    if (it == obj.end())
        throw SchemaError("missing required field", field, line);
    if (!it->is_string())
        throw SchemaError("field must be a string", field, line);
    return it->get<std::string>();
}

std::vector<std::string> require_string_list(const json& obj, const char* field,
                                             std::size_t line) {
    auto it = obj.find(field);
    if (it == obj.end())
        throw SchemaError("missing required field", field, line);
    if (!it->is_array())
        throw SchemaError("field must be an array of strings", field, line);
    std::vector<std::string> out;
    out.reserve(it->size());
    for (const auto& item : *it) {
        if (!item.is_string())
            throw SchemaError("field must be an array of strings", field, line);
        out.push_back(item.get<std::string>());
    }
    return out;
}

json parse_line(const std::string& line, std::size_t line_no, const char* what) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::exception& ex) {
        throw SchemaError(std::string("malformed ") + what + " line: " + ex.what(), "",
                          line_no);
    }
    if (!obj.is_object())
        throw SchemaError(std::string(what) + " line must be a JSON object", "", line_no);
    return obj;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in)
        throw SchemaError("cannot open file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        fn(line, line_no);
    }
}

} // namespace

const FigureRecord* Dataset::find(const std::string& figure_id) const {
    auto it = index.find(figure_id);
    if (it == index.end())
        return nullptr;
    return &records[it->second];
}

Dataset assemble_dataset(std::vector<FigureRecord> records, std::vector<TaskIds> task_ids,
                         std::string split_name) {
    Dataset ds;
    ds.split_name = std::move(split_name);
    ds.records = std::move(records);

    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& rec = ds.records[i];
        if (rec.figure_id.empty())
            throw SchemaError("figure_id must be non-empty", "figure_id");
        if (!ds.index.emplace(rec.figure_id, i).second)
            throw SchemaError("duplicate figure_id: " + rec.figure_id, "figure_id");
    }

    std::unordered_map<std::string, std::size_t> seen_targets;
    ds.tasks.reserve(task_ids.size());
    for (const auto& ids : task_ids) {
        const FigureRecord* target = ds.find(ids.target_id);
        if (!target)
            throw SchemaError("task target_id not found in records: " + ids.target_id,
                              "target_id", ids.source_line);
        if (!seen_targets.emplace(ids.target_id, ids.source_line).second)
            throw SchemaError("duplicate task for target: " + ids.target_id, "target_id",
                              ids.source_line);

        CaptionTask task;
        task.target = *target;
        task.profiles.reserve(ids.profile_ids.size());
        for (const auto& pid : ids.profile_ids) {
            const FigureRecord* profile = ds.find(pid);
            if (!profile)
                throw SchemaError("task profile_id not found in records: " + pid,
                                  "profile_ids", ids.source_line);
            if (profile->figure_id == target->figure_id)
                throw SchemaError("profile equals target figure: " + pid, "profile_ids",
                                  ids.source_line);
            if (profile->paper_id != target->paper_id)
                throw SchemaError("profile from different paper: " + pid + " (paper " +
                                      profile->paper_id + " vs " + target->paper_id + ")",
                                  "profile_ids", ids.source_line);
            task.profiles.push_back(*profile);
        }
        ds.tasks.push_back(std::move(task));
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& dir, std::string split_name) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir))
        throw SchemaError("dataset path does not exist: " + dir.string());

    const fs::path records_path = fs::is_directory(dir) ? dir / "records.jsonl" : dir;
    const fs::path tasks_path = records_path.parent_path() / "tasks.jsonl";
    if (!fs::exists(records_path))
        throw SchemaError("records file not found: " + records_path.string());

    std::vector<FigureRecord> records;
    for_each_line(records_path, [&](const std::string& line, std::size_t line_no) {
        const json obj = parse_line(line, line_no, "record");
        FigureRecord rec;
        rec.figure_id = require_string(obj, "figure_id", line_no);
        rec.paper_id = require_string(obj, "paper_id", line_no);
        if (obj.contains("image_ref")) {
            if (!obj["image_ref"].is_string())
                throw SchemaError("field must be a string", "image_ref", line_no);
            rec.image_ref = obj["image_ref"].get<std::string>();
        }
        rec.caption = require_string(obj, "caption", line_no);
        rec.paragraphs = require_string_list(obj, "paragraphs", line_no);
        rec.mentions = require_string_list(obj, "mentions", line_no);
        rec.ocr_text = require_string_list(obj, "ocr_text", line_no);
        records.push_back(std::move(rec));
    });

    std::vector<TaskIds> task_ids;
    if (fs::exists(tasks_path)) {
        for_each_line(tasks_path, [&](const std::string& line, std::size_t line_no) {
            const json obj = parse_line(line, line_no, "task");
            TaskIds ids;
            ids.target_id = require_string(obj, "target_id", line_no);
            ids.profile_ids = require_string_list(obj, "profile_ids", line_no);
            ids.source_line = line_no;
            task_ids.push_back(std::move(ids));
        });
    } else {
        // No task file: every record is its own N=0 task, in record order.
        task_ids.reserve(records.size());
        for (const auto& rec : records)
            task_ids.push_back({rec.figure_id, {}, 0});
    }

    return assemble_dataset(std::move(records), std::move(task_ids), std::move(split_name));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::ofstream records_out(dir / "records.jsonl", std::ios::trunc);
    if (!records_out)
        throw Error("cannot write records file in " + dir.string());
    for (const auto& rec : ds.records) {
        json obj;
        obj["figure_id"] = rec.figure_id;
        obj["paper_id"] = rec.paper_id;
        if (!rec.image_ref.empty())
            obj["image_ref"] = rec.image_ref;
        obj["caption"] = rec.caption;
        obj["paragraphs"] = rec.paragraphs;
        obj["mentions"] = rec.mentions;
        obj["ocr_text"] = rec.ocr_text;
        records_out << obj.dump() << '\n';
    }

    std::ofstream tasks_out(dir / "tasks.jsonl", std::ios::trunc);
    if (!tasks_out)
        throw Error("cannot write tasks file in " + dir.string());
    for (const auto& task : ds.tasks) {
        json obj;
        obj["target_id"] = task.target.figure_id;
        json profiles = json::array();
        for (const auto& p : task.profiles)
            profiles.push_back(p.figure_id);
        obj["profile_ids"] = std::move(profiles);
        tasks_out << obj.dump() << '\n';
    }
}

std::map<std::string, std::vector<std::size_t>> group_by_profile_count(const Dataset& ds) {
    std::map<std::string, std::vector<std::size_t>> groups;
    auto& all = groups["All"];
    all.reserve(ds.tasks.size());
    for (std::size_t i = 0; i < ds.tasks.size(); ++i) {
        groups[std::to_string(ds.tasks[i].profile_count())].push_back(i);
        all.push_back(i);
    }
    return groups;
}

std::vector<std::string> ordered_group_labels(
    const std::map<std::string, std::vector<std::size_t>>& groups) {
    std::vector<std::string> numeric;
    bool has_all = false;
    for (const auto& [label, tasks] : groups) {
        if (label == "All")
            has_all = true;
        else
            numeric.push_back(label);
    }
    std::sort(numeric.begin(), numeric.end(), [](const std::string& a, const std::string& b) {
        long long av = 0, bv = 0;
        std::from_chars(a.data(), a.data() + a.size(), av);
        std::from_chars(b.data(), b.data() + b.size(), bv);
        return av < bv;
    });
    if (has_all)
        numeric.push_back("All");
    return numeric;
}

} // namespace figcap::corpus
