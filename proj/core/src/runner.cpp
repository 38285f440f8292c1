#include "figcap/runner.hpp"

#include <algorithm>
#include <fstream>
#include <future>

#include <json.hpp>

#include "figcap/errors.hpp"
#include "figcap/hash.hpp"

namespace figcap::runner {

using nlohmann::json;

namespace {

json spec_to_manifest(const ExperimentSpec& spec, modelgw::Gateway& gateway) {
    json obj;
    obj["backend_config_sha256"] =
        modelgw::backend_config_digest(gateway.config(spec.backend_id));
    obj["backend_id"] = spec.backend_id;
    obj["config"] = {{"use_mentions", spec.config.use_mentions},
                     {"use_ocr", spec.config.use_ocr},
                     {"use_paragraphs", spec.config.use_paragraphs}};
    obj["dataset_path"] = spec.dataset_path;
    obj["include_images"] = spec.include_images;
    obj["max_failure_fraction"] = spec.max_failure_fraction;
    obj["max_field_chars"] = spec.max_field_chars;
    obj["mode"] = spec.mode.to_string();
    if (spec.quality_backend_id)
        obj["quality_backend_id"] = *spec.quality_backend_id;
    else
        obj["quality_backend_id"] = nullptr;
    obj["seed"] = spec.seed;
    obj["split_name"] = spec.split_name;
    obj["template_sha256"] = spec.template_digest;
    return obj;
}

void write_or_check_manifest(const ExperimentSpec& spec, modelgw::Gateway& gateway) {
    const auto manifest_path = spec.output_dir / "manifest.json";
    const json manifest = spec_to_manifest(spec, gateway);

    if (std::filesystem::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        json existing;
        try {
            in >> existing;
        } catch (const json::exception& ex) {
            throw ManifestMismatchError("unreadable manifest in " + spec.output_dir.string() +
                                        ": " + ex.what());
        }
        if (existing != manifest)
            throw ManifestMismatchError(
                "output dir " + spec.output_dir.string() +
                " belongs to a different experiment; use a fresh --out directory");
        return; // same spec: resume
    }

    const auto tmp = spec.output_dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw Error("cannot write manifest: " + tmp.string());
        out << manifest.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, manifest_path);
}

json record_to_json(const PredictionRecord& record) {
    json obj;
    obj["figure_id"] = record.figure_id;
    obj["ok"] = record.ok;
    obj["generated_caption"] = record.generated_caption;
    if (record.predicted_quality)
        obj["predicted_quality"] = record.predicted_quality->value();
    obj["raw_response"] = record.raw_response;
    obj["request_key"] = record.request_key;
    if (!record.error.empty())
        obj["error"] = record.error;
    return obj;
}

PredictionRecord record_from_json(const json& obj, std::size_t line_no) {
    PredictionRecord record;
    try {
        record.figure_id = obj.at("figure_id").get<std::string>();
        record.ok = obj.at("ok").get<bool>();
        record.generated_caption = obj.value("generated_caption", "");
        if (obj.contains("predicted_quality"))
            record.predicted_quality = QualityScore(obj["predicted_quality"].get<int>());
        record.raw_response = obj.value("raw_response", "");
        record.request_key = obj.value("request_key", "");
        record.error = obj.value("error", "");
    } catch (const json::exception& ex) {
        throw SchemaError(std::string("malformed prediction record: ") + ex.what(), "",
                          line_no);
    }
    return record;
}

metrics::SampleScores score_record(const PredictionRecord* record,
                                   const corpus::FigureRecord& target) {
    if (!record || !record->ok)
        return {}; // failed generations count as zeros
    return metrics::score_pair(metrics::tokenize(record->generated_caption),
                               metrics::tokenize(target.caption));
}

} // namespace

PredictionStore PredictionStore::open(const std::filesystem::path& file) {
    PredictionStore store;
    store.file_ = file;
    if (file.has_parent_path())
        std::filesystem::create_directories(file.parent_path());

    std::ifstream in(file);
    if (in) {
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
                throw SchemaError(std::string("malformed prediction line: ") + ex.what(), "",
                                  line_no);
            }
            auto record = record_from_json(obj, line_no);
            store.by_figure_[record.figure_id] = store.records_.size();
            store.records_.push_back(std::move(record));
        }
    }
    return store;
}

const PredictionRecord* PredictionStore::find(const std::string& figure_id) const {
    auto it = by_figure_.find(figure_id);
    if (it == by_figure_.end())
        return nullptr;
    return &records_[it->second];
}

std::size_t PredictionStore::failure_count() const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(),
                      [](const PredictionRecord& r) { return !r.ok; }));
}

void PredictionStore::append(PredictionRecord record) {
    if (by_figure_.count(record.figure_id))
        throw InvalidArgumentError("store already holds a record for " + record.figure_id);
    if (!file_.empty()) {
        std::ofstream out(file_, std::ios::app);
        if (!out)
            throw Error("cannot append to prediction store: " + file_.string());
        out << record_to_json(record).dump() << '\n';
    }
    by_figure_[record.figure_id] = records_.size();
    records_.push_back(std::move(record));
}

PredictionStore run_generation(const corpus::Dataset& ds, const ExperimentSpec& spec,
                               modelgw::Gateway& gateway,
                               const promptkit::PromptTemplates& templates,
                               const RunOptions& options) {
    if (spec.template_digest != templates.digest)
        throw ConfigError("spec.template_digest does not match the loaded templates");
    std::filesystem::create_directories(spec.output_dir);
    write_or_check_manifest(spec, gateway);

    PredictionStore store = PredictionStore::open(spec.output_dir / "predictions.jsonl");
    const std::string model_name = gateway.config(spec.backend_id).model_name;
    const auto images = spec.include_images ? promptkit::ImagePolicy::kRequire
                                            : promptkit::ImagePolicy::kOmit;

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < ds.tasks.size(); ++i)
        if (!store.find(ds.tasks[i].target.figure_id))
            todo.push_back(i);
    if (options.stop_after != 0 && options.stop_after < todo.size())
        todo.resize(options.stop_after);

    auto generate_one = [&](std::size_t task_index) {
        const auto& task = ds.tasks[task_index];
        PredictionRecord record;
        record.figure_id = task.target.figure_id;
        try {
            modelgw::BackendRequest request;
            request.backend_id = spec.backend_id;
            request.model_name = model_name;
            request.messages = promptkit::assemble_messages(
                task, spec.config, spec.mode, templates, images, spec.max_field_chars);
            record.request_key = modelgw::request_cache_key(request);

            const auto response = gateway.send(request);
            const auto result = promptkit::parse_generation(response.text, spec.mode);
            record.ok = true;
            record.generated_caption = result.caption;
            record.predicted_quality = result.predicted_quality;
            record.raw_response = response.text;
        } catch (const Error& ex) {
            record.ok = false;
            record.error = ex.what();
        }
        return record;
    };

    std::size_t workers = options.max_concurrency;
    if (workers == 0)
        workers = static_cast<std::size_t>(gateway.config(spec.backend_id).max_concurrency);
    if (workers <= 1) {
        for (const auto task_index : todo)
            store.append(generate_one(task_index));
    } else {
        // Fan out, but append strictly in task order: the store file must be
        // a task-order prefix at every moment for resume to be exact.
        std::vector<std::pair<std::size_t, std::future<PredictionRecord>>> window;
        std::size_t next = 0;
        while (next < todo.size() || !window.empty()) {
            while (next < todo.size() && window.size() < workers) {
                window.emplace_back(todo[next],
                                    std::async(std::launch::async, generate_one, todo[next]));
                ++next;
            }
            store.append(window.front().second.get());
            window.erase(window.begin());
        }
    }

    if (!store.records().empty()) {
        const double failed_fraction = static_cast<double>(store.failure_count()) /
                                       static_cast<double>(store.records().size());
        if (failed_fraction > spec.max_failure_fraction)
            throw AggregateFailureError(
                std::to_string(store.failure_count()) + " of " +
                std::to_string(store.records().size()) + " tasks failed (limit fraction " +
                std::to_string(spec.max_failure_fraction) + "); see " +
                store.file().string());
    }
    return store;
}

std::map<std::string, GroupEval> evaluate_by_profile_count(const PredictionStore& store,
                                                           const corpus::Dataset& ds) {
    const auto groups = corpus::group_by_profile_count(ds);

    std::map<std::string, GroupEval> out;
    for (const auto& [label, task_indices] : groups) {
        std::vector<metrics::SampleScores> samples;
        samples.reserve(task_indices.size());
        GroupEval eval;
        for (const auto idx : task_indices) {
            const auto& target = ds.tasks[idx].target;
            const auto* record = store.find(target.figure_id);
            if (!record)
                throw MissingPredictionError("store has no prediction for figure " +
                                             target.figure_id);
            if (!record->ok)
                ++eval.failures;
            samples.push_back(score_record(record, target));
        }
        eval.report = metrics::aggregate(samples);
        out.emplace(label, std::move(eval));
    }
    return out;
}

std::map<promptkit::ConfigPreset, GroupEval> run_ablation(
    const corpus::Dataset& ds, const ExperimentSpec& base_spec, modelgw::Gateway& gateway,
    const promptkit::PromptTemplates& templates,
    std::span<const promptkit::ConfigPreset> presets, const RunOptions& options) {
    std::map<promptkit::ConfigPreset, GroupEval> out;
    for (const auto preset : presets) {
        ExperimentSpec spec = base_spec;
        spec.config = promptkit::preset_config(preset);
        spec.output_dir = base_spec.output_dir / promptkit::preset_name(preset);
        const auto store = run_generation(ds, spec, gateway, templates, options);
        auto evals = evaluate_by_profile_count(store, ds);
        out.emplace(preset, std::move(evals.at("All")));
    }
    return out;
}

TradeoffReport quality_tradeoff_report(const corpus::Dataset& ds,
                                       const PredictionStore& forced,
                                       const PredictionStore& predicted,
                                       const std::map<std::string, QualityScore>& gold_scores,
                                       modelgw::Gateway& gateway,
                                       const TradeoffOptions& options,
                                       const promptkit::PromptTemplates& templates) {
    struct TaskView {
        const corpus::CaptionTask* task;
        const PredictionRecord* forced_rec;
        const PredictionRecord* predicted_rec;
        int gold_bucket;
    };

    std::vector<TaskView> views;
    views.reserve(ds.tasks.size());
    for (const auto& task : ds.tasks) {
        const auto* f = forced.find(task.target.figure_id);
        const auto* p = predicted.find(task.target.figure_id);
        if (!f || !p)
            throw MissingPredictionError("both stores must cover figure " +
                                         task.target.figure_id);
        auto it = gold_scores.find(task.target.figure_id);
        if (it == gold_scores.end())
            throw InvalidArgumentError("gold caption not scored: " + task.target.figure_id);
        views.push_back({&task, f, p, it->second.value()});
    }

    // Rate every successful generation with the quality backend.
    auto score_generations = [&](auto get_record) {
        std::vector<quality::ScoreItem> items;
        std::vector<std::string> ids;
        for (const auto& view : views) {
            const PredictionRecord* rec = get_record(view);
            if (rec->ok) {
                items.push_back({view.task->target.figure_id, view.task->target.image_ref,
                                 rec->generated_caption});
                ids.push_back(view.task->target.figure_id);
            }
        }
        quality::ScoreOptions score_options;
        score_options.backend_id = options.quality_backend_id;
        score_options.images = options.images;
        score_options.max_concurrency = options.max_concurrency;
        const auto batch = quality::score_captions(gateway, score_options, items, templates);

        std::map<std::string, QualityScore> scores;
        for (std::size_t i = 0; i < batch.items.size(); ++i)
            if (batch.items[i])
                scores.emplace(ids[i], batch.items[i]->score);
        return scores;
    };
    const auto forced_scores =
        score_generations([](const TaskView& v) { return v.forced_rec; });
    const auto predicted_scores =
        score_generations([](const TaskView& v) { return v.predicted_rec; });

    TradeoffReport report;
    report.tasks = views.size();
    report.rows.resize(6);

    struct Accumulator {
        double quality_forced = 0.0;
        std::size_t quality_forced_n = 0;
        double quality_predicted = 0.0;
        std::size_t quality_predicted_n = 0;
        double rouge_forced = 0.0;
        double rouge_predicted = 0.0;
        std::size_t n = 0;
        std::size_t failed_forced = 0;
        std::size_t failed_predicted = 0;
    };
    std::array<Accumulator, 6> acc{};
    double total_quality_forced = 0.0;
    std::size_t total_quality_forced_n = 0;
    double total_quality_predicted = 0.0;
    std::size_t total_quality_predicted_n = 0;

    for (const auto& view : views) {
        auto& bucket = acc[static_cast<std::size_t>(view.gold_bucket - 1)];
        ++bucket.n;

        const auto gold_tokens = metrics::tokenize(view.task->target.caption);
        bucket.rouge_forced +=
            view.forced_rec->ok
                ? metrics::rouge_l(metrics::tokenize(view.forced_rec->generated_caption),
                                   gold_tokens)
                      .f1
                : 0.0;
        bucket.rouge_predicted +=
            view.predicted_rec->ok
                ? metrics::rouge_l(metrics::tokenize(view.predicted_rec->generated_caption),
                                   gold_tokens)
                      .f1
                : 0.0;

        const auto id = view.task->target.figure_id;
        if (auto it = forced_scores.find(id); it != forced_scores.end()) {
            const int value = it->second.value();
            bucket.quality_forced += value;
            ++bucket.quality_forced_n;
            ++report.forced_quality_hist[static_cast<std::size_t>(value - 1)];
            total_quality_forced += value;
            ++total_quality_forced_n;
        } else {
            ++bucket.failed_forced;
        }
        if (auto it = predicted_scores.find(id); it != predicted_scores.end()) {
            const int value = it->second.value();
            bucket.quality_predicted += value;
            ++bucket.quality_predicted_n;
            ++report.predicted_quality_hist[static_cast<std::size_t>(value - 1)];
            total_quality_predicted += value;
            ++total_quality_predicted_n;
        } else {
            ++bucket.failed_predicted;
        }
    }

    for (int b = 1; b <= 6; ++b) {
        const auto& a = acc[static_cast<std::size_t>(b - 1)];
        TradeoffRow& row = report.rows[static_cast<std::size_t>(b - 1)];
        row.target_quality_bucket = b;
        row.n = a.n;
        row.failed_forced = a.failed_forced;
        row.failed_predicted = a.failed_predicted;
        if (a.quality_forced_n > 0)
            row.mean_quality_forced = a.quality_forced / static_cast<double>(a.quality_forced_n);
        if (a.quality_predicted_n > 0)
            row.mean_quality_predicted =
                a.quality_predicted / static_cast<double>(a.quality_predicted_n);
        if (a.n > 0) {
            row.rouge_l_forced = a.rouge_forced / static_cast<double>(a.n);
            row.rouge_l_predicted = a.rouge_predicted / static_cast<double>(a.n);
        }
    }
    if (total_quality_forced_n > 0)
        report.forced_mean_quality =
            total_quality_forced / static_cast<double>(total_quality_forced_n);
    if (total_quality_predicted_n > 0)
        report.predicted_mean_quality =
            total_quality_predicted / static_cast<double>(total_quality_predicted_n);
    return report;
}

} // namespace figcap::runner
