// figcap: experiment pipeline for personalized figure captioning.
// Subcommands cover the full loop: dataset validation, caption quality
// scoring and filtering, SFT export, cached generation runs, metric tables,
// the quality/overlap trade-off, and the agreement heatmap.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "figcap/corpus.hpp"
#include "figcap/errors.hpp"
#include "figcap/metrics.hpp"
#include "figcap/modelgw.hpp"
#include "figcap/prompt_templates.hpp"
#include "figcap/promptkit.hpp"
#include "figcap/quality.hpp"
#include "figcap/runner.hpp"
#include "figcap/synthetic.hpp"
#include "figcap/types.hpp"

namespace fs = std::filesystem;
using namespace figcap;

namespace {

struct BackendArgs {
    std::string backend;
    std::string backend_config;
    std::size_t max_concurrency = 0; // 0 = config value
};

void add_backend_options(CLI::App* cmd, BackendArgs& args, const char* what) {
    cmd->add_option("--backend", args.backend, what)->required();
    cmd->add_option("--backend-config", args.backend_config,
                    "JSON backend registry (required for non-mock backends)");
    cmd->add_option("--max-concurrency", args.max_concurrency,
                    "Cap on concurrent backend requests (default: backend config)");
}

/// Registers the requested backend (and everything in the config file, so
/// several subcommands can share one gateway/cache).
void register_backends(modelgw::Gateway& gateway, const BackendArgs& args,
                       const std::vector<std::string>& extra_mocks = {}) {
    if (!args.backend_config.empty()) {
        for (auto config : modelgw::load_backend_config(args.backend_config)) {
            if (args.max_concurrency > 0 && config.backend_id == args.backend)
                config.max_concurrency = static_cast<int>(args.max_concurrency);
            gateway.register_backend(config);
        }
    }
    auto ensure_mock = [&](const std::string& spec) {
        if (spec.empty() || gateway.has_backend(spec))
            return;
        if (!spec.starts_with("mock:"))
            throw ConfigError("backend '" + spec +
                              "' is not in --backend-config and is not a mock: spec");
        modelgw::BackendConfig config;
        config.backend_id = spec;
        config.base_url = spec;
        config.model_name = "mock";
        if (args.max_concurrency > 0)
            config.max_concurrency = static_cast<int>(args.max_concurrency);
        gateway.register_backend(config);
    };
    ensure_mock(args.backend);
    for (const auto& spec : extra_mocks)
        ensure_mock(spec);
}

promptkit::PromptTemplates load_templates(const std::string& dir) {
    return promptkit::PromptTemplates::load(dir);
}

promptkit::InputConfig parse_config_preset(const std::string& name) {
    const auto preset = promptkit::parse_preset(name);
    if (!preset)
        throw ConfigError("unknown --config-preset '" + name +
                          "' (expected fc, fpc, fpmc, fpmoc)");
    return promptkit::preset_config(*preset);
}

promptkit::GenerationMode parse_mode(const std::string& name) {
    const auto mode = promptkit::GenerationMode::parse(name);
    if (!mode)
        throw ConfigError("unknown --mode '" + name +
                          "' (expected plain, predicted-q, forced-q=<1-6>)");
    return *mode;
}

std::map<std::string, QualityScore> load_score_map(const fs::path& path) {
    std::map<std::string, QualityScore> scores;
    for (const auto& record : quality::read_scored_captions(path))
        scores.emplace(record.figure_id, record.score);
    return scores;
}

corpus::Dataset sample_tasks(corpus::Dataset ds, std::size_t sample, std::uint64_t seed) {
    if (sample == 0 || sample >= ds.tasks.size())
        return ds;
    std::mt19937_64 rng(seed);
    std::shuffle(ds.tasks.begin(), ds.tasks.end(), rng);
    ds.tasks.resize(sample);
    return ds;
}

void print_group_sizes(const corpus::Dataset& ds) {
    const auto groups = corpus::group_by_profile_count(ds);
    for (const auto& label : corpus::ordered_group_labels(groups))
        std::cout << "  profiles=" << label << ": " << groups.at(label).size() << " tasks\n";
}

int run_cli(int argc, char** argv) {
    CLI::App app{"figcap: personalized figure-caption experiment pipeline"};
    app.require_subcommand(1);

    std::string templates_dir = "templates";
    app.add_option("--templates", templates_dir,
                   "Prompt template directory (default: ./templates)")
        ->envname("FIGCAP_TEMPLATES");

    // --- synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic dataset");
    std::string synth_out;
    corpus::SyntheticSpec synth_spec;
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--tasks", synth_spec.task_count, "Number of tasks (default 20)");
    synth->add_option("--seed", synth_spec.seed, "RNG seed (default 17)");
    synth->add_option("--min-profiles", synth_spec.min_profiles, "Min profiles per task");
    synth->add_option("--max-profiles", synth_spec.max_profiles, "Max profiles per task");
    synth->add_option("--split", synth_spec.split_name, "Split name");
    synth->callback([&] {
        const auto ds = corpus::make_synthetic_dataset(synth_spec);
        corpus::save_dataset(ds, synth_out);
        std::cout << "wrote " << ds.records.size() << " records, " << ds.tasks.size()
                  << " tasks to " << synth_out << "\n";
    });

    // --- ingest -----------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Validate a dataset and print statistics");
    std::string ingest_dataset, ingest_split = "test";
    ingest->add_option("--dataset", ingest_dataset, "Dataset directory")->required();
    ingest->add_option("--split", ingest_split, "Split name (default test)");
    ingest->callback([&] {
        const auto ds = corpus::load_dataset(ingest_dataset, ingest_split);
        std::cout << "split " << ds.split_name << ": " << ds.records.size() << " records, "
                  << ds.tasks.size() << " tasks\n";
        print_group_sizes(ds);
        std::cout << "dataset OK\n";
    });

    // --- score ------------------------------------------------------------
    auto* score = app.add_subcommand("score", "Quality-score captions with a backend");
    std::string score_dataset, score_split = "train", score_out, score_cache = "cache";
    BackendArgs score_backend;
    bool score_with_images = false;
    score->add_option("--dataset", score_dataset, "Dataset directory")->required();
    score->add_option("--split", score_split, "Split name (default train)");
    add_backend_options(score, score_backend, "Scoring backend id or mock: spec");
    score->add_option("--cache-dir", score_cache, "Response cache directory");
    score->add_option("--out", score_out, "Scored-captions output file")->required();
    score->add_flag("--with-images", score_with_images,
                    "Attach figure images (refs must resolve)");
    score->callback([&] {
        const auto ds = corpus::load_dataset(score_dataset, score_split);
        const auto templates = load_templates(templates_dir);
        modelgw::Gateway gateway(score_cache);
        register_backends(gateway, score_backend);

        std::vector<quality::ScoreItem> items;
        std::size_t skipped = 0;
        for (const auto& record : ds.records) {
            if (record.caption.empty()) {
                ++skipped;
                continue;
            }
            items.push_back(quality::ScoreItem::from_record(record));
        }

        quality::ScoreOptions options;
        options.backend_id = score_backend.backend;
        options.images = score_with_images ? promptkit::ImagePolicy::kRequire
                                           : promptkit::ImagePolicy::kOmit;
        options.max_concurrency =
            score_backend.max_concurrency == 0 ? 1 : score_backend.max_concurrency;
        const auto batch = quality::score_captions(gateway, options, items, templates);

        quality::write_scored_captions(score_out, batch.succeeded());
        std::cout << "scored " << batch.succeeded().size() << " captions ("
                  << batch.failures.size() << " failures, " << skipped
                  << " skipped empty) -> " << score_out << "\n";
        for (const auto& failure : batch.failures)
            std::cerr << "  failed " << failure.figure_id << ": " << failure.error << "\n";
    });

    // --- filter -----------------------------------------------------------
    auto* filter = app.add_subcommand("filter", "Split scored captions at a threshold");
    std::string filter_in, filter_kept, filter_dropped;
    int filter_threshold = 3;
    filter->add_option("--scored", filter_in, "Scored-captions input file")->required();
    filter->add_option("--threshold", filter_threshold,
                       "Inclusive keep threshold 1..6 (default 3)");
    filter->add_option("--kept", filter_kept, "Output file for kept records")->required();
    filter->add_option("--dropped", filter_dropped, "Output file for dropped records")
        ->required();
    filter->callback([&] {
        const auto records = quality::read_scored_captions(filter_in);
        const auto split =
            quality::filter_by_quality(records, QualityScore(filter_threshold));
        quality::write_scored_captions(filter_kept, split.kept);
        quality::write_scored_captions(filter_dropped, split.dropped);
        std::cout << "kept " << split.kept.size() << ", dropped " << split.dropped.size()
                  << " (threshold >= " << filter_threshold << ")\n";
    });

    // --- export-sft ---------------------------------------------------------
    auto* export_sft = app.add_subcommand("export-sft", "Write SFT training records");
    std::string sft_dataset, sft_split = "train", sft_out, sft_scores, sft_preset = "fpmoc";
    bool sft_quality_aware = false;
    int sft_threshold = 0;
    std::size_t sft_max_field_chars = 0;
    export_sft->add_option("--dataset", sft_dataset, "Dataset directory")->required();
    export_sft->add_option("--split", sft_split, "Split name (default train)");
    export_sft->add_option("--config-preset", sft_preset,
                           "Input configuration: fc|fpc|fpmc|fpmoc (default fpmoc)");
    export_sft->add_flag("--quality-aware", sft_quality_aware,
                         "Train targets as 'Quality: <q>' + caption");
    export_sft->add_option("--scores", sft_scores,
                           "Scored-captions file (needed for --quality-aware/--threshold)");
    export_sft->add_option("--threshold", sft_threshold,
                           "Drop targets scored below this (0 = keep all)");
    export_sft->add_option("--out", sft_out, "Output JSONL file")->required();
    export_sft->add_option("--max-field-chars", sft_max_field_chars,
                           "Hard cap per prompt field string (0 = uncapped)");
    export_sft->callback([&] {
        const auto ds = corpus::load_dataset(sft_dataset, sft_split);
        const auto templates = load_templates(templates_dir);

        promptkit::SftExportOptions options;
        options.config = parse_config_preset(sft_preset);
        options.quality_aware = sft_quality_aware;
        options.max_field_chars = sft_max_field_chars;
        if (sft_threshold > 0)
            options.min_score = QualityScore(sft_threshold);

        std::map<std::string, QualityScore> scores;
        if (!sft_scores.empty())
            scores = load_score_map(sft_scores);

        if (fs::path(sft_out).has_parent_path())
            fs::create_directories(fs::path(sft_out).parent_path());
        std::ofstream out(sft_out, std::ios::trunc);
        if (!out)
            throw Error("cannot write SFT export: " + sft_out);
        const auto stats =
            promptkit::export_sft_records(ds.tasks, options, scores, templates, out);
        std::cout << "wrote " << stats.written << " records (" << stats.filtered_out
                  << " filtered by threshold) -> " << sft_out << "\n";
    });

    // --- generate -----------------------------------------------------------
    auto* generate = app.add_subcommand("generate", "Run caption generation over a dataset");
    std::string gen_dataset, gen_split = "test", gen_out, gen_cache = "cache";
    std::string gen_preset = "fpmoc", gen_mode = "plain";
    BackendArgs gen_backend;
    std::uint64_t gen_seed = 17;
    std::size_t gen_limit = 0, gen_sample = 0, gen_max_field_chars = 0;
    bool gen_with_images = false;
    double gen_max_failure_fraction = 0.5;
    generate->add_option("--dataset", gen_dataset, "Dataset directory")->required();
    generate->add_option("--split", gen_split, "Split name (default test)");
    add_backend_options(generate, gen_backend, "Generation backend id or mock: spec");
    generate->add_option("--config-preset", gen_preset,
                         "fc|fpc|fpmc|fpmoc, or 'all' for the ablation sweep");
    generate->add_option("--mode", gen_mode, "plain | predicted-q | forced-q=<1-6>");
    generate->add_option("--out", gen_out, "Run output directory")->required();
    generate->add_option("--cache-dir", gen_cache, "Response cache directory");
    generate->add_option("--seed", gen_seed, "Seed for task sampling (default 17)");
    generate->add_option("--limit", gen_limit,
                         "Stop after N newly generated tasks (resume later)");
    generate->add_option("--sample", gen_sample, "Random task subset for smoke runs");
    generate->add_flag("--with-images", gen_with_images, "Send figure images to the backend");
    generate->add_option("--max-failure-fraction", gen_max_failure_fraction,
                         "Abort when more than this fraction of tasks fail (default 0.5)");
    generate->add_option("--max-field-chars", gen_max_field_chars,
                         "Hard cap per prompt field string (0 = uncapped)");
    generate->callback([&] {
        const auto ds = sample_tasks(corpus::load_dataset(gen_dataset, gen_split),
                                     gen_sample, gen_seed);
        const auto templates = load_templates(templates_dir);
        modelgw::Gateway gateway(gen_cache);
        register_backends(gateway, gen_backend);

        runner::ExperimentSpec spec;
        spec.dataset_path = gen_dataset;
        spec.split_name = gen_split;
        spec.mode = parse_mode(gen_mode);
        spec.backend_id = gen_backend.backend;
        spec.output_dir = gen_out;
        spec.template_digest = templates.digest;
        spec.seed = gen_seed;
        spec.include_images = gen_with_images;
        spec.max_failure_fraction = gen_max_failure_fraction;
        spec.max_field_chars = gen_max_field_chars;

        runner::RunOptions options;
        options.stop_after = gen_limit;
        options.max_concurrency = gen_backend.max_concurrency;

        if (gen_preset == "all") {
            const auto results = runner::run_ablation(ds, spec, gateway, templates,
                                                      promptkit::kAllPresets, options);
            runner::emit_ablation_report(results, spec.output_dir, "by_input_config");
            std::cout << "ablation complete; report in " << gen_out
                      << "/by_input_config.{json,md,csv}\n";
        } else {
            spec.config = parse_config_preset(gen_preset);
            const auto store = runner::run_generation(ds, spec, gateway, templates, options);
            std::cout << "generated " << store.size() << " records ("
                      << store.failure_count() << " failures) -> " << store.file() << "\n";
        }
        std::cout << "live dispatches: " << gateway.live_dispatches() << "\n";
    });

    // --- evaluate -----------------------------------------------------------
    auto* evaluate = app.add_subcommand("evaluate", "Score a run against gold captions");
    std::string eval_dataset, eval_split = "test", eval_run, eval_out = "reports";
    std::vector<std::string> eval_runs;
    bool eval_no_markdown = false, eval_no_csv = false;
    evaluate->add_option("--dataset", eval_dataset, "Dataset directory")->required();
    evaluate->add_option("--split", eval_split, "Split name (default test)");
    evaluate->add_option("--run", eval_run,
                         "Run directory -> per-profile-count metric table");
    evaluate->add_option("--runs", eval_runs,
                         "preset=dir pairs -> input-configuration ablation table");
    evaluate->add_option("--out", eval_out, "Report output directory");
    evaluate->add_flag("--no-markdown", eval_no_markdown, "Skip .md output");
    evaluate->add_flag("--no-csv", eval_no_csv, "Skip .csv output");
    evaluate->callback([&] {
        if (eval_run.empty() == eval_runs.empty())
            throw ConfigError("evaluate needs exactly one of --run or --runs");
        const auto ds = corpus::load_dataset(eval_dataset, eval_split);
        runner::EmitOptions emit;
        emit.markdown = !eval_no_markdown;
        emit.csv = !eval_no_csv;

        if (!eval_run.empty()) {
            const auto store =
                runner::PredictionStore::open(fs::path(eval_run) / "predictions.jsonl");
            const auto groups = runner::evaluate_by_profile_count(store, ds);
            const auto files =
                runner::emit_profile_count_report(groups, eval_out, "by_profile_count", emit);
            for (const auto& file : files)
                std::cout << "wrote " << file.string() << "\n";
        } else {
            std::map<promptkit::ConfigPreset, runner::GroupEval> rows;
            for (const auto& entry : eval_runs) {
                const auto eq = entry.find('=');
                if (eq == std::string::npos)
                    throw ConfigError("--runs expects preset=dir, got '" + entry + "'");
                const auto preset = promptkit::parse_preset(entry.substr(0, eq));
                if (!preset)
                    throw ConfigError("unknown preset in --runs: " + entry);
                const auto store = runner::PredictionStore::open(
                    fs::path(entry.substr(eq + 1)) / "predictions.jsonl");
                auto evals = runner::evaluate_by_profile_count(store, ds);
                rows.emplace(*preset, std::move(evals.at("All")));
            }
            const auto files =
                runner::emit_ablation_report(rows, eval_out, "by_input_config", emit);
            for (const auto& file : files)
                std::cout << "wrote " << file.string() << "\n";
        }
    });

    // --- tradeoff -----------------------------------------------------------
    auto* tradeoff = app.add_subcommand(
        "tradeoff", "Forced-Q6 vs Predicted-Q quality/overlap trade-off table");
    std::string to_dataset, to_split = "test", to_forced, to_predicted, to_gold;
    std::string to_out = "reports", to_cache = "cache";
    BackendArgs to_backend;
    tradeoff->add_option("--dataset", to_dataset, "Dataset directory")->required();
    tradeoff->add_option("--split", to_split, "Split name (default test)");
    tradeoff->add_option("--forced-run", to_forced, "forced-q=6 run directory")->required();
    tradeoff->add_option("--predicted-run", to_predicted, "predicted-q run directory")
        ->required();
    tradeoff->add_option("--gold-scores", to_gold,
                         "Scored gold captions (from `figcap score`)")
        ->required();
    tradeoff->add_option("--quality-backend", to_backend.backend,
                         "f_quality backend id or mock: spec")
        ->required();
    tradeoff->add_option("--backend-config", to_backend.backend_config,
                         "JSON backend registry");
    tradeoff->add_option("--max-concurrency", to_backend.max_concurrency,
                         "Cap on concurrent scoring requests");
    tradeoff->add_option("--cache-dir", to_cache, "Response cache directory");
    tradeoff->add_option("--out", to_out, "Report output directory");
    tradeoff->callback([&] {
        const auto ds = corpus::load_dataset(to_dataset, to_split);
        const auto templates = load_templates(templates_dir);
        modelgw::Gateway gateway(to_cache);
        register_backends(gateway, to_backend);

        const auto forced =
            runner::PredictionStore::open(fs::path(to_forced) / "predictions.jsonl");
        const auto predicted =
            runner::PredictionStore::open(fs::path(to_predicted) / "predictions.jsonl");
        const auto gold_scores = load_score_map(to_gold);

        runner::TradeoffOptions options;
        options.quality_backend_id = to_backend.backend;
        options.max_concurrency =
            to_backend.max_concurrency == 0 ? 1 : to_backend.max_concurrency;
        const auto report = runner::quality_tradeoff_report(ds, forced, predicted,
                                                            gold_scores, gateway, options,
                                                            templates);
        const auto files = runner::emit_tradeoff_report(report, to_out, "quality_tradeoff");
        for (const auto& file : files)
            std::cout << "wrote " << file.string() << "\n";
    });

    // --- report -------------------------------------------------------------
    auto* report = app.add_subcommand("report", "Re-render a saved results .json");
    std::string report_in, report_out = "reports";
    bool report_no_markdown = false, report_no_csv = false;
    report->add_option("--results", report_in, "Saved results .json file")->required();
    report->add_option("--out", report_out, "Output directory");
    report->add_flag("--no-markdown", report_no_markdown, "Skip .md output");
    report->add_flag("--no-csv", report_no_csv, "Skip .csv output");
    report->callback([&] {
        runner::EmitOptions emit;
        emit.markdown = !report_no_markdown;
        emit.csv = !report_no_csv;
        const auto files = runner::render_report_file(report_in, report_out, emit);
        for (const auto& file : files)
            std::cout << "wrote " << file.string() << "\n";
    });

    // --- plot-confusion -------------------------------------------------------
    auto* plot = app.add_subcommand("plot-confusion",
                                    "Agreement heatmap between two scored-caption files");
    std::string plot_a, plot_b, plot_out, plot_report_dir;
    std::string plot_label_a = "evaluator A", plot_label_b = "evaluator B";
    plot->add_option("--scored-a", plot_a, "First scored-captions file (rows)")->required();
    plot->add_option("--scored-b", plot_b, "Second scored-captions file (columns)")
        ->required();
    plot->add_option("--out", plot_out, "Output SVG path")->required();
    plot->add_option("--report", plot_report_dir,
                     "Also write agreement.{json,md,csv} to this directory");
    plot->add_option("--label-a", plot_label_a, "Row axis label");
    plot->add_option("--label-b", plot_label_b, "Column axis label");
    plot->callback([&] {
        const auto a_records = quality::read_scored_captions(plot_a);
        const auto b_records = quality::read_scored_captions(plot_b);
        std::map<std::string, QualityScore> b_by_id;
        for (const auto& record : b_records)
            b_by_id.emplace(record.figure_id, record.score);

        std::vector<QualityScore> a_scores, b_scores;
        for (const auto& record : a_records) {
            auto it = b_by_id.find(record.figure_id);
            if (it == b_by_id.end())
                continue;
            a_scores.push_back(record.score);
            b_scores.push_back(it->second);
        }
        if (a_scores.size() < 2)
            throw InvalidArgumentError("fewer than 2 overlapping figure_ids between the "
                                       "two scored files");

        const auto agreement = quality::evaluate_agreement(a_scores, b_scores);
        runner::emit_confusion_plot(agreement, plot_out, plot_label_a, plot_label_b);
        std::cout << "pairs: " << a_scores.size() << "\nspearman: " << agreement.spearman
                  << "\nqwk: " << agreement.qwk << "\nwrote " << plot_out << "\n";
        if (!plot_report_dir.empty()) {
            const auto files =
                runner::emit_agreement_report(agreement, plot_report_dir, "agreement");
            for (const auto& file : files)
                std::cout << "wrote " << file.string() << "\n";
        }
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const figcap::Error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        std::cerr << "unexpected error: " << ex.what() << "\n";
        return 1;
    }
}
