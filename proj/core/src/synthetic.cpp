#include "figcap/synthetic.hpp"

#include <random>

namespace figcap::corpus {

namespace {

const char* kSubjects[] = {"training loss", "validation accuracy", "throughput",
                           "latency distribution", "memory footprint", "error rate"};
const char* kQualifiers[] = {"per epoch",       "across batch sizes", "by model depth",
                             "under ablation",  "on held-out data",   "over time"};
const char* kVerbs[] = {"decreases", "saturates", "improves", "fluctuates", "diverges"};

std::string pick(std::mt19937_64& rng, const auto& pool) {
    std::uniform_int_distribution<std::size_t> dist(0, std::size(pool) - 1);
    return pool[dist(rng)];
}

FigureRecord make_record(std::mt19937_64& rng, const std::string& paper_id,
                         std::size_t figure_no) {
    FigureRecord rec;
    rec.figure_id = paper_id + "_fig" + std::to_string(figure_no);
    rec.paper_id = paper_id;

    const std::string subject = pick(rng, kSubjects);
    const std::string qualifier = pick(rng, kQualifiers);
    // The trailing id token makes every caption unique, which the prompt
    // leak checks rely on.
    rec.caption = subject + " " + qualifier + " for run " + rec.figure_id + ".";

    rec.paragraphs.push_back("The figure reports " + subject + " " + qualifier +
                             ". We observe that it " + pick(rng, kVerbs) +
                             " as the experiment progresses.");
    if (std::uniform_int_distribution<int>(0, 1)(rng) == 1)
        rec.paragraphs.push_back("Additional runs confirm the trend for " + subject + ".");

    rec.mentions.push_back("As shown in the figure, " + subject + " " +
                           pick(rng, kVerbs) + ".");
    const int ocr_count = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int i = 0; i < ocr_count; ++i)
        rec.ocr_text.push_back("axis " + std::to_string(i) + ": " + pick(rng, kQualifiers));
    return rec;
}

} // namespace

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> profile_dist(spec.min_profiles,
                                                            spec.max_profiles);

    std::vector<FigureRecord> records;
    std::vector<TaskIds> task_ids;
    for (std::size_t t = 0; t < spec.task_count; ++t) {
        const std::string paper_id = "paper" + std::to_string(t);
        const std::size_t profiles = profile_dist(rng);

        TaskIds ids;
        records.push_back(make_record(rng, paper_id, 0));
        ids.target_id = records.back().figure_id;
        for (std::size_t p = 1; p <= profiles; ++p) {
            records.push_back(make_record(rng, paper_id, p));
            ids.profile_ids.push_back(records.back().figure_id);
        }
        task_ids.push_back(std::move(ids));
    }
    return assemble_dataset(std::move(records), std::move(task_ids), spec.split_name);
}

} // namespace figcap::corpus
