#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "figcap/errors.hpp"
#include "figcap/promptkit.hpp"
#include "figcap/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace figcap;
using namespace figcap::promptkit;
using testfix::TempDir;

namespace {

corpus::CaptionTask make_task(std::size_t profiles) {
    std::vector<corpus::FigureRecord> records;
    corpus::TaskIds ids;
    records.push_back(testfix::make_record("t0_f0", "t0", "target caption sentinel"));
    ids.target_id = "t0_f0";
    for (std::size_t p = 1; p <= profiles; ++p) {
        records.push_back(testfix::make_record("t0_f" + std::to_string(p), "t0",
                                               "profile caption " + std::to_string(p)));
        ids.profile_ids.push_back(records.back().figure_id);
    }
    auto ds = corpus::assemble_dataset(std::move(records), {std::move(ids)}, "unit");
    return ds.tasks.front();
}

std::multiset<std::string> text_block_multiset(const MessageSequence& seq) {
    std::multiset<std::string> out;
    for (const auto& block : seq)
        if (block.type == MessageBlock::Type::kText)
            out.insert(block.content);
    return out;
}

bool is_submultiset(const std::multiset<std::string>& small,
                    const std::multiset<std::string>& big) {
    for (const auto& item : small)
        if (small.count(item) > big.count(item))
            return false;
    return true;
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0;
    for (auto pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + 1))
        ++count;
    return count;
}

} // namespace

TEST_SUITE_BEGIN("promptkit");

TEST_CASE("presets map to the ablation lattice") {
    CHECK(preset_config(ConfigPreset::kFC) == InputConfig{false, false, false});
    CHECK(preset_config(ConfigPreset::kFPC) == InputConfig{true, false, false});
    CHECK(preset_config(ConfigPreset::kFPMC) == InputConfig{true, true, false});
    CHECK(preset_config(ConfigPreset::kFPMOC) == InputConfig{true, true, true});

    CHECK(parse_preset("fpmoc") == ConfigPreset::kFPMOC);
    CHECK_FALSE(parse_preset("nope").has_value());
    CHECK(is_paper_preset({true, false, false}));
    CHECK_FALSE(is_paper_preset({false, true, false})); // mentions without paragraphs
    CHECK(preset_profile_label(ConfigPreset::kFPMOC) == "F + P + M + O + C");
    CHECK(preset_target_label(ConfigPreset::kFC) == "F");
}

TEST_CASE("generation mode round-trips through its string form") {
    for (const auto* text : {"plain", "predicted-q", "forced-q=1", "forced-q=6"}) {
        const auto mode = GenerationMode::parse(text);
        REQUIRE(mode.has_value());
        CHECK(mode->to_string() == text);
    }
    CHECK_FALSE(GenerationMode::parse("forced-q=7").has_value());
    CHECK_FALSE(GenerationMode::parse("forced-q=").has_value());
    CHECK_FALSE(GenerationMode::parse("casual").has_value());
    CHECK_THROWS_AS(GenerationMode::plain().forced_score(), InvalidArgumentError);
}

TEST_CASE("minimal assembly: N=0, FC, plain") {
    const auto task = make_task(0);
    const auto seq = assemble_messages(task, preset_config(ConfigPreset::kFC),
                                       GenerationMode::plain(), testfix::templates());

    // intro, target header, mode instruction; no profile section, no P/M/O
    REQUIRE(seq.size() == 3);
    CHECK(seq[0].content == testfix::templates().caption_intro);
    CHECK(seq[1].content.find("Target figure") != std::string::npos);
    CHECK(seq[2].content == testfix::templates().mode_plain);

    const auto text = sequence_text(seq);
    CHECK(text.find("Profile figure") == std::string::npos);
    CHECK(text.find("Paragraphs:") == std::string::npos);
    CHECK(text.find("Mentions:") == std::string::npos);
    CHECK(text.find("OCR") == std::string::npos);
}

TEST_CASE("full assembly: N=3, FPMOC ends profiles with captions") {
    const auto task = make_task(3);
    const auto seq = assemble_messages(task, preset_config(ConfigPreset::kFPMOC),
                                       GenerationMode::plain(), testfix::templates());

    // per profile: header, paragraphs, mentions, ocr, caption
    std::vector<std::size_t> caption_blocks;
    std::vector<std::size_t> header_blocks;
    std::size_t target_header = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i].content.starts_with("Caption: "))
            caption_blocks.push_back(i);
        if (seq[i].content.find("Profile figure") != std::string::npos)
            header_blocks.push_back(i);
        if (seq[i].content.find("Target figure") != std::string::npos)
            target_header = i;
    }
    REQUIRE(caption_blocks.size() == 3);
    REQUIRE(header_blocks.size() == 3);
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(seq[caption_blocks[p]].content ==
              "Caption: profile caption " + std::to_string(p + 1));
        CHECK(header_blocks[p] < caption_blocks[p]);
        // every caption closes its profile block before the next header
        if (p + 1 < 3)
            CHECK(caption_blocks[p] < header_blocks[p + 1]);
    }
    // profiles precede the target, and the target block carries no caption
    CHECK(caption_blocks.back() < target_header);
    for (std::size_t i = target_header; i < seq.size(); ++i)
        CHECK_FALSE(seq[i].content.starts_with("Caption: "));

    // field order inside the target block: paragraphs, mentions, OCR
    const auto text = sequence_text(seq);
    const auto target_text = text.substr(text.find("Target figure"));
    const auto p_pos = target_text.find("Paragraphs:");
    const auto m_pos = target_text.find("Mentions:");
    const auto o_pos = target_text.find("OCR text:");
    REQUIRE(p_pos != std::string::npos);
    REQUIRE(m_pos != std::string::npos);
    REQUIRE(o_pos != std::string::npos);
    CHECK(p_pos < m_pos);
    CHECK(m_pos < o_pos);
}

TEST_CASE("forced mode carries the quality token exactly once") {
    const auto task = make_task(2);
    for (int q = 1; q <= 6; ++q) {
        const auto seq =
            assemble_messages(task, preset_config(ConfigPreset::kFPMOC),
                              GenerationMode::forced_q(QualityScore(q)), testfix::templates());
        const auto text = sequence_text(seq);
        CHECK(count_occurrences(text, "Quality: " + std::to_string(q)) == 1);
        // the assertion block sits directly after the intro
        CHECK(seq[1].content.starts_with("Quality: " + std::to_string(q)));
    }
}

TEST_CASE("config growth is monotone as text-block multisets") {
    std::mt19937_64 rng(5);
    corpus::SyntheticSpec spec;
    spec.task_count = 60;
    spec.min_profiles = 0;
    spec.max_profiles = 4;
    spec.seed = 77;
    const auto ds = corpus::make_synthetic_dataset(spec);

    const GenerationMode modes[] = {GenerationMode::plain(), GenerationMode::predicted_q(),
                                    GenerationMode::forced_q(QualityScore(6))};
    for (const auto& task : ds.tasks) {
        const auto& mode = modes[rng() % 3];
        std::multiset<std::string> previous;
        bool first = true;
        for (const auto preset : kAllPresets) {
            const auto seq = assemble_messages(task, preset_config(preset), mode,
                                               testfix::templates());
            auto blocks = text_block_multiset(seq);
            if (!first)
                CHECK(is_submultiset(previous, blocks));
            previous = std::move(blocks);
            first = false;
        }
    }
}

TEST_CASE("gold caption never leaks into the prompt") {
    corpus::SyntheticSpec spec;
    spec.task_count = 60;
    spec.min_profiles = 0;
    spec.max_profiles = 4;
    spec.seed = 78;
    const auto ds = corpus::make_synthetic_dataset(spec);

    const GenerationMode modes[] = {GenerationMode::plain(), GenerationMode::predicted_q(),
                                    GenerationMode::forced_q(QualityScore(6))};
    for (const auto& task : ds.tasks) {
        for (const auto& mode : modes) {
            for (const auto preset : kAllPresets) {
                const auto seq = assemble_messages(task, preset_config(preset), mode,
                                                   testfix::templates());
                CHECK(sequence_text(seq).find(task.target.caption) == std::string::npos);
            }
        }
    }
}

TEST_CASE("assembly is deterministic") {
    const auto task = make_task(3);
    const auto config = preset_config(ConfigPreset::kFPMOC);
    const auto a = assemble_messages(task, config, GenerationMode::predicted_q(),
                                     testfix::templates());
    const auto b = assemble_messages(task, config, GenerationMode::predicted_q(),
                                     testfix::templates());
    CHECK(serialize_messages_json(a) == serialize_messages_json(b));
}

TEST_CASE("forced and predicted prompts differ only in mode blocks") {
    const auto task = make_task(2);
    const auto config = preset_config(ConfigPreset::kFPMC);
    const auto forced = assemble_messages(task, config,
                                          GenerationMode::forced_q(QualityScore(6)),
                                          testfix::templates());
    const auto predicted = assemble_messages(task, config, GenerationMode::predicted_q(),
                                             testfix::templates());

    // forced = intro + [assert] + body; predicted = intro + body + [instruction]
    REQUIRE(forced.size() == predicted.size());
    CHECK(forced.front() == predicted.front());
    std::vector<MessageBlock> forced_body(forced.begin() + 2, forced.end());
    std::vector<MessageBlock> predicted_body(predicted.begin() + 1, predicted.end() - 1);
    CHECK(forced_body == predicted_body);
}

TEST_CASE("image policies") {
    TempDir dir;
    auto records = std::vector<corpus::FigureRecord>{
        testfix::make_record("p_f0", "p", "target cap"),
        testfix::make_record("p_f1", "p", "profile cap")};
    records[0].image_ref = (dir / "target.png").string();
    records[1].image_ref = (dir / "profile.png").string();
    testfix::write_lines(dir / "target.png", {"fake"});
    testfix::write_lines(dir / "profile.png", {"fake"});
    auto ds = corpus::assemble_dataset(records, {{"p_f0", {"p_f1"}, 0}}, "unit");
    const auto& task = ds.tasks.front();

    const auto config = preset_config(ConfigPreset::kFC);
    const auto omitted = assemble_messages(task, config, GenerationMode::plain(),
                                           testfix::templates(), ImagePolicy::kOmit);
    for (const auto& block : omitted)
        CHECK(block.type == MessageBlock::Type::kText);

    const auto with_images = assemble_messages(task, config, GenerationMode::plain(),
                                               testfix::templates(), ImagePolicy::kRequire);
    std::size_t image_blocks = 0;
    for (const auto& block : with_images)
        if (block.type == MessageBlock::Type::kImage)
            ++image_blocks;
    CHECK(image_blocks == 2);

    std::filesystem::remove(dir / "profile.png");
    CHECK_THROWS_AS(assemble_messages(task, config, GenerationMode::plain(),
                                      testfix::templates(), ImagePolicy::kRequire),
                    MissingImageError);
    // lenient keeps the dangling ref verbatim
    const auto lenient = assemble_messages(task, config, GenerationMode::plain(),
                                           testfix::templates(), ImagePolicy::kLenient);
    image_blocks = 0;
    for (const auto& block : lenient)
        if (block.type == MessageBlock::Type::kImage)
            ++image_blocks;
    CHECK(image_blocks == 2);
}

TEST_CASE("max_field_chars caps every field string") {
    auto records = std::vector<corpus::FigureRecord>{
        testfix::make_record("p_f0", "p", "target"),
        testfix::make_record("p_f1", "p", std::string(300, 'c'))};
    records[0].paragraphs = {std::string(300, 'p')};
    records[1].ocr_text = {std::string(300, 'o')};
    auto ds = corpus::assemble_dataset(records, {{"p_f0", {"p_f1"}, 0}}, "unit");

    const auto seq =
        assemble_messages(ds.tasks.front(), preset_config(ConfigPreset::kFPMOC),
                          GenerationMode::plain(), testfix::templates(),
                          ImagePolicy::kOmit, 100);
    for (const auto& block : seq) {
        CHECK(block.content.find(std::string(101, 'p')) == std::string::npos);
        CHECK(block.content.find(std::string(101, 'c')) == std::string::npos);
        CHECK(block.content.find(std::string(101, 'o')) == std::string::npos);
    }
    // the capped prefix is still there
    CHECK(sequence_text(seq).find(std::string(100, 'p')) != std::string::npos);
    CHECK(sequence_text(seq).find("Caption: " + std::string(100, 'c')) != std::string::npos);

    // cap 0 means uncapped
    const auto uncapped =
        assemble_messages(ds.tasks.front(), preset_config(ConfigPreset::kFPMOC),
                          GenerationMode::plain(), testfix::templates());
    CHECK(sequence_text(uncapped).find(std::string(300, 'p')) != std::string::npos);
}

TEST_CASE("parse_generation per mode") {
    const auto plain = parse_generation("  Fig: accuracy curves. ", GenerationMode::plain());
    CHECK(plain.caption == "Fig: accuracy curves.");
    CHECK_FALSE(plain.predicted_quality.has_value());

    const auto labeled =
        parse_generation("Caption: tidy caption", GenerationMode::forced_q(QualityScore(6)));
    CHECK(labeled.caption == "tidy caption");

    const auto dual = parse_generation("Quality: 4\nCaption: Training loss vs epochs.",
                                       GenerationMode::predicted_q());
    REQUIRE(dual.predicted_quality.has_value());
    CHECK(dual.predicted_quality->value() == 4);
    CHECK(dual.caption == "Training loss vs epochs.");

    CHECK_THROWS_AS(parse_generation("Nice figure.", GenerationMode::predicted_q()),
                    GenerationParseError);
    CHECK_THROWS_AS(parse_generation("Quality: 9\nCaption: x", GenerationMode::predicted_q()),
                    GenerationParseError);
    CHECK_THROWS_AS(parse_generation("Quality: 12\nCaption: x", GenerationMode::predicted_q()),
                    GenerationParseError);
    CHECK_THROWS_AS(parse_generation("Quality: 4\nno label", GenerationMode::predicted_q()),
                    GenerationParseError);
    CHECK_THROWS_AS(parse_generation("   ", GenerationMode::plain()), GenerationParseError);
    CHECK_THROWS_AS(parse_generation("Quality: 4\nCaption:   ", GenerationMode::predicted_q()),
                    GenerationParseError);
}

TEST_CASE("predicted-q render/parse round-trip is lossless") {
    std::mt19937_64 rng(13);
    const char* bodies[] = {"training curves for both models",
                            "ablation of the encoder depth", "memory use by batch size",
                            "latency under load spikes"};
    for (int round = 0; round < 80; ++round) {
        const QualityScore q(static_cast<int>(1 + rng() % 6));
        const std::string caption =
            std::string(bodies[rng() % 4]) + " run " + std::to_string(rng() % 1000) + ".";
        const auto parsed =
            parse_generation(render_quality_caption(q, caption), GenerationMode::predicted_q());
        CHECK(parsed.predicted_quality == q);
        CHECK(parsed.caption == caption);
    }
}

TEST_CASE("sft export: plain, quality-aware, threshold") {
    corpus::SyntheticSpec spec;
    spec.task_count = 6;
    spec.seed = 9;
    const auto ds = corpus::make_synthetic_dataset(spec);

    std::map<std::string, QualityScore> scores;
    int v = 1;
    for (const auto& task : ds.tasks)
        scores.emplace(task.target.figure_id, QualityScore(((v++ - 1) % 6) + 1)); // 1..6

    SUBCASE("plain export passes captions through verbatim") {
        SftExportOptions options;
        options.config = preset_config(ConfigPreset::kFPMOC);
        std::ostringstream out;
        const auto stats =
            export_sft_records(ds.tasks, options, {}, testfix::templates(), out);
        CHECK(stats.written == 6);
        CHECK(stats.filtered_out == 0);
        CHECK(out.str().find(ds.tasks[0].target.caption) != std::string::npos);
        CHECK(out.str().find("Quality:") == std::string::npos);
    }

    SUBCASE("quality-aware export prefixes the score") {
        SftExportOptions options;
        options.config = preset_config(ConfigPreset::kFPMOC);
        options.quality_aware = true;
        std::ostringstream out;
        const auto stats =
            export_sft_records(ds.tasks, options, scores, testfix::templates(), out);
        CHECK(stats.written == 6);
        std::istringstream lines(out.str());
        std::string line;
        std::size_t seen = 0;
        while (std::getline(lines, line)) {
            const auto score = scores.at(ds.tasks[seen].target.figure_id);
            CHECK(line.find("\"target\":\"Quality: " + std::to_string(score.value())) !=
                  std::string::npos);
            ++seen;
        }
        CHECK(seen == 6);
    }

    SUBCASE("threshold drops low-scored targets") {
        SftExportOptions options;
        options.config = preset_config(ConfigPreset::kFC);
        options.quality_aware = true;
        options.min_score = QualityScore(3);
        std::ostringstream out;
        const auto stats =
            export_sft_records(ds.tasks, options, scores, testfix::templates(), out);
        CHECK(stats.written == 4);      // scores 3,4,5,6
        CHECK(stats.filtered_out == 2); // scores 1,2
    }

    SUBCASE("missing score is an error when required") {
        SftExportOptions options;
        options.config = preset_config(ConfigPreset::kFC);
        options.quality_aware = true;
        std::ostringstream out;
        CHECK_THROWS_AS(export_sft_records(ds.tasks, options, {}, testfix::templates(), out),
                        InvalidArgumentError);
    }
}

TEST_CASE("placeholder rendering") {
    CHECK(render_placeholders("a {x} b {y}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
    CHECK(render_placeholders("keep {unknown}", {}) == "keep {unknown}");
    CHECK(render_placeholders("{x}{x}", {{"x", "z"}}) == "zz");
    CHECK(render_placeholders("no placeholders", {}) == "no placeholders");
}

TEST_CASE("template digest tracks content") {
    TempDir dir;
    for (const auto* name : {"caption_intro.txt", "mode_plain.txt", "mode_predicted_q.txt",
                             "mode_forced_q.txt", "quality_rubric.txt"})
        testfix::write_lines(dir / name, {std::string("content of ") + name});

    const auto a = PromptTemplates::load(dir.path());
    const auto b = PromptTemplates::load(dir.path());
    CHECK(a.digest == b.digest);

    testfix::write_lines(dir / "mode_plain.txt", {"different wording"});
    const auto c = PromptTemplates::load(dir.path());
    CHECK(c.digest != a.digest);

    std::filesystem::remove(dir / "quality_rubric.txt");
    CHECK_THROWS_AS(PromptTemplates::load(dir.path()), ConfigError);
}

TEST_SUITE_END();
