#include <doctest.h>

#include "figcap/corpus.hpp"
#include "figcap/errors.hpp"
#include "figcap/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace figcap;
using testfix::TempDir;

namespace {

const char* kRecordP1F1 =
    R"({"figure_id":"p1_f1","paper_id":"p1","caption":"loss curve","paragraphs":["about f1"],"mentions":[],"ocr_text":[]})";
const char* kRecordP1F2 =
    R"({"figure_id":"p1_f2","paper_id":"p1","caption":"accuracy curve","paragraphs":[],"mentions":["see f2"],"ocr_text":["epoch"]})";
const char* kRecordP2F1 =
    R"({"figure_id":"p2_f1","paper_id":"p2","caption":"other paper","paragraphs":[],"mentions":[],"ocr_text":[]})";

} // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("minimal dataset: one record, one N=0 task") {
    TempDir dir;
    testfix::write_lines(dir / "records.jsonl", {kRecordP1F1});
    testfix::write_lines(dir / "tasks.jsonl", {R"({"target_id":"p1_f1","profile_ids":[]})"});

    const auto ds = corpus::load_dataset(dir.path(), "test");
    REQUIRE(ds.tasks.size() == 1);
    CHECK(ds.tasks[0].profile_count() == 0);
    CHECK(ds.tasks[0].target.figure_id == "p1_f1");
    CHECK(ds.split_name == "test");
    CHECK(ds.find("p1_f1") != nullptr);
    CHECK(ds.find("missing") == nullptr);
}

TEST_CASE("missing task file derives one N=0 task per record") {
    TempDir dir;
    testfix::write_lines(dir / "records.jsonl", {kRecordP1F1, kRecordP1F2});

    const auto ds = corpus::load_dataset(dir.path(), "train");
    REQUIRE(ds.tasks.size() == 2);
    CHECK(ds.tasks[0].target.figure_id == "p1_f1");
    CHECK(ds.tasks[1].target.figure_id == "p1_f2");
}

TEST_CASE("profile from a different paper is a schema violation") {
    TempDir dir;
    testfix::write_lines(dir / "records.jsonl", {kRecordP1F1, kRecordP2F1});
    testfix::write_lines(dir / "tasks.jsonl",
                         {R"({"target_id":"p1_f1","profile_ids":["p2_f1"]})"});
    CHECK_THROWS_AS(corpus::load_dataset(dir.path(), "test"), SchemaError);
}

TEST_CASE("loader errors carry field and line") {
    TempDir dir;

    SUBCASE("missing file") {
        CHECK_THROWS_AS(corpus::load_dataset(dir / "none", "t"), SchemaError);
    }
    SUBCASE("malformed json line") {
        testfix::write_lines(dir / "records.jsonl", {kRecordP1F1, "{not json"});
        try {
            corpus::load_dataset(dir.path(), "t");
            FAIL("expected SchemaError");
        } catch (const SchemaError& ex) {
            CHECK(ex.line() == 2);
        }
    }
    SUBCASE("missing field reports its name") {
        testfix::write_lines(dir / "records.jsonl",
                             {R"({"figure_id":"x","paper_id":"p","caption":"c"})"});
        try {
            corpus::load_dataset(dir.path(), "t");
            FAIL("expected SchemaError");
        } catch (const SchemaError& ex) {
            CHECK(ex.field() == "paragraphs");
            CHECK(ex.line() == 1);
        }
    }
    SUBCASE("duplicate figure_id") {
        testfix::write_lines(dir / "records.jsonl", {kRecordP1F1, kRecordP1F1});
        CHECK_THROWS_AS(corpus::load_dataset(dir.path(), "t"), SchemaError);
    }
    SUBCASE("task referencing unknown record") {
        testfix::write_lines(dir / "records.jsonl", {kRecordP1F1});
        testfix::write_lines(dir / "tasks.jsonl",
                             {R"({"target_id":"ghost","profile_ids":[]})"});
        CHECK_THROWS_AS(corpus::load_dataset(dir.path(), "t"), SchemaError);
    }
    SUBCASE("profile equal to target") {
        testfix::write_lines(dir / "records.jsonl", {kRecordP1F1});
        testfix::write_lines(dir / "tasks.jsonl",
                             {R"({"target_id":"p1_f1","profile_ids":["p1_f1"]})"});
        CHECK_THROWS_AS(corpus::load_dataset(dir.path(), "t"), SchemaError);
    }
    SUBCASE("duplicate task for one target") {
        testfix::write_lines(dir / "records.jsonl", {kRecordP1F1});
        testfix::write_lines(dir / "tasks.jsonl",
                             {R"({"target_id":"p1_f1","profile_ids":[]})",
                              R"({"target_id":"p1_f1","profile_ids":[]})"});
        CHECK_THROWS_AS(corpus::load_dataset(dir.path(), "t"), SchemaError);
    }
}

TEST_CASE("profile order follows the task file") {
    TempDir dir;
    testfix::write_lines(dir / "records.jsonl", {kRecordP1F1, kRecordP1F2,
                                                 R"({"figure_id":"p1_f3","paper_id":"p1","caption":"third","paragraphs":[],"mentions":[],"ocr_text":[]})"});
    testfix::write_lines(dir / "tasks.jsonl",
                         {R"({"target_id":"p1_f1","profile_ids":["p1_f3","p1_f2"]})"});

    const auto ds = corpus::load_dataset(dir.path(), "t");
    REQUIRE(ds.tasks[0].profile_count() == 2);
    CHECK(ds.tasks[0].profiles[0].figure_id == "p1_f3");
    CHECK(ds.tasks[0].profiles[1].figure_id == "p1_f2");
}

TEST_CASE("group_by_profile_count tallies and labels") {
    corpus::SyntheticSpec spec;
    spec.task_count = 4;
    spec.min_profiles = 1;
    spec.max_profiles = 1;
    auto ds = corpus::make_synthetic_dataset(spec);
    // rebuild with N = 1, 1, 2, 3 by stitching profiles across tasks
    std::vector<corpus::FigureRecord> records;
    std::vector<corpus::TaskIds> ids;
    const std::size_t wanted[] = {1, 1, 2, 3};
    for (std::size_t t = 0; t < 4; ++t) {
        const std::string paper = "p" + std::to_string(t);
        corpus::TaskIds task;
        for (std::size_t f = 0; f <= wanted[t]; ++f) {
            records.push_back(
                testfix::make_record(paper + "_f" + std::to_string(f), paper, "cap"));
            if (f == 0)
                task.target_id = records.back().figure_id;
            else
                task.profile_ids.push_back(records.back().figure_id);
        }
        ids.push_back(std::move(task));
    }
    ds = corpus::assemble_dataset(std::move(records), std::move(ids), "t");

    const auto groups = corpus::group_by_profile_count(ds);
    CHECK(groups.at("1").size() == 2);
    CHECK(groups.at("2").size() == 1);
    CHECK(groups.at("3").size() == 1);
    CHECK(groups.at("All").size() == 4);
    CHECK(groups.count("0") == 0);

    const auto labels = corpus::ordered_group_labels(groups);
    REQUIRE(labels.size() == 4);
    CHECK(labels.front() == "1");
    CHECK(labels.back() == "All");
}

TEST_CASE("empty dataset groups to {All: 0}") {
    const auto ds = corpus::assemble_dataset({}, {}, "empty");
    const auto groups = corpus::group_by_profile_count(ds);
    REQUIRE(groups.size() == 1);
    CHECK(groups.at("All").empty());
}

TEST_CASE("literal-N group sizes sum to All") {
    corpus::SyntheticSpec spec;
    spec.task_count = 37;
    spec.min_profiles = 0;
    spec.max_profiles = 5; // exercises N > 3 literal groups too
    const auto ds = corpus::make_synthetic_dataset(spec);

    const auto groups = corpus::group_by_profile_count(ds);
    std::size_t sum = 0;
    for (const auto& [label, tasks] : groups)
        if (label != "All")
            sum += tasks.size();
    CHECK(sum == groups.at("All").size());
    CHECK(groups.at("All").size() == ds.tasks.size());
}

TEST_CASE("save/load round-trips and is deterministic") {
    corpus::SyntheticSpec spec;
    spec.task_count = 12;
    const auto original = corpus::make_synthetic_dataset(spec);

    TempDir dir;
    corpus::save_dataset(original, dir.path());
    const auto reloaded = corpus::load_dataset(dir.path(), original.split_name);
    CHECK(reloaded == original);

    const auto again = corpus::load_dataset(dir.path(), original.split_name);
    CHECK(again == reloaded);
}

TEST_SUITE_END();
