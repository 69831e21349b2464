#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "elm/common/error.hpp"
#include "elm/tasks/ingest.hpp"
#include "support/synthetic.hpp"

using namespace elm;
using namespace elm::tasks;
using embedding::Section;

TEST_SUITE("ingest") {
    TEST_CASE("parses abstracts and merges consecutive labels") {
        std::istringstream in(
            "###100\n"
            "BACKGROUND\tFirst sentence.\n"
            "BACKGROUND\tSecond sentence.\n"
            "METHODS\tWe did things.\n"
            "RESULTS\tIt worked.\n"
            "\n"
            "###200\n"
            "OBJECTIVE\tTo test.\n"
            "CONCLUSIONS\tDone.\n");
        const auto r = parse_pubmed_rct(in, "mem");
        REQUIRE(r.records.size() == 2);
        const auto& a = r.records[0];
        CHECK(a.record_id == "100");
        REQUIRE(a.sections.size() == 3);
        CHECK(*a.section_text(Section::background) == "First sentence. Second sentence.");
        CHECK(a.full_text == "First sentence. Second sentence. We did things. It worked.");
        CHECK(r.records[1].present_sections() == std::vector<Section>{Section::objective, Section::conclusion});
    }

    TEST_CASE("errors name the offending line") {
        std::istringstream unknown("###1\nSUMMARY\tx\n");
        try {
            parse_pubmed_rct(unknown, "f.txt");
            FAIL("expected an error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("f.txt:2") != std::string::npos);
            CHECK(std::string(e.what()).find("SUMMARY") != std::string::npos);
        }
        std::istringstream unlabeled("###1\njust text\n");
        CHECK_THROWS_AS(parse_pubmed_rct(unlabeled, "f"), ValidationError);
        std::istringstream orphan("RESULTS\tx\n");
        CHECK_THROWS_AS(parse_pubmed_rct(orphan, "f"), ValidationError);
        CHECK_THROWS_AS(ingest_pubmed_rct("/nonexistent/file.txt"), Error);
    }

    TEST_CASE("synthetic corpus round-trips through the file format and JSONL") {
        const auto dir = testing::temp_dir("ingest_rt");
        const auto recs = testing::records_of(testing::synthetic_abstracts(25, 3));
        testing::write_pubmed_rct(dir / "train.txt", recs);
        testing::write_pubmed_rct(dir / "test.txt", {recs.begin(), recs.begin() + 5});
        const auto parsed = ingest_pubmed_rct(dir / "train.txt");
        REQUIRE(parsed.records.size() == recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            CHECK(parsed.records[i].record_id == recs[i].record_id);
            CHECK(parsed.records[i].full_text == recs[i].full_text);
        }
        const auto splits = ingest_pubmed_rct_dir(dir);
        CHECK(splits.size() == 2);
        CHECK(splits.at(Split::test).records.size() == 5);

        write_records_jsonl(dir / "r.jsonl", parsed.records);
        const auto back = read_records_jsonl(dir / "r.jsonl");
        REQUIRE(back.size() == recs.size());
        CHECK(back[7].sections == parsed.records[7].sections);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("split names") {
        CHECK(parse_split("dev") == Split::validation);
        CHECK(split_name(Split::test) == "test");
        CHECK_THROWS_AS(parse_split("holdout"), ValidationError);
    }
}
