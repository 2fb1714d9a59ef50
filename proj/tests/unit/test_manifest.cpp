#include <doctest.h>

#include "ndup/feature_io.hpp"
#include "ndup/imaging.hpp"
#include "test_support.hpp"

using namespace ndup;
using ndup::testing::error_code_of;
using ndup::testing::write_text;

TEST_SUITE("manifest") {
  TEST_CASE("RFC 3339 timestamps") {
    CHECK(parse_rfc3339("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_rfc3339("2020-01-01T00:00:00Z") == 1577836800);
    CHECK(parse_rfc3339("2020-01-01t00:00:00z") == 1577836800);
    CHECK(parse_rfc3339("2020-01-01 00:00:00Z") == 1577836800);
    CHECK(parse_rfc3339("2020-01-01T02:30:00+02:30") == 1577836800);
    CHECK(parse_rfc3339("2019-12-31T19:00:00-05:00") == 1577836800);
    CHECK(parse_rfc3339("2020-01-01T00:00:00.987Z") == 1577836800);
    CHECK(parse_rfc3339("2020-02-29T00:00:00Z") == 1582934400);
    CHECK(parse_rfc3339("1969-12-31T23:59:59Z") == -1);
    CHECK(!parse_rfc3339("2019-02-29T00:00:00Z"));
    CHECK(!parse_rfc3339("2020-13-01T00:00:00Z"));
    CHECK(!parse_rfc3339("2020-01-01T24:00:00Z"));
    CHECK(!parse_rfc3339("2020-01-01T00:00:00"));
    CHECK(!parse_rfc3339("2020-01-01"));
    CHECK(!parse_rfc3339("yesterday"));
    CHECK(!parse_rfc3339("2020-01-01T00:00:00Zjunk"));
  }

  TEST_CASE("corpus manifest validation") {
    testing::TempDir dir;
    const auto path = dir.file("corpus.jsonl");
    write_text(path,
               R"({"id":"a","path":"imgs/a.png","platform":"reddit","posted_at":"2020-01-01T00:00:00Z"})" "\n"
               R"({"id":"b","path":"/abs/b.jpg","platform":"4chan","posted_at":"not a time"})" "\n"
               "\n"
               R"({"id":"a","path":"x.png","platform":"twitter","posted_at":"2020-01-02T00:00:00Z"})" "\n"
               R"({"id":"c","path":"c.png","platform":"twitter","posted_at":"2020-01-08T00:00:00Z","url":"http://x"})" "\n"
               R"({"id":"d","path":"d.png","platform":"myspace","posted_at":"2020-01-08T00:00:00Z"})" "\n"
               "{broken\n");
    const auto m = read_manifest(path);
    REQUIRE(m.rows.size() == 2);
    CHECK(m.rows[0].id == "a");
    CHECK(m.rows[0].platform == Platform::Reddit);
    CHECK(m.rows[0].posted_at_unix == 1577836800);
    CHECK(m.rows[0].path == (dir.path() / "imgs/a.png").string());
    CHECK(m.rows[1].id == "c");
    CHECK(m.rows[1].url == "http://x");
    REQUIRE(m.issues.size() == 4);
    CHECK(m.issues[0].line == 2);
    CHECK(m.issues[0].message.find("posted_at") != std::string::npos);
    CHECK(m.issues[1].line == 4);
    CHECK(m.issues[1].message.find("duplicate") != std::string::npos);
    CHECK(m.issues[2].line == 6);
    CHECK(m.issues[3].line == 7);
  }

  TEST_CASE("empty or missing manifests") {
    testing::TempDir dir;
    write_text(dir.file("empty.jsonl"), "");
    CHECK(error_code_of([&] { read_manifest(dir.file("empty.jsonl")); }) == ErrorCode::NoValidRows);
    CHECK(error_code_of([&] { read_manifest(dir.file("missing.jsonl")); }) == ErrorCode::Io);
    CHECK(error_code_of([&] { read_query_manifest(dir.file("empty.jsonl")); }) == ErrorCode::NoValidRows);
  }

  TEST_CASE("query manifest ids and skips") {
    testing::TempDir dir;
    const auto path = dir.file("q.jsonl");
    write_text(path,
               R"({"query_path":"q/s1__gbr.png","source_id":"s1","manip_id":"gbr","skipped":false})" "\n"
               R"({"query_path":"q/x.png","query_id":"custom","source_id":"s1","manip_id":"flip_h"})" "\n"
               R"({"source_id":"s2","manip_id":"crop_br_quarter","skipped":true,"reason":"too small"})" "\n"
               R"({"source_id":"s2","manip_id":"gray"})" "\n");
    const auto m = read_query_manifest(path);
    REQUIRE(m.rows.size() == 3);
    CHECK(m.rows[0].query_id == "s1__gbr");
    CHECK(m.rows[0].query_path == (dir.path() / "q/s1__gbr.png").string());
    CHECK(m.rows[1].query_id == "custom");
    CHECK(m.rows[2].skipped);
    CHECK(m.rows[2].query_id == "s2__crop_br_quarter");
    CHECK(m.rows[2].reason == "too small");
    REQUIRE(m.issues.size() == 1);
    CHECK(m.issues[0].line == 4);

    QueryRow row;
    row.query_id = "s__m";
    row.query_path = "s__m.png";
    row.source_id = "s";
    row.manip_id = "m";
    write_text(dir.file("one.jsonl"), to_jsonl(row) + "\n");
    const auto back = read_query_manifest(dir.file("one.jsonl"));
    CHECK(back.rows[0].query_id == "s__m");
    CHECK(back.rows[0].source_id == "s");
  }

  TEST_CASE("labeled pairs") {
    testing::TempDir dir;
    const auto path = dir.file("pairs.jsonl");
    write_text(path,
               R"({"query_id":"q1","result_id":"r1","phash_dist":3,"retrieval_score":40,"mode":"votes","label":true})" "\n"
               R"({"query_id":"q2","result_id":"r2","phash_dist":30,"retrieval_score":2,"mode":"votes","label":0})" "\n"
               R"({"query_id":"q3","result_id":"r3","phash_dist":5,"retrieval_score":1.5,"mode":"distance","label":"match"})" "\n"
               R"({"query_id":"q4","result_id":"r4","phash_dist":65,"retrieval_score":2,"mode":"votes","label":1})" "\n"
               R"({"query_id":"q5","result_id":"r5","phash_dist":6,"retrieval_score":2,"mode":"votes","label":"maybe"})" "\n"
               R"({"query_id":"q6","result_id":"r6","phash_dist":6,"retrieval_score":-1,"mode":"votes","label":1})" "\n");
    const auto m = read_labeled_pairs(path);
    REQUIRE(m.rows.size() == 3);
    CHECK(m.rows[0].match);
    CHECK(!m.rows[1].match);
    CHECK(m.rows[2].match);
    CHECK(m.rows[2].mode == RetrievalMode::Distance);
    CHECK(m.rows[2].retrieval_score == 1.5);
    CHECK(m.issues.size() == 3);
  }

  TEST_CASE("listing images") {
    testing::TempDir dir;
    const Raster r(4, 4, Channels::RGB, 1);
    write_png_file(r, dir.file("b.png"));
    write_png_file(r, dir.file("a.PNG"));
    write_text(dir.file("notes.txt"), "x");
    const auto refs = list_images(dir.path().string());
    REQUIRE(refs.size() == 2);
    CHECK(refs[0].id == "a");
    CHECK(refs[1].id == "b");

    write_text(dir.file("list.jsonl"), R"({"id":"one","path":"b.png"})" "\n"
                                       R"({"query_path":"a.PNG","source_id":"s","manip_id":"m"})" "\n"
                                       R"({"query_path":"","source_id":"s","manip_id":"x","skipped":true})" "\n");
    const auto listed = list_images(dir.file("list.jsonl"));
    REQUIRE(listed.size() == 2);
    CHECK(listed[0].id == "one");
    CHECK(listed[0].path == dir.file("b.png"));
    CHECK(listed[1].id == "a");

    write_text(dir.file("bad.jsonl"), R"({"nothing":1})" "\n");
    CHECK(error_code_of([&] { list_images(dir.file("bad.jsonl")); }) == ErrorCode::InvalidArgument);
    CHECK(file_stem("/x/y/s1__gbr.png") == "s1__gbr");
  }
}
