#include <doctest.h>

#include <filesystem>
#include <json.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ndup::testing::CommandResult;
using ndup::testing::TempDir;

namespace {

CommandResult ndup_cli(const std::vector<std::string>& args) {
  static TempDir logs("ndup-cli-logs");
  return ndup::testing::run_command(NDUP_CLI_PATH, args, logs);
}

// A small corpus run through synth, extract-orb and build-index once.
struct Workspace {
  TempDir dir{"ndup-cli"};
  std::string corpus;
  std::string features;
  std::string index;

  Workspace() {
    corpus = (dir.path() / "corpus").string();
    features = dir.file("raw.ndf1");
    index = dir.file("raw.ndix");
    REQUIRE(ndup_cli({"synth", "--out", corpus, "--count", "8", "--width", "128", "--height", "96"}).exit_code == 0);
    REQUIRE(ndup_cli({"extract-orb", corpus + "/corpus.jsonl", "--out", features}).exit_code == 0);
    REQUIRE(ndup_cli({"build-index", features, "--out", index}).exit_code == 0);
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit 1 with a synopsis") {
  const auto none = ndup_cli({});
  CHECK(none.exit_code == 1);
  CHECK(none.err.find("gen-manips") != std::string::npos);

  const auto unknown = ndup_cli({"frobnicate"});
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.err.find("Subcommands") != std::string::npos);

  const auto missing = ndup_cli({"build-index", "/definitely/not/here.ndf1", "--out", "x"});
  CHECK(missing.exit_code == 1);
  CHECK(missing.err.find("build-index") != std::string::npos);

  const auto bad_k = ndup_cli({"query", NDUP_CLI_PATH, NDUP_CLI_PATH, "--k", "0"});
  CHECK(bad_k.exit_code == 1);

  const auto help = ndup_cli({"--help"});
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("bench") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
  TempDir dir;
  ndup::testing::write_text(dir.file("junk.ndix"), "NDIXgarbage");
  ndup::testing::write_text(dir.file("q.png"), "not an image");
  const auto r = ndup_cli({"query", dir.file("junk.ndix"), dir.file("q.png")});
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("synth, extract and build report counts") {
  auto& w = workspace();
  CHECK(fs::exists(w.corpus + "/syn00007.png"));
  const auto info = ndup_cli({"build-index", w.features, "--out", w.dir.file("again.ndix")});
  REQUIRE(info.exit_code == 0);
  const auto j = json::parse(info.out);
  CHECK(j["version"] == 1);
  CHECK(j["images"] == 8);
  CHECK(j["kind"] == "binary/256");
  CHECK(ndup::testing::read_text(w.dir.file("again.ndix")) == ndup::testing::read_text(w.index));
}

TEST_CASE("query returns the image itself first") {
  auto& w = workspace();
  const auto r = ndup_cli({"query", w.index, w.corpus + "/syn00003.png", "--k", "5", "--n", "3", "--timing"});
  REQUIRE(r.exit_code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["version"] == 1);
  CHECK(j["query"] == "syn00003");
  CHECK(j["mode"] == "votes");
  REQUIRE(j["results"].size() == 3);
  CHECK(j["results"][0]["image_id"] == "syn00003");
  CHECK(j["results"][0]["rank"] == 1);
  CHECK(r.err.find("search") != std::string::npos);

  const auto from_file = ndup_cli({"query", w.index, w.features, "--id", "syn00005", "--k", "5"});
  REQUIRE(from_file.exit_code == 0);
  CHECK(json::parse(from_file.out)["results"][0]["image_id"] == "syn00005");
}

TEST_CASE("gen-manips and bench write a versioned report") {
  auto& w = workspace();
  TempDir src;
  fs::copy_file(w.corpus + "/syn00000.png", src.file("syn00000.png"));
  fs::copy_file(w.corpus + "/syn00001.png", src.file("syn00001.png"));
  const auto qdir = w.dir.file("queries");
  const auto gen = ndup_cli({"gen-manips", src.path().string(), "--out", qdir, "--jobs", "2"});
  REQUIRE(gen.exit_code == 0);
  CHECK(json::parse(gen.out)["queries"] == 46);

  const auto out = w.dir.file("report");
  const auto bench = ndup_cli({"bench", w.index, qdir + "/queries.jsonl", "--k", "5", "--out", out});
  REQUIRE(bench.exit_code == 0);
  CHECK(bench.out.find("recall@1") != std::string::npos);
  const auto report = json::parse(ndup::testing::read_text(out + "/report.json"));
  CHECK(report["version"] == 1);
  CHECK(report["method"] == "orb");
  CHECK(report["queries"] == 46);
  for (const char* key : {"recall_at_1", "recall_at_3", "recall_at_10"}) {
    REQUIRE(report["recall"].contains(key));
    CHECK(report["recall"][key]["mean"].get<double>() >= 0.0);
    CHECK(report["recall"][key]["ci"].size() == 2);
  }
  CHECK(report["per_manipulation"][0]["manip_id"] == "identity");
  CHECK(report["per_manipulation"][0]["recall_at_3"] == 1.0);
  CHECK(ndup::testing::read_text(out + "/report.csv").rfind("manip_id,n,recall_at_3,recall_at_10\n", 0) == 0);

  const auto vgg = ndup_cli({"bench", w.index, qdir + "/queries.jsonl", "--method", "vgg", "--out", out});
  CHECK(vgg.exit_code == 1);
}

TEST_CASE("pca path end to end") {
  auto& w = workspace();
  const auto model = w.dir.file("pca.ndpc");
  const auto fit = ndup_cli({"fit-pca", w.features, "--out", model});
  REQUIRE(fit.exit_code == 0);
  CHECK(json::parse(fit.out)["trained_on"].get<int>() >= 256);
  const auto coded = w.dir.file("codes.ndf1");
  REQUIRE(ndup_cli({"extract-orb", w.corpus, "--pca", model, "--out", coded}).exit_code == 0);
  const auto ix = w.dir.file("codes.ndix");
  const auto built = ndup_cli({"build-index", coded, "--out", ix});
  REQUIRE(built.exit_code == 0);
  CHECK(json::parse(built.out)["kind"] == "binary/128");
  const auto q = ndup_cli({"query", ix, w.corpus + "/syn00006.png", "--pca", model, "--k", "5"});
  REQUIRE(q.exit_code == 0);
  CHECK(json::parse(q.out)["results"][0]["image_id"] == "syn00006");

  const auto floats = w.dir.file("floats.ndf1");
  REQUIRE(ndup_cli({"extract-orb", w.corpus, "--pca", model, "--orb-code", "float", "--out", floats}).exit_code == 0);
  const auto fl = ndup_cli({"build-index", floats, "--out", w.dir.file("floats.ndix")});
  CHECK(json::parse(fl.out)["kind"] == "real32/128");
  CHECK(ndup_cli({"extract-orb", w.corpus, "--orb-code", "float", "--out", floats}).exit_code == 1);
  // raw codes cannot train PCA on an already reduced file
  CHECK(ndup_cli({"fit-pca", coded, "--out", w.dir.file("bad.ndpc")}).exit_code == 2);
}

TEST_CASE("phash prints hex hashes") {
  auto& w = workspace();
  const auto r = ndup_cli({"phash", w.corpus + "/syn00000.png", w.corpus + "/syn00001.png"});
  REQUIRE(r.exit_code == 0);
  const auto j = json::parse(r.out);
  REQUIRE(j["hashes"].size() == 2);
  CHECK(j["hashes"][0]["phash"].get<std::string>().size() == 16);
}

TEST_CASE("train, classify and lag report") {
  auto& w = workspace();
  std::string pairs;
  for (int i = 0; i < 20; ++i) {
    const bool match = i % 2 == 0;
    json row = {{"query_id", "q" + std::to_string(i)},
                {"result_id", "r" + std::to_string(i)},
                {"phash_dist", match ? i % 7 : 20 + i},
                {"retrieval_score", match ? 40 + i : i % 5},
                {"mode", "votes"},
                {"label", match}};
    pairs += row.dump() + "\n";
  }
  ndup::testing::write_text(w.dir.file("pairs.jsonl"), pairs);
  const auto model = w.dir.file("model.json");
  const auto train = ndup_cli({"train-matcher", w.dir.file("pairs.jsonl"), "--loocv", "--out", model});
  REQUIRE(train.exit_code == 0);
  const auto summary = json::parse(train.out);
  CHECK(summary["train_accuracy"] == 1.0);
  CHECK(summary.contains("loocv_accuracy"));
  CHECK(json::parse(ndup::testing::read_text(model))["mode"] == "votes");

  // the corpus images double as queries against themselves
  std::string queries;
  for (int i = 0; i < 8; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "syn%05d", i);
    queries += json({{"query_path", std::string(id) + ".png"}, {"query_id", id}, {"source_id", id}, {"manip_id", "identity"}}).dump() + "\n";
  }
  ndup::testing::write_text(w.corpus + "/self.jsonl", queries);
  const auto classified = w.dir.file("classified.jsonl");
  const auto cls = ndup_cli({"classify", w.index, w.corpus + "/self.jsonl", "--model", model, "--corpus",
                             w.corpus + "/corpus.jsonl", "--k", "5", "--out", classified});
  REQUIRE(cls.exit_code == 0);
  const auto lines = ndup::testing::read_text(classified);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 8);
  CHECK(json::parse(lines.substr(0, lines.find('\n')))["result_id"] == "syn00000");

  const auto lag = ndup_cli({"lag-report", classified, w.corpus + "/corpus.jsonl", "--bucket-weeks", "3"});
  REQUIRE(lag.exit_code == 0);
  CHECK(lag.out.rfind("bucket_start_weeks,bucket_end_weeks,count,percentage\n", 0) == 0);
  CHECK(lag.out.find("0,3,8,100.0000") != std::string::npos);

  const auto wrong_mode = ndup_cli({"classify", w.index, w.corpus + "/self.jsonl", "--model", model, "--corpus",
                                    w.corpus + "/corpus.jsonl", "--mode", "distance"});
  CHECK(wrong_mode.exit_code == 2);
}
