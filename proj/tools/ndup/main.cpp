// ndup: near-duplicate image retrieval from the command line.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ndup/error.hpp"
#include "ndup/eval.hpp"
#include "ndup/feature_io.hpp"
#include "ndup/imaging.hpp"
#include "ndup/match_classifier.hpp"
#include "ndup/orb.hpp"
#include "ndup/phash.hpp"
#include "ndup/pipeline.hpp"
#include "ndup/vector_index.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  int jobs = 0;
  bool timing = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--timing", c.timing, "Print wall times to stderr");
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

void warn_all(const ndup::Warnings& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

template <typename Row>
void warn_issues(const std::string& path, const ndup::ManifestRead<Row>& read) {
  for (const auto& issue : read.issues) std::cerr << "warning: " << path << ":" << issue.line << ": " << issue.message << "\n";
}

std::string read_text(const std::string& path) {
  const auto bytes = ndup::read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::string& path, const std::string& text) {
  ndup::write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ensure_parent(const std::string& file) {
  const auto parent = fs::path(file).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw ndup::Error(ndup::ErrorCode::Io, "cannot create directory " + parent.string());
}

ndup::OrbCode parse_code(const std::string& s) {
  if (s == "bits") return ndup::OrbCode::Bits;
  if (s == "float") return ndup::OrbCode::Float;
  throw UsageError("--orb-code must be bits or float");
}

std::optional<ndup::PcaModel> load_optional_pca(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return ndup::load_pca(ndup::read_file_bytes(path));
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void print_json(const ojson& j) { std::cout << j.dump(2) << "\n"; }

bool looks_like_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string(magic, 4) == "NDF1";
}

// Distance ranking when every indexed image holds a single vector.
ndup::RetrievalMode resolve_mode(const std::string& requested, const ndup::FlatIndex& index) {
  if (requested == "votes" || requested == "distance") return ndup::parse_retrieval_mode(requested);
  if (requested != "auto") throw UsageError("--mode must be auto, votes or distance");
  if (index.feature_count() == 0) return ndup::RetrievalMode::VoteCount;
  for (const auto& img : index.images()) {
    if (img.feature_count > 1) return ndup::RetrievalMode::VoteCount;
  }
  return ndup::RetrievalMode::Distance;
}

ojson ranked_json(const ndup::RetrievalResult& result) {
  ojson list = ojson::array();
  for (const auto& r : result.ranked) list.push_back({{"rank", r.rank}, {"image_id", r.image_id}, {"score", r.score}});
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-duplicate image retrieval: manipulation suites, ORB features, exact flat index, evaluation."};
  app.name("ndup");
  app.require_subcommand(1);
  app.set_version_flag("--version", "ndup 0.1.0");

  Common common;

  // gen-manips
  std::string gm_input, gm_out;
  auto* gen = app.add_subcommand("gen-manips", "Write an identity copy plus the 22 catalog manipulations per source");
  gen->add_option("input", gm_input, "Image directory or manifest")->required()->check(CLI::ExistingPath);
  gen->add_option("--out", gm_out, "Output directory (receives queries.jsonl)")->required();
  add_common(gen, common);

  // synth
  std::string sy_out;
  std::size_t sy_count = 1000;
  ndup::SyntheticOptions sy_opts;
  auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic corpus with corpus.jsonl");
  synth->add_option("--out", sy_out, "Output directory")->required();
  synth->add_option("--count", sy_count, "Number of images")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--width", sy_opts.width, "Image width")->capture_default_str()->check(CLI::Range(32, 8192));
  synth->add_option("--height", sy_opts.height, "Image height")->capture_default_str()->check(CLI::Range(32, 8192));
  add_common(synth, common);

  // extract-orb
  std::string ex_input, ex_pca, ex_out, ex_code = "bits";
  int ex_max = ndup::kDefaultMaxFeatures;
  auto* extract = app.add_subcommand("extract-orb", "Extract ORB features (PCA codes with --pca, raw 256-bit otherwise)");
  extract->add_option("input", ex_input, "Image directory or manifest")->required()->check(CLI::ExistingPath);
  extract->add_option("--pca", ex_pca, "PCA model from fit-pca")->check(CLI::ExistingFile);
  extract->add_option("--orb-code", ex_code, "bits or float")->capture_default_str();
  extract->add_option("--max-features", ex_max, "Keypoints per image")->capture_default_str()->check(CLI::PositiveNumber);
  extract->add_option("--out", ex_out, "Output feature file")->required();
  add_common(extract, common);

  // fit-pca
  std::string fp_input, fp_out;
  std::size_t fp_cap = ndup::kPcaDefaultCap;
  auto* fitpca = app.add_subcommand("fit-pca", "Fit the 256->128 projection on raw ORB descriptors");
  fitpca->add_option("features", fp_input, "Raw binary/256 feature file")->required()->check(CLI::ExistingFile);
  fitpca->add_option("--cap", fp_cap, "Maximum descriptors sampled")->capture_default_str();
  fitpca->add_option("--out", fp_out, "Output model")->required();
  add_common(fitpca, common);

  // build-index
  std::string bi_input, bi_out;
  auto* build = app.add_subcommand("build-index", "Build a flat index from a feature file");
  build->add_option("features", bi_input, "Feature file")->required()->check(CLI::ExistingFile);
  build->add_option("--out", bi_out, "Output index")->required();
  add_common(build, common);

  // query
  std::string q_index, q_input, q_pca, q_code = "bits", q_mode = "auto", q_id;
  ndup::QueryParams q_params;
  auto* query = app.add_subcommand("query", "Rank indexed images against one image or feature-file entry");
  query->add_option("index", q_index, "Index file")->required()->check(CLI::ExistingFile);
  query->add_option("query", q_input, "Image, or feature file")->required()->check(CLI::ExistingFile);
  query->add_option("--pca", q_pca, "PCA model used for the index")->check(CLI::ExistingFile);
  query->add_option("--orb-code", q_code, "bits or float")->capture_default_str();
  query->add_option("--id", q_id, "Entry to use from a feature file (default: first)");
  query->add_option("--k", q_params.k, "Neighbors per query feature")->capture_default_str()->check(CLI::PositiveNumber);
  query->add_option("--n", q_params.n, "Results returned")->capture_default_str()->check(CLI::PositiveNumber);
  query->add_option("--mode", q_mode, "auto, votes or distance")->capture_default_str();
  add_common(query, common);

  // bench
  std::string b_index, b_queries, b_method = "orb", b_pca, b_code = "bits", b_features, b_mode = "auto", b_out = ".",
              b_ci = "binomial-quantile";
  ndup::QueryParams b_params;
  auto* bench = app.add_subcommand("bench", "Score a query manifest against an index (report.json, report.csv)");
  bench->add_option("index", b_index, "Index file")->required()->check(CLI::ExistingFile);
  bench->add_option("queries", b_queries, "Query manifest")->required()->check(CLI::ExistingFile);
  bench->add_option("--method", b_method, "orb, vgg or siamese")->capture_default_str();
  bench->add_option("--pca", b_pca, "PCA model (orb)")->check(CLI::ExistingFile);
  bench->add_option("--orb-code", b_code, "bits or float")->capture_default_str();
  bench->add_option("--features", b_features, "Query feature file (vgg, siamese)")->check(CLI::ExistingFile);
  bench->add_option("--k", b_params.k, "Neighbors per query feature")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--n", b_params.n, "Results per query")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--mode", b_mode, "auto, votes or distance")->capture_default_str();
  bench->add_option("--ci", b_ci, "binomial-quantile or normal")->capture_default_str();
  bench->add_option("--out", b_out, "Report directory")->capture_default_str();
  add_common(bench, common);

  // phash
  std::vector<std::string> ph_inputs;
  auto* ph = app.add_subcommand("phash", "Print 64-bit perceptual hashes");
  ph->add_option("images", ph_inputs, "Images")->required()->check(CLI::ExistingFile);
  add_common(ph, common);

  // train-matcher
  std::string tm_input, tm_out;
  ndup::TrainOptions tm_opts;
  bool tm_loocv = false;
  auto* train = app.add_subcommand("train-matcher", "Fit the match classifier on labeled pairs");
  train->add_option("pairs", tm_input, "Labeled-pair manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--l2", tm_opts.l2, "L2 penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
  train->add_option("--threshold", tm_opts.threshold, "Probability cutoff")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  train->add_flag("--loocv", tm_loocv, "Also report leave-one-out accuracy");
  train->add_option("--out", tm_out, "Output model")->required();
  add_common(train, common);

  // classify
  std::string c_index, c_queries, c_model, c_corpus, c_method = "orb", c_pca, c_code = "bits", c_features, c_out,
              c_mode = "auto";
  ndup::QueryParams c_params;
  auto* classify = app.add_subcommand("classify", "Label each query's first-ranked result as match or not");
  classify->add_option("index", c_index, "Index file")->required()->check(CLI::ExistingFile);
  classify->add_option("queries", c_queries, "Query manifest")->required()->check(CLI::ExistingFile);
  classify->add_option("--model", c_model, "Model from train-matcher")->required()->check(CLI::ExistingFile);
  classify->add_option("--corpus", c_corpus, "Corpus manifest or directory resolving result ids")
      ->required()
      ->check(CLI::ExistingPath);
  classify->add_option("--method", c_method, "orb, vgg or siamese")->capture_default_str();
  classify->add_option("--pca", c_pca, "PCA model (orb)")->check(CLI::ExistingFile);
  classify->add_option("--orb-code", c_code, "bits or float")->capture_default_str();
  classify->add_option("--features", c_features, "Query feature file (vgg, siamese)")->check(CLI::ExistingFile);
  classify->add_option("--k", c_params.k, "Neighbors per query feature")->capture_default_str()->check(CLI::PositiveNumber);
  classify->add_option("--mode", c_mode, "auto, votes or distance")->capture_default_str();
  classify->add_option("--out", c_out, "Output JSON Lines (default stdout)");
  add_common(classify, common);

  // lag-report
  std::string lr_input, lr_corpus, lr_out;
  int lr_bucket = 3;
  auto* lag = app.add_subcommand("lag-report", "Histogram of publication lag for matched pairs (lag.csv)");
  lag->add_option("classified", lr_input, "Output of classify")->required()->check(CLI::ExistingFile);
  lag->add_option("corpus", lr_corpus, "Corpus manifest with posted_at")->required()->check(CLI::ExistingFile);
  lag->add_option("--bucket-weeks", lr_bucket, "Bucket width in weeks")->capture_default_str()->check(CLI::PositiveNumber);
  lag->add_option("--out", lr_out, "Output CSV (default stdout)");
  add_common(lag, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    std::cerr << (parsed.empty() ? app.help() : parsed.back()->help());
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  const Stopwatch total;
  try {
    if (active == gen) {
      ndup::Warnings warnings;
      const auto sources = ndup::list_images(gm_input);
      const auto rows = ndup::generate_query_set(sources, gm_out, common.seed, common.jobs, warnings);
      warn_all(warnings);
      std::size_t skipped = 0;
      for (const auto& r : rows) skipped += r.skipped;
      print_json({{"version", 1},
                  {"sources", sources.size() - warnings.size()},
                  {"queries", rows.size() - skipped},
                  {"skipped", skipped},
                  {"manifest", (fs::path(gm_out) / "queries.jsonl").string()}});
      if (rows.empty()) return kExitData;
    } else if (active == synth) {
      sy_opts.seed = common.seed;
      const auto rows = ndup::write_synthetic_corpus(sy_out, sy_count, sy_opts, common.jobs);
      print_json({{"version", 1}, {"images", rows.size()}, {"manifest", (fs::path(sy_out) / "corpus.jsonl").string()}});
    } else if (active == extract) {
      const auto pca = load_optional_pca(ex_pca);
      ndup::ExtractOptions opts{pca ? &*pca : nullptr, parse_code(ex_code), ex_max, common.jobs};
      if (!pca && ex_code != "bits") throw UsageError("--orb-code float needs --pca");
      ndup::Warnings warnings;
      const auto images = ndup::list_images(ex_input);
      const Stopwatch sw;
      const auto features = ndup::extract_features(images, opts, warnings);
      warn_all(warnings);
      if (common.timing) std::fprintf(stderr, "extract: %.3f s for %zu images\n", sw.seconds(), images.size());
      if (features.empty()) throw ndup::Error(ndup::ErrorCode::EmptyInput, "no image could be processed");
      const auto kind = ndup::orb_kind(opts);
      ensure_parent(ex_out);
      ndup::write_file_bytes(ex_out, ndup::write_features(features, kind));
      std::size_t count = 0;
      for (const auto& f : features) count += f.features.size();
      print_json({{"version", 1},
                  {"images", features.size()},
                  {"features", count},
                  {"kind", ndup::to_string(kind)},
                  {"failed", warnings.size()}});
    } else if (active == fitpca) {
      const auto file = ndup::read_features(ndup::read_file_bytes(fp_input));
      const auto sample = ndup::pca_sample(file);
      const Stopwatch sw;
      const auto model = ndup::fit_pca(sample, common.seed, fp_cap);
      if (common.timing) std::fprintf(stderr, "fit-pca: %.3f s\n", sw.seconds());
      ensure_parent(fp_out);
      ndup::write_file_bytes(fp_out, ndup::save_pca(model));
      print_json({{"version", 1}, {"descriptors", sample.size()}, {"trained_on", model.trained_on}});
    } else if (active == build) {
      const auto file = ndup::read_features(ndup::read_file_bytes(bi_input));
      const auto index = ndup::FlatIndex::build(file.images, file.kind);
      ensure_parent(bi_out);
      ndup::write_file_bytes(bi_out, index.save());
      print_json({{"version", 1},
                  {"images", index.image_count()},
                  {"features", index.feature_count()},
                  {"kind", ndup::to_string(index.kind())}});
    } else if (active == query) {
      const auto index = ndup::FlatIndex::load(ndup::read_file_bytes(q_index));
      q_params.jobs = common.jobs;
      ndup::DescriptorSet features;
      std::string query_id;
      const Stopwatch sw;
      if (looks_like_feature_file(q_input)) {
        const auto file = ndup::read_features(ndup::read_file_bytes(q_input));
        if (file.images.empty()) throw ndup::Error(ndup::ErrorCode::EmptyInput, q_input + " holds no images");
        const ndup::ImageFeatures* chosen = &file.images.front();
        if (!q_id.empty()) {
          chosen = nullptr;
          for (const auto& img : file.images) {
            if (img.id == q_id) chosen = &img;
          }
          if (chosen == nullptr) throw ndup::Error(ndup::ErrorCode::InvalidArgument, "no entry '" + q_id + "' in " + q_input);
        }
        query_id = chosen->id;
        features = chosen->features;
      } else {
        const auto pca = load_optional_pca(q_pca);
        query_id = ndup::file_stem(q_input);
        features = ndup::orb_feature_set(ndup::read_image_file(q_input), pca ? &*pca : nullptr, parse_code(q_code));
      }
      const double extract_s = sw.seconds();
      const auto mode = resolve_mode(q_mode, index);
      const Stopwatch search;
      const auto result = mode == ndup::RetrievalMode::VoteCount ? index.query_votes(features, q_params)
                                                                 : index.query_distance(features, q_params);
      if (common.timing) {
        std::fprintf(stderr, "%s: extract %.3f s, search %.3f s\n", query_id.c_str(), extract_s, search.seconds());
      }
      print_json({{"version", 1},
                  {"query", query_id},
                  {"mode", ndup::to_string(mode)},
                  {"k", q_params.k},
                  {"n", q_params.n},
                  {"features", features.size()},
                  {"results", ranked_json(result)}});
    } else if (active == bench) {
      const auto index = ndup::FlatIndex::load(ndup::read_file_bytes(b_index));
      const auto manifest = ndup::read_query_manifest(b_queries);
      warn_issues(b_queries, manifest);
      ndup::BenchConfig config;
      config.method = ndup::parse_method(b_method);
      config.mode = b_mode == "auto" ? ndup::default_mode(config.method) : ndup::parse_retrieval_mode(b_mode);
      config.query = b_params;
      config.jobs = common.jobs;
      if (b_ci == "normal") {
        config.ci_method = ndup::CiMethod::Normal;
      } else if (b_ci != "binomial-quantile") {
        throw UsageError("--ci must be binomial-quantile or normal");
      }
      const auto pca = load_optional_pca(b_pca);
      config.pca = pca ? &*pca : nullptr;
      config.code = parse_code(b_code);
      std::optional<ndup::FeatureFile> qf;
      if (!b_features.empty()) qf = ndup::read_features(ndup::read_file_bytes(b_features));
      config.query_features = qf ? &*qf : nullptr;
      if (config.method != ndup::Method::Orb && !qf) throw UsageError("--method " + b_method + " needs --features");
      std::vector<ndup::QueryTiming> timings;
      if (common.timing) config.timings = &timings;

      const auto report = ndup::run_benchmark(index, manifest.rows, config);
      for (const auto& m : report.missing_source) std::cerr << "warning: " << m.query_id << ": " << m.reason << "\n";
      std::error_code ec;
      fs::create_directories(b_out, ec);
      write_text((fs::path(b_out) / "report.json").string(), ndup::report_to_json(report));
      write_text((fs::path(b_out) / "report.csv").string(), ndup::report_to_csv(report));
      for (const auto& t : timings) {
        std::fprintf(stderr, "%s: extract %.3f s, search %.3f s\n", t.query_id.c_str(), t.extract_seconds, t.search_seconds);
      }
      std::cout << ndup::report_to_table(report);
    } else if (active == ph) {
      ojson list = ojson::array();
      for (const auto& path : ph_inputs) {
        list.push_back({{"path", path}, {"phash", ndup::to_hex(ndup::phash(ndup::read_image_file(path)))}});
      }
      print_json({{"version", 1}, {"hashes", list}});
    } else if (active == train) {
      const auto read = ndup::read_labeled_pairs(tm_input);
      warn_issues(tm_input, read);
      std::vector<ndup::LabeledPair> pairs;
      for (const auto& r : read.rows) pairs.push_back({{r.phash_dist, r.retrieval_score, r.mode}, r.match});
      tm_opts.seed = common.seed;
      const auto model = ndup::train(pairs, tm_opts);
      std::size_t correct = 0;
      for (const auto& p : pairs) correct += ndup::predict(model, p.features).match == p.match;
      ensure_parent(tm_out);
      write_text(tm_out, ndup::model_to_json(model));
      ojson summary = {{"version", 1},
                       {"mode", ndup::to_string(model.mode)},
                       {"trained_on", model.trained_on},
                       {"iterations", model.iterations},
                       {"train_accuracy", static_cast<double>(correct) / static_cast<double>(pairs.size())},
                       {"auc", ndup::auc(model, pairs)}};
      if (tm_loocv) summary["loocv_accuracy"] = ndup::loocv(pairs, tm_opts);
      print_json(summary);
    } else if (active == classify) {
      const auto index = ndup::FlatIndex::load(ndup::read_file_bytes(c_index));
      const auto manifest = ndup::read_query_manifest(c_queries);
      warn_issues(c_queries, manifest);
      const auto model = ndup::model_from_json(read_text(c_model));
      ndup::BenchConfig config;
      config.method = ndup::parse_method(c_method);
      config.mode = c_mode == "auto" ? ndup::default_mode(config.method) : ndup::parse_retrieval_mode(c_mode);
      config.query = c_params;
      config.jobs = common.jobs;
      const auto pca = load_optional_pca(c_pca);
      config.pca = pca ? &*pca : nullptr;
      config.code = parse_code(c_code);
      std::optional<ndup::FeatureFile> qf;
      if (!c_features.empty()) qf = ndup::read_features(ndup::read_file_bytes(c_features));
      config.query_features = qf ? &*qf : nullptr;
      if (config.method != ndup::Method::Orb && !qf) throw UsageError("--method " + c_method + " needs --features");
      ndup::Warnings warnings;
      const auto rows = ndup::classify_queries(index, manifest.rows, ndup::list_images(c_corpus), model, config, warnings);
      warn_all(warnings);
      std::string out;
      for (const auto& r : rows) out += ndup::to_jsonl(r) + "\n";
      if (c_out.empty()) {
        std::cout << out;
      } else {
        ensure_parent(c_out);
        write_text(c_out, out);
      }
    } else if (active == lag) {
      const auto classified = ndup::read_classified(lr_input);
      warn_issues(lr_input, classified);
      const auto corpus = ndup::read_manifest(lr_corpus);
      warn_issues(lr_corpus, corpus);
      ndup::Warnings warnings;
      const auto records = ndup::lag_records(classified.rows, corpus.rows, warnings);
      warn_all(warnings);
      const auto csv = ndup::lag_to_csv(ndup::lag_histogram(records, lr_bucket));
      if (lr_out.empty()) {
        std::cout << csv;
      } else {
        ensure_parent(lr_out);
        write_text(lr_out, csv);
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const ndup::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ndup::ErrorCode::InvalidArgument ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  if (common.timing) std::fprintf(stderr, "total: %.3f s\n", total.seconds());
  return kExitOk;
}
