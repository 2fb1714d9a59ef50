#include "ndup/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "ndup/error.hpp"
#include "ndup/imaging.hpp"
#include "ndup/manipgen.hpp"
#include "ndup/parallel.hpp"
#include "ndup/phash.hpp"

namespace ndup {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create directory " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "short write to " + path);
}

std::string iso8601(std::int64_t unix_seconds) {
  const std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::vector<QueryRow> generate_query_set(const std::vector<ImageRef>& sources, const std::string& out_dir,
                                         std::uint64_t seed, int jobs, Warnings& warnings) {
  ensure_dir(out_dir);
  struct Slot {
    std::vector<QueryRow> rows;
    std::string warning;
  };
  std::vector<Slot> slots(sources.size());
  parallel_for(sources.size(), jobs, [&](std::size_t i) {
    const auto& src = sources[i];
    Raster raster;
    try {
      raster = to_rgb(read_image_file(src.path));
    } catch (const Error& e) {
      slots[i].warning = src.id + ": " + e.what();
      return;
    }
    const auto emit = [&](const std::string& manip_id, const Raster* image, const std::string& reason) {
      QueryRow row;
      row.source_id = src.id;
      row.manip_id = manip_id;
      row.query_id = src.id + "__" + manip_id;
      if (image != nullptr) {
        row.query_path = row.query_id + ".png";
        write_png_file(*image, (fs::path(out_dir) / row.query_path).string());
      } else {
        row.skipped = true;
        row.reason = reason;
      }
      slots[i].rows.push_back(std::move(row));
    };
    emit("identity", &raster, {});
    const auto set = generate_all(raster, src.id, seed);
    std::size_t item = 0;
    std::size_t skip = 0;
    for (const auto& spec : catalog(seed)) {
      if (item < set.items.size() && set.items[item].manip.id == spec.id) {
        emit(spec.id, &set.items[item++].raster, {});
      } else if (skip < set.skips.size() && set.skips[skip].manip_id == spec.id) {
        emit(spec.id, nullptr, set.skips[skip++].reason);
      }
    }
  });
  std::vector<QueryRow> rows;
  for (auto& slot : slots) {
    if (!slot.warning.empty()) warnings.push_back(std::move(slot.warning));
    for (auto& row : slot.rows) rows.push_back(std::move(row));
  }
  std::string manifest;
  for (const auto& row : rows) manifest += to_jsonl(row) + "\n";
  write_text((fs::path(out_dir) / "queries.jsonl").string(), manifest);
  return rows;
}

FeatureKind orb_kind(const ExtractOptions& options) noexcept {
  if (options.pca == nullptr) return FeatureKind::binary(kPcaInputDim);
  return options.code == OrbCode::Bits ? FeatureKind::binary(kPcaOutputDim) : FeatureKind::real(kPcaOutputDim);
}

std::vector<ImageFeatures> extract_features(const std::vector<ImageRef>& images, const ExtractOptions& options,
                                            Warnings& warnings) {
  std::vector<std::optional<ImageFeatures>> slots(images.size());
  std::vector<std::string> problems(images.size());
  parallel_for(images.size(), options.jobs, [&](std::size_t i) {
    try {
      const Raster r = read_image_file(images[i].path);
      slots[i] = ImageFeatures{images[i].id, orb_feature_set(r, options.pca, options.code, options.max_features)};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DecodeError && e.code() != ErrorCode::Io) throw;
      problems[i] = images[i].id + ": " + e.what();
    }
  });
  std::vector<ImageFeatures> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      warnings.push_back(std::move(problems[i]));
    }
  }
  return out;
}

std::vector<BinaryDescriptor256> pca_sample(const FeatureFile& file) {
  if (!(file.kind == FeatureKind::binary(kPcaInputDim))) {
    throw Error(ErrorCode::KindMismatch, "PCA needs raw binary/256 descriptors, file holds " + to_string(file.kind));
  }
  std::vector<BinaryDescriptor256> sample;
  for (const auto& img : file.images) {
    for (std::size_t i = 0; i < img.features.size(); ++i) sample.push_back(descriptor_at(img.features, i));
  }
  return sample;
}

std::string to_jsonl(const ClassifiedRow& row) {
  nlohmann::ordered_json j;
  j["query_id"] = row.query_id;
  j["result_id"] = row.result_id;
  j["phash_dist"] = row.phash_dist;
  j["retrieval_score"] = row.retrieval_score;
  j["mode"] = to_string(row.mode);
  j["probability"] = row.probability;
  j["match"] = row.match;
  return j.dump();
}

ManifestRead<ClassifiedRow> read_classified(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  ManifestRead<ClassifiedRow> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClassifiedRow row;
      row.query_id = j.at("query_id").get<std::string>();
      row.result_id = j.at("result_id").get<std::string>();
      row.phash_dist = j.value("phash_dist", 0);
      row.retrieval_score = j.value("retrieval_score", 0.0);
      row.mode = parse_retrieval_mode(j.value("mode", std::string("votes")));
      row.probability = j.value("probability", 0.0);
      row.match = j.at("match").get<bool>();
      out.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      out.issues.push_back({lineno, e.what()});
    }
  }
  if (out.rows.empty()) throw Error(ErrorCode::NoValidRows, path + " has no valid rows");
  return out;
}

std::vector<ClassifiedRow> classify_queries(const FlatIndex& index, const std::vector<QueryRow>& queries,
                                            const std::vector<ImageRef>& corpus, const MatchModel& model,
                                            const BenchConfig& config, Warnings& warnings) {
  if (model.mode != config.mode) {
    throw Error(ErrorCode::ModeMismatch, std::string("model trained on ") + to_string(model.mode) +
                                             ", retrieval uses " + to_string(config.mode));
  }
  std::unordered_map<std::string, std::string> paths;
  for (const auto& ref : corpus) paths.emplace(ref.id, ref.path);
  std::unordered_map<std::string, std::size_t> lookup;
  if (config.query_features != nullptr) {
    for (std::size_t i = 0; i < config.query_features->images.size(); ++i) {
      lookup.emplace(config.query_features->images[i].id, i);
    }
  } else if (config.method != Method::Orb) {
    throw Error(ErrorCode::InvalidArgument, std::string(to_string(config.method)) + " needs pre-extracted query features");
  }
  QueryParams qp = config.query;
  qp.jobs = 1;

  std::vector<std::optional<ClassifiedRow>> slots(queries.size());
  std::vector<std::string> problems(queries.size());
  parallel_for(queries.size(), config.jobs, [&](std::size_t i) {
    const auto& q = queries[i];
    if (q.skipped) return;
    try {
      const Raster image = read_image_file(q.query_path);
      DescriptorSet features;
      if (config.method == Method::Orb) {
        features = orb_feature_set(image, config.pca, config.code, config.max_features);
      } else if (const auto it = lookup.find(q.query_id); it != lookup.end()) {
        features = config.query_features->images[it->second].features;
      }
      if (features.empty()) {
        problems[i] = q.query_id + ": no query features";
        return;
      }
      const auto result = config.mode == RetrievalMode::VoteCount ? index.query_votes(features, qp)
                                                                  : index.query_distance(features, qp);
      if (result.ranked.empty()) {
        problems[i] = q.query_id + ": nothing retrieved";
        return;
      }
      const auto& top = result.ranked.front();
      const auto path = paths.find(top.image_id);
      if (path == paths.end()) {
        problems[i] = q.query_id + ": no corpus path for result '" + top.image_id + "'";
        return;
      }
      ClassifiedRow row;
      row.query_id = q.query_id;
      row.result_id = top.image_id;
      row.phash_dist = hamming64(phash(image), phash(read_image_file(path->second)));
      row.retrieval_score = top.score;
      row.mode = config.mode;
      const auto p = predict(model, {row.phash_dist, row.retrieval_score, row.mode});
      row.probability = p.probability;
      row.match = p.match;
      slots[i] = std::move(row);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DecodeError && e.code() != ErrorCode::Io) throw;
      problems[i] = q.query_id + ": " + e.what();
    }
  });
  std::vector<ClassifiedRow> out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else if (!problems[i].empty()) {
      warnings.push_back(std::move(problems[i]));
    }
  }
  return out;
}

std::vector<LagRecord> lag_records(const std::vector<ClassifiedRow>& rows, const std::vector<CorpusRow>& corpus,
                                   Warnings& warnings) {
  std::unordered_map<std::string, std::int64_t> posted;
  for (const auto& row : corpus) posted.emplace(row.id, row.posted_at_unix);
  std::vector<LagRecord> out;
  for (const auto& row : rows) {
    if (!row.match) continue;
    const auto q = posted.find(row.query_id);
    const auto m = posted.find(row.result_id);
    if (q == posted.end() || m == posted.end()) {
      warnings.push_back(row.query_id + ": '" + (q == posted.end() ? row.query_id : row.result_id) +
                         "' not in corpus manifest");
      continue;
    }
    out.push_back(make_lag_record(row.query_id, q->second, m->second));
  }
  return out;
}

std::vector<CorpusRow> write_synthetic_corpus(const std::string& out_dir, std::size_t count,
                                              const SyntheticOptions& options, int jobs) {
  ensure_dir(out_dir);
  static constexpr Platform kPlatforms[] = {Platform::Reddit, Platform::FourChan, Platform::Twitter};
  constexpr std::int64_t kStart = 1577836800;  // 2020-01-01T00:00:00Z
  std::vector<CorpusRow> rows(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    auto& row = rows[i];
    row.id = synthetic_id(i);
    row.path = row.id + ".png";
    row.platform = kPlatforms[i % 3];
    row.posted_at_unix = kStart + static_cast<std::int64_t>(i) * 3600;
    row.posted_at = iso8601(row.posted_at_unix);
    write_png_file(synthetic_image(i, options), (fs::path(out_dir) / row.path).string());
  });
  std::string manifest;
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["id"] = row.id;
    j["path"] = row.path;
    j["platform"] = to_string(row.platform);
    j["posted_at"] = row.posted_at;
    manifest += j.dump() + "\n";
  }
  write_text((fs::path(out_dir) / "corpus.jsonl").string(), manifest);
  return rows;
}

}  // namespace ndup
