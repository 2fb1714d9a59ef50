#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ndup/eval.hpp"
#include "ndup/feature_io.hpp"
#include "ndup/match_classifier.hpp"
#include "ndup/orb.hpp"
#include "ndup/synthetic.hpp"
#include "ndup/vector_index.hpp"

namespace ndup {

/// Per-item problems that do not stop a batch, in input order.
using Warnings = std::vector<std::string>;

/// Writes `<source>__<manip>.png` for an identity copy plus the catalog of
/// every source into `out_dir`, and returns the matching query rows (paths
/// relative to `out_dir`) in source, then catalog order. Sources that fail
/// to decode are reported in `warnings`.
std::vector<QueryRow> generate_query_set(const std::vector<ImageRef>& sources, const std::string& out_dir,
                                         std::uint64_t seed, int jobs, Warnings& warnings);

struct ExtractOptions {
  const PcaModel* pca = nullptr;  // raw binary/256 descriptors when null
  OrbCode code = OrbCode::Bits;
  int max_features = kDefaultMaxFeatures;
  int jobs = 1;
};

FeatureKind orb_kind(const ExtractOptions& options) noexcept;

/// ORB features for every decodable image, in input order.
std::vector<ImageFeatures> extract_features(const std::vector<ImageRef>& images, const ExtractOptions& options,
                                            Warnings& warnings);

/// All binary/256 descriptors of a feature file as PCA training input.
std::vector<BinaryDescriptor256> pca_sample(const FeatureFile& file);

struct ClassifiedRow {
  std::string query_id;
  std::string result_id;
  int phash_dist = 0;
  double retrieval_score = 0;
  RetrievalMode mode = RetrievalMode::VoteCount;
  double probability = 0;
  bool match = false;
};

std::string to_jsonl(const ClassifiedRow& row);
/// Throws NoValidRows; malformed lines are reported as issues.
ManifestRead<ClassifiedRow> read_classified(const std::string& path);

/// Retrieves the top result of every query and labels the pair with the
/// model, using pHash distance between the query image and the result's
/// image (resolved through `corpus`). Queries without a result, without a
/// corpus path or with an undecodable image are reported in `warnings`.
std::vector<ClassifiedRow> classify_queries(const FlatIndex& index, const std::vector<QueryRow>& queries,
                                            const std::vector<ImageRef>& corpus, const MatchModel& model,
                                            const BenchConfig& config, Warnings& warnings);

/// Lag records for rows labeled as matches whose ids both appear in the
/// corpus manifest; other rows are reported in `warnings`.
std::vector<LagRecord> lag_records(const std::vector<ClassifiedRow>& rows, const std::vector<CorpusRow>& corpus,
                                   Warnings& warnings);

/// Writes `count` synthetic images and a corpus manifest (corpus.jsonl)
/// with hourly timestamps cycling through the platforms.
std::vector<CorpusRow> write_synthetic_corpus(const std::string& out_dir, std::size_t count,
                                              const SyntheticOptions& options, int jobs);

}  // namespace ndup
