#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ndup/feature_io.hpp"
#include "ndup/orb.hpp"
#include "ndup/vector_index.hpp"

namespace ndup {

inline constexpr std::array<int, 3> kRecallKs{1, 3, 10};

struct QueryOutcome {
  std::string query_id;
  std::string source_id;
  std::string manip_id;
  std::optional<int> rank_of_source;  // 1-based; empty when not returned
  std::array<int, 3> hits{};          // recall@1, @3, @10

  bool operator==(const QueryOutcome&) const = default;
};

/// Only `source_id` counts as a hit, whatever else was retrieved.
QueryOutcome score_query(const RetrievalResult& result, const std::string& query_id, const std::string& source_id,
                         const std::string& manip_id);

enum class CiMethod {
  BinomialQuantile,  // [Q(0.025), Q(0.975)] / n of Binomial(n, p)
  Normal,            // p +- 1.96 sqrt(p(1-p)/n)
};

const char* to_string(CiMethod m) noexcept;

struct Interval {
  double lo = 0;
  double hi = 0;
};

/// 95% interval for a proportion, clipped to [0, 1].
Interval confidence_interval(double p, std::size_t n, CiMethod method = CiMethod::BinomialQuantile);

struct RecallSummary {
  std::size_t hits = 0;
  double mean = 0;
  Interval ci;
};

struct ManipulationRecall {
  std::string manip_id;
  std::size_t n = 0;
  double recall_at_3 = 0;
  double recall_at_10 = 0;
};

struct SkippedQuery {
  std::string query_id;
  std::string source_id;
  std::string manip_id;
  std::string reason;
};

struct EvalReport {
  std::string method = "orb";
  RetrievalMode mode = RetrievalMode::VoteCount;
  int k = 100;
  int n = 10;
  CiMethod ci_method = CiMethod::BinomialQuantile;
  std::array<RecallSummary, 3> recall{};   // @1, @3, @10
  std::vector<ManipulationRecall> per_manipulation;  // catalog order, others after by id
  std::vector<QueryOutcome> outcomes;                 // sorted by query_id
  std::vector<SkippedQuery> skipped;                  // manifest skips and unusable queries
  std::vector<SkippedQuery> missing_source;           // excluded, counted as warnings
};

/// Sorts by query_id, then reduces. Throws EmptyInput.
EvalReport aggregate(std::vector<QueryOutcome> outcomes, CiMethod method = CiMethod::BinomialQuantile);

struct ChiSquareResult {
  double statistic = 0;
  double p_value = 1;
  bool degenerate = false;  // a zero margin; p_value is then 1
};

/// Yates-corrected 2x2 test of hits_a/n_a against hits_b/n_b.
/// Throws InvalidArgument unless 1 <= n and hits <= n.
ChiSquareResult chi_square_2x2(std::size_t hits_a, std::size_t n_a, std::size_t hits_b, std::size_t n_b);

struct LagRecord {
  std::string query_id;
  std::int64_t query_posted_at = 0;  // Unix seconds
  std::int64_t match_posted_at = 0;
  std::int64_t lag_weeks = 0;  // positive when the query was posted first
};

/// lag_weeks = floor((match_posted_at - query_posted_at) / 7 days).
LagRecord make_lag_record(const std::string& query_id, std::int64_t query_posted_at, std::int64_t match_posted_at);

struct LagBucket {
  std::int64_t start_weeks = 0;  // bucket covers [start_weeks, end_weeks)
  std::int64_t end_weeks = 0;
  std::size_t count = 0;
  double percent = 0;
};

/// Buckets of `bucket_weeks`, ascending, empty buckets omitted. Throws
/// InvalidArgument if bucket_weeks < 1.
std::vector<LagBucket> lag_histogram(const std::vector<LagRecord>& records, int bucket_weeks = 3);

enum class Method { Orb, Vgg, Siamese };

const char* to_string(Method m) noexcept;
/// Throws InvalidArgument.
Method parse_method(const std::string& s);
/// Vote counting for local features, distance ranking for single vectors.
RetrievalMode default_mode(Method m) noexcept;

struct QueryTiming {
  std::string query_id;
  double extract_seconds = 0;
  double search_seconds = 0;
};

struct BenchConfig {
  Method method = Method::Orb;
  RetrievalMode mode = RetrievalMode::VoteCount;
  QueryParams query;
  int jobs = 1;  // workers across queries; 0 means hardware concurrency
  CiMethod ci_method = CiMethod::BinomialQuantile;
  // Orb: PCA model (raw 256-bit descriptors when null) and code type.
  const PcaModel* pca = nullptr;
  OrbCode code = OrbCode::Bits;
  int max_features = kDefaultMaxFeatures;
  // Vgg / Siamese: pre-extracted query features keyed by query_id.
  const FeatureFile* query_features = nullptr;
  // When set, receives wall times of every scored query in manifest order.
  std::vector<QueryTiming>* timings = nullptr;
};

/// Extracts or looks up each query's features, queries the index and
/// aggregates. Queries whose source is not indexed are reported under
/// missing_source; undecodable queries, or vgg/siamese queries absent from
/// the feature file, under skipped. A query with no features scores as a
/// miss.
/// The report does not depend on config.jobs. Throws EmptyInput when no
/// query can be scored.
EvalReport run_benchmark(const FlatIndex& index, const std::vector<QueryRow>& queries, const BenchConfig& config);

/// Machine-readable report with a top-level "version": 1.
std::string report_to_json(const EvalReport& r);
/// manip_id,n,recall_at_3,recall_at_10
std::string report_to_csv(const EvalReport& r);
std::string report_to_table(const EvalReport& r);
/// bucket_start_weeks,bucket_end_weeks,count,percentage
std::string lag_to_csv(const std::vector<LagBucket>& buckets);

}  // namespace ndup
