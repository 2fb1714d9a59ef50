#include "ndup/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "ndup/error.hpp"
#include "ndup/imaging.hpp"
#include "ndup/manipgen.hpp"
#include "ndup/parallel.hpp"

namespace ndup {

namespace {

constexpr double kSecondsPerWeek = 7.0 * 86400.0;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

// Smallest k with P(X <= k) >= q for X ~ Binomial(n, p).
std::size_t binomial_quantile(std::size_t n, double p, double q) {
  const double logp = std::log(p);
  const double logq = std::log1p(-p);
  const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  double cdf = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double kd = static_cast<double>(k);
    const double nk = static_cast<double>(n - k);
    cdf += std::exp(lgn - std::lgamma(kd + 1.0) - std::lgamma(nk + 1.0) + kd * logp + nk * logq);
    if (cdf >= q * (1.0 - 1e-12)) return k;
  }
  return n;
}

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Catalog order with the identity query first; unknown ids sort after.
std::size_t manip_order(const std::string& id) {
  if (id == "identity") return 0;
  static const std::vector<ManipulationSpec> specs = catalog();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].id == id) return i + 1;
  }
  return specs.size() + 1;
}

}  // namespace

QueryOutcome score_query(const RetrievalResult& result, const std::string& query_id, const std::string& source_id,
                         const std::string& manip_id) {
  QueryOutcome out{query_id, source_id, manip_id, std::nullopt, {}};
  for (const auto& item : result.ranked) {
    if (item.image_id == source_id) {
      out.rank_of_source = item.rank;
      break;
    }
  }
  for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
    out.hits[i] = out.rank_of_source && *out.rank_of_source <= kRecallKs[i] ? 1 : 0;
  }
  return out;
}

const char* to_string(CiMethod m) noexcept {
  return m == CiMethod::Normal ? "normal" : "binomial-quantile";
}

Interval confidence_interval(double p, std::size_t n, CiMethod method) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "interval over zero observations");
  if (!(p >= 0 && p <= 1)) throw Error(ErrorCode::InvalidArgument, "proportion outside [0,1]");
  Interval ci;
  if (method == CiMethod::Normal) {
    const double half = 1.96 * std::sqrt(p * (1 - p) / static_cast<double>(n));
    ci = {p - half, p + half};
  } else {
    const double nd = static_cast<double>(n);
    const double c = std::round(p * nd);
    if (c <= 0) return {0, 0};
    if (c >= nd) return {1, 1};
    const double pr = c / nd;
    ci = {static_cast<double>(binomial_quantile(n, pr, 0.025)) / nd,
          static_cast<double>(binomial_quantile(n, pr, 0.975)) / nd};
  }
  ci.lo = std::clamp(ci.lo, 0.0, 1.0);
  ci.hi = std::clamp(ci.hi, 0.0, 1.0);
  return ci;
}

EvalReport aggregate(std::vector<QueryOutcome> outcomes, CiMethod method) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyInput, "no query outcomes to aggregate");
  std::sort(outcomes.begin(), outcomes.end(),
            [](const QueryOutcome& a, const QueryOutcome& b) { return a.query_id < b.query_id; });
  EvalReport r;
  r.ci_method = method;
  const std::size_t n = outcomes.size();
  std::map<std::pair<std::size_t, std::string>, std::array<std::size_t, 3>> groups;  // n, @3, @10
  for (const auto& o : outcomes) {
    for (std::size_t i = 0; i < 3; ++i) r.recall[i].hits += static_cast<std::size_t>(o.hits[i]);
    auto& g = groups[{manip_order(o.manip_id), o.manip_id}];
    ++g[0];
    g[1] += static_cast<std::size_t>(o.hits[1]);
    g[2] += static_cast<std::size_t>(o.hits[2]);
  }
  for (auto& s : r.recall) {
    s.mean = static_cast<double>(s.hits) / static_cast<double>(n);
    s.ci = confidence_interval(s.mean, n, method);
  }
  for (const auto& [key, g] : groups) {
    const double gn = static_cast<double>(g[0]);
    r.per_manipulation.push_back({key.second, g[0], static_cast<double>(g[1]) / gn, static_cast<double>(g[2]) / gn});
  }
  r.outcomes = std::move(outcomes);
  return r;
}

ChiSquareResult chi_square_2x2(std::size_t hits_a, std::size_t n_a, std::size_t hits_b, std::size_t n_b) {
  if (n_a < 1 || n_b < 1 || hits_a > n_a || hits_b > n_b) {
    throw Error(ErrorCode::InvalidArgument, "chi-square needs 1 <= n and hits <= n");
  }
  const double a = static_cast<double>(hits_a);
  const double b = static_cast<double>(n_a - hits_a);
  const double c = static_cast<double>(hits_b);
  const double d = static_cast<double>(n_b - hits_b);
  const double total = a + b + c + d;
  const double margins = (a + b) * (c + d) * (a + c) * (b + d);
  ChiSquareResult res;
  if (margins == 0) {
    res.degenerate = true;
    return res;
  }
  const double diff = std::max(0.0, std::abs(a * d - b * c) - total / 2.0);
  res.statistic = total * diff * diff / margins;
  res.p_value = std::erfc(std::sqrt(res.statistic / 2.0));
  return res;
}

LagRecord make_lag_record(const std::string& query_id, std::int64_t query_posted_at, std::int64_t match_posted_at) {
  return {query_id, query_posted_at, match_posted_at,
          floor_div(match_posted_at - query_posted_at, static_cast<std::int64_t>(kSecondsPerWeek))};
}

std::vector<LagBucket> lag_histogram(const std::vector<LagRecord>& records, int bucket_weeks) {
  if (bucket_weeks < 1) throw Error(ErrorCode::InvalidArgument, "bucket width must be at least 1 week");
  std::map<std::int64_t, std::size_t> counts;
  for (const auto& rec : records) ++counts[floor_div(rec.lag_weeks, bucket_weeks) * bucket_weeks];
  std::vector<LagBucket> out;
  for (const auto& [start, count] : counts) {
    out.push_back({start, start + bucket_weeks, count, 100.0 * static_cast<double>(count) / static_cast<double>(records.size())});
  }
  return out;
}

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::Orb: return "orb";
    case Method::Vgg: return "vgg";
    case Method::Siamese: return "siamese";
  }
  return "orb";
}

Method parse_method(const std::string& s) {
  if (s == "orb") return Method::Orb;
  if (s == "vgg") return Method::Vgg;
  if (s == "siamese") return Method::Siamese;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + s + "' (orb, vgg, siamese)");
}

RetrievalMode default_mode(Method m) noexcept {
  return m == Method::Siamese ? RetrievalMode::Distance : RetrievalMode::VoteCount;
}

EvalReport run_benchmark(const FlatIndex& index, const std::vector<QueryRow>& queries, const BenchConfig& config) {
  if (queries.empty()) throw Error(ErrorCode::EmptyInput, "query manifest is empty");
  if (config.method != Method::Orb && config.query_features == nullptr) {
    throw Error(ErrorCode::InvalidArgument, std::string(to_string(config.method)) + " needs pre-extracted query features");
  }
  std::unordered_map<std::string, std::size_t> lookup;
  if (config.query_features != nullptr) {
    for (std::size_t i = 0; i < config.query_features->images.size(); ++i) {
      lookup.emplace(config.query_features->images[i].id, i);
    }
  }

  enum class Status { Scored, Skipped, MissingSource };
  struct Slot {
    Status status = Status::Skipped;
    QueryOutcome outcome;
    std::string reason;
    QueryTiming timing;
  };
  std::vector<Slot> slots(queries.size());
  QueryParams qp = config.query;
  qp.jobs = 1;

  parallel_for(queries.size(), config.jobs, [&](std::size_t i) {
    const auto& q = queries[i];
    auto& slot = slots[i];
    if (q.skipped) {
      slot.reason = q.reason.value_or("skipped in manifest");
      return;
    }
    if (index.find(q.source_id) < 0) {
      slot.status = Status::MissingSource;
      slot.reason = "source '" + q.source_id + "' not in index";
      return;
    }
    DescriptorSet features;
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    try {
      if (config.method == Method::Orb) {
        features = orb_feature_set(read_image_file(q.query_path), config.pca, config.code, config.max_features);
      } else {
        const auto it = lookup.find(q.query_id);
        if (it == lookup.end()) {
          slot.reason = "no features for query '" + q.query_id + "'";
          return;
        }
        features = config.query_features->images[it->second].features;
      }
      const auto t1 = clock::now();
      // A query without features retrieves nothing: a miss, not a skip.
      RetrievalResult result{config.mode, {}};
      if (!features.empty()) {
        result = config.mode == RetrievalMode::VoteCount ? index.query_votes(features, qp)
                                                         : index.query_distance(features, qp);
      }
      slot.outcome = score_query(result, q.query_id, q.source_id, q.manip_id);
      slot.status = Status::Scored;
      slot.timing = {q.query_id, std::chrono::duration<double>(t1 - t0).count(),
                     std::chrono::duration<double>(clock::now() - t1).count()};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DecodeError && e.code() != ErrorCode::Io) throw;
      slot.reason = e.what();
    }
  });

  if (config.timings != nullptr) {
    config.timings->clear();
    for (const auto& slot : slots) {
      if (slot.status == Status::Scored) config.timings->push_back(slot.timing);
    }
  }
  std::vector<QueryOutcome> outcomes;
  std::vector<SkippedQuery> skipped;
  std::vector<SkippedQuery> missing;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    switch (slots[i].status) {
      case Status::Scored: outcomes.push_back(std::move(slots[i].outcome)); break;
      case Status::Skipped: skipped.push_back({q.query_id, q.source_id, q.manip_id, slots[i].reason}); break;
      case Status::MissingSource: missing.push_back({q.query_id, q.source_id, q.manip_id, slots[i].reason}); break;
    }
  }
  if (outcomes.empty()) throw Error(ErrorCode::EmptyInput, "no query could be scored");

  EvalReport report = aggregate(std::move(outcomes), config.ci_method);
  const auto by_id = [](const SkippedQuery& a, const SkippedQuery& b) { return a.query_id < b.query_id; };
  std::sort(skipped.begin(), skipped.end(), by_id);
  std::sort(missing.begin(), missing.end(), by_id);
  report.skipped = std::move(skipped);
  report.missing_source = std::move(missing);
  report.method = to_string(config.method);
  report.mode = config.mode;
  report.k = config.query.k;
  report.n = config.query.n;
  return report;
}

std::string report_to_json(const EvalReport& r) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  j["version"] = 1;
  j["method"] = r.method;
  j["mode"] = to_string(r.mode);
  j["k"] = r.k;
  j["n"] = r.n;
  j["ci_method"] = to_string(r.ci_method);
  j["queries"] = r.outcomes.size();
  j["skipped"] = r.skipped.size();
  j["missing_source"] = r.missing_source.size();
  ojson recall = ojson::object();
  for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
    const auto& s = r.recall[i];
    recall["recall_at_" + std::to_string(kRecallKs[i])] = {{"mean", s.mean}, {"hits", s.hits}, {"ci", {s.ci.lo, s.ci.hi}}};
  }
  j["recall"] = recall;
  ojson per = ojson::array();
  for (const auto& m : r.per_manipulation) {
    per.push_back({{"manip_id", m.manip_id}, {"n", m.n}, {"recall_at_3", m.recall_at_3}, {"recall_at_10", m.recall_at_10}});
  }
  j["per_manipulation"] = per;
  ojson outs = ojson::array();
  for (const auto& o : r.outcomes) {
    ojson row = {{"query_id", o.query_id}, {"source_id", o.source_id}, {"manip_id", o.manip_id}};
    row["rank_of_source"] = o.rank_of_source ? ojson(*o.rank_of_source) : ojson(nullptr);
    row["recall_at_1"] = o.hits[0];
    row["recall_at_3"] = o.hits[1];
    row["recall_at_10"] = o.hits[2];
    outs.push_back(std::move(row));
  }
  j["outcomes"] = outs;
  const auto skips = [](const std::vector<SkippedQuery>& list) {
    ojson a = ojson::array();
    for (const auto& s : list) {
      a.push_back({{"query_id", s.query_id}, {"source_id", s.source_id}, {"manip_id", s.manip_id}, {"reason", s.reason}});
    }
    return a;
  };
  j["skipped_queries"] = skips(r.skipped);
  j["missing_sources"] = skips(r.missing_source);
  return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& r) {
  std::string out = "manip_id,n,recall_at_3,recall_at_10\n";
  for (const auto& m : r.per_manipulation) {
    out += m.manip_id + "," + std::to_string(m.n) + "," + fmt(m.recall_at_3, 4) + "," + fmt(m.recall_at_10, 4) + "\n";
  }
  return out;
}

std::string report_to_table(const EvalReport& r) {
  std::string out = "method " + r.method + " (" + to_string(r.mode) + "), " + std::to_string(r.outcomes.size()) +
                    " queries, " + std::to_string(r.skipped.size()) + " skipped, " +
                    std::to_string(r.missing_source.size()) + " missing source\n";
  for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
    const auto& s = r.recall[i];
    char line[128];
    std::snprintf(line, sizeof line, "  recall@%-2d %.3f [%.2f, %.2f]\n", kRecallKs[i], s.mean, s.ci.lo, s.ci.hi);
    out += line;
  }
  out += "\n  manipulation            n   @3     @10\n";
  for (const auto& m : r.per_manipulation) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-22s %3zu  %.3f  %.3f\n", m.manip_id.c_str(), m.n, m.recall_at_3, m.recall_at_10);
    out += line;
  }
  return out;
}

std::string lag_to_csv(const std::vector<LagBucket>& buckets) {
  std::string out = "bucket_start_weeks,bucket_end_weeks,count,percentage\n";
  for (const auto& b : buckets) {
    out += std::to_string(b.start_weeks) + "," + std::to_string(b.end_weeks) + ",";
    out += std::to_string(b.count) + "," + fmt(b.percent, 4) + "\n";
  }
  return out;
}

}  // namespace ndup
