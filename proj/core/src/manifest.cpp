#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "ndup/error.hpp"
#include "ndup/feature_io.hpp"

namespace ndup {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

std::optional<int> digits(const std::string& s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) return std::nullopt;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

std::optional<Platform> parse_platform(const std::string& s) {
  if (s == "reddit") return Platform::Reddit;
  if (s == "4chan") return Platform::FourChan;
  if (s == "twitter") return Platform::Twitter;
  if (s == "other") return Platform::Other;
  return std::nullopt;
}

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || base.empty()) return path.string();
  return (base / path).lexically_normal().string();
}

// Reads a JSON Lines file; blank lines are skipped. The callback returns an
// error message or empty string for each parsed object.
template <typename Fn>
void for_each_jsonl(const std::string& path, std::vector<ManifestIssue>& issues, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      issues.push_back({lineno, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    if (!row.is_object()) {
      issues.push_back({lineno, "row is not a JSON object"});
      continue;
    }
    std::string problem;
    try {
      problem = fn(row, lineno);
    } catch (const json::exception& e) {
      problem = std::string("bad field type: ") + e.what();
    }
    if (!problem.empty()) issues.push_back({lineno, problem});
  }
}

std::string require_string(const json& row, const char* key, std::string& out) {
  const auto it = row.find(key);
  if (it == row.end() || !it->is_string()) return std::string("missing string field '") + key + "'";
  out = it->get<std::string>();
  if (out.empty()) return std::string("empty field '") + key + "'";
  return {};
}

template <typename Row>
void require_rows(const ManifestRead<Row>& read, const std::string& path) {
  if (read.rows.empty()) {
    std::string detail = path + " has no valid rows";
    if (!read.issues.empty()) {
      detail += " (line " + std::to_string(read.issues.front().line) + ": " + read.issues.front().message + ")";
    }
    throw Error(ErrorCode::NoValidRows, detail);
  }
}

}  // namespace

const char* to_string(Platform p) noexcept {
  switch (p) {
    case Platform::Reddit: return "reddit";
    case Platform::FourChan: return "4chan";
    case Platform::Twitter: return "twitter";
    case Platform::Other: return "other";
  }
  return "other";
}

std::optional<std::int64_t> parse_rfc3339(const std::string& s) {
  // YYYY-MM-DDTHH:MM:SS[.fraction](Z|+HH:MM|-HH:MM)
  const auto year = digits(s, 0, 4);
  const auto month = digits(s, 5, 2);
  const auto day = digits(s, 8, 2);
  const auto hour = digits(s, 11, 2);
  const auto minute = digits(s, 14, 2);
  const auto second = digits(s, 17, 2);
  if (!year || !month || !day || !hour || !minute || !second) return std::nullopt;
  if (s[4] != '-' || s[7] != '-' || s[13] != ':' || s[16] != ':') return std::nullopt;
  if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return std::nullopt;
  static constexpr int month_days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (*month < 1 || *month > 12 || *day < 1) return std::nullopt;
  const int max_day = month_days[*month - 1] + ((*month == 2 && is_leap(*year)) ? 1 : 0);
  if (*day > max_day || *hour > 23 || *minute > 59 || *second > 60) return std::nullopt;

  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const auto oh = digits(s, pos + 1, 2);
    const auto om = digits(s, pos + 4, 2);
    if (!oh || !om || pos + 3 >= s.size() || s[pos + 3] != ':' || *oh > 23 || *om > 59) return std::nullopt;
    offset = (*oh * 3600 + *om * 60) * (s[pos] == '+' ? 1 : -1);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  const std::int64_t days = days_from_civil(*year, static_cast<unsigned>(*month), static_cast<unsigned>(*day));
  return days * 86400 + *hour * 3600 + *minute * 60 + *second - offset;
}

ManifestRead<CorpusRow> read_manifest(const std::string& path) {
  ManifestRead<CorpusRow> out;
  std::unordered_set<std::string> ids;
  const fs::path base = fs::path(path).parent_path();
  for_each_jsonl(path, out.issues, [&](const json& row, std::size_t) -> std::string {
    CorpusRow r;
    if (auto e = require_string(row, "id", r.id); !e.empty()) return e;
    if (auto e = require_string(row, "path", r.path); !e.empty()) return e;
    std::string platform;
    if (auto e = require_string(row, "platform", platform); !e.empty()) return e;
    const auto p = parse_platform(platform);
    if (!p) return "unknown platform '" + platform + "'";
    r.platform = *p;
    if (auto e = require_string(row, "posted_at", r.posted_at); !e.empty()) return e;
    const auto ts = parse_rfc3339(r.posted_at);
    if (!ts) return "unparseable posted_at '" + r.posted_at + "'";
    r.posted_at_unix = *ts;
    if (const auto it = row.find("url"); it != row.end() && !it->is_null()) {
      if (!it->is_string()) return "field 'url' must be a string";
      r.url = it->get<std::string>();
    }
    if (!ids.insert(r.id).second) return "duplicate id '" + r.id + "'";
    r.path = resolve(base, r.path);
    out.rows.push_back(std::move(r));
    return {};
  });
  require_rows(out, path);
  return out;
}

std::string file_stem(const std::string& path) { return fs::path(path).stem().string(); }

ManifestRead<QueryRow> read_query_manifest(const std::string& path) {
  ManifestRead<QueryRow> out;
  std::unordered_set<std::string> ids;
  const fs::path base = fs::path(path).parent_path();
  for_each_jsonl(path, out.issues, [&](const json& row, std::size_t) -> std::string {
    QueryRow r;
    if (auto e = require_string(row, "source_id", r.source_id); !e.empty()) return e;
    if (auto e = require_string(row, "manip_id", r.manip_id); !e.empty()) return e;
    if (const auto it = row.find("skipped"); it != row.end()) r.skipped = it->get<bool>();
    if (const auto it = row.find("reason"); it != row.end() && it->is_string()) r.reason = it->get<std::string>();
    if (const auto it = row.find("query_path"); it != row.end() && it->is_string()) r.query_path = it->get<std::string>();
    if (r.query_path.empty() && !r.skipped) return "missing string field 'query_path'";
    if (const auto it = row.find("query_id"); it != row.end() && it->is_string()) {
      r.query_id = it->get<std::string>();
    } else if (!r.query_path.empty()) {
      r.query_id = file_stem(r.query_path);
    } else {
      r.query_id = r.source_id + "__" + r.manip_id;
    }
    if (!ids.insert(r.query_id).second) return "duplicate query id '" + r.query_id + "'";
    if (!r.query_path.empty()) r.query_path = resolve(base, r.query_path);
    out.rows.push_back(std::move(r));
    return {};
  });
  require_rows(out, path);
  return out;
}

std::string to_jsonl(const QueryRow& row) {
  json j;
  j["query_path"] = row.query_path;
  j["source_id"] = row.source_id;
  j["manip_id"] = row.manip_id;
  j["skipped"] = row.skipped;
  if (row.reason) j["reason"] = *row.reason;
  return j.dump();
}

ManifestRead<LabeledPairRow> read_labeled_pairs(const std::string& path) {
  ManifestRead<LabeledPairRow> out;
  for_each_jsonl(path, out.issues, [&](const json& row, std::size_t) -> std::string {
    LabeledPairRow r;
    if (auto e = require_string(row, "query_id", r.query_id); !e.empty()) return e;
    if (auto e = require_string(row, "result_id", r.result_id); !e.empty()) return e;
    const auto pd = row.find("phash_dist");
    if (pd == row.end() || !pd->is_number_integer()) return "missing integer field 'phash_dist'";
    r.phash_dist = pd->get<int>();
    if (r.phash_dist < 0 || r.phash_dist > 64) return "phash_dist outside [0,64]";
    const auto rs = row.find("retrieval_score");
    if (rs == row.end() || !rs->is_number()) return "missing numeric field 'retrieval_score'";
    r.retrieval_score = rs->get<double>();
    if (!std::isfinite(r.retrieval_score) || r.retrieval_score < 0) return "retrieval_score must be finite and >= 0";
    std::string mode;
    if (auto e = require_string(row, "mode", mode); !e.empty()) return e;
    if (mode != "votes" && mode != "distance") return "unknown mode '" + mode + "'";
    r.mode = parse_retrieval_mode(mode);
    const auto lb = row.find("label");
    if (lb == row.end()) return "missing field 'label'";
    if (lb->is_boolean()) {
      r.match = lb->get<bool>();
    } else if (lb->is_number_integer() && (lb->get<int>() == 0 || lb->get<int>() == 1)) {
      r.match = lb->get<int>() == 1;
    } else if (lb->is_string() && (lb->get<std::string>() == "match" || lb->get<std::string>() == "no-match")) {
      r.match = lb->get<std::string>() == "match";
    } else {
      return "label must be true/false, 1/0 or \"match\"/\"no-match\"";
    }
    out.rows.push_back(std::move(r));
    return {};
  });
  require_rows(out, path);
  return out;
}

std::vector<ImageRef> list_images(const std::string& dir_or_manifest) {
  std::vector<ImageRef> out;
  const fs::path p(dir_or_manifest);
  if (fs::is_directory(p)) {
    for (const auto& entry : fs::directory_iterator(p)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
      out.push_back({entry.path().stem().string(), entry.path().string()});
    }
    std::sort(out.begin(), out.end(), [](const ImageRef& a, const ImageRef& b) { return a.path < b.path; });
    return out;
  }

  std::vector<ManifestIssue> issues;
  const fs::path base = p.parent_path();
  std::unordered_set<std::string> ids;
  for_each_jsonl(dir_or_manifest, issues, [&](const json& row, std::size_t) -> std::string {
    ImageRef ref;
    if (row.contains("path")) {
      if (auto e = require_string(row, "id", ref.id); !e.empty()) return e;
      if (auto e = require_string(row, "path", ref.path); !e.empty()) return e;
    } else if (row.contains("query_path")) {
      if (row.value("skipped", false)) return {};
      if (auto e = require_string(row, "query_path", ref.path); !e.empty()) return e;
      ref.id = row.contains("query_id") ? row.at("query_id").get<std::string>() : file_stem(ref.path);
    } else {
      return "row needs {id, path} or {query_path}";
    }
    if (!ids.insert(ref.id).second) return "duplicate id '" + ref.id + "'";
    ref.path = resolve(base, ref.path);
    out.push_back(std::move(ref));
    return {};
  });
  if (!issues.empty()) {
    throw Error(ErrorCode::InvalidArgument, dir_or_manifest + " line " + std::to_string(issues.front().line) + ": " +
                                                issues.front().message);
  }
  if (out.empty()) throw Error(ErrorCode::NoValidRows, dir_or_manifest + " lists no images");
  return out;
}

}  // namespace ndup
