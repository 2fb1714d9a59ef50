#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ndup/descriptor.hpp"
#include "ndup/vector_index.hpp"

namespace ndup {

// ---- Feature files ("NDF1") ----
//
// header : "NDF1" | u16 version=1 | u8 kind (0 packed binary, 1 real32) |
//          u32 dim | u64 image count
// image  : u16 id length | UTF-8 id | u32 feature count | payload
// payload: binary -> ceil(dim/8) bytes per feature, bit 0 = LSB of byte 0
//          real32 -> dim little-endian IEEE-754 floats per feature
// footer : CRC32 of every preceding byte

inline constexpr std::uint16_t kFeatureFileVersion = 1;

/// Canonical encoding, images in the given order. Throws KindMismatch when
/// a set disagrees with `kind` and DuplicateImageId on repeated ids.
std::vector<std::uint8_t> write_features(std::span<const ImageFeatures> images, FeatureKind kind);

struct FeatureFile {
  FeatureKind kind;
  std::vector<ImageFeatures> images;
};

/// Exact inverse of write_features; throws CorruptFeatureFile on bad magic,
/// version, checksum, truncation, or counts that overrun the payload.
FeatureFile read_features(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

// ---- JSON Lines manifests ----

enum class Platform { Reddit, FourChan, Twitter, Other };

const char* to_string(Platform p) noexcept;

struct CorpusRow {
  std::string id;
  std::string path;
  Platform platform = Platform::Other;
  std::string posted_at;  // RFC 3339 as written
  std::int64_t posted_at_unix = 0;  // seconds since epoch, UTC
  std::optional<std::string> url;
};

struct ManifestIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename Row>
struct ManifestRead {
  std::vector<Row> rows;
  std::vector<ManifestIssue> issues;
};

/// Parses an RFC 3339 timestamp to Unix seconds (fractions truncated).
std::optional<std::int64_t> parse_rfc3339(const std::string& s);

/// Valid rows in file order; malformed rows and repeated ids (first kept)
/// are reported with line numbers. Throws NoValidRows if nothing is valid,
/// Io if the file cannot be read.
ManifestRead<CorpusRow> read_manifest(const std::string& path);

/// Ground-truth query row: {query_path, source_id, manip_id, skipped, reason?}.
struct QueryRow {
  std::string query_id;  // explicit "query_id" field, else file stem of query_path
  std::string query_path;
  std::string source_id;
  std::string manip_id;
  bool skipped = false;
  std::optional<std::string> reason;
};

ManifestRead<QueryRow> read_query_manifest(const std::string& path);
std::string to_jsonl(const QueryRow& row);

/// Training row: {query_id, result_id, phash_dist, retrieval_score, mode, label}.
struct LabeledPairRow {
  std::string query_id;
  std::string result_id;
  int phash_dist = 0;
  double retrieval_score = 0;
  RetrievalMode mode = RetrievalMode::VoteCount;
  bool match = false;
};

/// Accepts label as true/false, 1/0 or "match"/"no-match".
ManifestRead<LabeledPairRow> read_labeled_pairs(const std::string& path);

/// An image to extract features from, resolved from a directory listing or a
/// JSON Lines file with {id, path} or {query_path} rows.
struct ImageRef {
  std::string id;
  std::string path;
};

/// Directories list *.png/*.jpg/*.jpeg sorted by name with id = file stem.
/// Relative manifest paths resolve against the manifest's directory.
/// Skipped query rows are left out.
std::vector<ImageRef> list_images(const std::string& dir_or_manifest);

std::string file_stem(const std::string& path);

}  // namespace ndup
