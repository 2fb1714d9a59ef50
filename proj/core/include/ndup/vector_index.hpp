#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ndup/descriptor.hpp"

namespace ndup {

enum class RetrievalMode : std::uint8_t { VoteCount = 0, Distance = 1 };

const char* to_string(RetrievalMode mode) noexcept;
/// Throws InvalidArgument for anything but "votes" / "distance".
RetrievalMode parse_retrieval_mode(const std::string& s);

struct RankedImage {
  std::string image_id;
  double score = 0;
  int rank = 0;  // 1-based

  bool operator==(const RankedImage&) const = default;
};

/// VoteCount: scores non-increasing. Distance: scores non-decreasing.
struct RetrievalResult {
  RetrievalMode mode = RetrievalMode::VoteCount;
  std::vector<RankedImage> ranked;

  bool operator==(const RetrievalResult&) const = default;
};

struct QueryParams {
  int k = 100;  // neighbors per query feature
  int n = 10;   // images returned
  /// Workers for per-feature KNN; 0 means hardware concurrency. The result
  /// does not depend on it.
  int jobs = 1;
};

struct Neighbor {
  std::size_t feature = 0;  // insertion index in the index
  double distance = 0;      // squared Euclidean (Hamming for binary)

  bool operator==(const Neighbor&) const = default;
};

struct ImageEntry {
  std::string id;
  std::uint32_t feature_count = 0;
  std::size_t first_feature = 0;
};

/// Immutable exact nearest-neighbor store over every feature of every
/// image. Insertion order is preserved and is the final tie-break.
class FlatIndex {
 public:
  FlatIndex() = default;

  /// Throws KindMismatch if any set's kind differs from `kind`, and
  /// DuplicateImageId on repeated ids. Images with no features are kept in
  /// the table but never retrieved.
  static FlatIndex build(std::span<const ImageFeatures> images, FeatureKind kind);

  const FeatureKind& kind() const noexcept { return kind_; }
  std::size_t image_count() const noexcept { return images_.size(); }
  std::size_t feature_count() const noexcept { return store_.size(); }
  std::span<const ImageEntry> images() const noexcept { return images_; }
  const DescriptorSet& features() const noexcept { return store_; }
  /// Image-table position owning each feature.
  std::uint32_t owner(std::size_t feature) const noexcept { return owner_[feature]; }
  /// Position of an image id in the table, or -1.
  std::ptrdiff_t find(const std::string& id) const;

  /// The exact k nearest stored features to feature `qi` of `q`, ordered by
  /// (distance, insertion index). Throws KindMismatch.
  std::vector<Neighbor> knn_features(const DescriptorSet& q, std::size_t qi, std::size_t k) const;

  /// Per-feature KNN with one vote per (query feature, stored feature)
  /// pair; ranked by votes desc, summed distance asc, insertion order.
  /// Images that received no vote rank last with score 0. Throws
  /// EmptyQuery.
  RetrievalResult query_votes(const DescriptorSet& q, const QueryParams& p) const;

  /// Single-vector ranking by ascending squared distance, ties by insertion
  /// order. Throws MultiFeatureIndex unless every image holds exactly one
  /// feature (images registered without features excepted).
  RetrievalResult query_distance(const DescriptorSet& q, const QueryParams& p) const;

  /// "NDIX" | u16 version | u8 kind | u32 dim | u64 images | u64 features |
  /// image table (u16 id length, id bytes, u32 feature count) | packed
  /// features | CRC32 of all preceding bytes. Little-endian.
  std::vector<std::uint8_t> save() const;
  /// Throws CorruptIndex.
  static FlatIndex load(std::span<const std::uint8_t> bytes);

 private:
  double distance(const DescriptorSet& q, std::size_t qi, std::size_t stored) const;
  void check_query(const DescriptorSet& q) const;

  FeatureKind kind_{};
  DescriptorSet store_;
  std::vector<std::uint32_t> owner_;
  std::vector<ImageEntry> images_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Hamming distance of two packed bit vectors of equal length.
std::uint32_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) noexcept;

/// Sum of squared differences accumulated in double, in index order.
double squared_l2(std::span<const float> a, std::span<const float> b) noexcept;

}  // namespace ndup
