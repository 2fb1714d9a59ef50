#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ndup {

enum class FeatureType : std::uint8_t { Binary = 0, Real = 1 };

/// Element type and dimension shared by every feature of a set or index.
/// Binary features are packed little-endian: bit i lives in byte i/8 at
/// position i%8 (bit 0 = LSB of byte 0). Real features are float32.
struct FeatureKind {
  FeatureType type = FeatureType::Binary;
  std::uint32_t dim = 0;

  static constexpr FeatureKind binary(std::uint32_t bits) { return {FeatureType::Binary, bits}; }
  static constexpr FeatureKind real(std::uint32_t dim) { return {FeatureType::Real, dim}; }

  /// Bytes one feature occupies in packed storage and on disk.
  std::size_t bytes_per_feature() const noexcept {
    return type == FeatureType::Binary ? (dim + 7u) / 8u : static_cast<std::size_t>(dim) * 4u;
  }

  bool operator==(const FeatureKind&) const = default;
};

std::string to_string(const FeatureKind& kind);

/// A bag of fixed-width features for one image (or, inside an index, for
/// all images). Storage is contiguous, one stride per feature.
class DescriptorSet {
 public:
  DescriptorSet() = default;
  /// Throws InvalidArgument when dim is 0.
  explicit DescriptorSet(FeatureKind kind);

  const FeatureKind& kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }

  /// Appends a packed binary feature of exactly bytes_per_feature() bytes.
  /// Padding bits beyond dim are cleared. Throws KindMismatch.
  void push_binary(std::span<const std::uint8_t> bits);
  /// Appends a real feature of exactly dim values. Throws KindMismatch.
  void push_real(std::span<const float> values);
  /// Appends every feature of `other`; kinds must match.
  void append(const DescriptorSet& other);

  std::span<const std::uint8_t> binary(std::size_t i) const noexcept {
    const std::size_t stride = kind_.bytes_per_feature();
    return {bytes_.data() + i * stride, stride};
  }
  std::span<const float> real(std::size_t i) const noexcept {
    return {reals_.data() + i * kind_.dim, kind_.dim};
  }

  /// Raw packed bytes (binary) for bulk scanning.
  std::span<const std::uint8_t> binary_data() const noexcept { return bytes_; }
  std::span<const float> real_data() const noexcept { return reals_; }

  void reserve(std::size_t n);

  bool operator==(const DescriptorSet&) const = default;

 private:
  FeatureKind kind_{};
  std::size_t count_ = 0;
  std::vector<std::uint8_t> bytes_;
  std::vector<float> reals_;
};

/// One image's identity and its features.
struct ImageFeatures {
  std::string id;
  DescriptorSet features;

  bool operator==(const ImageFeatures&) const = default;
};

}  // namespace ndup
