#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ndup/descriptor.hpp"
#include "ndup/imaging.hpp"

namespace ndup {

struct Keypoint {
  float x = 0;  // level-0 pixel coordinates
  float y = 0;
  float response = 0;     // Harris corner score
  float orientation = 0;  // radians in [0, 2pi), intensity-centroid angle (y down)
  int scale_level = 0;

  bool operator==(const Keypoint&) const = default;
};

/// 256 rBRIEF bits, bit i in byte i/8 at position i%8.
using BinaryDescriptor256 = std::array<std::uint8_t, 32>;
/// 128 sign bits of the PCA projection, same packing.
using Code128 = std::array<std::uint8_t, 16>;

struct OrbParams {
  int levels = 8;
  double scale_factor = 1.2;
  int fast_threshold = 20;
  /// Detection border at every level; wide enough for the steered pattern.
  int border = 19;
  int harris_block = 7;
  double harris_k = 0.04;
  int patch_radius = 15;
};

inline constexpr int kDefaultMaxFeatures = 200;

/// FAST-9 corners over a scale pyramid, ranked by Harris response with
/// per-level quotas (unused quota goes to the best leftovers), oriented by
/// the intensity centroid. Images under 32x32 yield no keypoints.
std::vector<Keypoint> detect_keypoints(const Raster& r, int max_n = kDefaultMaxFeatures,
                                       const OrbParams& params = {});

struct OrbFeatures {
  std::vector<Keypoint> keypoints;  // the keypoints that received a descriptor
  std::vector<BinaryDescriptor256> descriptors;
};

/// Steered rBRIEF descriptors (orientation quantized to 30 bins of 12 deg)
/// on a Gaussian-smoothed pyramid. Keypoints whose test footprint leaves
/// the level image are dropped.
OrbFeatures describe(const Raster& r, std::span<const Keypoint> keypoints, const OrbParams& params = {});

/// detect_keypoints + describe sharing one pyramid.
OrbFeatures extract_orb(const Raster& r, int max_n = kDefaultMaxFeatures, const OrbParams& params = {});

DescriptorSet to_descriptor_set(std::span<const BinaryDescriptor256> descriptors);
BinaryDescriptor256 descriptor_at(const DescriptorSet& set, std::size_t i);

int hamming(const BinaryDescriptor256& a, const BinaryDescriptor256& b);

// ---- PCA reduction to 128 dimensions ----

inline constexpr int kPcaInputDim = 256;
inline constexpr int kPcaOutputDim = 128;
inline constexpr std::size_t kPcaMinSample = 256;
inline constexpr std::size_t kPcaDefaultCap = 2'000'000;

struct PcaModel {
  std::vector<double> mean;        // 256
  std::vector<double> projection;  // 128 x 256, row-major, orthonormal rows
  std::uint64_t trained_on = 0;

  double at(int row, int col) const noexcept {
    return projection[static_cast<std::size_t>(row) * kPcaInputDim + static_cast<std::size_t>(col)];
  }
};

/// Fits the 256 -> 128 projection on descriptors read as 0/1 vectors. Rows
/// are the top-128 covariance eigenvectors, sign-fixed so the largest
/// magnitude entry is positive; a rank-deficient covariance is completed
/// with a Gram-Schmidt basis drawn from the coordinate axes. Samples above
/// `cap` are subsampled with `seed`. Throws InsufficientSample below 256.
PcaModel fit_pca(std::span<const BinaryDescriptor256> sample, std::uint64_t seed = 0,
                 std::size_t cap = kPcaDefaultCap);

/// Projection of (d - mean) onto every row.
std::array<double, kPcaOutputDim> project(const BinaryDescriptor256& d, const PcaModel& m);
/// Bit j set iff the j-th projection is strictly positive.
Code128 encode(const BinaryDescriptor256& d, const PcaModel& m);

enum class OrbCode { Bits, Float };

/// Binary/128 codes or real32/128 projections for a list of descriptors.
DescriptorSet encode_set(std::span<const BinaryDescriptor256> descriptors, const PcaModel& m, OrbCode code);

/// "NDPC" | u16 version | 256 f64 mean | 128x256 f64 projection, little-endian.
std::vector<std::uint8_t> save_pca(const PcaModel& m);
PcaModel load_pca(std::span<const std::uint8_t> bytes);

/// Full per-image ORB path: extract, then PCA-encode when `pca` is given
/// (raw binary/256 otherwise).
DescriptorSet orb_feature_set(const Raster& r, const PcaModel* pca, OrbCode code = OrbCode::Bits,
                              int max_n = kDefaultMaxFeatures);

}  // namespace ndup
