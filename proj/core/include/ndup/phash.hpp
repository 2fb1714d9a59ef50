#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "ndup/imaging.hpp"

namespace ndup {

/// 64-bit DCT perceptual hash. Bit k of the 8x8 low-frequency block
/// (row-major) is stored at value bit 63-k, so the hex form reads in
/// block order.
struct PerceptualHash {
  std::uint64_t bits = 0;

  bool bit(int k) const noexcept { return (bits >> (63 - k)) & 1u; }
  bool operator==(const PerceptualHash&) const = default;
};

/// Grayscale, bilinear 32x32, orthonormal 2-D DCT-II, top-left 8x8 block;
/// bit k = coefficient k > median of the 63 non-DC coefficients.
PerceptualHash phash(const Raster& r);

/// The 32x32 orthonormal DCT-II of a 32x32 grayscale raster, row-major.
std::array<double, 1024> dct32(const Raster& gray32);

int hamming64(PerceptualHash a, PerceptualHash b) noexcept;

/// 16 lowercase hex characters.
std::string to_hex(PerceptualHash h);
std::optional<PerceptualHash> parse_hex(std::string_view hex);

}  // namespace ndup
