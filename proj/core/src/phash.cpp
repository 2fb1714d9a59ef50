#include "ndup/phash.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <vector>

namespace ndup {

namespace {

constexpr int kSide = 32;
constexpr int kBlock = 8;

const std::array<double, kSide * kSide>& dct_matrix() {
  static const std::array<double, kSide * kSide> m = [] {
    std::array<double, kSide * kSide> t{};
    for (int k = 0; k < kSide; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / kSide) : std::sqrt(2.0 / kSide);
      for (int n = 0; n < kSide; ++n) {
        t[static_cast<std::size_t>(k * kSide + n)] = scale * std::cos(std::numbers::pi * (2 * n + 1) * k / (2.0 * kSide));
      }
    }
    return t;
  }();
  return m;
}

}  // namespace

std::array<double, 1024> dct32(const Raster& gray32) {
  const auto& c = dct_matrix();
  // rows first: tmp = C * X, then out = tmp * C^T
  std::array<double, kSide * kSide> tmp{};
  for (int k = 0; k < kSide; ++k) {
    for (int x = 0; x < kSide; ++x) {
      double acc = 0.0;
      for (int n = 0; n < kSide; ++n) acc += c[static_cast<std::size_t>(k * kSide + n)] * gray32.at(x, n);
      tmp[static_cast<std::size_t>(k * kSide + x)] = acc;
    }
  }
  std::array<double, kSide * kSide> out{};
  for (int k = 0; k < kSide; ++k) {
    for (int l = 0; l < kSide; ++l) {
      double acc = 0.0;
      for (int n = 0; n < kSide; ++n) acc += tmp[static_cast<std::size_t>(k * kSide + n)] * c[static_cast<std::size_t>(l * kSide + n)];
      out[static_cast<std::size_t>(k * kSide + l)] = acc;
    }
  }
  return out;
}

PerceptualHash phash(const Raster& r) {
  const Raster small = resize_bilinear(to_grayscale(r), kSide, kSide);
  const auto coeffs = dct32(small);

  std::array<double, kBlock * kBlock> block{};
  for (int v = 0; v < kBlock; ++v) {
    for (int u = 0; u < kBlock; ++u) block[static_cast<std::size_t>(v * kBlock + u)] = coeffs[static_cast<std::size_t>(v * kSide + u)];
  }
  std::vector<double> ac(block.begin() + 1, block.end());
  std::nth_element(ac.begin(), ac.begin() + static_cast<std::ptrdiff_t>(ac.size() / 2), ac.end());
  const double median = ac[ac.size() / 2];

  PerceptualHash h;
  for (int k = 0; k < kBlock * kBlock; ++k) {
    if (block[static_cast<std::size_t>(k)] > median) h.bits |= std::uint64_t{1} << (63 - k);
  }
  return h;
}

int hamming64(PerceptualHash a, PerceptualHash b) noexcept { return std::popcount(a.bits ^ b.bits); }

std::string to_hex(PerceptualHash h) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 0; i < 16; ++i) s[static_cast<std::size_t>(i)] = digits[(h.bits >> (60 - 4 * i)) & 0xF];
  return s;
}

std::optional<PerceptualHash> parse_hex(std::string_view hex) {
  if (hex.size() != 16) return std::nullopt;
  PerceptualHash h;
  for (char ch : hex) {
    int v;
    if (ch >= '0' && ch <= '9') {
      v = ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      v = ch - 'a' + 10;
    } else {
      return std::nullopt;
    }
    h.bits = (h.bits << 4) | static_cast<std::uint64_t>(v);
  }
  return h;
}

}  // namespace ndup
