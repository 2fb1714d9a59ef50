#include "ndup/orb.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "rbrief_pattern.hpp"

namespace ndup {

namespace {

constexpr int kMinImageSide = 32;
constexpr int kAngleBins = 30;
constexpr int kDescriptorBits = 256;

// Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr int kCircle[16][2] = {{0, -3}, {1, -3},  {2, -2},  {3, -1},  {3, 0},   {3, 1},  {2, 2},   {1, 3},
                                {0, 3},  {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

struct Level {
  Raster gray;
  double scale = 1.0;  // level-0 pixels per level pixel
};

std::vector<Level> build_pyramid(const Raster& gray0, const OrbParams& p, int min_side) {
  std::vector<Level> levels;
  for (int l = 0; l < p.levels; ++l) {
    const double scale = std::pow(p.scale_factor, l);
    const int w = static_cast<int>(std::lround(gray0.width() / scale));
    const int h = static_cast<int>(std::lround(gray0.height() / scale));
    if (w < min_side || h < min_side) break;
    levels.push_back({l == 0 ? gray0 : resize_bilinear(gray0, w, h), scale});
  }
  return levels;
}

// Largest t for which the 9-contiguous segment test still passes, or 0.
int fast_score(const Raster& g, int x, int y, int threshold) {
  const int c = g.at(x, y);
  int ring[16];
  for (int i = 0; i < 16; ++i) ring[i] = g.at(x + kCircle[i][0], y + kCircle[i][1]) - c;

  int bright = 0;
  int dark = 0;
  for (int i = 0; i < 16; i += 4) {
    bright += ring[i] > threshold;
    dark += ring[i] < -threshold;
  }
  if (bright < 2 && dark < 2) return 0;

  int best = 0;
  for (int start = 0; start < 16; ++start) {
    int min_bright = 255;
    int min_dark = 255;
    for (int k = 0; k < 9; ++k) {
      const int d = ring[(start + k) & 15];
      min_bright = std::min(min_bright, d);
      min_dark = std::min(min_dark, -d);
    }
    best = std::max({best, min_bright, min_dark});
  }
  return best > threshold ? best : 0;
}

double harris_response(const Raster& g, int x, int y, int block, double k) {
  const int r = block / 2;
  double a = 0, b = 0, c = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int px = x + dx;
      const int py = y + dy;
      const int ix = (g.at(px + 1, py - 1) + 2 * g.at(px + 1, py) + g.at(px + 1, py + 1)) -
                     (g.at(px - 1, py - 1) + 2 * g.at(px - 1, py) + g.at(px - 1, py + 1));
      const int iy = (g.at(px - 1, py + 1) + 2 * g.at(px, py + 1) + g.at(px + 1, py + 1)) -
                     (g.at(px - 1, py - 1) + 2 * g.at(px, py - 1) + g.at(px + 1, py - 1));
      a += static_cast<double>(ix) * ix;
      b += static_cast<double>(iy) * iy;
      c += static_cast<double>(ix) * iy;
    }
  }
  const double scale = 1.0 / (4.0 * block * 255.0);
  const double s4 = scale * scale * scale * scale;
  return (a * b - c * c - k * (a + b) * (a + b)) * s4;
}

float centroid_angle(const Raster& g, int x, int y, int radius) {
  double m10 = 0;
  double m01 = 0;
  const int r2 = radius * radius;
  for (int v = -radius; v <= radius; ++v) {
    for (int u = -radius; u <= radius; ++u) {
      if (u * u + v * v > r2) continue;
      const int I = g.at(x + u, y + v);
      m10 += u * I;
      m01 += v * I;
    }
  }
  double angle = std::atan2(m01, m10);
  if (angle < 0) angle += 2.0 * std::numbers::pi;
  float a = static_cast<float>(angle);
  if (a >= static_cast<float>(2.0 * std::numbers::pi)) a = 0.0f;
  return a;
}

struct Candidate {
  int level;
  int x;  // level coordinates
  int y;
  double harris;
};

std::vector<Keypoint> detect_on_pyramid(const std::vector<Level>& levels, int max_n, const OrbParams& p) {
  std::vector<Keypoint> out;
  if (levels.empty() || max_n <= 0) return out;
  const int nlevels = static_cast<int>(levels.size());

  std::vector<std::vector<Candidate>> per_level(static_cast<std::size_t>(nlevels));
  for (int l = 0; l < nlevels; ++l) {
    const Raster& g = levels[static_cast<std::size_t>(l)].gray;
    const int w = g.width();
    const int h = g.height();
    const int b = p.border;
    if (w <= 2 * b || h <= 2 * b) continue;
    std::vector<int> score(static_cast<std::size_t>(w) * h, 0);
    for (int y = b; y < h - b; ++y) {
      for (int x = b; x < w - b; ++x) score[static_cast<std::size_t>(y) * w + x] = fast_score(g, x, y, p.fast_threshold);
    }
    auto& cands = per_level[static_cast<std::size_t>(l)];
    for (int y = b; y < h - b; ++y) {
      for (int x = b; x < w - b; ++x) {
        const int s = score[static_cast<std::size_t>(y) * w + x];
        if (s == 0) continue;
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy) {
          for (int dx = -1; dx <= 1 && is_max; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int n = score[static_cast<std::size_t>(y + dy) * w + (x + dx)];
            const bool earlier = dy < 0 || (dy == 0 && dx < 0);
            if (n > s || (n == s && earlier)) is_max = false;
          }
        }
        if (is_max) cands.push_back({l, x, y, harris_response(g, x, y, p.harris_block, p.harris_k)});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b2) {
      if (a.harris != b2.harris) return a.harris > b2.harris;
      if (a.y != b2.y) return a.y < b2.y;
      return a.x < b2.x;
    });
  }

  // Geometric per-level quotas; the last level takes the remainder.
  std::vector<int> quota(static_cast<std::size_t>(nlevels), 0);
  const double factor = 1.0 / p.scale_factor;
  double desired = max_n * (1.0 - factor) / (1.0 - std::pow(factor, nlevels));
  int assigned = 0;
  for (int l = 0; l < nlevels - 1; ++l) {
    quota[static_cast<std::size_t>(l)] = static_cast<int>(std::lround(desired));
    assigned += quota[static_cast<std::size_t>(l)];
    desired *= factor;
  }
  quota[static_cast<std::size_t>(nlevels - 1)] = std::max(max_n - assigned, 0);

  std::vector<Candidate> chosen;
  std::vector<Candidate> leftovers;
  for (int l = 0; l < nlevels; ++l) {
    const auto& cands = per_level[static_cast<std::size_t>(l)];
    const std::size_t take = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(quota[static_cast<std::size_t>(l)]));
    chosen.insert(chosen.end(), cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take));
    leftovers.insert(leftovers.end(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end());
  }
  auto by_response = [](const Candidate& a, const Candidate& b) {
    if (a.harris != b.harris) return a.harris > b.harris;
    if (a.level != b.level) return a.level < b.level;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  };
  if (static_cast<int>(chosen.size()) < max_n) {
    std::sort(leftovers.begin(), leftovers.end(), by_response);
    const std::size_t extra = std::min(leftovers.size(), static_cast<std::size_t>(max_n) - chosen.size());
    chosen.insert(chosen.end(), leftovers.begin(), leftovers.begin() + static_cast<std::ptrdiff_t>(extra));
  }
  std::sort(chosen.begin(), chosen.end(), by_response);

  out.reserve(chosen.size());
  for (const Candidate& c : chosen) {
    const Level& lv = levels[static_cast<std::size_t>(c.level)];
    Keypoint kp;
    kp.x = static_cast<float>(c.x * lv.scale);
    kp.y = static_cast<float>(c.y * lv.scale);
    kp.response = static_cast<float>(c.harris);
    kp.orientation = centroid_angle(lv.gray, c.x, c.y, p.patch_radius);
    kp.scale_level = c.level;
    out.push_back(kp);
  }
  return out;
}

struct SteeredPattern {
  std::array<std::array<std::int8_t, 4>, kDescriptorBits> pairs;
  int reach = 0;  // max |offset| over all points
};

const std::array<SteeredPattern, kAngleBins>& steered_patterns() {
  static const std::array<SteeredPattern, kAngleBins> table = [] {
    std::array<SteeredPattern, kAngleBins> t{};
    for (int bin = 0; bin < kAngleBins; ++bin) {
      const double angle = bin * 2.0 * std::numbers::pi / kAngleBins;
      const double cs = std::cos(angle);
      const double sn = std::sin(angle);
      auto& sp = t[static_cast<std::size_t>(bin)];
      for (int i = 0; i < kDescriptorBits; ++i) {
        for (int pt = 0; pt < 2; ++pt) {
          const double px = detail::kRbriefPattern[static_cast<std::size_t>(4 * i + 2 * pt)];
          const double py = detail::kRbriefPattern[static_cast<std::size_t>(4 * i + 2 * pt + 1)];
          const int rx = static_cast<int>(std::lround(px * cs - py * sn));
          const int ry = static_cast<int>(std::lround(px * sn + py * cs));
          sp.pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(2 * pt)] = static_cast<std::int8_t>(rx);
          sp.pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(2 * pt + 1)] = static_cast<std::int8_t>(ry);
          sp.reach = std::max({sp.reach, std::abs(rx), std::abs(ry)});
        }
      }
    }
    return t;
  }();
  return table;
}

int angle_bin(float orientation) {
  const double step = 2.0 * std::numbers::pi / kAngleBins;
  int bin = static_cast<int>(std::lround(orientation / step));
  bin %= kAngleBins;
  if (bin < 0) bin += kAngleBins;
  return bin;
}

OrbFeatures describe_on_pyramid(const std::vector<Level>& levels, std::span<const Keypoint> keypoints) {
  OrbFeatures out;
  if (levels.empty()) return out;
  const Kernel2D smooth = gaussian_kernel(7, 2.0);
  std::vector<Raster> blurred(levels.size());
  const auto& patterns = steered_patterns();

  for (const Keypoint& kp : keypoints) {
    if (kp.scale_level < 0 || kp.scale_level >= static_cast<int>(levels.size())) continue;
    const auto li = static_cast<std::size_t>(kp.scale_level);
    const Level& lv = levels[li];
    const int x = static_cast<int>(std::lround(kp.x / lv.scale));
    const int y = static_cast<int>(std::lround(kp.y / lv.scale));
    const SteeredPattern& sp = patterns[static_cast<std::size_t>(angle_bin(kp.orientation))];
    if (x - sp.reach < 0 || y - sp.reach < 0 || x + sp.reach >= lv.gray.width() || y + sp.reach >= lv.gray.height()) {
      continue;
    }
    if (blurred[li].empty()) blurred[li] = convolve(lv.gray, smooth);
    const Raster& img = blurred[li];

    BinaryDescriptor256 d{};
    for (int i = 0; i < kDescriptorBits; ++i) {
      const auto& pr = sp.pairs[static_cast<std::size_t>(i)];
      const int a = img.at(x + pr[0], y + pr[1]);
      const int b = img.at(x + pr[2], y + pr[3]);
      if (a < b) d[static_cast<std::size_t>(i / 8)] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    out.keypoints.push_back(kp);
    out.descriptors.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const Raster& r, int max_n, const OrbParams& params) {
  if (r.width() < kMinImageSide || r.height() < kMinImageSide) return {};
  const auto levels = build_pyramid(to_grayscale(r), params, 2 * params.border + 1);
  return detect_on_pyramid(levels, max_n, params);
}

OrbFeatures describe(const Raster& r, std::span<const Keypoint> keypoints, const OrbParams& params) {
  if (keypoints.empty()) return {};
  const auto levels = build_pyramid(to_grayscale(r), params, 1);
  return describe_on_pyramid(levels, keypoints);
}

OrbFeatures extract_orb(const Raster& r, int max_n, const OrbParams& params) {
  if (r.width() < kMinImageSide || r.height() < kMinImageSide) return {};
  const auto levels = build_pyramid(to_grayscale(r), params, 2 * params.border + 1);
  const auto kps = detect_on_pyramid(levels, max_n, params);
  return describe_on_pyramid(levels, kps);
}

DescriptorSet to_descriptor_set(std::span<const BinaryDescriptor256> descriptors) {
  DescriptorSet set(FeatureKind::binary(kDescriptorBits));
  set.reserve(descriptors.size());
  for (const auto& d : descriptors) set.push_binary(d);
  return set;
}

BinaryDescriptor256 descriptor_at(const DescriptorSet& set, std::size_t i) {
  BinaryDescriptor256 d{};
  const auto bits = set.binary(i);
  std::copy_n(bits.begin(), d.size(), d.begin());
  return d;
}

int hamming(const BinaryDescriptor256& a, const BinaryDescriptor256& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(static_cast<unsigned>(a[i] ^ b[i]));
  return n;
}

}  // namespace ndup
