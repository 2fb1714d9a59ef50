#include "ndup/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ndup/error.hpp"
#include "random.hpp"

namespace ndup {

namespace {

// A gray level with a small tint, so channel swaps barely move the luma.
Rgb muted(detail::SeededRng& rng, int gray) {
  Rgb c{};
  for (auto& v : c) v = static_cast<std::uint8_t>(std::clamp(gray + rng.uniform_int(-14, 14), 0, 255));
  return c;
}

int contrasting(detail::SeededRng& rng, int against) {
  for (;;) {
    const int g = rng.uniform_int(15, 240);
    if (std::abs(g - against) >= 60) return g;
  }
}

void fill_rect(Raster& r, int x0, int y0, int x1, int y1, Rgb c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, r.width());
  y1 = std::min(y1, r.height());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      for (int ch = 0; ch < 3; ++ch) r.at(x, y, ch) = c[static_cast<std::size_t>(ch)];
    }
  }
}

void fill_ellipse(Raster& r, double cx, double cy, double ax, double ay, Rgb c) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - ax)));
  const int x1 = std::min(r.width() - 1, static_cast<int>(std::ceil(cx + ax)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - ay)));
  const int y1 = std::min(r.height() - 1, static_cast<int>(std::ceil(cy + ay)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x - cx) / ax;
      const double dy = (y - cy) / ay;
      if (dx * dx + dy * dy <= 1.0) {
        for (int ch = 0; ch < 3; ++ch) r.at(x, y, ch) = c[static_cast<std::size_t>(ch)];
      }
    }
  }
}

}  // namespace

std::string synthetic_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "syn%05zu", index);
  return buf;
}

Raster synthetic_image(std::size_t index, const SyntheticOptions& options) {
  if (options.width < 32 || options.height < 32) {
    throw Error(ErrorCode::InvalidDimension, "synthetic images must be at least 32x32");
  }
  detail::SeededRng rng(detail::splitmix64(options.seed ^ detail::splitmix64(index + 0x5eed)));
  const int w = options.width;
  const int h = options.height;
  Raster r(w, h, Channels::RGB);

  const int g0 = rng.uniform_int(60, 200);
  const int g1 = std::clamp(g0 + rng.uniform_int(-40, 40), 0, 255);
  const Rgb tint0 = muted(rng, g0);
  const Rgb tint1 = muted(rng, g1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = static_cast<double>(y) / (h - 1);
      for (int ch = 0; ch < 3; ++ch) {
        const auto c = static_cast<std::size_t>(ch);
        r.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(tint0[c] + t * (tint1[c] - tint0[c])));
      }
    }
  }

  const int min_side = std::min(w, h);
  const int shapes = rng.uniform_int(7, 12);
  for (int s = 0; s < shapes; ++s) {
    const int gray = contrasting(rng, (g0 + g1) / 2);
    const Rgb color = muted(rng, gray);
    const int kind = rng.uniform_int(0, 9);
    const int cx = rng.uniform_int(0, w - 1);
    const int cy = rng.uniform_int(0, h - 1);
    if (kind < 5) {
      const int rw = rng.uniform_int(min_side / 10, min_side / 3);
      const int rh = rng.uniform_int(min_side / 10, min_side / 3);
      fill_rect(r, cx - rw / 2, cy - rh / 2, cx + rw / 2, cy + rh / 2, color);
    } else if (kind < 8) {
      const double rad = rng.uniform_int(min_side / 14, min_side / 5);
      fill_ellipse(r, cx, cy, rad, rad * (0.6 + 0.8 * rng.uniform()), color);
    } else {
      // A short run of small squares.
      const int side = std::max(3, min_side / rng.uniform_int(16, 28));
      const int count = rng.uniform_int(3, 6);
      const bool horizontal = rng.uniform_int(0, 1) == 1;
      for (int i = 0; i < count; ++i) {
        const int ox = horizontal ? cx + i * side * 2 : cx;
        const int oy = horizontal ? cy : cy + i * side * 2;
        fill_rect(r, ox, oy, ox + side, oy + side, color);
      }
    }
  }
  return r;
}

}  // namespace ndup
