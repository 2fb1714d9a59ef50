#include "ndup/manipgen.hpp"

#include <algorithm>
#include <cmath>

#include "bitmap_font.hpp"
#include "ndup/error.hpp"
#include "random.hpp"

namespace ndup {

namespace {

constexpr Rgb kRed = {255, 0, 0};
constexpr int kMarkupStroke = 4;

ManipulationSpec make(std::string id, std::string label, ManipulationKind kind, ManipulationParams params,
                      std::uint64_t seed) {
  return ManipulationSpec{std::move(id), std::move(label), kind, params, seed};
}

ManipulationParams noise(double sd) {
  ManipulationParams p;
  p.noise_sd = sd;
  return p;
}

ManipulationParams crop_region(int x0, int y0, int x1, int y1, int den) {
  ManipulationParams p;
  p.crop_x0_num = x0;
  p.crop_y0_num = y0;
  p.crop_x1_num = x1;
  p.crop_y1_num = y1;
  p.crop_den = den;
  return p;
}

ManipulationParams rotation(double degrees) {
  ManipulationParams p;
  p.degrees = degrees;
  return p;
}

ManipulationParams resize_to(int percent) {
  ManipulationParams p;
  p.resize_percent = percent;
  return p;
}

ManipulationParams motion(int length, double angle) {
  ManipulationParams p;
  p.motion_length = length;
  p.motion_angle = angle;
  return p;
}

Raster add_gaussian_noise(const Raster& r, double sd, std::uint64_t seed) {
  detail::SeededRng rng(seed);
  Raster out = r;
  for (std::uint8_t& v : out.pixels()) {
    const double noisy = v + sd * rng.normal();
    v = static_cast<std::uint8_t>(std::lround(std::clamp(noisy, 0.0, 255.0)));
  }
  return out;
}

Raster to_gbr(const Raster& r) {
  Raster out = r;
  auto px = out.pixels();
  for (std::size_t i = 0; i + 2 < px.size(); i += 3) {
    const std::uint8_t red = px[i];
    px[i] = px[i + 1];
    px[i + 1] = px[i + 2];
    px[i + 2] = red;
  }
  return out;
}

}  // namespace

std::vector<ManipulationSpec> catalog(std::uint64_t seed) {
  using K = ManipulationKind;
  std::vector<ManipulationSpec> c;
  c.reserve(kCatalogSize);
  c.push_back(make("noise_sd2", "Gaussian noise (SD=2)", K::GaussianNoise, noise(2), seed));
  c.push_back(make("noise_sd4", "Gaussian noise (SD=4)", K::GaussianNoise, noise(4), seed));
  c.push_back(make("noise_sd8", "Gaussian noise (SD=8)", K::GaussianNoise, noise(8), seed));
  c.push_back(make("crop_br_quarter", "Crop from (1/2,1/2)", K::Crop, crop_region(1, 1, 2, 2, 2), seed));
  c.push_back(make("crop_br_two_thirds", "Crop from (1/3,1/3)", K::Crop, crop_region(1, 1, 3, 3, 3), seed));
  c.push_back(make("crop_tl_two_thirds", "Crop to (2/3,2/3)", K::Crop, crop_region(0, 0, 2, 2, 3), seed));
  c.push_back(make("flip_h", "Horizontal flip", K::FlipHorizontal, {}, seed));
  c.push_back(make("rot_cw5", "Rotate 5 degrees clockwise", K::Rotate, rotation(-5), seed));
  c.push_back(make("rot_cw10", "Rotate 10 degrees clockwise", K::Rotate, rotation(-10), seed));
  c.push_back(make("rot_ccw5", "Rotate 5 degrees counter-clockwise", K::Rotate, rotation(5), seed));
  c.push_back(make("rot_ccw10", "Rotate 10 degrees counter-clockwise", K::Rotate, rotation(10), seed));
  c.push_back(make("resize_20", "Resize to 20%", K::Resize, resize_to(20), seed));
  c.push_back(make("resize_40", "Resize to 40%", K::Resize, resize_to(40), seed));
  c.push_back(make("resize_80", "Resize to 80%", K::Resize, resize_to(80), seed));
  c.push_back(make("gbr", "RGB to GBR", K::ChannelGbr, {}, seed));
  c.push_back(make("gray", "Grayscale", K::Grayscale, {}, seed));
  c.push_back(make("text", "Text overlay", K::TextOverlay, {}, seed));
  c.push_back(make("markup_rect", "Rectangle markup", K::MarkupRectangle, {}, seed));
  c.push_back(make("markup_ellipse", "Ellipse markup", K::MarkupEllipse, {}, seed));
  c.push_back(make("motion_10_15", "Motion blur (length 10, 15 degrees)", K::MotionBlur, motion(10, 15), seed));
  c.push_back(make("motion_15_20", "Motion blur (length 15, 20 degrees)", K::MotionBlur, motion(15, 20), seed));
  c.push_back(make("motion_20_25", "Motion blur (length 20, 25 degrees)", K::MotionBlur, motion(20, 25), seed));
  return c;
}

ManipulationSpec catalog_entry(const std::string& id, std::uint64_t seed) {
  for (auto& spec : catalog(seed)) {
    if (spec.id == id) return spec;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown manipulation id '" + id + "'");
}

void draw_rect_border(Raster& rgb, int x0, int y0, int x1, int y1, int stroke, Rgb color) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, rgb.width());
  y1 = std::min(y1, rgb.height());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool on_stroke = x < x0 + stroke || x >= x1 - stroke || y < y0 + stroke || y >= y1 - stroke;
      if (!on_stroke) continue;
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = color[static_cast<std::size_t>(c)];
    }
  }
}

void draw_ellipse_ring(Raster& rgb, double cx, double cy, double ax, double ay, int stroke, Rgb color) {
  const double inner_ax = ax - stroke;
  const double inner_ay = ay - stroke;
  auto inside = [](double dx, double dy, double a, double b) {
    if (a <= 0.0 || b <= 0.0) return false;
    return (dx / a) * (dx / a) + (dy / b) * (dy / b) <= 1.0;
  };
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (!inside(dx, dy, ax, ay) || inside(dx, dy, inner_ax, inner_ay)) continue;
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = color[static_cast<std::size_t>(c)];
    }
  }
}

void draw_text(Raster& rgb, const std::string& text, int glyph_height, int center_x, int center_y) {
  if (text.empty() || glyph_height < 1) return;
  const int glyph_w = std::max(1, static_cast<int>(std::lround(glyph_height * detail::kGlyphCols /
                                                                 static_cast<double>(detail::kGlyphRows))));
  const int gap = std::max(1, glyph_w / detail::kGlyphCols);
  const int advance = glyph_w + gap;
  const int text_w = static_cast<int>(text.size()) * advance - gap;
  const int left = center_x - text_w / 2;
  const int top = center_y - glyph_height / 2;

  // Glyph mask over the text box plus a one-pixel margin for the outline.
  const int box_w = text_w + 2;
  const int box_h = glyph_height + 2;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(box_w) * box_h, 0);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& glyph = detail::glyph_for(text[i]);
    const int gx0 = static_cast<int>(i) * advance;
    for (int py = 0; py < glyph_height; ++py) {
      const int row = py * detail::kGlyphRows / glyph_height;
      for (int px = 0; px < glyph_w; ++px) {
        const int col = px * detail::kGlyphCols / glyph_w;
        if (glyph[static_cast<std::size_t>(row)] & (1u << (detail::kGlyphCols - 1 - col))) {
          mask[static_cast<std::size_t>(py + 1) * box_w + static_cast<std::size_t>(gx0 + px + 1)] = 1;
        }
      }
    }
  }

  auto set_pixel = [&](int bx, int by, std::uint8_t v) {
    const int x = left + bx - 1;
    const int y = top + by - 1;
    if (x < 0 || y < 0 || x >= rgb.width() || y >= rgb.height()) return;
    for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = v;
  };
  for (int by = 0; by < box_h; ++by) {
    for (int bx = 0; bx < box_w; ++bx) {
      if (mask[static_cast<std::size_t>(by) * box_w + bx]) {
        set_pixel(bx, by, 255);
        continue;
      }
      bool touches = false;
      for (int dy = -1; dy <= 1 && !touches; ++dy) {
        for (int dx = -1; dx <= 1 && !touches; ++dx) {
          const int nx = bx + dx;
          const int ny = by + dy;
          if (nx < 0 || ny < 0 || nx >= box_w || ny >= box_h) continue;
          touches = mask[static_cast<std::size_t>(ny) * box_w + nx] != 0;
        }
      }
      if (touches) set_pixel(bx, by, 0);
    }
  }
}

ManipulatedImage apply(const Raster& input, const ManipulationSpec& spec, const std::string& source_id) {
  const Raster r = to_rgb(input);
  const int w = r.width();
  const int h = r.height();
  const auto& p = spec.params;
  Raster out;
  switch (spec.kind) {
    case ManipulationKind::GaussianNoise:
      out = add_gaussian_noise(r, p.noise_sd, spec.rng_seed);
      break;
    case ManipulationKind::Crop:
      if (w < 3 || h < 3) {
        throw Error(ErrorCode::TooSmall,
                    spec.id + " needs at least 3x3, got " + std::to_string(w) + "x" + std::to_string(h));
      }
      out = crop(r, w * p.crop_x0_num / p.crop_den, h * p.crop_y0_num / p.crop_den, w * p.crop_x1_num / p.crop_den,
                 h * p.crop_y1_num / p.crop_den);
      break;
    case ManipulationKind::FlipHorizontal:
      out = flip_horizontal(r);
      break;
    case ManipulationKind::Rotate:
      out = rotate(r, p.degrees, {0, 0, 0});
      break;
    case ManipulationKind::Resize:
      out = resize_bilinear(r, std::max(1, w * p.resize_percent / 100), std::max(1, h * p.resize_percent / 100));
      break;
    case ManipulationKind::ChannelGbr:
      out = to_gbr(r);
      break;
    case ManipulationKind::Grayscale:
      out = to_rgb(to_grayscale(r));
      break;
    case ManipulationKind::TextOverlay: {
      out = r;
      const int glyph_h = std::max(12, h / 10);
      const int center_y = static_cast<int>(std::lround(h - 0.075 * h));
      draw_text(out, kTextOverlay, glyph_h, w / 2, center_y);
      break;
    }
    case ManipulationKind::MarkupRectangle:
      out = r;
      draw_rect_border(out, w / 10, h / 10, w - w / 10, h - h / 10, kMarkupStroke, kRed);
      break;
    case ManipulationKind::MarkupEllipse:
      out = r;
      draw_ellipse_ring(out, w / 2.0, h / 2.0, w / 4.0, h / 4.0, kMarkupStroke, kRed);
      break;
    case ManipulationKind::MotionBlur:
      out = convolve(r, motion_kernel(p.motion_length, p.motion_angle));
      break;
  }
  return ManipulatedImage{source_id, spec, std::move(out)};
}

std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& source_id, const std::string& manip_id) {
  return detail::splitmix64(base_seed ^ detail::splitmix64(detail::fnv1a64(source_id)) ^ detail::fnv1a64(manip_id));
}

GeneratedSet generate_all(const Raster& r, const std::string& source_id, std::uint64_t base_seed) {
  GeneratedSet set;
  for (auto spec : catalog(base_seed)) {
    spec.rng_seed = derive_seed(base_seed, source_id, spec.id);
    try {
      set.items.push_back(apply(r, spec, source_id));
    } catch (const Error& e) {
      set.skips.push_back({spec.id, e.what()});
    }
  }
  return set;
}

}  // namespace ndup
