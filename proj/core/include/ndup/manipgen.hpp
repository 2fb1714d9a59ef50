#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndup/imaging.hpp"

namespace ndup {

enum class ManipulationKind {
  GaussianNoise,
  Crop,
  FlipHorizontal,
  Rotate,
  Resize,
  ChannelGbr,
  Grayscale,
  TextOverlay,
  MarkupRectangle,
  MarkupEllipse,
  MotionBlur,
};

/// Transform-specific scalars; only the fields relevant to the kind are read.
struct ManipulationParams {
  double noise_sd = 0.0;
  // Crop region as fractions of (w, h): [x0_num/den*w, x1_num/den*w) etc.,
  // evaluated with integer division.
  int crop_x0_num = 0;
  int crop_y0_num = 0;
  int crop_x1_num = 1;
  int crop_y1_num = 1;
  int crop_den = 1;
  // Counter-clockwise as displayed; clockwise rotations are negative.
  double degrees = 0.0;
  int resize_percent = 100;
  int motion_length = 1;
  double motion_angle = 0.0;
};

struct ManipulationSpec {
  std::string id;
  std::string label;
  ManipulationKind kind = ManipulationKind::FlipHorizontal;
  ManipulationParams params;
  std::uint64_t rng_seed = 0;
};

struct ManipulatedImage {
  std::string source_id;
  ManipulationSpec manip;
  Raster raster;
};

struct ManipulationSkip {
  std::string manip_id;
  std::string reason;
};

struct GeneratedSet {
  std::vector<ManipulatedImage> items;
  std::vector<ManipulationSkip> skips;
};

inline constexpr std::size_t kCatalogSize = 22;
inline constexpr const char* kTextOverlay = "SAMPLE TEXT";

/// The fixed 22-entry manipulation suite, in a stable order. Every entry
/// carries `seed` as its rng_seed.
std::vector<ManipulationSpec> catalog(std::uint64_t seed = 0);

/// Looks up a catalog entry by id; throws InvalidArgument if unknown.
ManipulationSpec catalog_entry(const std::string& id, std::uint64_t seed = 0);

/// Applies one manipulation. The result is RGB and reproducible bit-exactly
/// from (r, spec). Throws TooSmall for crops of images under 3x3.
ManipulatedImage apply(const Raster& r, const ManipulationSpec& spec, const std::string& source_id = {});

/// Seed used for one (source, manipulation) pair under a base seed.
std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& source_id, const std::string& manip_id);

/// Applies the whole catalog; inapplicable entries become skips, so
/// items.size() + skips.size() == 22.
GeneratedSet generate_all(const Raster& r, const std::string& source_id, std::uint64_t base_seed = 0);

// Overlay primitives used by the catalog, exposed for reuse.
void draw_text(Raster& rgb, const std::string& text, int glyph_height, int center_x, int center_y);
void draw_rect_border(Raster& rgb, int x0, int y0, int x1, int y1, int stroke, Rgb color);
void draw_ellipse_ring(Raster& rgb, double cx, double cy, double ax, double ay, int stroke, Rgb color);

}  // namespace ndup
