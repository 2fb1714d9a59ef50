#pragma once

#include <cstdint>
#include <string>

#include "ndup/imaging.hpp"

namespace ndup {

/// Deterministic stand-in corpus: muted flat rectangles, discs and bars on
/// a soft gradient, every image different. Depends only on (index, options).
struct SyntheticOptions {
  int width = 320;
  int height = 240;
  std::uint64_t seed = 0;
};

Raster synthetic_image(std::size_t index, const SyntheticOptions& options = {});

/// "syn00042" style ids, zero padded to 5 digits.
std::string synthetic_id(std::size_t index);

}  // namespace ndup
