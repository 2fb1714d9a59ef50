#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ndup {

enum class Channels : int { Gray = 1, RGB = 3 };

/// Decoded 8-bit image, row-major, channels interleaved.
class Raster {
 public:
  Raster() = default;
  /// Allocates width*height*channels bytes set to `value`.
  Raster(int width, int height, Channels channels, std::uint8_t value = 0);
  /// Adopts `pixels`; throws InvalidDimension if the length does not match.
  Raster(int width, int height, Channels channels, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Channels channels() const noexcept { return channels_; }
  int channel_count() const noexcept { return static_cast<int>(channels_); }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(int x, int y, int c = 0) const noexcept {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channel_count() + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) noexcept {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channel_count() + c];
  }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  Channels channels_ = Channels::RGB;
  std::vector<std::uint8_t> pixels_;
};

using Rgb = std::array<std::uint8_t, 3>;

/// Square, odd-sized convolution kernel whose weights sum to one.
class Kernel2D {
 public:
  /// Throws InvalidArgument unless size is odd, weights.size() == size*size
  /// and the weights sum to 1 within 1e-9.
  Kernel2D(int size, std::vector<double> weights);

  static Kernel2D identity();

  int size() const noexcept { return size_; }
  int radius() const noexcept { return size_ / 2; }
  double at(int col, int row) const noexcept { return weights_[static_cast<std::size_t>(row) * size_ + col]; }
  std::span<const double> weights() const noexcept { return weights_; }

 private:
  int size_;
  std::vector<double> weights_;
};

/// Decodes a PNG or JPEG stream to RGB. Grayscale sources are expanded to
/// three equal channels. Throws DecodeError on malformed, truncated or
/// unsupported input (libjpeg warnings such as premature EOF are fatal).
Raster decode(std::span<const std::uint8_t> bytes);

/// Lossless PNG encoding; Gray rasters are written as 8-bit grayscale PNGs.
std::vector<std::uint8_t> encode_png(const Raster& r);
std::vector<std::uint8_t> encode_jpeg(const Raster& r, int quality = 90);

Raster read_image_file(const std::string& path);
void write_png_file(const Raster& r, const std::string& path);

/// BT.601 luma, round-half-away, single channel. Gray input is returned as is.
Raster to_grayscale(const Raster& r);
/// Replicates a gray channel into RGB. RGB input is returned as is.
Raster to_rgb(const Raster& r);

/// Bilinear resampling with half-pixel-center coordinate mapping.
/// Throws InvalidDimension if either target dimension is < 1.
Raster resize_bilinear(const Raster& r, int new_w, int new_h);

/// Rotates about the image center, counter-clockwise as displayed for
/// positive `degrees` (y axis pointing down). The canvas keeps its size;
/// output pixels whose source falls outside the image take `fill`.
Raster rotate(const Raster& r, double degrees, Rgb fill = {0, 0, 0});

/// Copies the half-open region [x0,x1) x [y0,y1). Throws InvalidRegion.
Raster crop(const Raster& r, int x0, int y0, int x1, int y1);

Raster flip_horizontal(const Raster& r);

/// Per-channel 2-D convolution with replicate-edge padding; results are
/// rounded and clamped to [0,255].
Raster convolve(const Raster& r, const Kernel2D& k);

/// Uniform-weight rasterized line of `length` pixels through the kernel
/// center at `angle_degrees` counter-clockwise from the +x axis.
Kernel2D motion_kernel(int length, double angle_degrees);

/// Normalized separable Gaussian, size x size.
Kernel2D gaussian_kernel(int size, double sigma);

}  // namespace ndup
