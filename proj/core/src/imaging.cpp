#include "ndup/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include <jpeglib.h>
#include <png.h>

#include "ndup/error.hpp"

namespace ndup {

namespace {

std::uint8_t clamp_round(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return b.size() >= 8 && std::equal(std::begin(sig), std::end(sig), b.begin());
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::DecodeError, "png: " + msg);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width == 0 || img.height == 0 || img.width > (1u << 16) || img.height > (1u << 16)) {
    png_image_free(&img);
    throw Error(ErrorCode::DecodeError, "png: unsupported dimensions");
  }
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img), 0);
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::DecodeError, "png: " + msg);
  }
  const int w = static_cast<int>(img.width);
  const int h = static_cast<int>(img.height);
  png_image_free(&img);
  return Raster(w, h, Channels::RGB, std::move(buf));
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Warnings (truncated data, corrupt segments) are treated as fatal.
void jpeg_message(j_common_ptr cinfo, int level) {
  if (level < 0) jpeg_fail(cinfo);
}

Raster decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_fail;
  err.pub.emit_message = jpeg_message;
  err.message[0] = '\0';

  std::vector<std::uint8_t> buf;
  int w = 0;
  int h = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::DecodeError, std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  buf.resize(static_cast<std::size_t>(w) * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = buf.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return Raster(w, h, Channels::RGB, std::move(buf));
}

}  // namespace

Raster::Raster(int width, int height, Channels channels, std::uint8_t value)
    : width_(width), height_(height), channels_(channels) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidDimension,
                "raster dimensions must be >= 1, got " + std::to_string(width) + "x" + std::to_string(height));
  }
  pixels_.assign(static_cast<std::size_t>(width) * height * static_cast<int>(channels), value);
}

Raster::Raster(int width, int height, Channels channels, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidDimension,
                "raster dimensions must be >= 1, got " + std::to_string(width) + "x" + std::to_string(height));
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height * static_cast<int>(channels)) {
    throw Error(ErrorCode::InvalidDimension, "pixel buffer length does not match dimensions");
  }
}

Kernel2D::Kernel2D(int size, std::vector<double> weights) : size_(size), weights_(std::move(weights)) {
  if (size < 1 || size % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "kernel size must be a positive odd integer");
  }
  if (weights_.size() != static_cast<std::size_t>(size) * size) {
    throw Error(ErrorCode::InvalidArgument, "kernel weights must have size*size entries");
  }
  double sum = 0.0;
  for (double w : weights_) sum += w;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "kernel weights must sum to 1");
  }
}

Kernel2D Kernel2D::identity() { return Kernel2D(1, {1.0}); }

Raster decode(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(ErrorCode::DecodeError, "unrecognized image format");
}

std::vector<std::uint8_t> encode_png(const Raster& r) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(r.width());
  img.height = static_cast<png_uint_32>(r.height());
  img.format = r.channels() == Channels::Gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, r.pixels().data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, std::string("png encode: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, r.pixels().data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, std::string("png encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const Raster& r, int quality) {
  jpeg_compress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_fail;
  err.message[0] = '\0';
  unsigned char* mem = nullptr;
  unsigned long mem_size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(mem);
    throw Error(ErrorCode::Io, std::string("jpeg encode: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &mem, &mem_size);
  cinfo.image_width = static_cast<JDIMENSION>(r.width());
  cinfo.image_height = static_cast<JDIMENSION>(r.height());
  cinfo.input_components = r.channel_count();
  cinfo.in_color_space = r.channels() == Channels::Gray ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(r.width()) * r.channel_count();
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(r.pixels().data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<std::uint8_t> out(mem, mem + mem_size);
  jpeg_destroy_compress(&cinfo);
  std::free(mem);
  return out;
}

Raster read_image_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_png_file(const Raster& r, const std::string& path) {
  const auto bytes = encode_png(r);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path);
}

Raster to_grayscale(const Raster& r) {
  if (r.channels() == Channels::Gray) return r;
  Raster out(r.width(), r.height(), Channels::Gray);
  const auto src = r.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double y = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = clamp_round(y);
  }
  return out;
}

Raster to_rgb(const Raster& r) {
  if (r.channels() == Channels::RGB) return r;
  Raster out(r.width(), r.height(), Channels::RGB);
  const auto src = r.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

Raster resize_bilinear(const Raster& r, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1) {
    throw Error(ErrorCode::InvalidDimension,
                "resize target must be >= 1x1, got " + std::to_string(new_w) + "x" + std::to_string(new_h));
  }
  if (new_w == r.width() && new_h == r.height()) return r;

  const int cn = r.channel_count();
  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int dst, int src) {
    std::vector<Tap> t(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, src - 1);
      t[static_cast<std::size_t>(i)] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto xt = taps(new_w, r.width());
  const auto yt = taps(new_h, r.height());

  Raster out(new_w, new_h, r.channels());
  for (int y = 0; y < new_h; ++y) {
    const Tap& ty = yt[static_cast<std::size_t>(y)];
    for (int x = 0; x < new_w; ++x) {
      const Tap& tx = xt[static_cast<std::size_t>(x)];
      for (int c = 0; c < cn; ++c) {
        const double top = r.at(tx.i0, ty.i0, c) * (1.0 - tx.f) + r.at(tx.i1, ty.i0, c) * tx.f;
        const double bot = r.at(tx.i0, ty.i1, c) * (1.0 - tx.f) + r.at(tx.i1, ty.i1, c) * tx.f;
        out.at(x, y, c) = clamp_round(top * (1.0 - ty.f) + bot * ty.f);
      }
    }
  }
  return out;
}

Raster rotate(const Raster& r, double degrees, Rgb fill) {
  if (degrees == 0.0) return r;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cx = (r.width() - 1) / 2.0;
  const double cy = (r.height() - 1) / 2.0;
  const double max_x = r.width() - 1;
  const double max_y = r.height() - 1;
  constexpr double eps = 1e-6;
  const int cn = r.channel_count();

  Raster out(r.width(), r.height(), r.channels());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      // Inverse of a counter-clockwise (as displayed) rotation in y-down coordinates.
      double sx = cx + dx * cs - dy * sn;
      double sy = cy + dx * sn + dy * cs;
      if (sx < -eps || sy < -eps || sx > max_x + eps || sy > max_y + eps) {
        for (int c = 0; c < cn; ++c) out.at(x, y, c) = fill[static_cast<std::size_t>(c)];
        continue;
      }
      sx = std::clamp(sx, 0.0, max_x);
      sy = std::clamp(sy, 0.0, max_y);
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, r.width() - 1);
      const int y1 = std::min(y0 + 1, r.height() - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < cn; ++c) {
        const double top = r.at(x0, y0, c) * (1.0 - fx) + r.at(x1, y0, c) * fx;
        const double bot = r.at(x0, y1, c) * (1.0 - fx) + r.at(x1, y1, c) * fx;
        out.at(x, y, c) = clamp_round(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return out;
}

Raster crop(const Raster& r, int x0, int y0, int x1, int y1) {
  if (x0 < 0 || y0 < 0 || x1 > r.width() || y1 > r.height() || x0 >= x1 || y0 >= y1) {
    throw Error(ErrorCode::InvalidRegion, "crop region (" + std::to_string(x0) + "," + std::to_string(y0) + "," +
                                              std::to_string(x1) + "," + std::to_string(y1) + ") outside " +
                                              std::to_string(r.width()) + "x" + std::to_string(r.height()));
  }
  const int cn = r.channel_count();
  Raster out(x1 - x0, y1 - y0, r.channels());
  const std::size_t row_bytes = static_cast<std::size_t>(x1 - x0) * cn;
  for (int y = y0; y < y1; ++y) {
    const auto* src = r.pixels().data() + (static_cast<std::size_t>(y) * r.width() + x0) * cn;
    auto* dst = out.pixels().data() + static_cast<std::size_t>(y - y0) * row_bytes;
    std::copy_n(src, row_bytes, dst);
  }
  return out;
}

Raster flip_horizontal(const Raster& r) {
  const int cn = r.channel_count();
  Raster out(r.width(), r.height(), r.channels());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      for (int c = 0; c < cn; ++c) out.at(r.width() - 1 - x, y, c) = r.at(x, y, c);
    }
  }
  return out;
}

Raster convolve(const Raster& r, const Kernel2D& k) {
  struct Tap {
    int dx, dy;
    double w;
  };
  // Flipped kernel taps: out(x,y) = sum k(i,j) * in(x - (i - rad), y - (j - rad)).
  std::vector<Tap> taps;
  const int rad = k.radius();
  for (int j = 0; j < k.size(); ++j) {
    for (int i = 0; i < k.size(); ++i) {
      const double w = k.at(i, j);
      if (w != 0.0) taps.push_back({rad - i, rad - j, w});
    }
  }

  const int w = r.width();
  const int h = r.height();
  const int cn = r.channel_count();
  Raster out(w, h, r.channels());
  // Interior pixels read through precomputed offsets; the tap order, and so
  // the rounding, is the same as on the clamped border path.
  std::vector<std::ptrdiff_t> offsets;
  offsets.reserve(taps.size());
  for (const Tap& t : taps) offsets.push_back((static_cast<std::ptrdiff_t>(t.dy) * w + t.dx) * cn);
  const std::uint8_t* src = r.pixels().data();
  std::uint8_t* dst = out.pixels().data();

  std::array<double, 3> acc{};
  for (int y = 0; y < h; ++y) {
    const bool row_inside = y - rad >= 0 && y + rad < h;
    for (int x = 0; x < w; ++x) {
      acc.fill(0.0);
      const std::size_t base = (static_cast<std::size_t>(y) * w + x) * cn;
      if (row_inside && x - rad >= 0 && x + rad < w) {
        const std::uint8_t* p = src + base;
        for (std::size_t t = 0; t < taps.size(); ++t) {
          const std::uint8_t* q = p + offsets[t];
          for (int c = 0; c < cn; ++c) acc[static_cast<std::size_t>(c)] += taps[t].w * q[c];
        }
      } else {
        for (const Tap& t : taps) {
          const int sx = std::clamp(x + t.dx, 0, w - 1);
          const int sy = std::clamp(y + t.dy, 0, h - 1);
          for (int c = 0; c < cn; ++c) acc[static_cast<std::size_t>(c)] += t.w * r.at(sx, sy, c);
        }
      }
      for (int c = 0; c < cn; ++c) dst[base + static_cast<std::size_t>(c)] = clamp_round(acc[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

Kernel2D motion_kernel(int length, double angle_degrees) {
  if (length < 1) throw Error(ErrorCode::InvalidArgument, "motion length must be >= 1");
  if (length == 1) return Kernel2D::identity();

  const double rad = angle_degrees * std::numbers::pi / 180.0;
  const double ux = std::cos(rad);
  const double uy = -std::sin(rad);  // counter-clockwise with y pointing down
  const double half = (length - 1) / 2.0;

  // Dense sampling along the segment, each sample snapped to the nearest cell
  // (ties toward +inf so even lengths cover exactly `length` cells on axis).
  std::vector<std::pair<int, int>> cells;
  const int samples = 16 * length + 1;
  for (int s = 0; s < samples; ++s) {
    const double t = -half + (2.0 * half) * s / (samples - 1);
    const int cx = static_cast<int>(std::floor(t * ux + 0.5 + 1e-12));
    const int cy = static_cast<int>(std::floor(t * uy + 0.5 + 1e-12));
    cells.emplace_back(cx, cy);
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  int reach = 0;
  for (const auto& [cx, cy] : cells) reach = std::max({reach, std::abs(cx), std::abs(cy)});
  const int size = 2 * reach + 1;
  std::vector<double> weights(static_cast<std::size_t>(size) * size, 0.0);
  const double w = 1.0 / static_cast<double>(cells.size());
  for (const auto& [cx, cy] : cells) {
    weights[static_cast<std::size_t>(cy + reach) * size + static_cast<std::size_t>(cx + reach)] = w;
  }
  return Kernel2D(size, std::move(weights));
}

Kernel2D gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0 || !(sigma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "gaussian kernel needs odd size and sigma > 0");
  }
  const int rad = size / 2;
  std::vector<double> g(static_cast<std::size_t>(size));
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - rad;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;
  std::vector<double> weights(static_cast<std::size_t>(size) * size);
  for (int j = 0; j < size; ++j) {
    for (int i = 0; i < size; ++i) {
      weights[static_cast<std::size_t>(j) * size + i] = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
    }
  }
  double total = 0.0;
  for (double v : weights) total += v;
  for (double& v : weights) v /= total;
  return Kernel2D(size, std::move(weights));
}

}  // namespace ndup
