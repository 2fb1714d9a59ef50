#include "ndup/feature_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "byte_io.hpp"
#include "ndup/error.hpp"

namespace ndup {

namespace {
constexpr std::uint32_t kMaxDim = 1u << 20;
}

std::vector<std::uint8_t> write_features(std::span<const ImageFeatures> images, FeatureKind kind) {
  if (kind.dim == 0 || kind.dim > kMaxDim) {
    throw Error(ErrorCode::KindMismatch, "unsupported feature dimension " + std::to_string(kind.dim));
  }
  std::unordered_set<std::string> seen;
  for (const auto& img : images) {
    if (!img.features.empty() && !(img.features.kind() == kind)) {
      throw Error(ErrorCode::KindMismatch, "image '" + img.id + "' has " + to_string(img.features.kind()) +
                                               " features, file is " + to_string(kind));
    }
    if (!seen.insert(img.id).second) throw Error(ErrorCode::DuplicateImageId, "image id '" + img.id + "' repeated");
    if (img.id.size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "image id longer than 65535 bytes");
  }

  detail::ByteWriter w;
  w.magic("NDF1");
  w.u16(kFeatureFileVersion);
  w.u8(static_cast<std::uint8_t>(kind.type));
  w.u32(kind.dim);
  w.u64(images.size());
  for (const auto& img : images) {
    w.u16(static_cast<std::uint16_t>(img.id.size()));
    w.bytes(img.id.data(), img.id.size());
    w.u32(static_cast<std::uint32_t>(img.features.size()));
    if (img.features.empty()) continue;
    if (kind.type == FeatureType::Binary) {
      w.bytes(img.features.binary_data().data(), img.features.binary_data().size());
    } else {
      w.bytes(img.features.real_data().data(), img.features.real_data().size() * sizeof(float));
    }
  }
  w.crc();
  return w.take();
}

FeatureFile read_features(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::CorruptFeatureFile);
  r.expect_magic("NDF1");
  const auto version = r.u16();
  if (version != kFeatureFileVersion) r.fail("unsupported feature file version " + std::to_string(version));
  r = detail::ByteReader(bytes, ErrorCode::CorruptFeatureFile);
  r.verify_trailing_crc();
  r.take(6);

  const auto type_code = r.u8();
  if (type_code > 1) r.fail("unknown kind code " + std::to_string(type_code));
  const auto dim = r.u32();
  if (dim == 0 || dim > kMaxDim) r.fail("bad dimension " + std::to_string(dim));
  FeatureFile file;
  file.kind = FeatureKind{static_cast<FeatureType>(type_code), dim};
  const std::size_t stride = file.kind.bytes_per_feature();
  const auto count = r.u64();
  if (count > r.remaining() / 6) r.fail("image count " + std::to_string(count) + " exceeds file size");

  std::unordered_set<std::string> seen;
  file.images.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = r.u16();
    const auto id_bytes = r.take(len);
    ImageFeatures img;
    img.id.assign(reinterpret_cast<const char*>(id_bytes.data()), id_bytes.size());
    if (!seen.insert(img.id).second) r.fail("duplicate image id '" + img.id + "'");
    const auto n = r.u32();
    if (n > r.remaining() / stride) r.fail("feature count for '" + img.id + "' overruns payload");
    img.features = DescriptorSet(file.kind);
    img.features.reserve(n);
    if (file.kind.type == FeatureType::Binary) {
      for (std::uint32_t f = 0; f < n; ++f) img.features.push_binary(r.take(stride));
    } else {
      std::vector<float> v(dim);
      for (std::uint32_t f = 0; f < n; ++f) {
        std::memcpy(v.data(), r.take(stride).data(), stride);
        img.features.push_real(v);
      }
    }
    file.images.push_back(std::move(img));
  }
  if (r.remaining() != 0) r.fail(std::to_string(r.remaining()) + " trailing bytes before checksum");
  return file;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path);
}

}  // namespace ndup
