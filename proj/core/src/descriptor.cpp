#include "ndup/descriptor.hpp"

#include <algorithm>

#include "ndup/error.hpp"

namespace ndup {

std::string to_string(const FeatureKind& kind) {
  return std::string(kind.type == FeatureType::Binary ? "binary/" : "real32/") + std::to_string(kind.dim);
}

DescriptorSet::DescriptorSet(FeatureKind kind) : kind_(kind) {
  if (kind.dim == 0) throw Error(ErrorCode::InvalidArgument, "feature dimension must be >= 1");
}

void DescriptorSet::push_binary(std::span<const std::uint8_t> bits) {
  if (kind_.type != FeatureType::Binary || bits.size() != kind_.bytes_per_feature()) {
    throw Error(ErrorCode::KindMismatch, "expected " + to_string(kind_) + " feature, got " +
                                             std::to_string(bits.size()) + " packed bytes");
  }
  bytes_.insert(bytes_.end(), bits.begin(), bits.end());
  const unsigned tail = kind_.dim % 8u;
  if (tail != 0) bytes_.back() &= static_cast<std::uint8_t>((1u << tail) - 1u);
  ++count_;
}

void DescriptorSet::push_real(std::span<const float> values) {
  if (kind_.type != FeatureType::Real || values.size() != kind_.dim) {
    throw Error(ErrorCode::KindMismatch,
                "expected " + to_string(kind_) + " feature, got " + std::to_string(values.size()) + " reals");
  }
  reals_.insert(reals_.end(), values.begin(), values.end());
  ++count_;
}

void DescriptorSet::append(const DescriptorSet& other) {
  if (other.empty()) return;
  if (!(other.kind_ == kind_)) {
    throw Error(ErrorCode::KindMismatch, "cannot append " + to_string(other.kind_) + " to " + to_string(kind_));
  }
  bytes_.insert(bytes_.end(), other.bytes_.begin(), other.bytes_.end());
  reals_.insert(reals_.end(), other.reals_.begin(), other.reals_.end());
  count_ += other.count_;
}

void DescriptorSet::reserve(std::size_t n) {
  if (kind_.type == FeatureType::Binary) {
    bytes_.reserve(n * kind_.bytes_per_feature());
  } else {
    reals_.reserve(n * kind_.dim);
  }
}

}  // namespace ndup
