#include "ndup/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <numeric>
#include <queue>

#include "byte_io.hpp"
#include "ndup/error.hpp"
#include "ndup/parallel.hpp"

namespace ndup {

namespace {

constexpr std::uint16_t kIndexVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 20;

struct HeapEntry {
  double distance;
  std::size_t feature;
};

// Max-heap on (distance, feature): the top is the current worst neighbor.
struct WorseFirst {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.feature < b.feature;
  }
};

class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  // Features arrive in increasing insertion order, so an equal distance
  // never displaces an entry already held.
  void offer(double distance, std::size_t feature) {
    if (heap_.size() < k_) {
      heap_.push_back({distance, feature});
      std::push_heap(heap_.begin(), heap_.end(), WorseFirst{});
    } else if (distance < heap_.front().distance) {
      std::pop_heap(heap_.begin(), heap_.end(), WorseFirst{});
      heap_.back() = {distance, feature};
      std::push_heap(heap_.begin(), heap_.end(), WorseFirst{});
    }
  }

  bool full() const { return heap_.size() == k_; }
  double worst() const { return heap_.front().distance; }

  std::vector<Neighbor> sorted() {
    std::sort_heap(heap_.begin(), heap_.end(), WorseFirst{});
    std::vector<Neighbor> out;
    out.reserve(heap_.size());
    for (const auto& e : heap_) out.push_back({e.feature, e.distance});
    return out;
  }

 private:
  std::size_t k_;
  std::vector<HeapEntry> heap_;
};

template <std::size_t Words>
void scan_binary_words(const std::uint8_t* base, std::size_t count, const std::uint8_t* query, TopK& top) {
  std::uint64_t q[Words];
  std::memcpy(q, query, Words * 8);
  constexpr std::size_t stride = Words * 8;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t s[Words];
    std::memcpy(s, base + i * stride, stride);
    std::uint32_t d = 0;
    for (std::size_t w = 0; w < Words; ++w) d += static_cast<std::uint32_t>(std::popcount(q[w] ^ s[w]));
    top.offer(static_cast<double>(d), i);
  }
}

}  // namespace

const char* to_string(RetrievalMode mode) noexcept {
  return mode == RetrievalMode::VoteCount ? "votes" : "distance";
}

RetrievalMode parse_retrieval_mode(const std::string& s) {
  if (s == "votes") return RetrievalMode::VoteCount;
  if (s == "distance") return RetrievalMode::Distance;
  throw Error(ErrorCode::InvalidArgument, "unknown retrieval mode '" + s + "'");
}

std::uint32_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) noexcept {
  std::uint32_t d = 0;
  std::size_t i = 0;
  for (; i + 8 <= a.size(); i += 8) {
    std::uint64_t x, y;
    std::memcpy(&x, a.data() + i, 8);
    std::memcpy(&y, b.data() + i, 8);
    d += static_cast<std::uint32_t>(std::popcount(x ^ y));
  }
  for (; i < a.size(); ++i) d += static_cast<std::uint32_t>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
  return d;
}

double squared_l2(std::span<const float> a, std::span<const float> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

FlatIndex FlatIndex::build(std::span<const ImageFeatures> images, FeatureKind kind) {
  if (kind.dim == 0 || kind.dim > kMaxDim) {
    throw Error(ErrorCode::KindMismatch, "unsupported feature dimension " + std::to_string(kind.dim));
  }
  FlatIndex ix;
  ix.kind_ = kind;
  ix.store_ = DescriptorSet(kind);
  std::size_t total = 0;
  for (const auto& img : images) total += img.features.size();
  ix.store_.reserve(total);
  ix.owner_.reserve(total);
  ix.images_.reserve(images.size());

  for (const auto& img : images) {
    if (!img.features.empty() && !(img.features.kind() == kind)) {
      throw Error(ErrorCode::KindMismatch, "image '" + img.id + "' has " + to_string(img.features.kind()) +
                                               " features, index is " + to_string(kind));
    }
    if (img.id.size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "image id longer than 65535 bytes");
    if (img.features.size() > 0xFFFFFFFFu) throw Error(ErrorCode::InvalidArgument, "too many features for one image");
    if (!ix.by_id_.emplace(img.id, ix.images_.size()).second) {
      throw Error(ErrorCode::DuplicateImageId, "image id '" + img.id + "' appears more than once");
    }
    const auto pos = static_cast<std::uint32_t>(ix.images_.size());
    ix.images_.push_back({img.id, static_cast<std::uint32_t>(img.features.size()), ix.store_.size()});
    ix.store_.append(img.features);
    ix.owner_.insert(ix.owner_.end(), img.features.size(), pos);
  }
  return ix;
}

std::ptrdiff_t FlatIndex::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

void FlatIndex::check_query(const DescriptorSet& q) const {
  if (!(q.kind() == kind_)) {
    throw Error(ErrorCode::KindMismatch, "query is " + to_string(q.kind()) + ", index is " + to_string(kind_));
  }
}

double FlatIndex::distance(const DescriptorSet& q, std::size_t qi, std::size_t stored) const {
  if (kind_.type == FeatureType::Binary) return hamming_distance(q.binary(qi), store_.binary(stored));
  return squared_l2(q.real(qi), store_.real(stored));
}

std::vector<Neighbor> FlatIndex::knn_features(const DescriptorSet& q, std::size_t qi, std::size_t k) const {
  check_query(q);
  if (qi >= q.size()) throw Error(ErrorCode::InvalidArgument, "query feature index out of range");
  const std::size_t n = store_.size();
  k = std::min(k, n);
  if (k == 0) return {};

  TopK top(k);
  if (kind_.type == FeatureType::Binary && kind_.dim == 128) {
    scan_binary_words<2>(store_.binary_data().data(), n, q.binary(qi).data(), top);
  } else if (kind_.type == FeatureType::Binary && kind_.dim == 256) {
    scan_binary_words<4>(store_.binary_data().data(), n, q.binary(qi).data(), top);
  } else if (kind_.type == FeatureType::Binary) {
    const auto query = q.binary(qi);
    for (std::size_t i = 0; i < n; ++i) top.offer(hamming_distance(query, store_.binary(i)), i);
  } else {
    const auto query = q.real(qi);
    for (std::size_t i = 0; i < n; ++i) top.offer(squared_l2(query, store_.real(i)), i);
  }
  return top.sorted();
}

RetrievalResult FlatIndex::query_votes(const DescriptorSet& q, const QueryParams& p) const {
  if (q.empty()) throw Error(ErrorCode::EmptyQuery, "query has no features");
  if (p.k < 1 || p.n < 1) throw Error(ErrorCode::InvalidArgument, "k and n must be >= 1");
  check_query(q);

  std::vector<std::vector<Neighbor>> hits(q.size());
  parallel_for(q.size(), p.jobs, [&](std::size_t i) { hits[i] = knn_features(q, i, static_cast<std::size_t>(p.k)); });

  std::vector<std::uint64_t> votes(images_.size(), 0);
  std::vector<double> dist_sum(images_.size(), 0.0);
  for (const auto& list : hits) {
    for (const Neighbor& nb : list) {
      const std::uint32_t img = owner_[nb.feature];
      ++votes[img];
      dist_sum[img] += nb.distance;
    }
  }

  // Images without votes still rank (score 0) after every voted image.
  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < images_.size(); ++i) {
    if (images_[i].feature_count > 0) order.push_back(i);
  }
  const std::size_t take = std::min(order.size(), static_cast<std::size_t>(p.n));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (votes[a] != votes[b]) return votes[a] > votes[b];
                      if (dist_sum[a] != dist_sum[b]) return dist_sum[a] < dist_sum[b];
                      return a < b;
                    });

  RetrievalResult result;
  result.mode = RetrievalMode::VoteCount;
  for (std::size_t r = 0; r < take; ++r) {
    const std::uint32_t img = order[r];
    result.ranked.push_back({images_[img].id, static_cast<double>(votes[img]), static_cast<int>(r + 1)});
  }
  return result;
}

RetrievalResult FlatIndex::query_distance(const DescriptorSet& q, const QueryParams& p) const {
  if (q.empty()) throw Error(ErrorCode::EmptyQuery, "query has no features");
  if (q.size() != 1) throw Error(ErrorCode::InvalidArgument, "distance query takes exactly one feature");
  if (p.n < 1) throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
  check_query(q);
  for (const auto& img : images_) {
    if (img.feature_count > 1) {
      throw Error(ErrorCode::MultiFeatureIndex,
                  "image '" + img.id + "' has " + std::to_string(img.feature_count) + " features");
    }
  }
  RetrievalResult result;
  result.mode = RetrievalMode::Distance;
  const auto nbs = knn_features(q, 0, static_cast<std::size_t>(p.n));
  int rank = 1;
  for (const Neighbor& nb : nbs) result.ranked.push_back({images_[owner_[nb.feature]].id, nb.distance, rank++});
  return result;
}

std::vector<std::uint8_t> FlatIndex::save() const {
  detail::ByteWriter w;
  w.magic("NDIX");
  w.u16(kIndexVersion);
  w.u8(static_cast<std::uint8_t>(kind_.type));
  w.u32(kind_.dim);
  w.u64(images_.size());
  w.u64(store_.size());
  for (const auto& img : images_) {
    w.u16(static_cast<std::uint16_t>(img.id.size()));
    w.bytes(img.id.data(), img.id.size());
    w.u32(img.feature_count);
  }
  if (kind_.type == FeatureType::Binary) {
    w.bytes(store_.binary_data().data(), store_.binary_data().size());
  } else {
    w.bytes(store_.real_data().data(), store_.real_data().size() * sizeof(float));
  }
  w.crc();
  return w.take();
}

FlatIndex FlatIndex::load(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::CorruptIndex);
  r.expect_magic("NDIX");
  const auto version = r.u16();
  if (version != kIndexVersion) r.fail("unsupported index version " + std::to_string(version));
  r = detail::ByteReader(bytes, ErrorCode::CorruptIndex);
  r.verify_trailing_crc();
  r.take(6);

  const auto type_code = r.u8();
  if (type_code > 1) r.fail("unknown kind code " + std::to_string(type_code));
  const auto dim = r.u32();
  if (dim == 0 || dim > kMaxDim) r.fail("bad dimension " + std::to_string(dim));
  const FeatureKind kind{static_cast<FeatureType>(type_code), dim};
  const auto image_count = r.u64();
  const auto feature_count = r.u64();
  // Each table row needs at least 6 bytes; reject counts the payload cannot hold.
  if (image_count > r.remaining() / 6) r.fail("image count exceeds file size");
  if (feature_count > r.remaining() / kind.bytes_per_feature()) r.fail("feature count exceeds file size");

  std::vector<std::pair<std::string, std::uint32_t>> table;
  table.reserve(static_cast<std::size_t>(image_count));
  std::uint64_t declared = 0;
  for (std::uint64_t i = 0; i < image_count; ++i) {
    const auto len = r.u16();
    const auto id_bytes = r.take(len);
    std::string id(reinterpret_cast<const char*>(id_bytes.data()), id_bytes.size());
    const auto count = r.u32();
    declared += count;
    table.emplace_back(std::move(id), count);
  }
  if (declared != feature_count) r.fail("image table declares " + std::to_string(declared) + " features, header " +
                                        std::to_string(feature_count));
  const std::size_t payload = static_cast<std::size_t>(feature_count) * kind.bytes_per_feature();
  if (r.remaining() != payload) r.fail("feature payload length mismatch");

  std::vector<ImageFeatures> images;
  images.reserve(table.size());
  for (auto& [id, count] : table) {
    DescriptorSet set(kind);
    set.reserve(count);
    for (std::uint32_t f = 0; f < count; ++f) {
      const auto raw = r.take(kind.bytes_per_feature());
      if (kind.type == FeatureType::Binary) {
        set.push_binary(raw);
      } else {
        std::vector<float> v(dim);
        std::memcpy(v.data(), raw.data(), raw.size());
        set.push_real(v);
      }
    }
    images.push_back({std::move(id), std::move(set)});
  }
  try {
    return build(images, kind);
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptIndex, e.what());
  }
}

}  // namespace ndup
