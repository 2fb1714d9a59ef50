#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "byte_io.hpp"
#include "ndup/error.hpp"
#include "ndup/orb.hpp"
#include "random.hpp"

namespace ndup {

namespace {

constexpr std::uint16_t kPcaVersion = 1;
constexpr double kNullEigenvalue = 1e-10;
constexpr std::size_t kChunkRows = 4096;

// Gram matrix and column sums of 0/1 rows. Every partial sum is an integer
// below 2^53, so the result is exact and independent of sample order.
void accumulate_counts(std::span<const BinaryDescriptor256> sample, std::span<const std::size_t> order,
                       Eigen::MatrixXd& gram, Eigen::VectorXd& sums) {
  gram.setZero(kPcaInputDim, kPcaInputDim);
  sums.setZero(kPcaInputDim);
  Eigen::MatrixXd chunk(static_cast<Eigen::Index>(kChunkRows), kPcaInputDim);
  for (std::size_t start = 0; start < order.size(); start += kChunkRows) {
    const std::size_t rows = std::min(kChunkRows, order.size() - start);
    chunk.setZero();
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& d = sample[order[start + r]];
      for (int bit = 0; bit < kPcaInputDim; ++bit) {
        if (d[static_cast<std::size_t>(bit / 8)] & (1u << (bit % 8))) chunk(static_cast<Eigen::Index>(r), bit) = 1.0;
      }
    }
    const auto block = chunk.topRows(static_cast<Eigen::Index>(rows));
    gram.noalias() += block.transpose() * block;
    sums += block.colwise().sum().transpose();
  }
}

}  // namespace

PcaModel fit_pca(std::span<const BinaryDescriptor256> sample, std::uint64_t seed, std::size_t cap) {
  if (sample.size() < kPcaMinSample) {
    throw Error(ErrorCode::InsufficientSample,
                "PCA needs at least 256 descriptors, got " + std::to_string(sample.size()));
  }
  std::vector<std::size_t> order(sample.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (cap >= kPcaMinSample && order.size() > cap) {
    detail::SeededRng rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next() % (i + 1));
      std::swap(order[i], order[j]);
    }
    order.resize(cap);
    std::sort(order.begin(), order.end());
  }

  Eigen::MatrixXd gram;
  Eigen::VectorXd sums;
  accumulate_counts(sample, order, gram, sums);
  const double n = static_cast<double>(order.size());

  Eigen::MatrixXd cov(kPcaInputDim, kPcaInputDim);
  for (int i = 0; i < kPcaInputDim; ++i) {
    for (int j = 0; j < kPcaInputDim; ++j) cov(i, j) = (n * gram(i, j) - sums(i) * sums(j)) / (n * n);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  std::vector<int> idx(kPcaInputDim);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return values(a) > values(b); });

  PcaModel m;
  m.mean.resize(kPcaInputDim);
  for (int i = 0; i < kPcaInputDim; ++i) m.mean[static_cast<std::size_t>(i)] = sums(i) / n;
  m.projection.assign(static_cast<std::size_t>(kPcaOutputDim) * kPcaInputDim, 0.0);
  m.trained_on = order.size();

  std::vector<Eigen::VectorXd> rows;
  for (int r = 0; r < kPcaOutputDim; ++r) {
    const int k = idx[static_cast<std::size_t>(r)];
    if (values(k) <= kNullEigenvalue) break;
    Eigen::VectorXd v = vectors.col(k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    rows.push_back(std::move(v));
  }

  // Rank-deficient covariance: complete with Gram-Schmidt over the axes.
  for (int axis = 0; static_cast<int>(rows.size()) < kPcaOutputDim && axis < kPcaInputDim; ++axis) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(kPcaInputDim, axis);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : rows) v -= u.dot(v) * u;
    }
    const double norm = v.norm();
    if (norm < 1e-6) continue;
    v /= norm;
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    rows.push_back(std::move(v));
  }

  for (int r = 0; r < kPcaOutputDim; ++r) {
    for (int c = 0; c < kPcaInputDim; ++c) {
      m.projection[static_cast<std::size_t>(r) * kPcaInputDim + static_cast<std::size_t>(c)] =
          rows[static_cast<std::size_t>(r)](c);
    }
  }
  return m;
}

std::array<double, kPcaOutputDim> project(const BinaryDescriptor256& d, const PcaModel& m) {
  std::array<double, kPcaInputDim> centered{};
  for (int i = 0; i < kPcaInputDim; ++i) {
    const double bit = (d[static_cast<std::size_t>(i / 8)] >> (i % 8)) & 1u;
    centered[static_cast<std::size_t>(i)] = bit - m.mean[static_cast<std::size_t>(i)];
  }
  std::array<double, kPcaOutputDim> out{};
  for (int r = 0; r < kPcaOutputDim; ++r) {
    const double* row = m.projection.data() + static_cast<std::size_t>(r) * kPcaInputDim;
    double acc = 0.0;
    for (int i = 0; i < kPcaInputDim; ++i) acc += row[i] * centered[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

Code128 encode(const BinaryDescriptor256& d, const PcaModel& m) {
  const auto proj = project(d, m);
  Code128 code{};
  for (int j = 0; j < kPcaOutputDim; ++j) {
    if (proj[static_cast<std::size_t>(j)] > 0.0) code[static_cast<std::size_t>(j / 8)] |= static_cast<std::uint8_t>(1u << (j % 8));
  }
  return code;
}

DescriptorSet encode_set(std::span<const BinaryDescriptor256> descriptors, const PcaModel& m, OrbCode code) {
  if (code == OrbCode::Bits) {
    DescriptorSet set(FeatureKind::binary(kPcaOutputDim));
    set.reserve(descriptors.size());
    for (const auto& d : descriptors) set.push_binary(encode(d, m));
    return set;
  }
  DescriptorSet set(FeatureKind::real(kPcaOutputDim));
  set.reserve(descriptors.size());
  std::array<float, kPcaOutputDim> values{};
  for (const auto& d : descriptors) {
    const auto proj = project(d, m);
    std::transform(proj.begin(), proj.end(), values.begin(), [](double v) { return static_cast<float>(v); });
    set.push_real(values);
  }
  return set;
}

std::vector<std::uint8_t> save_pca(const PcaModel& m) {
  detail::ByteWriter w;
  w.magic("NDPC");
  w.u16(kPcaVersion);
  for (double v : m.mean) w.f64(v);
  for (double v : m.projection) w.f64(v);
  return w.take();
}

PcaModel load_pca(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::CorruptPcaModel);
  r.expect_magic("NDPC");
  const auto version = r.u16();
  if (version != kPcaVersion) r.fail("unsupported PCA model version " + std::to_string(version));
  const std::size_t expected = 8u * (kPcaInputDim + static_cast<std::size_t>(kPcaOutputDim) * kPcaInputDim);
  if (r.remaining() != expected) r.fail("payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                                        std::to_string(expected));
  PcaModel m;
  m.mean.resize(kPcaInputDim);
  for (double& v : m.mean) v = r.f64();
  m.projection.resize(static_cast<std::size_t>(kPcaOutputDim) * kPcaInputDim);
  for (double& v : m.projection) v = r.f64();
  return m;
}

}  // namespace ndup

namespace ndup {

DescriptorSet orb_feature_set(const Raster& r, const PcaModel* pca, OrbCode code, int max_n) {
  const auto features = extract_orb(r, max_n);
  if (pca == nullptr) return to_descriptor_set(features.descriptors);
  return encode_set(features.descriptors, *pca, code);
}

}  // namespace ndup
