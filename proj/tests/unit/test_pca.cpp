#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "ndup/manipgen.hpp"
#include "ndup/orb.hpp"
#include "ndup/synthetic.hpp"
#include "test_support.hpp"

using namespace ndup;
using ndup::testing::error_code_of;

namespace {

// Correlated bits: each descriptor mixes a few shared prototypes with noise.
std::vector<BinaryDescriptor256> structured_sample(std::mt19937_64& rng, std::size_t n) {
  std::vector<BinaryDescriptor256> protos(6);
  for (auto& p : protos) {
    for (auto& b : p) b = static_cast<std::uint8_t>(rng());
  }
  std::uniform_int_distribution<std::size_t> pick(0, protos.size() - 1);
  std::bernoulli_distribution flip(0.2);
  std::vector<BinaryDescriptor256> out(n);
  for (auto& d : out) {
    d = protos[pick(rng)];
    for (int bit = 0; bit < 256; ++bit) {
      if (flip(rng)) d[static_cast<std::size_t>(bit / 8)] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    }
  }
  return out;
}

double bit_of(const BinaryDescriptor256& d, int i) { return (d[static_cast<std::size_t>(i / 8)] >> (i % 8)) & 1u; }

void check_orthonormal(const PcaModel& m) {
  double worst = 0;
  for (int a = 0; a < kPcaOutputDim; ++a) {
    for (int b = a; b < kPcaOutputDim; ++b) {
      double dot = 0;
      for (int c = 0; c < kPcaInputDim; ++c) dot += m.at(a, c) * m.at(b, c);
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  }
  CHECK(worst <= 1e-6);
}

// Mean Hamming over mutual nearest code pairs between two images.
double mutual_match_distance(const DescriptorSet& a, const DescriptorSet& b) {
  auto ham = [&](std::size_t i, std::size_t j) {
    int d = 0;
    for (std::size_t k = 0; k < 16; ++k) d += std::popcount(static_cast<unsigned>(a.binary(i)[k] ^ b.binary(j)[k]));
    return d;
  };
  std::vector<std::size_t> best_ab(a.size());
  std::vector<std::size_t> best_ba(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    int best = 999;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (const int d = ham(i, j); d < best) {
        best = d;
        best_ab[i] = j;
      }
    }
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    int best = 999;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (const int d = ham(i, j); d < best) {
        best = d;
        best_ba[j] = i;
      }
    }
  }
  double total = 0;
  int count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (best_ba[best_ab[i]] == i) {
      total += ham(i, best_ab[i]);
      ++count;
    }
  }
  return count == 0 ? 128.0 : total / count;
}

}  // namespace

TEST_SUITE("pca") {
  TEST_CASE("needs at least 256 descriptors") {
    std::mt19937_64 rng(1);
    const auto s = structured_sample(rng, 255);
    CHECK(error_code_of([&] { fit_pca(s); }) == ErrorCode::InsufficientSample);
  }

  TEST_CASE("rows are orthonormal and sign fixed") {
    std::mt19937_64 rng(2);
    const auto s = structured_sample(rng, 2000);
    const PcaModel m = fit_pca(s);
    CHECK(m.trained_on == 2000);
    REQUIRE(m.mean.size() == 256);
    REQUIRE(m.projection.size() == 128u * 256u);
    check_orthonormal(m);
    for (int r = 0; r < kPcaOutputDim; ++r) {
      int arg = 0;
      for (int c = 1; c < kPcaInputDim; ++c) {
        if (std::abs(m.at(r, c)) > std::abs(m.at(r, arg))) arg = c;
      }
      CHECK(m.at(r, arg) > 0);
    }
  }

  TEST_CASE("identical samples complete the basis deterministically") {
    BinaryDescriptor256 d{};
    d[3] = 0xA5;
    const std::vector<BinaryDescriptor256> s(300, d);
    const PcaModel m = fit_pca(s);
    check_orthonormal(m);
    CHECK(m.mean[24] == 1.0);
    CHECK(m.mean[25] == 0.0);
    CHECK(encode(d, m) == Code128{});
    const PcaModel again = fit_pca(s);
    CHECK(again.projection == m.projection);
  }

  TEST_CASE("top components capture at least the best coordinate subset") {
    std::mt19937_64 rng(3);
    const auto s = structured_sample(rng, 3000);
    const PcaModel m = fit_pca(s);
    const double n = static_cast<double>(s.size());
    std::vector<double> mean(256, 0.0);
    for (const auto& d : s) {
      for (int i = 0; i < 256; ++i) mean[static_cast<std::size_t>(i)] += bit_of(d, i) / n;
    }
    std::vector<double> cov(256 * 256, 0.0);
    for (const auto& d : s) {
      double c[256];
      for (int i = 0; i < 256; ++i) c[i] = bit_of(d, i) - mean[static_cast<std::size_t>(i)];
      for (int i = 0; i < 256; ++i) {
        for (int j = 0; j < 256; ++j) cov[static_cast<std::size_t>(i * 256 + j)] += c[i] * c[j] / n;
      }
    }
    double captured = 0;
    for (int r = 0; r < kPcaOutputDim; ++r) {
      for (int i = 0; i < 256; ++i) {
        for (int j = 0; j < 256; ++j) captured += m.at(r, i) * cov[static_cast<std::size_t>(i * 256 + j)] * m.at(r, j);
      }
    }
    std::vector<double> diag(256);
    for (int i = 0; i < 256; ++i) diag[static_cast<std::size_t>(i)] = cov[static_cast<std::size_t>(i * 257)];
    std::sort(diag.rbegin(), diag.rend());
    double best_subset = 0;
    for (int i = 0; i < 128; ++i) best_subset += diag[static_cast<std::size_t>(i)];
    CHECK(captured >= best_subset - 1e-9);
    for (std::size_t i = 0; i < 256; ++i) CHECK(m.mean[i] == doctest::Approx(mean[i]).epsilon(1e-12));
  }

  TEST_CASE("encode matches a direct projection oracle") {
    std::mt19937_64 rng(4);
    const auto s = structured_sample(rng, 1000);
    const PcaModel m = fit_pca(s);
    for (int t = 0; t < 50; ++t) {
      BinaryDescriptor256 d;
      for (auto& b : d) b = static_cast<std::uint8_t>(rng());
      Code128 expect{};
      for (int r = 0; r < 128; ++r) {
        long double acc = 0;
        for (int c = 0; c < 256; ++c) acc += static_cast<long double>(m.at(r, c)) * (bit_of(d, c) - m.mean[static_cast<std::size_t>(c)]);
        if (acc > 0) expect[static_cast<std::size_t>(r / 8)] |= static_cast<std::uint8_t>(1u << (r % 8));
        CHECK(project(d, m)[static_cast<std::size_t>(r)] == doctest::Approx(static_cast<double>(acc)));
      }
      CHECK(encode(d, m) == expect);
      CHECK(encode(d, m) == encode(d, m));
    }

    const std::vector<BinaryDescriptor256> some(s.begin(), s.begin() + 5);
    const auto bits = encode_set(some, m, OrbCode::Bits);
    const auto reals = encode_set(some, m, OrbCode::Float);
    CHECK(bits.kind() == FeatureKind::binary(128));
    CHECK(reals.kind() == FeatureKind::real(128));
    for (std::size_t i = 0; i < some.size(); ++i) {
      const auto code = encode(some[i], m);
      CHECK(std::equal(code.begin(), code.end(), bits.binary(i).begin()));
      const auto proj = project(some[i], m);
      for (std::size_t j = 0; j < 128; ++j) CHECK(reals.real(i)[j] == static_cast<float>(proj[j]));
    }
  }

  TEST_CASE("mean descriptor encodes to zeros") {
    PcaModel m;
    m.mean.assign(256, 0.0);
    m.projection.assign(128 * 256, 0.0);
    BinaryDescriptor256 d{};
    d[0] = 1;
    m.mean[0] = 1.0;
    for (int r = 0; r < 128; ++r) m.projection[static_cast<std::size_t>(r * 256 + r)] = 1.0;
    CHECK(encode(d, m) == Code128{});
  }

  TEST_CASE("fit is invariant to sample order") {
    std::mt19937_64 rng(5);
    auto s = structured_sample(rng, 800);
    const PcaModel a = fit_pca(s);
    std::shuffle(s.begin(), s.end(), rng);
    const PcaModel b = fit_pca(s);
    CHECK(a.mean == b.mean);
    CHECK(a.projection == b.projection);
  }

  TEST_CASE("cap subsamples deterministically") {
    std::mt19937_64 rng(6);
    const auto s = structured_sample(rng, 1200);
    const PcaModel a = fit_pca(s, 7, 500);
    const PcaModel b = fit_pca(s, 7, 500);
    CHECK(a.trained_on == 500);
    CHECK(a.projection == b.projection);
    CHECK(fit_pca(s, 8, 500).mean != a.mean);
  }

  TEST_CASE("model persistence") {
    std::mt19937_64 rng(7);
    const PcaModel m = fit_pca(structured_sample(rng, 400));
    const auto bytes = save_pca(m);
    CHECK(bytes.size() == 4 + 2 + 8 * 256 + 8 * 128 * 256);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NDPC");
    const PcaModel back = load_pca(bytes);
    CHECK(back.mean == m.mean);
    CHECK(back.projection == m.projection);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK(error_code_of([&] { load_pca(bad); }) == ErrorCode::CorruptPcaModel);
    auto ver = bytes;
    ver[4] = 2;
    CHECK(error_code_of([&] { load_pca(ver); }) == ErrorCode::CorruptPcaModel);
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
    CHECK(error_code_of([&] { load_pca(cut); }) == ErrorCode::CorruptPcaModel);
  }

  TEST_CASE("resized copies stay closer than unrelated images") {
    constexpr int kImages = 20;
    std::vector<std::vector<BinaryDescriptor256>> orig(kImages);
    std::vector<std::vector<BinaryDescriptor256>> small(kImages);
    std::vector<BinaryDescriptor256> sample;
    const SyntheticOptions opts{160, 120, 0};
    for (int i = 0; i < kImages; ++i) {
      const Raster r = synthetic_image(static_cast<std::size_t>(i), opts);
      orig[static_cast<std::size_t>(i)] = extract_orb(r).descriptors;
      small[static_cast<std::size_t>(i)] = extract_orb(apply(r, catalog_entry("resize_80")).raster).descriptors;
      sample.insert(sample.end(), orig[static_cast<std::size_t>(i)].begin(), orig[static_cast<std::size_t>(i)].end());
    }
    REQUIRE(sample.size() >= kPcaMinSample);
    const PcaModel m = fit_pca(sample);
    double related = 0;
    double unrelated = 0;
    for (int i = 0; i < kImages; ++i) {
      const auto a = encode_set(orig[static_cast<std::size_t>(i)], m, OrbCode::Bits);
      const auto b = encode_set(small[static_cast<std::size_t>(i)], m, OrbCode::Bits);
      const auto c = encode_set(orig[static_cast<std::size_t>((i + 1) % kImages)], m, OrbCode::Bits);
      related += mutual_match_distance(a, b);
      unrelated += mutual_match_distance(a, c);
    }
    INFO("related " << related / kImages << ", unrelated " << unrelated / kImages);
    CHECK(related < unrelated);
  }
}
