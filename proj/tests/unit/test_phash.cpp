#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ndup/manipgen.hpp"
#include "ndup/phash.hpp"
#include "ndup/synthetic.hpp"
#include "test_support.hpp"

using namespace ndup;

namespace {

std::array<double, 1024> naive_dct(const Raster& g) {
  std::array<double, 1024> out{};
  for (int u = 0; u < 32; ++u) {
    for (int v = 0; v < 32; ++v) {
      double acc = 0;
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
          acc += g.at(x, y) * std::cos(std::numbers::pi * (2 * x + 1) * v / 64.0) *
                 std::cos(std::numbers::pi * (2 * y + 1) * u / 64.0);
        }
      }
      const double cu = u == 0 ? std::sqrt(1.0 / 32) : std::sqrt(2.0 / 32);
      const double cv = v == 0 ? std::sqrt(1.0 / 32) : std::sqrt(2.0 / 32);
      out[static_cast<std::size_t>(u * 32 + v)] = cu * cv * acc;
    }
  }
  return out;
}

PerceptualHash oracle_phash(const Raster& r) {
  const auto c = naive_dct(resize_bilinear(to_grayscale(r), 32, 32));
  std::vector<double> block;
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) block.push_back(c[static_cast<std::size_t>(u * 32 + v)]);
  }
  std::vector<double> ac(block.begin() + 1, block.end());
  std::sort(ac.begin(), ac.end());
  const double median = ac[31];
  PerceptualHash h;
  for (int k = 0; k < 64; ++k) {
    if (block[static_cast<std::size_t>(k)] > median) h.bits |= std::uint64_t{1} << (63 - k);
  }
  return h;
}

}  // namespace

TEST_SUITE("phash") {
  TEST_CASE("hamming64 examples") {
    const PerceptualHash a{0xDEADBEEF12345678ULL};
    CHECK(hamming64(a, a) == 0);
    CHECK(hamming64(a, PerceptualHash{~a.bits}) == 64);
    CHECK(hamming64(PerceptualHash{0b1010}, PerceptualHash{0b0110}) == 2);
  }

  TEST_CASE("dct32 matches the direct sum") {
    std::mt19937_64 rng(1);
    const Raster g = to_grayscale(testing::random_raster(rng, 32, 32));
    const auto fast = dct32(g);
    const auto slow = naive_dct(g);
    for (std::size_t i = 0; i < 1024; ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-9).scale(255));
  }

  TEST_CASE("phash matches the construction oracle") {
    for (std::size_t i = 0; i < 8; ++i) {
      const Raster r = synthetic_image(i, {96, 80, 0});
      CHECK(phash(r) == oracle_phash(r));
    }
    std::mt19937_64 rng(2);
    const Raster noise = testing::random_raster(rng, 50, 41);
    CHECK(phash(noise) == oracle_phash(noise));
  }

  TEST_CASE("bit order reads the block row-major") {
    const PerceptualHash h{std::uint64_t{1} << 63};
    CHECK(h.bit(0));
    CHECK(!h.bit(63));
    CHECK(to_hex(h) == "8000000000000000");
  }

  TEST_CASE("hex round trip") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
      const PerceptualHash h{rng()};
      const auto s = to_hex(h);
      CHECK(s.size() == 16);
      CHECK(std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(c) || (c >= 'a' && c <= 'f'); }));
      CHECK(parse_hex(s) == h);
    }
    CHECK(!parse_hex("123"));
    CHECK(!parse_hex("zzzzzzzzzzzzzzzz"));
    CHECK(!parse_hex("00000000000000000"));
  }

  TEST_CASE("near duplicates hash close, unrelated images far") {
    const auto resize80 = catalog_entry("resize_80");
    int worst_resize = 0;
    int worst_upscale = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      const Raster r = synthetic_image(i);
      const auto h = phash(r);
      CHECK(phash(r) == h);
      worst_resize = std::max(worst_resize, hamming64(h, phash(apply(r, resize80).raster)));
      worst_upscale = std::max(worst_upscale, hamming64(h, phash(resize_bilinear(r, 2 * r.width(), 2 * r.height()))));
    }
    CHECK(worst_resize <= 10);
    CHECK(worst_upscale <= 6);

    int far = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      const auto a = phash(synthetic_image(100 + 2 * i));
      const auto b = phash(synthetic_image(101 + 2 * i));
      far += hamming64(a, b) > 16;
    }
    INFO("unrelated pairs above 16: " << far);
    CHECK(far >= 95);
  }

  TEST_CASE("hamming is a metric on random hashes") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 1000; ++i) {
      const PerceptualHash a{rng()}, b{rng()}, c{rng()};
      CHECK(hamming64(a, b) == hamming64(b, a));
      CHECK(hamming64(a, c) <= hamming64(a, b) + hamming64(b, c));
    }
  }
}
