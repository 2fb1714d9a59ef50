#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ndup/manipgen.hpp"
#include "ndup/orb.hpp"
#include "ndup/synthetic.hpp"
#include "test_support.hpp"

using namespace ndup;

namespace {

struct Mapped {
  double x;
  double y;
};

// Where a source pixel lands after rotate(r, degrees) on a w x h canvas.
Mapped rotate_point(double x, double y, int w, int h, double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  const double dx = x - cx;
  const double dy = y - cy;
  return {cx + std::cos(t) * dx + std::sin(t) * dy, cy - std::sin(t) * dx + std::cos(t) * dy};
}

double scale_of(int level) { return std::pow(1.2, level); }

// Mutual nearest keypoint pairs (a in source, b in the rotated copy) on the
// same level, within `tol` level-pixels of the mapped position.
std::vector<std::pair<std::size_t, std::size_t>> geometric_matches(const std::vector<Keypoint>& a,
                                                                   const std::vector<Keypoint>& b, int w, int h,
                                                                   double degrees, double tol) {
  auto nearest = [&](const Keypoint& ka, std::size_t& best) {
    const auto m = rotate_point(ka.x, ka.y, w, h, degrees);
    double best_d = tol * scale_of(ka.scale_level);
    bool found = false;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (b[j].scale_level != ka.scale_level) continue;
      const double d = std::hypot(b[j].x - m.x, b[j].y - m.y);
      if (d < best_d) {
        best_d = d;
        best = j;
        found = true;
      }
    }
    return found;
  };
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::size_t j = 0;
    if (!nearest(a[i], j)) continue;
    // mutual: no other source keypoint on that level maps closer to b[j]
    bool mutual = true;
    const auto mi = rotate_point(a[i].x, a[i].y, w, h, degrees);
    const double di = std::hypot(b[j].x - mi.x, b[j].y - mi.y);
    for (std::size_t k = 0; k < a.size() && mutual; ++k) {
      if (k == i || a[k].scale_level != b[j].scale_level) continue;
      const auto mk = rotate_point(a[k].x, a[k].y, w, h, degrees);
      if (std::hypot(b[j].x - mk.x, b[j].y - mk.y) < di) mutual = false;
    }
    if (mutual) out.emplace_back(i, j);
  }
  return out;
}

double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2 * std::numbers::pi);
  if (d < 0) d += 2 * std::numbers::pi;
  return d;
}

}  // namespace

TEST_SUITE("orb") {
  TEST_CASE("constant and tiny images have no keypoints") {
    CHECK(detect_keypoints(Raster(100, 100, Channels::RGB, 90)).empty());
    std::mt19937_64 rng(1);
    CHECK(detect_keypoints(testing::random_raster(rng, 31, 64)).empty());
    CHECK(extract_orb(Raster(64, 64, Channels::RGB, 0)).descriptors.empty());
  }

  TEST_CASE("keypoint count respects max_n and stays in bounds") {
    std::mt19937_64 rng(2);
    const Raster r = testing::random_raster(rng, 200, 160);
    for (int max_n : {1, 17, 200, 500}) {
      const auto kps = detect_keypoints(r, max_n);
      CHECK(static_cast<int>(kps.size()) <= max_n);
      CHECK(!kps.empty());
      for (const auto& k : kps) {
        CHECK(k.x >= 0);
        CHECK(k.y >= 0);
        CHECK(k.x < 200);
        CHECK(k.y < 160);
        CHECK(std::isfinite(k.response));
        CHECK(k.orientation >= 0);
        CHECK(k.orientation < 2 * std::numbers::pi);
        CHECK(k.scale_level >= 0);
        CHECK(k.scale_level < 8);
      }
    }
    const auto f = extract_orb(r);
    CHECK(f.descriptors.size() <= 200);
    CHECK(f.keypoints.size() == f.descriptors.size());
  }

  TEST_CASE("description is deterministic and only drops keypoints") {
    const Raster r = synthetic_image(3);
    const auto kps = detect_keypoints(r);
    const auto a = describe(r, kps);
    const auto b = describe(r, kps);
    CHECK(a.descriptors.size() <= kps.size());
    CHECK(a.descriptors == b.descriptors);
    CHECK(a.keypoints == b.keypoints);
    const auto e = extract_orb(r);
    CHECK(e.descriptors == a.descriptors);
  }

  TEST_CASE("orientation follows a 90 degree rotation") {
    std::mt19937_64 rng(3);
    const Raster board = testing::random_checkerboard(rng, 160, 10);
    const Raster turned = rotate(board, 90.0);
    const auto a = detect_keypoints(board, 500);
    const auto b = detect_keypoints(turned, 500);
    const auto matches = geometric_matches(a, b, 160, 160, 90.0, 1.5);
    REQUIRE(matches.size() >= 20);
    std::size_t good = 0;
    for (auto [i, j] : matches) {
      const double d = angle_diff(a[i].orientation, b[j].orientation);
      if (std::abs(d - std::numbers::pi / 2) <= 0.1) ++good;
    }
    const double frac = static_cast<double>(good) / static_cast<double>(matches.size());
    INFO("matches " << matches.size() << ", within tolerance " << good);
    CHECK(frac >= 0.8);
  }

  TEST_CASE("descriptors survive a 10 degree rotation") {
    const Raster r = synthetic_image(5);
    const Raster turned = apply(r, catalog_entry("rot_ccw10")).raster;
    const auto a = extract_orb(r);
    const auto b = extract_orb(turned);
    const auto matches = geometric_matches(a.keypoints, b.keypoints, r.width(), r.height(), 10.0, 2.0);
    REQUIRE(matches.size() >= 10);
    double total = 0;
    for (auto [i, j] : matches) total += hamming(a.descriptors[i], b.descriptors[j]);
    const double mean = total / static_cast<double>(matches.size());
    INFO("matches " << matches.size() << ", mean hamming " << mean);
    CHECK(mean < 64.0);
  }

  TEST_CASE("descriptor sets and hamming") {
    BinaryDescriptor256 x{};
    BinaryDescriptor256 y{};
    y[0] = 0b1011;
    y[31] = 0x80;
    CHECK(hamming(x, y) == 4);
    CHECK(hamming(y, y) == 0);
    const std::vector<BinaryDescriptor256> list{x, y};
    const auto set = to_descriptor_set(list);
    CHECK(set.kind() == FeatureKind::binary(256));
    CHECK(set.size() == 2);
    CHECK(descriptor_at(set, 1) == y);
  }

  TEST_CASE("feature set path without PCA is raw binary/256") {
    const Raster r = synthetic_image(1);
    const auto set = orb_feature_set(r, nullptr);
    CHECK(set.kind() == FeatureKind::binary(256));
    const auto raw = extract_orb(r);
    REQUIRE(set.size() == raw.descriptors.size());
    for (std::size_t i = 0; i < set.size(); ++i) CHECK(descriptor_at(set, i) == raw.descriptors[i]);
    CHECK(orb_feature_set(r, nullptr, OrbCode::Bits, 10).size() <= 10);
  }
}
