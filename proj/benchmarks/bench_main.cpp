#include <benchmark/benchmark.h>

#include <random>

#include "ndup/orb.hpp"
#include "ndup/phash.hpp"
#include "ndup/synthetic.hpp"
#include "ndup/vector_index.hpp"

namespace {

ndup::DescriptorSet random_binary(std::mt19937_64& rng, std::uint32_t bits, std::size_t n) {
  ndup::DescriptorSet s(ndup::FeatureKind::binary(bits));
  std::vector<std::uint8_t> buf(s.kind().bytes_per_feature());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    s.push_binary(buf);
  }
  return s;
}

ndup::FlatIndex binary_index(std::size_t images, std::size_t per_image, std::uint32_t bits) {
  std::mt19937_64 rng(1);
  std::vector<ndup::ImageFeatures> imgs;
  for (std::size_t i = 0; i < images; ++i) {
    imgs.push_back({"img" + std::to_string(i), random_binary(rng, bits, per_image)});
  }
  return ndup::FlatIndex::build(imgs, ndup::FeatureKind::binary(bits));
}

void BM_KnnBinary128(benchmark::State& state) {
  const auto ix = binary_index(static_cast<std::size_t>(state.range(0)) / 200, 200, 128);
  std::mt19937_64 rng(2);
  const auto q = random_binary(rng, 128, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ix.knn_features(q, 0, 100));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ix.feature_count()));
}
BENCHMARK(BM_KnnBinary128)->Arg(20'000)->Arg(200'000);

void BM_QueryVotes(benchmark::State& state) {
  const auto ix = binary_index(1000, 200, 128);
  std::mt19937_64 rng(3);
  const auto q = random_binary(rng, 128, static_cast<std::size_t>(state.range(0)));
  ndup::QueryParams p;
  for (auto _ : state) benchmark::DoNotOptimize(ix.query_votes(q, p));
}
BENCHMARK(BM_QueryVotes)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_KnnReal512(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> g;
  std::vector<ndup::ImageFeatures> imgs;
  std::vector<float> v(512);
  for (int i = 0; i < state.range(0); ++i) {
    ndup::DescriptorSet s(ndup::FeatureKind::real(512));
    for (auto& x : v) x = g(rng);
    s.push_real(v);
    imgs.push_back({"v" + std::to_string(i), s});
  }
  const auto ix = ndup::FlatIndex::build(imgs, ndup::FeatureKind::real(512));
  const auto& q = imgs.front().features;
  ndup::QueryParams p;
  for (auto _ : state) benchmark::DoNotOptimize(ix.query_distance(q, p));
}
BENCHMARK(BM_KnnReal512)->Arg(10'000)->Unit(benchmark::kMillisecond);

void BM_OrbExtract(benchmark::State& state) {
  ndup::SyntheticOptions opt;
  opt.width = static_cast<int>(state.range(0));
  opt.height = opt.width * 3 / 4;
  const auto image = ndup::synthetic_image(7, opt);
  for (auto _ : state) benchmark::DoNotOptimize(ndup::orb_feature_set(image, nullptr));
}
BENCHMARK(BM_OrbExtract)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);

void BM_Phash(benchmark::State& state) {
  const auto image = ndup::synthetic_image(3, {});
  for (auto _ : state) benchmark::DoNotOptimize(ndup::phash(image));
}
BENCHMARK(BM_Phash)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
