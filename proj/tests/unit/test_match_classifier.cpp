#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "ndup/match_classifier.hpp"
#include "test_support.hpp"

using namespace ndup;
using ndup::testing::error_code_of;

namespace {

LabeledPair pair(int dist, double score, bool match, RetrievalMode mode = RetrievalMode::VoteCount) {
  return {{dist, score, mode}, match};
}

std::vector<LabeledPair> separable(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> d(0, 40);
  std::uniform_real_distribution<double> s(0, 100);
  std::vector<LabeledPair> out;
  while (out.size() < n) {
    const int dist = d(rng);
    out.push_back(pair(dist, s(rng), dist < 10));
  }
  out.push_back(pair(9, 50, true));
  out.push_back(pair(10, 50, false));
  return out;
}

std::vector<LabeledPair> noisy(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0, 1);
  std::vector<LabeledPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool m = i % 2 == 0;
    const int dist = std::clamp(static_cast<int>(std::lround((m ? 12 : 24) + 6 * g(rng))), 0, 64);
    const double score = std::max(0.0, (m ? 40 : 20) + 12 * g(rng));
    out.push_back(pair(dist, score, m));
  }
  return out;
}

double accuracy(const MatchModel& m, std::span<const LabeledPair> data) {
  std::size_t ok = 0;
  for (const auto& p : data) ok += predict(m, p.features).match == p.match;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

}  // namespace

TEST_SUITE("match_classifier") {
  TEST_CASE("separable data is fit exactly") {
    std::mt19937_64 rng(1);
    const auto data = separable(rng, 200);
    TrainOptions opt;
    opt.l2 = 1e-6;
    const MatchModel m = train(data, opt);
    CHECK(accuracy(m, data) == 1.0);
    CHECK(m.trained_on == data.size());
    CHECK(m.weights[0] < 0);
    double prev = 2;
    for (int d = 0; d <= 64; ++d) {
      const double p = predict(m, {d, 50, RetrievalMode::VoteCount}).probability;
      CHECK(p <= prev);
      CHECK(p >= 0);
      CHECK(p <= 1);
      prev = p;
    }
  }

  TEST_CASE("input validation") {
    const std::vector<LabeledPair> one_class{pair(1, 1, true), pair(2, 2, true), pair(3, 3, true)};
    CHECK(error_code_of([&] { train(one_class); }) == ErrorCode::DegenerateLabels);
    const std::vector<LabeledPair> single{pair(1, 1, true)};
    CHECK(error_code_of([&] { train(single); }) == ErrorCode::EmptyInput);
    const std::vector<LabeledPair> mixed{pair(1, 1, true), pair(2, 2, false, RetrievalMode::Distance)};
    CHECK(error_code_of([&] { train(mixed); }) == ErrorCode::ModeMismatch);
    const std::vector<LabeledPair> bad{pair(70, 1, true), pair(2, 2, false)};
    CHECK(error_code_of([&] { train(bad); }) == ErrorCode::InvalidArgument);
    const std::vector<LabeledPair> nan{pair(1, std::nan(""), true), pair(2, 2, false)};
    CHECK(error_code_of([&] { train(nan); }) == ErrorCode::InvalidArgument);
    TrainOptions neg;
    neg.l2 = -1;
    const std::vector<LabeledPair> ok{pair(1, 1, true), pair(2, 2, false)};
    CHECK(error_code_of([&] { train(ok, neg); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("duplicating every row keeps the boundary") {
    std::mt19937_64 rng(2);
    const auto data = noisy(rng, 80);
    std::vector<LabeledPair> twice;
    for (const auto& p : data) {
      twice.push_back(p);
      twice.push_back(p);
    }
    const MatchModel a = train(data);
    const MatchModel b = train(twice);
    for (int i = 0; i < 2; ++i) {
      CHECK(a.weights[static_cast<std::size_t>(i)] == doctest::Approx(b.weights[static_cast<std::size_t>(i)]).epsilon(1e-5));
    }
    CHECK(a.bias == doctest::Approx(b.bias).epsilon(1e-5));
    for (const auto& p : data) CHECK(predict(a, p.features).match == predict(b, p.features).match);
  }

  TEST_CASE("predict") {
    MatchModel zero;
    for (int d : {0, 17, 64}) {
      const auto p = predict(zero, {d, 123.0, RetrievalMode::VoteCount});
      CHECK(p.probability == 0.5);
      CHECK(p.match);
    }
    CHECK(error_code_of([&] { predict(zero, {1, 1, RetrievalMode::Distance}); }) == ErrorCode::ModeMismatch);
    zero.threshold = 0.6;
    CHECK(!predict(zero, {1, 1, RetrievalMode::VoteCount}).match);
  }

  TEST_CASE("auc") {
    const std::vector<double> s{0.9, 0.6, 0.7, 0.2};
    const bool l[] = {true, true, false, false};
    CHECK(auc(s, l) == 0.75);
    const std::vector<double> sep{0.9, 0.8, 0.1, 0.2};
    CHECK(auc(sep, l) == 1.0);
    const std::vector<double> flat{0.3, 0.3, 0.3, 0.3};
    CHECK(auc(flat, l) == 0.5);
    const bool same[] = {true, true, true, true};
    CHECK(error_code_of([&] { auc(flat, same); }) == ErrorCode::DegenerateLabels);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    std::vector<double> scores(60);
    auto labels = std::make_unique<bool[]>(60);
    for (std::size_t i = 0; i < 60; ++i) {
      scores[i] = std::round(u(rng) * 20) / 20;  // plenty of ties
      labels[i] = u(rng) < scores[i];
    }
    const double base = auc(scores, std::span<const bool>(labels.get(), 60));
    std::vector<double> warped(60);
    for (std::size_t i = 0; i < 60; ++i) warped[i] = std::exp(5 * scores[i]) - std::log(1 - scores[i]);
    CHECK(auc(warped, std::span<const bool>(labels.get(), 60)) == base);
    CHECK(base >= 0);
    CHECK(base <= 1);

    const auto data = separable(rng, 50);
    CHECK(auc(train(data), data) == 1.0);
  }

  TEST_CASE("leave-one-out") {
    std::mt19937_64 rng(4);
    const auto data = separable(rng, 40);
    CHECK(loocv(data) >= 0.9);

    const std::vector<LabeledPair> tri{pair(5, 5, true), pair(5, 5, true), pair(5, 5, false)};
    const double acc = loocv(tri);
    CHECK(acc >= 0);
    CHECK(acc <= 1);
    const auto n20 = noisy(rng, 20);
    const double a20 = loocv(n20);
    CHECK(a20 >= 0);
    CHECK(a20 <= 1);
    const std::vector<LabeledPair> two{pair(5, 5, true), pair(6, 5, false)};
    CHECK(error_code_of([&] { loocv(two); }) == ErrorCode::EmptyInput);
  }

  TEST_CASE("labels are invariant to rescaling a raw feature") {
    std::mt19937_64 rng(5);
    const auto data = noisy(rng, 60);
    auto scaled = data;
    for (auto& p : scaled) p.features.retrieval_score *= 37.5;
    const MatchModel a = train(data);
    const MatchModel b = train(scaled);
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(predict(a, data[i].features).match == predict(b, scaled[i].features).match);
    }
  }

  TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(6);
    const auto data = noisy(rng, 50);
    std::array<double, 2> means{};
    std::array<double, 2> sds{};
    const Objective obj = make_objective(data, 0.3, means, sds);
    std::normal_distribution<double> g(0, 1.5);
    for (int t = 0; t < 10; ++t) {
      const std::array<double, 3> theta{g(rng), g(rng), g(rng)};
      std::array<double, 3> grad{};
      const double loss = obj.loss_and_gradient(theta, grad);
      CHECK(loss == doctest::Approx(obj.loss(theta)));
      for (std::size_t i = 0; i < 3; ++i) {
        const double h = 1e-5;
        auto up = theta;
        auto down = theta;
        up[i] += h;
        down[i] -= h;
        const double numeric = (obj.loss(up) - obj.loss(down)) / (2 * h);
        const double rel = std::abs(numeric - grad[i]) / std::max(1e-8, std::abs(numeric) + std::abs(grad[i]));
        CHECK(rel < 1e-5);
      }
    }
  }

  TEST_CASE("standardizer uses population statistics and replaces zero spread") {
    const std::vector<LabeledPair> d{pair(2, 7, true), pair(4, 7, false)};
    std::array<double, 2> means{};
    std::array<double, 2> sds{};
    const Objective o = make_objective(d, 0, means, sds);
    CHECK(means[0] == 3.0);
    CHECK(sds[0] == 1.0);
    CHECK(means[1] == 7.0);
    CHECK(sds[1] == 1.0);
    CHECK(o.x[0][0] == -1.0);
    CHECK(o.x[1][1] == 0.0);
    const MatchModel m = train(d);
    CHECK(predict(m, {2, 7, RetrievalMode::VoteCount}).match);
    CHECK(!predict(m, {4, 7, RetrievalMode::VoteCount}).match);
  }

  TEST_CASE("json round trip") {
    std::mt19937_64 rng(7);
    const MatchModel m = train(noisy(rng, 30));
    const auto text = model_to_json(m);
    CHECK(nlohmann::json::parse(text)["version"] == 1);
    const MatchModel back = model_from_json(text);
    CHECK(back.weights == m.weights);
    CHECK(back.bias == m.bias);
    CHECK(back.means == m.means);
    CHECK(back.sds == m.sds);
    CHECK(back.threshold == m.threshold);
    CHECK(back.mode == m.mode);
    CHECK(back.trained_on == m.trained_on);
    CHECK(model_to_json(back) == text);
    CHECK(error_code_of([] { model_from_json("{"); }) == ErrorCode::CorruptModel);
    CHECK(error_code_of([] { model_from_json(R"({"mode":"votes"})"); }) == ErrorCode::CorruptModel);
  }
}
