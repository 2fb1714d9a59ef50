#include "ndup/match_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <json.hpp>

#include "ndup/error.hpp"

namespace ndup {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::array<double, 2> raw(const PairFeatures& f) { return {static_cast<double>(f.phash_dist), f.retrieval_score}; }

void validate(std::span<const LabeledPair> data) {
  for (const auto& row : data) {
    const auto& f = row.features;
    if (f.phash_dist < 0 || f.phash_dist > 64) throw Error(ErrorCode::InvalidArgument, "phash_dist outside [0,64]");
    if (!std::isfinite(f.retrieval_score) || f.retrieval_score < 0) {
      throw Error(ErrorCode::InvalidArgument, "retrieval_score must be finite and non-negative");
    }
    if (f.mode != data.front().features.mode) throw Error(ErrorCode::ModeMismatch, "training rows mix retrieval modes");
  }
}

std::size_t positives(std::span<const LabeledPair> data) {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](const auto& r) { return r.match; }));
}

}  // namespace

double Objective::loss(const std::array<double, 3>& theta) const {
  double total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = theta[0] * x[i][0] + theta[1] * x[i][1] + theta[2];
    total += softplus(z) - y[i] * z;
  }
  return total / static_cast<double>(x.size()) + 0.5 * l2 * (theta[0] * theta[0] + theta[1] * theta[1]);
}

double Objective::loss_and_gradient(const std::array<double, 3>& theta, std::array<double, 3>& grad) const {
  double total = 0;
  grad = {0, 0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = theta[0] * x[i][0] + theta[1] * x[i][1] + theta[2];
    total += softplus(z) - y[i] * z;
    const double r = sigmoid(z) - y[i];
    grad[0] += r * x[i][0];
    grad[1] += r * x[i][1];
    grad[2] += r;
  }
  const double n = static_cast<double>(x.size());
  for (auto& g : grad) g /= n;
  grad[0] += l2 * theta[0];
  grad[1] += l2 * theta[1];
  return total / n + 0.5 * l2 * (theta[0] * theta[0] + theta[1] * theta[1]);
}

Objective make_objective(std::span<const LabeledPair> data, double l2, std::array<double, 2>& means,
                         std::array<double, 2>& sds) {
  const double n = static_cast<double>(data.size());
  means = {0, 0};
  for (const auto& row : data) {
    const auto v = raw(row.features);
    means[0] += v[0];
    means[1] += v[1];
  }
  means[0] /= n;
  means[1] /= n;
  std::array<double, 2> var{0, 0};
  for (const auto& row : data) {
    const auto v = raw(row.features);
    var[0] += (v[0] - means[0]) * (v[0] - means[0]);
    var[1] += (v[1] - means[1]) * (v[1] - means[1]);
  }
  for (int j = 0; j < 2; ++j) {
    sds[j] = std::sqrt(var[j] / n);
    if (!(sds[j] > 0)) sds[j] = 1.0;
  }

  Objective obj;
  obj.l2 = l2;
  obj.x.reserve(data.size());
  obj.y.reserve(data.size());
  for (const auto& row : data) {
    const auto v = raw(row.features);
    obj.x.push_back({(v[0] - means[0]) / sds[0], (v[1] - means[1]) / sds[1]});
    obj.y.push_back(row.match ? 1.0 : 0.0);
  }
  return obj;
}

MatchModel train(std::span<const LabeledPair> data, const TrainOptions& opt) {
  if (data.size() < 2) throw Error(ErrorCode::EmptyInput, "training needs at least 2 labeled pairs");
  if (!(opt.l2 >= 0) || !std::isfinite(opt.l2)) throw Error(ErrorCode::InvalidArgument, "l2 must be >= 0");
  validate(data);
  const auto pos = positives(data);
  if (pos == 0 || pos == data.size()) throw Error(ErrorCode::DegenerateLabels, "training data has a single class");

  MatchModel m;
  m.mode = data.front().features.mode;
  m.threshold = opt.threshold;
  m.l2 = opt.l2;
  m.trained_on = data.size();
  const Objective obj = make_objective(data, opt.l2, m.means, m.sds);

  std::array<double, 3> theta{0, 0, 0};
  std::array<double, 3> grad{};
  double f = obj.loss_and_gradient(theta, grad);
  double step = 1.0;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const double gmax = std::max({std::abs(grad[0]), std::abs(grad[1]), std::abs(grad[2])});
    if (gmax < opt.tolerance) break;
    const double gg = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
    std::array<double, 3> next{};
    double fn = f;
    step = std::min(step * 2.0, 1e6);
    for (;;) {
      for (int j = 0; j < 3; ++j) next[j] = theta[j] - step * grad[j];
      fn = obj.loss(next);
      if (fn <= f - 1e-4 * step * gg || step < 1e-20) break;
      step *= 0.5;
    }
    if (!(fn < f)) break;  // no further progress representable
    theta = next;
    f = obj.loss_and_gradient(theta, grad);
  }
  m.weights = {theta[0], theta[1]};
  m.bias = theta[2];
  m.iterations = static_cast<std::size_t>(it);
  return m;
}

Prediction predict(const MatchModel& m, const PairFeatures& f) {
  if (f.mode != m.mode) {
    throw Error(ErrorCode::ModeMismatch,
                std::string("model trained on ") + to_string(m.mode) + ", features are " + to_string(f.mode));
  }
  const auto v = raw(f);
  const double z = m.weights[0] * (v[0] - m.means[0]) / m.sds[0] + m.weights[1] * (v[1] - m.means[1]) / m.sds[1] + m.bias;
  Prediction p;
  p.probability = sigmoid(z);
  p.match = p.probability >= m.threshold;
  return p;
}

double auc(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tied groups, then the Mann-Whitney U of the positives.
  double rank_sum = 0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) {
        rank_sum += avg;
        ++npos;
      }
    }
    i = j;
  }
  const std::size_t nneg = scores.size() - npos;
  if (npos == 0 || nneg == 0) throw Error(ErrorCode::DegenerateLabels, "AUC needs both labels");
  const double np = static_cast<double>(npos);
  return (rank_sum - np * (np + 1) / 2.0) / (np * static_cast<double>(nneg));
}

double auc(const MatchModel& m, std::span<const LabeledPair> data) {
  std::vector<double> scores;
  std::vector<char> labels;
  for (const auto& row : data) {
    scores.push_back(predict(m, row.features).probability);
    labels.push_back(row.match);
  }
  std::unique_ptr<bool[]> flags(new bool[labels.size()]);
  for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i] != 0;
  return auc(scores, std::span<const bool>(flags.get(), labels.size()));
}

double loocv(std::span<const LabeledPair> data, const TrainOptions& opt) {
  if (data.size() < 3) throw Error(ErrorCode::EmptyInput, "leave-one-out needs at least 3 labeled pairs");
  validate(data);
  const auto pos = positives(data);
  if (pos == 0 || pos == data.size()) throw Error(ErrorCode::DegenerateLabels, "data has a single class");

  std::size_t correct = 0;
  std::vector<LabeledPair> fold;
  fold.reserve(data.size() - 1);
  for (std::size_t held = 0; held < data.size(); ++held) {
    fold.clear();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (i != held) fold.push_back(data[i]);
    }
    const auto fold_pos = positives(fold);
    bool guess = false;
    if (fold_pos == 0 || fold_pos == fold.size()) {
      guess = fold_pos == fold.size();
    } else {
      guess = predict(train(fold, opt), data[held].features).match;
    }
    correct += guess == data[held].match;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string model_to_json(const MatchModel& m) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["mode"] = to_string(m.mode);
  j["weights"] = {m.weights[0], m.weights[1]};
  j["bias"] = m.bias;
  j["means"] = {m.means[0], m.means[1]};
  j["sds"] = {m.sds[0], m.sds[1]};
  j["threshold"] = m.threshold;
  j["l2"] = m.l2;
  j["trained_on"] = m.trained_on;
  return j.dump(2) + "\n";
}

MatchModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw Error(ErrorCode::CorruptModel, "unsupported model version");
    MatchModel m;
    m.mode = parse_retrieval_mode(j.at("mode").get<std::string>());
    const auto pair = [&](const char* key) {
      const auto& a = j.at(key);
      if (!a.is_array() || a.size() != 2) throw Error(ErrorCode::CorruptModel, std::string(key) + " must hold 2 numbers");
      return std::array<double, 2>{a[0].get<double>(), a[1].get<double>()};
    };
    m.weights = pair("weights");
    m.means = pair("means");
    m.sds = pair("sds");
    m.bias = j.at("bias").get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.l2 = j.at("l2").get<double>();
    m.trained_on = j.at("trained_on").get<std::size_t>();
    for (double v : {m.weights[0], m.weights[1], m.means[0], m.means[1], m.bias, m.threshold, m.l2}) {
      if (!std::isfinite(v)) throw Error(ErrorCode::CorruptModel, "non-finite parameter");
    }
    if (!(m.sds[0] > 0) || !(m.sds[1] > 0) || !std::isfinite(m.sds[0]) || !std::isfinite(m.sds[1])) {
      throw Error(ErrorCode::CorruptModel, "standard deviations must be positive");
    }
    if (m.threshold < 0 || m.threshold > 1) throw Error(ErrorCode::CorruptModel, "threshold outside [0,1]");
    return m;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptModel) throw;
    throw Error(ErrorCode::CorruptModel, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptModel, e.what());
  }
}

}  // namespace ndup
