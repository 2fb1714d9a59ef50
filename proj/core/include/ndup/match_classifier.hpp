#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ndup/vector_index.hpp"

namespace ndup {

struct PairFeatures {
  int phash_dist = 0;            // [0, 64]
  double retrieval_score = 0;    // votes, or squared distance
  RetrievalMode mode = RetrievalMode::VoteCount;
};

struct LabeledPair {
  PairFeatures features;
  bool match = false;
};

/// Logistic regression over z-scored (phash_dist, retrieval_score).
struct MatchModel {
  RetrievalMode mode = RetrievalMode::VoteCount;
  std::array<double, 2> weights{};
  double bias = 0;
  std::array<double, 2> means{};
  std::array<double, 2> sds{1.0, 1.0};
  double threshold = 0.5;
  double l2 = 0;
  std::size_t trained_on = 0;
  std::size_t iterations = 0;  // not persisted
};

struct Prediction {
  double probability = 0.5;
  bool match = false;
};

struct TrainOptions {
  double l2 = 1e-6;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  int max_iterations = 10'000;
  double tolerance = 1e-8;
};

/// Throws DegenerateLabels unless both labels occur, EmptyInput with
/// fewer than 2 rows, ModeMismatch if rows mix modes, InvalidArgument on
/// non-finite or out-of-range features.
MatchModel train(std::span<const LabeledPair> data, const TrainOptions& opt = {});

/// Throws ModeMismatch.
Prediction predict(const MatchModel& m, const PairFeatures& f);

/// Mann-Whitney AUC of the model's probabilities; ties count one half.
/// Throws DegenerateLabels.
double auc(const MatchModel& m, std::span<const LabeledPair> data);
double auc(std::span<const double> scores, std::span<const bool> labels);

/// Leave-one-out accuracy. Folds whose training labels are all one class
/// predict that class.
double loocv(std::span<const LabeledPair> data, const TrainOptions& opt = {});

/// Training objective on already standardized inputs, theta = (w1, w2, b):
/// mean binary cross-entropy + (l2 / 2) * (w1^2 + w2^2).
struct Objective {
  std::vector<std::array<double, 2>> x;
  std::vector<double> y;
  double l2 = 0;

  double loss(const std::array<double, 3>& theta) const;
  /// Returns the loss and writes its gradient.
  double loss_and_gradient(const std::array<double, 3>& theta, std::array<double, 3>& grad) const;
};

/// Standardizes `data` with population mean and SD (SD 0 becomes 1).
Objective make_objective(std::span<const LabeledPair> data, double l2, std::array<double, 2>& means,
                         std::array<double, 2>& sds);

std::string model_to_json(const MatchModel& m);
/// Throws CorruptModel.
MatchModel model_from_json(const std::string& text);

}  // namespace ndup
