#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rollout.hpp"
#include "train.hpp"

namespace azoo {

inline constexpr std::size_t kDefaultFramesPerModel = 2501;

/// Present-channel frames (1×84×84) with class labels and a stratified
/// train/validation/test split.
struct FrameDataset {
  std::vector<Tensor> frames;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  std::size_t n_classes() const noexcept { return class_names.size(); }
};

/// Per class: shuffle, hold out floor(20%) for test, then floor(10%) of the
/// remainder for validation.
FrameDataset make_frame_dataset(std::vector<std::vector<Tensor>> frames_per_class, std::vector<std::string> class_names,
                                std::uint64_t seed);

struct LabeledRollouts {
  std::string label;
  std::vector<const Rollout*> rollouts;
};

/// Takes the first `frames_per_model` steps of each class's rollouts.
FrameDataset build_dataset(const std::vector<LabeledRollouts>& classes,
                           std::size_t frames_per_model = kDefaultFramesPerModel, std::uint64_t seed = 0);

struct TrainConfig {
  int max_epochs = 50;
  int patience = 5;
  int batch_size = 64;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  ClassifierSpec architecture;  // n_classes is taken from the dataset
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ConvClassifier classifier;
  std::vector<EpochLog> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Adam on mean cross-entropy; stops after `patience` epochs without a
/// validation-loss improvement and returns the best epoch's weights.
TrainResult train_classifier(const FrameDataset& data, const TrainConfig& config);

struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<long>> counts;  // [true][predicted]

  explicit ConfusionMatrix(std::vector<std::string> names = {});
  std::size_t size() const noexcept { return class_names.size(); }
  long row_sum(std::size_t i) const;
  long col_sum(std::size_t j) const;
  bool operator==(const ConfusionMatrix&) const = default;
};

/// 2·p·r / (p + r), defined as 0 when p + r = 0.
double f1_score(double precision, double recall) noexcept;

struct Evaluation {
  ConfusionMatrix confusion;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double mean_f1 = 0.0;  // unweighted over classes
  double accuracy = 0.0;
};

Evaluation evaluation_from_confusion(const ConfusionMatrix& confusion);
Evaluation evaluate(const ConvClassifier& classifier, const FrameDataset& data);

/// Elementwise sum; with zero_diagonal the true-positive counts are reset.
ConfusionMatrix sum_confusions(const std::vector<ConfusionMatrix>& matrices, bool zero_diagonal = true);

}  // namespace azoo
