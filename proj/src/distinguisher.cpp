#include "distinguisher.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "error.hpp"

namespace azoo {

FrameDataset make_frame_dataset(std::vector<std::vector<Tensor>> frames_per_class, std::vector<std::string> class_names,
                                std::uint64_t seed) {
  if (frames_per_class.size() < 2) fail(ErrorKind::InvalidArgument, "a dataset needs at least two classes");
  if (frames_per_class.size() != class_names.size())
    fail(ErrorKind::InvalidArgument, "class names and frame lists differ in length");
  FrameDataset data;
  data.class_names = std::move(class_names);
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < frames_per_class.size(); ++c) {
    auto& frames = frames_per_class[c];
    if (frames.empty()) fail(ErrorKind::InsufficientData, "class " + data.class_names[c] + " has no frames");
    const std::size_t base = data.frames.size();
    std::vector<std::size_t> order(frames.size());
    std::iota(order.begin(), order.end(), base);
    std::shuffle(order.begin(), order.end(), rng);
    for (auto& f : frames) {
      data.frames.push_back(std::move(f));
      data.labels.push_back(static_cast<int>(c));
    }
    const std::size_t n_test = frames.size() / 5;
    const std::size_t n_val = (frames.size() - n_test) / 10;
    data.test.insert(data.test.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    data.val.insert(data.val.end(), order.begin() + static_cast<std::ptrdiff_t>(n_test),
                    order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    data.train.insert(data.train.end(), order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  }
  return data;
}

FrameDataset build_dataset(const std::vector<LabeledRollouts>& classes, std::size_t frames_per_model,
                           std::uint64_t seed) {
  if (classes.size() < 2) fail(ErrorKind::InvalidArgument, "need rollouts from at least two algorithms");
  std::vector<std::vector<Tensor>> frames(classes.size());
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    names.push_back(classes[c].label);
    for (const Rollout* r : classes[c].rollouts) {
      for (const auto& step : r->steps) {
        if (frames[c].size() == frames_per_model) break;
        frames[c].push_back(step.obs.present().reshaped({1, kObsSize, kObsSize}));
      }
    }
    if (frames[c].size() < frames_per_model)
      fail(ErrorKind::InsufficientData, "class " + classes[c].label + " has " + std::to_string(frames[c].size()) +
                                            " frames, " + std::to_string(frames_per_model) + " requested");
  }
  return make_frame_dataset(std::move(frames), std::move(names), seed);
}

namespace {

double split_loss(const ConvClassifier& net, const FrameDataset& data, const std::vector<std::size_t>& idx) {
  std::vector<const Tensor*> inputs;
  std::vector<int> labels;
  for (auto i : idx) {
    inputs.push_back(&data.frames[i]);
    labels.push_back(data.labels[i]);
  }
  return mean_cross_entropy(net, inputs, labels);
}

}  // namespace

TrainResult train_classifier(const FrameDataset& data, const TrainConfig& config) {
  if (data.train.empty()) fail(ErrorKind::InsufficientData, "training split is empty");
  if (config.max_epochs < 1 || config.patience < 1 || config.batch_size < 1)
    fail(ErrorKind::Config, "epochs, patience and batch size must be positive");
  ClassifierSpec arch = config.architecture;
  arch.n_classes = static_cast<int>(data.n_classes());
  TrainResult result{ConvClassifier(arch, config.seed), {}, 0, 0.0};
  ConvClassifier& net = result.classifier;
  const auto& monitor = data.val.empty() ? data.train : data.val;

  AdamState adam;
  const AdamConfig adam_config{config.lr};
  std::mt19937_64 rng(config.seed ^ 0xD1B54A32D192ED03ull);
  std::vector<std::size_t> order = data.train;
  NamedTensors best = net.params();
  result.best_val_loss = split_loss(net, data, monitor);
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const Tensor*> inputs;
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        inputs.push_back(&data.frames[order[k]]);
        labels.push_back(data.labels[order[k]]);
      }
      auto lg = param_gradient(net, inputs, labels);
      adam_step(net.params(), lg.gradients, adam, adam_config);
      train_loss += lg.loss;
      ++batches;
    }
    const double val_loss = split_loss(net, data, monitor);
    result.history.push_back({epoch, train_loss / static_cast<double>(batches), val_loss});
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best = net.params();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  net.params() = std::move(best);
  return result;
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> names)
    : class_names(std::move(names)), counts(class_names.size(), std::vector<long>(class_names.size(), 0)) {}

long ConfusionMatrix::row_sum(std::size_t i) const {
  return std::accumulate(counts.at(i).begin(), counts.at(i).end(), 0L);
}

long ConfusionMatrix::col_sum(std::size_t j) const {
  long s = 0;
  for (const auto& row : counts) s += row.at(j);
  return s;
}

double f1_score(double precision, double recall) noexcept {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

Evaluation evaluation_from_confusion(const ConfusionMatrix& confusion) {
  Evaluation e;
  e.confusion = confusion;
  const std::size_t n = confusion.size();
  long correct = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long tp = confusion.counts[i][i];
    const long predicted = confusion.col_sum(i), actual = confusion.row_sum(i);
    const double p = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double r = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    e.precision.push_back(p);
    e.recall.push_back(r);
    e.f1.push_back(f1_score(p, r));
    correct += tp;
    total += actual;
  }
  e.mean_f1 = n ? std::accumulate(e.f1.begin(), e.f1.end(), 0.0) / static_cast<double>(n) : 0.0;
  e.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return e;
}

Evaluation evaluate(const ConvClassifier& classifier, const FrameDataset& data) {
  if (data.test.empty()) fail(ErrorKind::InsufficientData, "test split is empty");
  ConfusionMatrix cm(data.class_names);
  for (auto i : data.test) {
    const int predicted = classifier.predict(data.frames[i]);
    ++cm.counts[static_cast<std::size_t>(data.labels[i])][static_cast<std::size_t>(predicted)];
  }
  return evaluation_from_confusion(cm);
}

ConfusionMatrix sum_confusions(const std::vector<ConfusionMatrix>& matrices, bool zero_diagonal) {
  if (matrices.empty()) fail(ErrorKind::InvalidArgument, "nothing to sum");
  ConfusionMatrix out(matrices.front().class_names);
  for (const auto& m : matrices) {
    if (m.class_names != out.class_names) fail(ErrorKind::InvalidArgument, "confusion matrices have different classes");
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = 0; j < m.size(); ++j) out.counts[i][j] += m.counts[i][j];
  }
  if (zero_diagonal)
    for (std::size_t i = 0; i < out.size(); ++i) out.counts[i][i] = 0;
  return out;
}

}  // namespace azoo
