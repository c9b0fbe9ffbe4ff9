#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "params.hpp"
#include "spec.hpp"
#include "tensor.hpp"

namespace azoo {

/// A small conv → fc classifier: ReLU after every layer except the output.
struct ClassifierSpec {
  int in_channels = 1;
  int in_size = 84;
  std::vector<ConvLayerSpec> conv{{16, 8, 4}, {32, 4, 2}};
  std::vector<int> hidden{256};
  int n_classes = 2;

  bool operator==(const ClassifierSpec&) const = default;

  void check() const;
  std::size_t flat_size() const;
  std::vector<std::pair<std::string, Shape>> layout() const;
};

class ConvClassifier {
 public:
  /// He-normal weights, zero biases, drawn from `seed`.
  ConvClassifier(ClassifierSpec spec, std::uint64_t seed);
  ConvClassifier(ClassifierSpec spec, NamedTensors params);

  const ClassifierSpec& spec() const noexcept { return spec_; }
  const NamedTensors& params() const noexcept { return params_; }
  NamedTensors& params() noexcept { return params_; }

  Tensor logits(const Tensor& input) const;
  /// Post-ReLU output of every hidden layer, conv layers first.
  std::vector<Tensor> hidden_activations(const Tensor& input) const;
  int predict(const Tensor& input) const;

 private:
  ClassifierSpec spec_;
  NamedTensors params_;
};

struct LossAndGradients {
  double loss = 0.0;  // mean cross-entropy over the batch
  NamedTensors gradients;
};

double mean_cross_entropy(const ConvClassifier& net, std::span<const Tensor* const> inputs, std::span<const int> labels);

/// Gradients of the mean cross-entropy with respect to every parameter.
LossAndGradients param_gradient(const ConvClassifier& net, std::span<const Tensor* const> inputs,
                                std::span<const int> labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  NamedTensors m;
  NamedTensors v;
  std::int64_t step = 0;
};

void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state, const AdamConfig& config);

}  // namespace azoo
