#include "train.hpp"

#include <cmath>
#include <random>

#include "error.hpp"
#include "ops.hpp"

namespace azoo {

void ClassifierSpec::check() const {
  if (in_channels < 1 || in_size < 1 || n_classes < 2) fail(ErrorKind::Config, "classifier needs >= 2 classes");
  int size = in_size;
  for (const auto& l : conv) {
    if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1 || l.kernel > size)
      fail(ErrorKind::Config, "classifier conv layer does not fit its input");
    size = conv_output_size(size, l.kernel, l.stride);
  }
  for (int h : hidden)
    if (h < 1) fail(ErrorKind::Config, "classifier hidden widths must be positive");
}

std::size_t ClassifierSpec::flat_size() const {
  int size = in_size;
  std::size_t ch = static_cast<std::size_t>(in_channels);
  for (const auto& l : conv) {
    size = conv_output_size(size, l.kernel, l.stride);
    ch = static_cast<std::size_t>(l.out_channels);
  }
  return ch * static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
}

std::vector<std::pair<std::string, Shape>> ClassifierSpec::layout() const {
  std::vector<std::pair<std::string, Shape>> out;
  std::size_t ch = static_cast<std::size_t>(in_channels);
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const auto o = static_cast<std::size_t>(conv[i].out_channels), k = static_cast<std::size_t>(conv[i].kernel);
    out.emplace_back("conv" + std::to_string(i + 1) + ".w", Shape{o, ch, k, k});
    out.emplace_back("conv" + std::to_string(i + 1) + ".b", Shape{o});
    ch = o;
  }
  std::size_t width = flat_size();
  for (std::size_t i = 0; i <= hidden.size(); ++i) {
    const auto next = static_cast<std::size_t>(i < hidden.size() ? hidden[i] : n_classes);
    out.emplace_back("fc" + std::to_string(i + 1) + ".w", Shape{next, width});
    out.emplace_back("fc" + std::to_string(i + 1) + ".b", Shape{next});
    width = next;
  }
  return out;
}

ConvClassifier::ConvClassifier(ClassifierSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.check();
  std::mt19937_64 rng(seed);
  for (const auto& [name, shape] : spec_.layout()) {
    Tensor t(shape);
    if (shape.size() > 1) {
      const double fan_in = static_cast<double>(shape_size(shape) / shape[0]);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (auto& v : t.data()) v = static_cast<float>(dist(rng));
    }
    params_.set(name, std::move(t));
  }
}

ConvClassifier::ConvClassifier(ClassifierSpec spec, NamedTensors params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.check();
  for (const auto& [name, shape] : spec_.layout())
    if (params_.get(name).shape() != shape) fail(ErrorKind::Shape, "classifier tensor " + name + " has wrong shape");
}

namespace {

struct Activations {
  std::vector<Tensor> inputs;   // input to every layer, conv then fc
  std::vector<Tensor> outputs;  // post-ReLU (post-affine for the last layer)
};

Activations run(const ConvClassifier& net, const Tensor& input) {
  const auto& spec = net.spec();
  const Shape expect{static_cast<std::size_t>(spec.in_channels), static_cast<std::size_t>(spec.in_size),
                     static_cast<std::size_t>(spec.in_size)};
  if (input.shape() != expect) fail(ErrorKind::Shape, "classifier input must be " + shape_string(expect));
  Activations a;
  Tensor x = input;
  for (std::size_t i = 0; i < spec.conv.size(); ++i) {
    const std::string p = "conv" + std::to_string(i + 1);
    a.inputs.push_back(x);
    x = relu(conv2d_forward(x, net.params().get(p + ".w"), net.params().get(p + ".b"), spec.conv[i].stride));
    a.outputs.push_back(x);
  }
  x = x.reshaped({x.size()});
  for (std::size_t i = 0; i <= spec.hidden.size(); ++i) {
    const std::string p = "fc" + std::to_string(i + 1);
    a.inputs.push_back(x);
    x = fc_forward(x, net.params().get(p + ".w"), net.params().get(p + ".b"));
    if (i < spec.hidden.size()) x = relu(x);
    a.outputs.push_back(x);
  }
  return a;
}

double cross_entropy(const Tensor& logits, int label, std::vector<double>* grad) {
  const auto p = softmax_d(logits.data());
  if (grad) {
    *grad = p;
    (*grad)[static_cast<std::size_t>(label)] -= 1.0;
  }
  return -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
}

void check_labels(const ConvClassifier& net, std::span<const Tensor* const> inputs, std::span<const int> labels) {
  if (inputs.empty()) fail(ErrorKind::InvalidArgument, "batch must be nonempty");
  if (inputs.size() != labels.size()) fail(ErrorKind::InvalidArgument, "batch inputs and labels differ in length");
  for (int y : labels)
    if (y < 0 || y >= net.spec().n_classes) fail(ErrorKind::OutOfRange, "label " + std::to_string(y) + " out of range");
}

}  // namespace

Tensor ConvClassifier::logits(const Tensor& input) const { return run(*this, input).outputs.back(); }

std::vector<Tensor> ConvClassifier::hidden_activations(const Tensor& input) const {
  auto out = run(*this, input).outputs;
  out.pop_back();
  return out;
}

int ConvClassifier::predict(const Tensor& input) const { return static_cast<int>(argmax(logits(input).data())); }

double mean_cross_entropy(const ConvClassifier& net, std::span<const Tensor* const> inputs, std::span<const int> labels) {
  check_labels(net, inputs, labels);
  double total = 0.0;
  for (std::size_t b = 0; b < inputs.size(); ++b) total += cross_entropy(net.logits(*inputs[b]), labels[b], nullptr);
  return total / static_cast<double>(inputs.size());
}

LossAndGradients param_gradient(const ConvClassifier& net, std::span<const Tensor* const> inputs,
                                std::span<const int> labels) {
  check_labels(net, inputs, labels);
  const auto& spec = net.spec();
  const auto layout = spec.layout();
  std::vector<std::vector<double>> acc;
  for (const auto& [name, shape] : layout) acc.emplace_back(shape_size(shape), 0.0);
  auto add = [&](std::size_t slot, const Tensor& g) {
    for (std::size_t i = 0; i < g.size(); ++i) acc[slot][i] += g[i];
  };

  double loss = 0.0;
  const std::size_t n_conv = spec.conv.size(), n_fc = spec.hidden.size() + 1;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const Activations a = run(net, *inputs[b]);
    std::vector<double> g_logits;
    loss += cross_entropy(a.outputs.back(), labels[b], &g_logits);
    Tensor grad({g_logits.size()}, std::vector<float>(g_logits.begin(), g_logits.end()));
    for (std::size_t i = n_fc; i-- > 0;) {
      const std::size_t layer = n_conv + i;
      if (i + 1 < n_fc) grad = relu_backward(a.outputs[layer], grad);
      const std::string p = "fc" + std::to_string(i + 1);
      auto g = fc_backward(a.inputs[layer], net.params().get(p + ".w"), grad, layer > 0, true);
      add(2 * layer, g.weights);
      add(2 * layer + 1, g.bias);
      grad = std::move(g.input);
    }
    if (n_conv > 0) grad = grad.reshaped(a.outputs[n_conv - 1].shape());
    for (std::size_t i = n_conv; i-- > 0;) {
      grad = relu_backward(a.outputs[i], grad);
      const std::string p = "conv" + std::to_string(i + 1);
      auto g = conv2d_backward(a.inputs[i], net.params().get(p + ".w"), grad, spec.conv[i].stride, i > 0, true);
      add(2 * i, g.weights);
      add(2 * i + 1, g.bias);
      grad = std::move(g.input);
    }
  }

  LossAndGradients out;
  const double inv = 1.0 / static_cast<double>(inputs.size());
  out.loss = loss * inv;
  for (std::size_t s = 0; s < layout.size(); ++s) {
    std::vector<float> v(acc[s].size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(acc[s][i] * inv);
    out.gradients.set(layout[s].first, Tensor(layout[s].second, std::move(v)));
  }
  return out;
}

void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state, const AdamConfig& config) {
  if (state.m.size() == 0) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.get(name);
    Tensor& m = state.m.get(name);
    Tensor& v = state.v.get(name);
    if (g.shape() != p.shape()) fail(ErrorKind::Shape, "gradient for " + name + " has wrong shape");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      const double vi = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = config.lr * (mi / c1) / (std::sqrt(vi / c2) + config.eps);
      p[i] = static_cast<float>(p[i] - update);
    }
  }
}

}  // namespace azoo
