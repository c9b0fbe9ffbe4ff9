#include "ops.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace azoo {

int conv_output_size(int input, int kernel, int stride) noexcept { return (input - kernel) / stride + 1; }

namespace {

struct ConvDims {
  std::size_t c, h, w, o, k, oh, ow;
};

ConvDims conv_dims(const Tensor& input, const Tensor& weights, int stride) {
  if (input.rank() != 3) fail(ErrorKind::Shape, "conv input must be C×H×W, got " + shape_string(input.shape()));
  if (weights.rank() != 4 || weights.dim(2) != weights.dim(3))
    fail(ErrorKind::Shape, "conv weights must be O×C×K×K, got " + shape_string(weights.shape()));
  if (weights.dim(1) != input.dim(0))
    fail(ErrorKind::Shape, "conv channel mismatch: input " + shape_string(input.shape()) + ", weights " +
                               shape_string(weights.shape()));
  if (stride < 1) fail(ErrorKind::Config, "conv stride must be >= 1");
  ConvDims d{input.dim(0), input.dim(1), input.dim(2), weights.dim(0), weights.dim(2), 0, 0};
  if (d.h < d.k || d.w < d.k)
    fail(ErrorKind::Shape, "conv input " + shape_string(input.shape()) + " smaller than kernel " +
                               std::to_string(d.k));
  d.oh = static_cast<std::size_t>(conv_output_size(static_cast<int>(d.h), static_cast<int>(d.k), stride));
  d.ow = static_cast<std::size_t>(conv_output_size(static_cast<int>(d.w), static_cast<int>(d.k), stride));
  return d;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride) {
  const ConvDims d = conv_dims(input, weights, stride);
  if (bias.size() != d.o) fail(ErrorKind::Shape, "conv bias length must equal output channels");
  const std::size_t s = static_cast<std::size_t>(stride);
  Tensor out({d.o, d.oh, d.ow});
  const float* in = input.data().data();
  const float* wt = weights.data().data();
  // Each output sums bias, then (c, i, j) in order; the x loop is innermost so
  // independent outputs accumulate side by side.
  std::vector<double> acc(d.oh * d.ow);
  for (std::size_t o = 0; o < d.o; ++o) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(bias[o]));
    for (std::size_t c = 0; c < d.c; ++c) {
      const float* wk = wt + ((o * d.c + c) * d.k) * d.k;
      const float* plane = in + c * d.h * d.w;
      for (std::size_t i = 0; i < d.k; ++i)
        for (std::size_t j = 0; j < d.k; ++j) {
          const double w = wk[i * d.k + j];
          for (std::size_t y = 0; y < d.oh; ++y) {
            const float* row = plane + (y * s + i) * d.w + j;
            double* a = acc.data() + y * d.ow;
            for (std::size_t x = 0; x < d.ow; ++x) a[x] += w * row[x * s];
          }
        }
    }
    float* dst = out.data().data() + o * d.oh * d.ow;
    for (std::size_t k = 0; k < acc.size(); ++k) dst[k] = static_cast<float>(acc[k]);
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, int stride,
                            bool want_input, bool want_params) {
  const ConvDims d = conv_dims(input, weights, stride);
  if (grad_out.shape() != Shape{d.o, d.oh, d.ow})
    fail(ErrorKind::Shape, "conv grad_out shape " + shape_string(grad_out.shape()) + " does not match output");
  const std::size_t s = static_cast<std::size_t>(stride);
  const float* in = input.data().data();
  const float* wt = weights.data().data();
  const float* g = grad_out.data().data();
  Conv2dGrads grads;

  if (want_params) {
    std::vector<double> gw(weights.size(), 0.0);
    std::vector<double> gb(d.o, 0.0);
    for (std::size_t o = 0; o < d.o; ++o) {
      for (std::size_t y = 0; y < d.oh; ++y) {
        for (std::size_t x = 0; x < d.ow; ++x) {
          const double go = g[(o * d.oh + y) * d.ow + x];
          if (go == 0.0) continue;
          gb[o] += go;
          for (std::size_t c = 0; c < d.c; ++c) {
            double* gk = gw.data() + ((o * d.c + c) * d.k) * d.k;
            const float* plane = in + c * d.h * d.w;
            for (std::size_t i = 0; i < d.k; ++i) {
              const float* row = plane + (y * s + i) * d.w + x * s;
              for (std::size_t j = 0; j < d.k; ++j) gk[i * d.k + j] += go * row[j];
            }
          }
        }
      }
    }
    grads.weights = Tensor(weights.shape(), std::vector<float>(gw.begin(), gw.end()));
    grads.bias = Tensor({d.o}, std::vector<float>(gb.begin(), gb.end()));
  }

  if (want_input) {
    std::vector<double> gi(input.size(), 0.0);
    for (std::size_t o = 0; o < d.o; ++o) {
      for (std::size_t y = 0; y < d.oh; ++y) {
        for (std::size_t x = 0; x < d.ow; ++x) {
          const double go = g[(o * d.oh + y) * d.ow + x];
          if (go == 0.0) continue;
          for (std::size_t c = 0; c < d.c; ++c) {
            const float* wk = wt + ((o * d.c + c) * d.k) * d.k;
            double* plane = gi.data() + c * d.h * d.w;
            for (std::size_t i = 0; i < d.k; ++i) {
              double* row = plane + (y * s + i) * d.w + x * s;
              for (std::size_t j = 0; j < d.k; ++j) row[j] += go * wk[i * d.k + j];
            }
          }
        }
      }
    }
    grads.input = Tensor(input.shape(), std::vector<float>(gi.begin(), gi.end()));
  }
  return grads;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& output, const Tensor& grad_out) {
  if (output.shape() != grad_out.shape()) fail(ErrorKind::Shape, "relu gradient shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(output[i] > 0.0f)) g[i] = 0.0f;
  return g;
}

Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2 || weights.dim(1) != input.size())
    fail(ErrorKind::Shape, "fc weights " + shape_string(weights.shape()) + " do not accept input of " +
                               std::to_string(input.size()) + " values");
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  if (bias.size() != m) fail(ErrorKind::Shape, "fc bias length must equal output width");
  Tensor out({m});
  const float* x = input.data().data();
  for (std::size_t r = 0; r < m; ++r) {
    const float* w = weights.data().data() + r * n;
    double acc = bias[r];
    for (std::size_t c = 0; c < n; ++c) acc += static_cast<double>(w[c]) * x[c];
    out[r] = static_cast<float>(acc);
  }
  return out;
}

FcGrads fc_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, bool want_input,
                    bool want_params) {
  if (weights.rank() != 2 || weights.dim(1) != input.size() || grad_out.size() != weights.dim(0))
    fail(ErrorKind::Shape, "fc backward shape mismatch");
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  FcGrads grads;
  if (want_params) {
    grads.weights = Tensor(weights.shape());
    grads.bias = Tensor({m});
    for (std::size_t r = 0; r < m; ++r) {
      const double go = grad_out[r];
      grads.bias[r] = static_cast<float>(go);
      float* gw = grads.weights.data().data() + r * n;
      for (std::size_t c = 0; c < n; ++c) gw[c] = static_cast<float>(go * input[c]);
    }
  }
  if (want_input) {
    std::vector<double> gi(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const double go = grad_out[r];
      if (go == 0.0) continue;
      const float* w = weights.data().data() + r * n;
      for (std::size_t c = 0; c < n; ++c) gi[c] += go * w[c];
    }
    grads.input = Tensor(input.shape(), std::vector<float>(gi.begin(), gi.end()));
  }
  return grads;
}

std::vector<double> softmax_d(std::span<const float> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - mx);
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<float> softmax(std::span<const float> logits) {
  const auto p = softmax_d(logits);
  return {p.begin(), p.end()};
}

std::size_t argmax(std::span<const float> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace azoo
