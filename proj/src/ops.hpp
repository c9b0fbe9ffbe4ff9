#pragma once

#include <span>
#include <vector>

#include "tensor.hpp"

namespace azoo {

// Layer kernels. Reductions accumulate in double and round once on output.

/// Valid (unpadded) convolution: input C×H×W, weights O×C×K×K, bias O.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride);

struct Conv2dGrads {
  Tensor input;    // empty when not requested
  Tensor weights;  // empty when not requested
  Tensor bias;     // empty when not requested
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, int stride,
                            bool want_input = true, bool want_params = true);

Tensor relu(const Tensor& x);
/// Gradient through ReLU given its output; the derivative at 0 is taken as 0.
Tensor relu_backward(const Tensor& output, const Tensor& grad_out);

/// y = W·x + b, with x flattened regardless of its rank.
Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct FcGrads {
  Tensor input;  // same shape as the forward input
  Tensor weights;
  Tensor bias;
};

FcGrads fc_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, bool want_input = true,
                    bool want_params = true);

std::vector<float> softmax(std::span<const float> logits);
std::vector<double> softmax_d(std::span<const float> logits);

/// Index of the largest value; ties resolve to the lowest index.
std::size_t argmax(std::span<const float> values);

int conv_output_size(int input, int kernel, int stride) noexcept;

}  // namespace azoo
