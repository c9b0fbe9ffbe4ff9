#pragma once

#include <cstdint>
#include <vector>

#include "network.hpp"

namespace azoo {

enum class DreamOptimizer { Adam, Plain };

struct DreamConfig {
  int iterations = 512;
  double step = 0.05;
  int jitter = 4;  // max circular shift in pixels, each axis
  double tv_weight = 0.0;
  double l1_weight = 0.0;
  std::uint64_t seed = 0;
  DreamOptimizer optimizer = DreamOptimizer::Adam;

  void check() const;
};

/// Anisotropic L1 total variation summed over channels of a C×H×W tensor.
double total_variation(const Tensor& x);

/// activation − λ_tv·TV(x) − λ_l1·|x|₁ evaluated on x without jitter.
double dream_objective(const FrozenModel& model, const Tensor& x, const Objective& objective, const DreamConfig& config);

/// Gradient of dream_objective with respect to x (subgradients at kinks are 0).
Tensor dream_gradient(const FrozenModel& model, const Tensor& x, const Objective& objective, const DreamConfig& config);

struct DreamResult {
  Tensor input;                 // 4×84×84 in [0, 1]
  std::vector<double> history;  // composite objective, initial value first
};

DreamResult synthesize(const FrozenModel& model, const Objective& objective, const DreamConfig& config = {});

}  // namespace azoo
