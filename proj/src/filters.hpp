#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "model.hpp"

namespace azoo {

/// Read-only view of one first-layer filter (C×K×K) inside conv1.w.
struct FilterView {
  std::size_t index = 0;
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::span<const float> weights;

  float at(std::size_t c, std::size_t i, std::size_t j) const noexcept {
    return weights[(c * kernel + i) * kernel + j];
  }
};

/// One view per conv1 output channel, in channel order. Views alias the model.
std::vector<FilterView> first_layer_filters(const FrozenModel& model);

/// Mean |w| attending to each input frame, normalized by the present frame
/// (channel 3). Weights are pooled across all filters before the ratio.
struct TemporalProfile {
  std::array<double, 4> magnitude{};  // magnitude[3] == 1 exactly
};

TemporalProfile temporal_profile(const FrozenModel& model);

/// Mean of the three past-frame entries of the temporal profile.
double present_bias(const FrozenModel& model);
double present_bias(const TemporalProfile& profile) noexcept;

struct RankedBias {
  std::string label;
  double bias = 0.0;
};

/// Orders by increasing present focus, i.e. decreasing past/present ratio, so
/// the most present-focused model comes last. Ties by label.
std::vector<RankedBias> rank_by_present_bias(std::vector<RankedBias> entries);

}  // namespace azoo
