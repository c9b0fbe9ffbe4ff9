#include "filters.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace azoo {

std::vector<FilterView> first_layer_filters(const FrozenModel& model) {
  const Tensor& w = model.tensors.get("conv1.w");
  if (w.rank() != 4) fail(ErrorKind::Shape, "conv1.w must be rank 4");
  const std::size_t per = w.dim(1) * w.dim(2) * w.dim(3);
  std::vector<FilterView> out;
  for (std::size_t o = 0; o < w.dim(0); ++o) out.push_back({o, w.dim(1), w.dim(2), w.data().subspan(o * per, per)});
  return out;
}

TemporalProfile temporal_profile(const FrozenModel& model) {
  const auto filters = first_layer_filters(model);
  if (filters.empty() || filters.front().channels != 4)
    fail(ErrorKind::Shape, "temporal profile needs a first layer over four stacked frames");
  std::array<double, 4> sum{};
  std::size_t count = 0;
  for (const auto& f : filters) {
    const std::size_t plane = f.kernel * f.kernel;
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < plane; ++i) sum[c] += std::fabs(f.weights[c * plane + i]);
    count += plane;
  }
  const double present = sum[3] / static_cast<double>(count);
  if (!(present > 0.0)) fail(ErrorKind::Degenerate, "present-frame weights are all zero");
  TemporalProfile p;
  for (std::size_t c = 0; c < 3; ++c) p.magnitude[c] = (sum[c] / static_cast<double>(count)) / present;
  p.magnitude[3] = 1.0;
  return p;
}

double present_bias(const TemporalProfile& profile) noexcept {
  return (profile.magnitude[0] + profile.magnitude[1] + profile.magnitude[2]) / 3.0;
}

double present_bias(const FrozenModel& model) { return present_bias(temporal_profile(model)); }

std::vector<RankedBias> rank_by_present_bias(std::vector<RankedBias> entries) {
  std::sort(entries.begin(), entries.end(), [](const RankedBias& a, const RankedBias& b) {
    return a.bias != b.bias ? a.bias > b.bias : a.label < b.label;
  });
  return entries;
}

}  // namespace azoo
