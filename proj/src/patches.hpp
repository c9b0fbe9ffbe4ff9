#pragma once

#include <cstddef>
#include <vector>

#include "network.hpp"
#include "rollout.hpp"

namespace azoo {

struct ReceptiveField {
  int size = 1;
  int jump = 1;

  /// Input top-left of unit (x, y): (x·jump, y·jump).
  int origin(int unit) const noexcept { return unit * jump; }
  bool operator==(const ReceptiveField&) const = default;
};

/// layer is one-based over the conv stack.
ReceptiveField receptive_field(const NetworkSpec& spec, int layer);

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool operator==(const PixelRect&) const = default;
};

/// Nearest-pixel mapping of an 84×84 rectangle onto the 210×160 RGB frame.
PixelRect map_to_frame(const PixelRect& obs_rect);

struct PatchHit {
  std::size_t step = 0;
  int unit_x = 0;
  int unit_y = 0;
  double value = 0.0;
  PixelRect rect;       // within the 84×84 observation
  Tensor patch;         // rect.height × rect.width from the present channel
  PixelRect frame_rect; // within the RGB frame of that step
};

/// One hit per step (the step's maximum of the filter's map), sorted by value
/// descending with ties broken by (step, y, x) ascending; at most k hits.
std::vector<PatchHit> top_patches(const FrozenModel& model, const Rollout& rollout, int layer, int filter, std::size_t k);

}  // namespace azoo
