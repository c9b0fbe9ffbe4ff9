#pragma once

#include <string>
#include <utility>
#include <vector>

#include "distinguisher.hpp"
#include "image.hpp"
#include "patches.hpp"
#include "rollout.hpp"

namespace azoo {

struct PaneRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Channel maps tiled in a grid, each map upscaled by `scale`.
struct GridPane {
  PaneRect rect;
  int columns = 0;
  int rows = 0;
  int map_size = 0;
  int scale = 1;
};

/// Fixed pixel layout of one trace frame: RGB frame on the left; observation
/// channels, conv grids, the fc strip and the action bars stacked on the right.
struct MontageLayout {
  int width = 0;
  int height = 0;
  PaneRect frame;
  GridPane observation;
  std::vector<GridPane> conv;
  GridPane fc;  // one pixel block per unit
  PaneRect bars;
  int bar_width = 0;
};

MontageLayout montage_layout(const NetworkSpec& spec);

using ValueRange = std::pair<double, double>;

/// Min-max ranges per traced layer over a whole rollout.
struct ActivationRanges {
  std::vector<ValueRange> conv;
  ValueRange fc{0.0, 0.0};
  ValueRange q{0.0, 0.0};
};

ActivationRanges activation_ranges(const std::vector<ActivationTrace>& traces);

/// Degenerate ranges map to 0.5.
double normalize(double v, const ValueRange& range) noexcept;

Image render_trace_frame(const StepRecord& step, const ActivationTrace& trace, const MontageLayout& layout,
                         const ActivationRanges& ranges);

/// Renders every step of a traced rollout, normalized over the rollout.
Image render_trace_step(const FrozenModel& model, const Rollout& rollout, std::size_t step);

/// Tiles cell[row][column] at `step`; rollouts shorter than step+1 show their
/// last frame.
Image render_rollout_grid(const std::vector<std::vector<const Rollout*>>& cells, const std::vector<std::string>& row_labels,
                          const std::vector<std::string>& column_labels, std::size_t step);

/// Grid cell origin (top-left of the frame tile) for layout-aware tests.
PaneRect rollout_grid_cell(std::size_t row, std::size_t column);

Image render_filter_mosaic(const FrozenModel& model);
Image render_confusion(const ConfusionMatrix& confusion);
Image render_patch_sheet(const std::vector<PatchHit>& hits);
Image render_dream_strip(const Tensor& input);

}  // namespace azoo
