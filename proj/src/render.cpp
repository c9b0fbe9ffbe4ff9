#include "render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "error.hpp"
#include "filters.hpp"

namespace azoo {

namespace {

constexpr int kMargin = 8;
constexpr int kGap = 1;
constexpr int kFcColumns = 32;
constexpr int kFcBlock = 4;
constexpr int kBarMaxHeight = 64;
constexpr Rgb kBackground{24, 24, 24};
constexpr Rgb kLabel{230, 230, 230};
constexpr Rgb kBar{150, 150, 150};
constexpr Rgb kBarChosen{220, 60, 60};

GridPane grid_pane(int x, int y, int maps, int columns, int map_size, int scale) {
  GridPane g;
  g.columns = columns;
  g.rows = (maps + columns - 1) / columns;
  g.map_size = map_size;
  g.scale = scale;
  g.rect = {x, y, columns * (map_size * scale + kGap) - kGap, g.rows * (map_size * scale + kGap) - kGap};
  return g;
}

Rgb gray(double t) {
  const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  return {v, v, v};
}

void paint_map(Image& img, const GridPane& g, int index, const float* values, const ValueRange& range) {
  const int col = index % g.columns, row = index / g.columns;
  const int ox = g.rect.x + col * (g.map_size * g.scale + kGap);
  const int oy = g.rect.y + row * (g.map_size * g.scale + kGap);
  for (int y = 0; y < g.map_size; ++y)
    for (int x = 0; x < g.map_size; ++x)
      img.fill_rect(ox + x * g.scale, oy + y * g.scale, g.scale, g.scale, gray(normalize(values[y * g.map_size + x], range)));
}

void extend(ValueRange& r, const Tensor& t, bool first) {
  for (float v : t.data()) {
    if (first) {
      r = {v, v};
      first = false;
    }
    r.first = std::min<double>(r.first, v);
    r.second = std::max<double>(r.second, v);
  }
}

}  // namespace

MontageLayout montage_layout(const NetworkSpec& spec) {
  spec.check();
  MontageLayout l;
  const int fw = static_cast<int>(kFrameWidth) * 2, fh = static_cast<int>(kFrameHeight) * 2;
  l.frame = {kMargin, kMargin, fw, fh};
  const int rx = kMargin * 2 + fw;
  int y = kMargin;
  l.observation = grid_pane(rx, y, static_cast<int>(kStackDepth), static_cast<int>(kStackDepth), static_cast<int>(kObsSize), 1);
  y += l.observation.rect.height + kMargin;
  int right = l.observation.rect.width;
  const auto sizes = spec.conv_output_sizes();
  for (std::size_t i = 0; i < spec.conv_layers.size(); ++i) {
    const int size = static_cast<int>(sizes[i]);
    const int scale = std::max(1, 20 / size);
    l.conv.push_back(grid_pane(rx, y, spec.conv_layers[i].out_channels, 16, size, scale));
    y += l.conv.back().rect.height + kMargin;
    right = std::max(right, l.conv.back().rect.width);
  }
  const int fc_rows = (spec.fc_width + kFcColumns - 1) / kFcColumns;
  l.fc.columns = kFcColumns;
  l.fc.rows = fc_rows;
  l.fc.map_size = 1;
  l.fc.scale = kFcBlock;
  l.fc.rect = {rx, y, kFcColumns * kFcBlock, fc_rows * kFcBlock};
  y += l.fc.rect.height + kMargin;
  l.bar_width = 12;
  l.bars = {rx, y, spec.n_actions * (l.bar_width + 4), kBarMaxHeight};
  y += kBarMaxHeight + kMargin;
  right = std::max({right, l.fc.rect.width, l.bars.width});
  l.width = rx + right + kMargin;
  l.height = std::max(y, fh + 2 * kMargin);
  return l;
}

ActivationRanges activation_ranges(const std::vector<ActivationTrace>& traces) {
  if (traces.empty()) fail(ErrorKind::MissingStream, "no activation traces to normalize");
  ActivationRanges r;
  r.conv.resize(traces.front().conv.size());
  for (std::size_t t = 0; t < traces.size(); ++t) {
    if (traces[t].conv.size() != r.conv.size()) fail(ErrorKind::Shape, "traces have differing layer counts");
    for (std::size_t i = 0; i < r.conv.size(); ++i) extend(r.conv[i], traces[t].conv[i], t == 0);
    extend(r.fc, traces[t].fc, t == 0);
    extend(r.q, traces[t].head_q, t == 0);
  }
  return r;
}

double normalize(double v, const ValueRange& range) noexcept {
  if (!(range.second > range.first)) return 0.5;
  return std::clamp((v - range.first) / (range.second - range.first), 0.0, 1.0);
}

Image render_trace_frame(const StepRecord& step, const ActivationTrace& trace, const MontageLayout& layout,
                         const ActivationRanges& ranges) {
  if (trace.conv.size() != layout.conv.size() || ranges.conv.size() != layout.conv.size())
    fail(ErrorKind::Shape, "trace does not match the montage layout");
  if (!step.obs.valid()) fail(ErrorKind::MissingStream, "step lacks an observation");
  Image img(layout.width, layout.height, kBackground);
  img.blit(image_from_frame(step.frame), layout.frame.x, layout.frame.y, 2);

  for (std::size_t c = 0; c < kStackDepth; ++c)
    paint_map(img, layout.observation, static_cast<int>(c), step.obs.channel(c).data().data(), {0.0, 1.0});

  for (std::size_t i = 0; i < layout.conv.size(); ++i) {
    const Tensor& a = trace.conv[i];
    const auto plane = a.dim(1) * a.dim(2);
    if (static_cast<int>(a.dim(1)) != layout.conv[i].map_size) fail(ErrorKind::Shape, "conv map size mismatch");
    for (std::size_t ch = 0; ch < a.dim(0); ++ch)
      paint_map(img, layout.conv[i], static_cast<int>(ch), a.data().data() + ch * plane, ranges.conv[i]);
  }

  const auto fc = trace.fc.data();
  for (std::size_t u = 0; u < fc.size(); ++u) {
    const int col = static_cast<int>(u) % layout.fc.columns, row = static_cast<int>(u) / layout.fc.columns;
    img.fill_rect(layout.fc.rect.x + col * kFcBlock, layout.fc.rect.y + row * kFcBlock, kFcBlock, kFcBlock,
                  gray(normalize(fc[u], ranges.fc)));
  }

  const auto q = trace.head_q.data();
  const auto best = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
  for (std::size_t a = 0; a < q.size(); ++a) {
    const int h = static_cast<int>(std::lround(normalize(q[a], ranges.q) * kBarMaxHeight));
    const int x = layout.bars.x + static_cast<int>(a) * (layout.bar_width + 4);
    img.fill_rect(x, layout.bars.y + kBarMaxHeight - h, layout.bar_width, h, a == best ? kBarChosen : kBar);
  }
  return img;
}

Image render_trace_step(const FrozenModel& model, const Rollout& rollout, std::size_t step) {
  if (!rollout.traces || rollout.traces->size() != rollout.size())
    fail(ErrorKind::MissingStream, "rollout was recorded without activation traces");
  if (step >= rollout.size()) fail(ErrorKind::OutOfRange, "step beyond end of rollout");
  return render_trace_frame(rollout.steps[step], (*rollout.traces)[step], montage_layout(model.spec),
                            activation_ranges(*rollout.traces));
}

namespace {

constexpr int kLabelColumn = 96;
constexpr int kLabelRow = 16;
constexpr int kTileGap = 4;

}  // namespace

PaneRect rollout_grid_cell(std::size_t row, std::size_t column) {
  const int w = static_cast<int>(kFrameWidth), h = static_cast<int>(kFrameHeight);
  return {kLabelColumn + static_cast<int>(column) * (w + kTileGap), kLabelRow + static_cast<int>(row) * (h + kTileGap), w, h};
}

Image render_rollout_grid(const std::vector<std::vector<const Rollout*>>& cells, const std::vector<std::string>& row_labels,
                          const std::vector<std::string>& column_labels, std::size_t step) {
  if (cells.empty() || cells.front().empty()) fail(ErrorKind::InvalidArgument, "rollout grid is empty");
  const std::size_t cols = cells.front().size();
  for (const auto& row : cells) {
    if (row.size() != cols) fail(ErrorKind::Shape, "rollout grid rows differ in length");
    for (const Rollout* r : row)
      if (!r || r->size() == 0) fail(ErrorKind::InvalidArgument, "rollout grid cell is empty");
  }
  if (row_labels.size() != cells.size() || column_labels.size() != cols)
    fail(ErrorKind::Shape, "label counts do not match the grid");

  const PaneRect last = rollout_grid_cell(cells.size() - 1, cols - 1);
  Image img(last.x + last.width + kTileGap, last.y + last.height + kTileGap, kBackground);
  for (std::size_t c = 0; c < cols; ++c) draw_text(img, rollout_grid_cell(0, c).x, 4, column_labels[c], kLabel);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const PaneRect first = rollout_grid_cell(r, 0);
    draw_text(img, 4, first.y + first.height / 2 - 3, row_labels[r], kLabel);
    for (std::size_t c = 0; c < cols; ++c) {
      const Rollout& ro = *cells[r][c];
      const std::size_t t = std::min(step, ro.size() - 1);
      const PaneRect cell = rollout_grid_cell(r, c);
      img.blit(image_from_frame(ro.steps[t].frame), cell.x, cell.y);
    }
  }
  return img;
}

Image render_filter_mosaic(const FrozenModel& model) {
  const auto filters = first_layer_filters(model);
  if (filters.empty()) fail(ErrorKind::SpecInconsistent, "model has no first-layer filters");
  double peak = 0.0;
  for (const auto& f : filters)
    for (float w : f.weights) peak = std::max(peak, std::abs(static_cast<double>(w)));
  const int k = static_cast<int>(filters.front().kernel), c = static_cast<int>(filters.front().channels);
  constexpr int kScale = 4, kPerRow = 8;
  const int tile_w = c * (k * kScale + kGap) + 3, tile_h = k * kScale + 3;
  const int rows = (static_cast<int>(filters.size()) + kPerRow - 1) / kPerRow;
  Image img(kPerRow * tile_w + kMargin, rows * tile_h + kMargin, kBackground);
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const int ox = kMargin / 2 + static_cast<int>(i % kPerRow) * tile_w, oy = kMargin / 2 + static_cast<int>(i / kPerRow) * tile_h;
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x) {
          const double w = filters[i].at(static_cast<std::size_t>(ch), static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          img.fill_rect(ox + ch * (k * kScale + kGap) + x * kScale, oy + y * kScale, kScale, kScale,
                        gray(peak > 0.0 ? 0.5 + 0.5 * w / peak : 0.5));
        }
  }
  return img;
}

Image render_confusion(const ConfusionMatrix& m) {
  const int n = static_cast<int>(m.size());
  if (n == 0) fail(ErrorKind::InvalidArgument, "empty confusion matrix");
  constexpr int kCell = 48;
  Image img(kLabelColumn + n * kCell + kMargin, kLabelRow + n * kCell + kMargin, kBackground);
  for (int i = 0; i < n; ++i) {
    draw_text(img, kLabelColumn + i * kCell + 2, 4, m.class_names[static_cast<std::size_t>(i)].substr(0, 7), kLabel);
    draw_text(img, 4, kLabelRow + i * kCell + kCell / 2 - 3, m.class_names[static_cast<std::size_t>(i)].substr(0, 15), kLabel);
    const long total = m.row_sum(static_cast<std::size_t>(i));
    for (int j = 0; j < n; ++j) {
      const long count = m.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const double t = total > 0 ? static_cast<double>(count) / static_cast<double>(total) : 0.0;
      const auto v = static_cast<std::uint8_t>(std::lround(40 + 200 * t));
      img.fill_rect(kLabelColumn + j * kCell, kLabelRow + i * kCell, kCell - 2, kCell - 2, {v, static_cast<std::uint8_t>(v / 3), 40});
      const std::string text = std::to_string(count);
      draw_text(img, kLabelColumn + j * kCell + (kCell - text_width(text)) / 2, kLabelRow + i * kCell + kCell / 2 - 4, text,
                kLabel);
    }
  }
  return img;
}

Image render_patch_sheet(const std::vector<PatchHit>& hits) {
  if (hits.empty()) fail(ErrorKind::InvalidArgument, "no patches to render");
  constexpr int kScale = 3, kPerRow = 8, kSide = 36 * kScale, kCellW = kSide + 8, kCellH = kSide + 20;
  const int rows = (static_cast<int>(hits.size()) + kPerRow - 1) / kPerRow;
  const int cols = std::min<int>(kPerRow, static_cast<int>(hits.size()));
  Image img(cols * kCellW + kMargin, rows * kCellH + kMargin, kBackground);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto& h = hits[i];
    const int ox = kMargin / 2 + static_cast<int>(i % kPerRow) * kCellW, oy = kMargin / 2 + static_cast<int>(i / kPerRow) * kCellH;
    const int w = h.rect.width, ht = h.rect.height;
    const int s = std::max(1, std::min(kSide / std::max(1, w), kSide / std::max(1, ht)));
    img.blit(image_from_map(h.patch.data(), w, ht, 0.0, 1.0), ox, oy, s);
    char label[32];
    std::snprintf(label, sizeof label, "%zu %.3g", h.step, h.value);
    draw_text(img, ox, oy + kSide + 6, label, kLabel);
  }
  return img;
}

Image render_dream_strip(const Tensor& input) {
  if (input.rank() != 3) fail(ErrorKind::Shape, "dream input must be C×H×W");
  const int c = static_cast<int>(input.dim(0)), h = static_cast<int>(input.dim(1)), w = static_cast<int>(input.dim(2));
  constexpr int kScale = 2, kStripGap = 4;
  Image img(c * (w * kScale + kStripGap) - kStripGap, h * kScale, kBackground);
  const auto plane = static_cast<std::size_t>(h * w);
  for (int ch = 0; ch < c; ++ch)
    img.blit(image_from_map(input.data().subspan(static_cast<std::size_t>(ch) * plane, plane), w, h, 0.0, 1.0),
             ch * (w * kScale + kStripGap), 0, kScale);
  return img;
}

}  // namespace azoo
