#include "patches.hpp"

#include <algorithm>

#include "error.hpp"

namespace azoo {

ReceptiveField receptive_field(const NetworkSpec& spec, int layer) {
  if (layer < 1 || static_cast<std::size_t>(layer) > spec.conv_layers.size())
    fail(ErrorKind::OutOfRange, "receptive fields are defined for conv layers 1.." + std::to_string(spec.conv_layers.size()));
  ReceptiveField rf;
  for (int l = 0; l < layer; ++l) {
    const auto& c = spec.conv_layers[static_cast<std::size_t>(l)];
    rf.size += (c.kernel - 1) * rf.jump;
    rf.jump *= c.stride;
  }
  return rf;
}

PixelRect map_to_frame(const PixelRect& r) {
  const auto map = [](int v, std::size_t extent) { return static_cast<int>(static_cast<std::size_t>(v) * extent / kObsSize); };
  const int x0 = map(r.x, kFrameWidth), x1 = map(r.x + r.width, kFrameWidth);
  const int y0 = map(r.y, kFrameHeight), y1 = map(r.y + r.height, kFrameHeight);
  return {x0, y0, x1 - x0, y1 - y0};
}

std::vector<PatchHit> top_patches(const FrozenModel& model, const Rollout& rollout, int layer, int filter, std::size_t k) {
  const ReceptiveField rf = receptive_field(model.spec, layer);
  const int channels = model.spec.conv_layers[static_cast<std::size_t>(layer - 1)].out_channels;
  if (filter < 0 || filter >= channels)
    fail(ErrorKind::OutOfRange, "filter " + std::to_string(filter) + " out of range for conv" + std::to_string(layer));
  const bool cached = rollout.traces && rollout.traces->size() == rollout.size();
  const auto f = static_cast<std::size_t>(filter);

  std::vector<PatchHit> hits;
  hits.reserve(rollout.size());
  for (std::size_t t = 0; t < rollout.size(); ++t) {
    if (!rollout.steps[t].obs.valid()) fail(ErrorKind::MissingStream, "rollout step lacks an observation");
    ActivationTrace recomputed;
    if (!cached) recomputed = forward_with_trace(model, rollout.steps[t].obs.tensor());
    const Tensor& map = (cached ? (*rollout.traces)[t] : recomputed).conv[static_cast<std::size_t>(layer - 1)];
    PatchHit h;
    h.step = t;
    h.value = -1.0;
    for (std::size_t y = 0; y < map.dim(1); ++y)
      for (std::size_t x = 0; x < map.dim(2); ++x)
        if (const double v = map.at(f, y, x); v > h.value) {
          h.value = v;
          h.unit_x = static_cast<int>(x);
          h.unit_y = static_cast<int>(y);
        }
    hits.push_back(std::move(h));
  }
  std::stable_sort(hits.begin(), hits.end(), [](const PatchHit& a, const PatchHit& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.step < b.step;
  });
  hits.resize(std::min(k, hits.size()));

  const int extent = static_cast<int>(kObsSize);
  for (auto& h : hits) {
    const int x0 = rf.origin(h.unit_x), y0 = rf.origin(h.unit_y);
    h.rect = {x0, y0, std::min(rf.size, extent - x0), std::min(rf.size, extent - y0)};
    const Tensor& present = rollout.steps[h.step].obs.present();
    h.patch = Tensor({static_cast<std::size_t>(h.rect.height), static_cast<std::size_t>(h.rect.width)});
    for (int y = 0; y < h.rect.height; ++y)
      for (int x = 0; x < h.rect.width; ++x)
        h.patch[static_cast<std::size_t>(y * h.rect.width + x)] =
            present[static_cast<std::size_t>((y0 + y) * extent + x0 + x)];
    h.frame_rect = map_to_frame(h.rect);
  }
  return hits;
}

}  // namespace azoo
