#include "preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace azoo {

void RgbFrame::fill_rect(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w,
                         std::array<std::uint8_t, 3> rgb) {
  const std::size_t y1 = std::min(kFrameHeight, y0 + h), x1 = std::min(kFrameWidth, x0 + w);
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) std::copy(rgb.begin(), rgb.end(), at(y, x));
}

Tensor grayscale_downsample(const RgbFrame& frame) {
  if (frame.pixels.size() != kFrameBytes) fail(ErrorKind::Shape, "RGB frame must be 210x160x3");
  // Integer weights sum to 1000, so white maps to exactly 1.
  std::vector<float> luma(kFrameHeight * kFrameWidth);
  for (std::size_t i = 0; i < luma.size(); ++i) {
    const std::uint8_t* p = frame.pixels.data() + 3 * i;
    const int weighted = 299 * p[0] + 587 * p[1] + 114 * p[2];
    luma[i] = static_cast<float>(weighted / 255000.0);
  }
  Tensor out({kObsSize, kObsSize});
  const double sy = static_cast<double>(kFrameHeight) / kObsSize;
  const double sx = static_cast<double>(kFrameWidth) / kObsSize;
  for (std::size_t oy = 0; oy < kObsSize; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(kFrameHeight - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, kFrameHeight - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < kObsSize; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(kFrameWidth - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, kFrameWidth - 1);
      const double tx = fx - static_cast<double>(x0);
      // Lerp form keeps constant regions exact.
      const double p00 = luma[y0 * kFrameWidth + x0], p01 = luma[y0 * kFrameWidth + x1];
      const double p10 = luma[y1 * kFrameWidth + x0], p11 = luma[y1 * kFrameWidth + x1];
      const double top = p00 + tx * (p01 - p00);
      const double bottom = p10 + tx * (p11 - p10);
      out[oy * kObsSize + ox] = static_cast<float>(top + ty * (bottom - top));
    }
  }
  return out;
}

Tensor Observation::tensor() const {
  if (!valid()) fail(ErrorKind::InvalidArgument, "empty observation");
  Tensor out({kStackDepth, kObsSize, kObsSize});
  const std::size_t plane = kObsSize * kObsSize;
  for (std::size_t c = 0; c < kStackDepth; ++c)
    std::copy(channels_[c]->data().begin(), channels_[c]->data().end(), out.data().begin() + c * plane);
  return out;
}

bool Observation::operator==(const Observation& other) const {
  for (std::size_t c = 0; c < kStackDepth; ++c) {
    if (channels_[c] == other.channels_[c]) continue;
    if (!channels_[c] || !other.channels_[c] || !bit_equal(*channels_[c], *other.channels_[c])) return false;
  }
  return true;
}

Observation stack_observation(std::span<const GrayFrame> history) {
  if (history.empty()) fail(ErrorKind::InvalidArgument, "cannot stack an empty frame history");
  const Shape expect{kObsSize, kObsSize};
  for (const auto& f : history)
    if (!f || f->shape() != expect) fail(ErrorKind::Shape, "history frames must be 84x84");
  const std::size_t n = std::min(history.size(), kStackDepth);
  const auto recent = history.subspan(history.size() - n);
  std::array<GrayFrame, kStackDepth> channels;
  const std::size_t pad = kStackDepth - n;
  for (std::size_t c = 0; c < kStackDepth; ++c) channels[c] = c < pad ? recent.front() : recent[c - pad];
  return Observation(std::move(channels));
}

void FrameHistory::push(Tensor gray) {
  frames_.push_back(std::make_shared<const Tensor>(std::move(gray)));
  if (frames_.size() > kStackDepth) frames_.erase(frames_.begin());
}

}  // namespace azoo
