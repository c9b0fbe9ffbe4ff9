#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tensor.hpp"

namespace azoo {

inline constexpr std::size_t kFrameHeight = 210;
inline constexpr std::size_t kFrameWidth = 160;
inline constexpr std::size_t kFrameBytes = kFrameHeight * kFrameWidth * 3;
inline constexpr std::size_t kRamBytes = 128;
inline constexpr std::size_t kObsSize = 84;
inline constexpr std::size_t kStackDepth = 4;

/// 210×160 RGB, row-major, interleaved channels.
struct RgbFrame {
  std::vector<std::uint8_t> pixels = std::vector<std::uint8_t>(kFrameBytes, 0);

  std::uint8_t* at(std::size_t y, std::size_t x) noexcept { return pixels.data() + (y * kFrameWidth + x) * 3; }
  const std::uint8_t* at(std::size_t y, std::size_t x) const noexcept {
    return pixels.data() + (y * kFrameWidth + x) * 3;
  }
  void fill_rect(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w, std::array<std::uint8_t, 3> rgb);

  bool operator==(const RgbFrame&) const = default;
};

using RamState = std::array<std::uint8_t, kRamBytes>;

/// ITU-R 601 luma in [0,1], then bilinear resize (half-pixel centers) to 84×84.
Tensor grayscale_downsample(const RgbFrame& frame);

using GrayFrame = std::shared_ptr<const Tensor>;

/// Four stacked 84×84 frames, oldest first; channel 3 is the present frame.
/// Channels are shared between consecutive observations.
class Observation {
 public:
  Observation() = default;
  explicit Observation(std::array<GrayFrame, kStackDepth> channels) : channels_(std::move(channels)) {}

  const Tensor& channel(std::size_t i) const { return *channels_.at(i); }
  const GrayFrame& channel_ptr(std::size_t i) const { return channels_.at(i); }
  const Tensor& present() const { return channel(kStackDepth - 1); }
  bool valid() const noexcept { return channels_[0] != nullptr; }

  /// 4×84×84 tensor.
  Tensor tensor() const;

  bool operator==(const Observation& other) const;

 private:
  std::array<GrayFrame, kStackDepth> channels_{};
};

/// Stacks the last four frames; shorter histories repeat the earliest frame.
Observation stack_observation(std::span<const GrayFrame> history);

/// Rolling four-frame history used while stepping an environment.
class FrameHistory {
 public:
  void reset() { frames_.clear(); }
  void push(Tensor gray);
  Observation observation() const { return stack_observation(frames_); }

 private:
  std::vector<GrayFrame> frames_;
};

}  // namespace azoo
