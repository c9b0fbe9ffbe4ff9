#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "preprocess.hpp"
#include "tensor.hpp"

namespace azoo {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster used by every renderer.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0});

  Rgb get(int x, int y) const;
  void set(int x, int y, Rgb c);
  void fill_rect(int x, int y, int w, int h, Rgb c);
  void outline_rect(int x, int y, int w, int h, Rgb c);
  /// Copies src with its top-left at (x, y), each source pixel scaled to a
  /// scale×scale block. Pixels outside the canvas are dropped.
  void blit(const Image& src, int x, int y, int scale = 1);

  bool operator==(const Image&) const = default;
};

Image image_from_frame(const RgbFrame& frame);

/// Grayscale rendering of a 2-D map, mapping [lo, hi] to [0, 255]. When
/// hi <= lo every pixel is mid-gray.
Image image_from_map(std::span<const float> values, int width, int height, double lo, double hi);

/// 5×7 bitmap text; lowercase is drawn as uppercase, unknown glyphs as boxes.
void draw_text(Image& img, int x, int y, std::string_view text, Rgb color, int scale = 1);
int text_width(std::string_view text, int scale = 1) noexcept;

std::vector<std::uint8_t> encode_png(const Image& img);
/// Decodes the 8-bit RGB, non-interlaced PNGs this library writes.
Image decode_png(std::span<const std::uint8_t> bytes);

void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace azoo
