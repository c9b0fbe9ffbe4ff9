#include "image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "error.hpp"
#include "fileio.hpp"

namespace azoo {

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) fail(ErrorKind::InvalidArgument, "image dimensions must be positive");
  pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) std::copy(fill.begin(), fill.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i));
}

Rgb Image::get(int x, int y) const {
  const auto* p = pixels.data() + (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  return {p[0], p[1], p[2]};
}

void Image::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  auto* p = pixels.data() + (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  p[0] = c[0];
  p[1] = c[1];
  p[2] = c[2];
}

void Image::fill_rect(int x, int y, int w, int h, Rgb c) {
  const int x0 = std::max(0, x), y0 = std::max(0, y);
  const int x1 = std::min(width, x + w), y1 = std::min(height, y + h);
  for (int yy = y0; yy < y1; ++yy)
    for (int xx = x0; xx < x1; ++xx) set(xx, yy, c);
}

void Image::outline_rect(int x, int y, int w, int h, Rgb c) {
  fill_rect(x, y, w, 1, c);
  fill_rect(x, y + h - 1, w, 1, c);
  fill_rect(x, y, 1, h, c);
  fill_rect(x + w - 1, y, 1, h, c);
}

void Image::blit(const Image& src, int x, int y, int scale) {
  for (int sy = 0; sy < src.height; ++sy)
    for (int sx = 0; sx < src.width; ++sx) {
      const Rgb c = src.get(sx, sy);
      if (scale == 1)
        set(x + sx, y + sy, c);
      else
        fill_rect(x + sx * scale, y + sy * scale, scale, scale, c);
    }
}

Image image_from_frame(const RgbFrame& frame) {
  Image img(static_cast<int>(kFrameWidth), static_cast<int>(kFrameHeight));
  img.pixels = frame.pixels;
  return img;
}

Image image_from_map(std::span<const float> values, int width, int height, double lo, double hi) {
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    fail(ErrorKind::Shape, "map size does not match image dimensions");
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double t = 0.5;
      if (hi > lo) t = std::clamp((values[static_cast<std::size_t>(y * width + x)] - lo) / (hi - lo), 0.0, 1.0);
      const auto v = static_cast<std::uint8_t>(std::lround(t * 255.0));
      img.set(x, y, {v, v, v});
    }
  return img;
}

namespace {

struct Glyph {
  char ch;
  std::uint8_t rows[7];  // 5 bits per row, MSB = leftmost column
};

constexpr Glyph kGlyphs[] = {
    {' ', {0, 0, 0, 0, 0, 0, 0}},
    {'0', {14, 17, 19, 21, 25, 17, 14}},
    {'1', {4, 12, 4, 4, 4, 4, 14}},
    {'2', {14, 17, 1, 2, 4, 8, 31}},
    {'3', {31, 2, 4, 2, 1, 17, 14}},
    {'4', {2, 6, 10, 18, 31, 2, 2}},
    {'5', {31, 16, 30, 1, 1, 17, 14}},
    {'6', {6, 8, 16, 30, 17, 17, 14}},
    {'7', {31, 1, 2, 4, 8, 8, 8}},
    {'8', {14, 17, 17, 14, 17, 17, 14}},
    {'9', {14, 17, 17, 15, 1, 2, 12}},
    {'A', {14, 17, 17, 31, 17, 17, 17}},
    {'B', {30, 17, 17, 30, 17, 17, 30}},
    {'C', {14, 17, 16, 16, 16, 17, 14}},
    {'D', {28, 18, 17, 17, 17, 18, 28}},
    {'E', {31, 16, 16, 30, 16, 16, 31}},
    {'F', {31, 16, 16, 30, 16, 16, 16}},
    {'G', {14, 17, 16, 23, 17, 17, 15}},
    {'H', {17, 17, 17, 31, 17, 17, 17}},
    {'I', {14, 4, 4, 4, 4, 4, 14}},
    {'J', {7, 2, 2, 2, 2, 18, 12}},
    {'K', {17, 18, 20, 24, 20, 18, 17}},
    {'L', {16, 16, 16, 16, 16, 16, 31}},
    {'M', {17, 27, 21, 21, 17, 17, 17}},
    {'N', {17, 17, 25, 21, 19, 17, 17}},
    {'O', {14, 17, 17, 17, 17, 17, 14}},
    {'P', {30, 17, 17, 30, 16, 16, 16}},
    {'Q', {14, 17, 17, 17, 21, 18, 13}},
    {'R', {30, 17, 17, 30, 20, 18, 17}},
    {'S', {15, 16, 16, 14, 1, 1, 30}},
    {'T', {31, 4, 4, 4, 4, 4, 4}},
    {'U', {17, 17, 17, 17, 17, 17, 14}},
    {'V', {17, 17, 17, 17, 17, 10, 4}},
    {'W', {17, 17, 17, 21, 21, 21, 10}},
    {'X', {17, 17, 10, 4, 10, 17, 17}},
    {'Y', {17, 17, 17, 10, 4, 4, 4}},
    {'Z', {31, 1, 2, 4, 8, 16, 31}},
    {'-', {0, 0, 0, 31, 0, 0, 0}},
    {'_', {0, 0, 0, 0, 0, 0, 31}},
    {'.', {0, 0, 0, 0, 0, 12, 12}},
    {':', {0, 12, 12, 0, 12, 12, 0}},
    {'/', {0, 1, 2, 4, 8, 16, 0}},
    {'=', {0, 0, 31, 0, 31, 0, 0}},
    {'+', {0, 4, 4, 31, 4, 4, 0}},
    {'#', {10, 10, 31, 10, 31, 10, 10}},
    {'(', {2, 4, 8, 8, 8, 4, 2}},
    {')', {8, 4, 2, 2, 2, 4, 8}},
};

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kGlyphs)
    if (g.ch == c) return &g;
  return nullptr;
}

void png_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  const auto len = static_cast<std::uint32_t>(data.size());
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, out.data() + type_pos, static_cast<uInt>(4 + data.size())));
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
}

std::uint32_t be32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | p[3];
}

constexpr std::uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

int text_width(std::string_view text, int scale) noexcept { return static_cast<int>(text.size()) * 6 * scale; }

void draw_text(Image& img, int x, int y, std::string_view text, Rgb color, int scale) {
  for (std::size_t k = 0; k < text.size(); ++k) {
    const Glyph* g = find_glyph(text[k]);
    const int gx = x + static_cast<int>(k) * 6 * scale;
    if (!g) {
      img.outline_rect(gx, y, 5 * scale, 7 * scale, color);
      continue;
    }
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 5; ++c)
        if (g->rows[r] & (1 << (4 - c))) img.fill_rect(gx + c * scale, y + r * scale, scale, scale, color);
  }
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  std::vector<std::uint8_t> out(std::begin(kPngSignature), std::end(kPngSignature));
  std::vector<std::uint8_t> ihdr;
  for (std::uint32_t v : {static_cast<std::uint32_t>(img.width), static_cast<std::uint32_t>(img.height)})
    for (int i = 3; i >= 0; --i) ihdr.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  png_chunk(out, "IHDR", ihdr);

  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    const auto* row = img.pixels.data() + static_cast<std::size_t>(y) * stride;
    raw.insert(raw.end(), row, row + stride);
  }
  uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_len);
  if (compress2(packed.data(), &packed_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    fail(ErrorKind::Io, "PNG compression failed");
  packed.resize(packed_len);
  png_chunk(out, "IDAT", packed);
  png_chunk(out, "IEND", {});
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0)
    fail(ErrorKind::BadMagic, "not a PNG file");
  std::size_t pos = 8;
  int width = 0, height = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = be32(bytes.data() + pos);
    const std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
    if (pos + 12 + len > bytes.size()) fail(ErrorKind::Truncated, "PNG chunk runs past end of file");
    const std::uint8_t* data = bytes.data() + pos + 8;
    if (type == "IHDR") {
      width = static_cast<int>(be32(data));
      height = static_cast<int>(be32(data + 4));
      if (data[8] != 8 || data[9] != 2 || data[12] != 0)
        fail(ErrorKind::Malformed, "only 8-bit RGB non-interlaced PNGs are supported");
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0) fail(ErrorKind::Malformed, "PNG lacks IHDR");
  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(height));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK || raw_len != raw.size())
    fail(ErrorKind::Malformed, "PNG image data is corrupt");
  Image img(width, height);
  for (int y = 0; y < height; ++y) {
    const auto* row = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
    if (row[0] != 0) fail(ErrorKind::Malformed, "unsupported PNG row filter");
    std::copy(row + 1, row + 1 + stride, img.pixels.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(y) * stride));
  }
  return img;
}

void write_png(const Image& img, const std::filesystem::path& path) { write_file(path, encode_png(img)); }

Image read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

}  // namespace azoo
