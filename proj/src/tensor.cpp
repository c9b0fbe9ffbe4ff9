#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "error.hpp"

namespace azoo {

std::size_t shape_size(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

static void check_extents(const Shape& shape) {
  if (shape.empty()) fail(ErrorKind::Shape, "tensor shape must have at least one extent");
  for (auto e : shape)
    if (e == 0) fail(ErrorKind::Shape, "tensor extents must be positive, got " + shape_string(shape));
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_))
    fail(ErrorKind::Shape, "data length " + std::to_string(data_.size()) + " does not match shape " +
                               shape_string(shape_));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size())
    fail(ErrorKind::Shape, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(float value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool bit_equal(const Tensor& a, const Tensor& b) noexcept {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

bool all_finite(const Tensor& t) noexcept {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

bool loose_equal(std::string_view a, std::string_view b) noexcept {
  const auto next = [](std::string_view s, std::size_t& i) -> int {
    while (i < s.size() && (s[i] == '_' || s[i] == '-')) ++i;
    if (i == s.size()) return -1;
    const char c = s[i++];
    return (c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c;
  };
  std::size_t i = 0, j = 0;
  for (;;) {
    const int x = next(a, i), y = next(b, j);
    if (x != y) return false;
    if (x < 0) return true;
  }
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::Io: return "io";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::UnsupportedVersion: return "unsupported-version";
    case ErrorKind::ChecksumMismatch: return "checksum-mismatch";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::Malformed: return "malformed";
    case ErrorKind::SpecInconsistent: return "spec-inconsistent";
    case ErrorKind::MissingStream: return "missing-stream";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::InsufficientData: return "insufficient-data";
  }
  return "unknown";
}

}  // namespace azoo
