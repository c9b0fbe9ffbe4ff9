#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace azoo {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major float32 array. Every extent is positive and the data
/// length always equals the product of the extents.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-3 accessors (channel, row, column).
  float& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  Tensor reshaped(Shape shape) const;
  void fill(float value) noexcept;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Byte-level equality, distinguishing -0.0f from 0.0f and comparing NaN payloads.
bool bit_equal(const Tensor& a, const Tensor& b) noexcept;

bool all_finite(const Tensor& t) noexcept;

}  // namespace azoo
