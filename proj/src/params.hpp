#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace azoo {

/// Named tensors kept in insertion order; the order is what serializers write.
class NamedTensors {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void set(std::string name, Tensor tensor);
  bool contains(std::string_view name) const noexcept;
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  const Tensor* find(std::string_view name) const noexcept;
  void erase(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// Same names, all-zero tensors of the same shapes.
  NamedTensors zeros_like() const;

  bool operator==(const NamedTensors&) const = default;

 private:
  std::vector<Entry> entries_;
};

bool bit_equal(const NamedTensors& a, const NamedTensors& b) noexcept;

}  // namespace azoo
