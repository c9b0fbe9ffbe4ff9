#include "params.hpp"

#include <algorithm>

#include "error.hpp"

namespace azoo {

void NamedTensors::set(std::string name, Tensor tensor) {
  for (auto& [n, t] : entries_) {
    if (n == name) {
      t = std::move(tensor);
      return;
    }
  }
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool NamedTensors::contains(std::string_view name) const noexcept { return find(name) != nullptr; }

const Tensor* NamedTensors::find(std::string_view name) const noexcept {
  for (const auto& [n, t] : entries_)
    if (n == name) return &t;
  return nullptr;
}

const Tensor& NamedTensors::get(std::string_view name) const {
  if (const Tensor* t = find(name)) return *t;
  fail(ErrorKind::SpecInconsistent, "missing tensor '" + std::string(name) + "'");
}

Tensor& NamedTensors::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const NamedTensors&>(*this).get(name));
}

void NamedTensors::erase(std::string_view name) {
  std::erase_if(entries_, [&](const Entry& e) { return e.first == name; });
}

NamedTensors NamedTensors::zeros_like() const {
  NamedTensors z;
  for (const auto& [n, t] : entries_) z.set(n, Tensor(t.shape()));
  return z;
}

bool bit_equal(const NamedTensors& a, const NamedTensors& b) noexcept {
  if (a.size() != b.size()) return false;
  auto ib = b.begin();
  for (const auto& [name, t] : a) {
    if (name != ib->first || !bit_equal(t, ib->second)) return false;
    ++ib;
  }
  return true;
}

}  // namespace azoo
