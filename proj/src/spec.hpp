#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace azoo {

enum class HeadKind { Q, Dueling, C51, ActorCritic };

std::string_view to_string(HeadKind head) noexcept;
HeadKind parse_head_kind(std::string_view text);

struct ConvLayerSpec {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  bool operator==(const ConvLayerSpec&) const = default;
};

struct C51Params {
  int n_atoms = 51;
  float v_min = -10.0f;
  float v_max = 10.0f;
  bool operator==(const C51Params&) const = default;

  /// Atom support z_i, linearly spaced on [v_min, v_max].
  std::vector<double> support() const;
};

/// Architecture of a policy network: valid convolutions with ReLU, one
/// fully-connected ReLU layer, then a head. Channel counts default to the
/// Nature-DQN values but stay configurable.
struct NetworkSpec {
  static constexpr int kInputChannels = 4;
  static constexpr int kInputSize = 84;

  std::vector<ConvLayerSpec> conv_layers{{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
  int fc_width = 512;
  HeadKind head = HeadKind::Q;
  int n_actions = 4;
  std::optional<C51Params> c51;

  bool operator==(const NetworkSpec&) const = default;

  /// Throws Error(SpecInconsistent) when the record cannot describe a network.
  void check() const;

  /// Spatial side length after each conv layer (84 → 20 → 9 → 7 by default).
  std::vector<int> conv_output_sizes() const;
  Shape conv_output_shape(std::size_t layer) const;
  std::size_t flat_size() const;
  /// Length of the raw head output vector.
  std::size_t head_raw_size() const;
};

NetworkSpec make_spec(HeadKind head, int n_actions);

/// Every tensor the spec implies, in canonical order, with its shape.
std::vector<std::pair<std::string, Shape>> parameter_layout(const NetworkSpec& spec);

}  // namespace azoo
