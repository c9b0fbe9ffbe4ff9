#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "model.hpp"
#include "tensor.hpp"

namespace azoo {

/// Addresses one traced layer of a policy network.
struct LayerId {
  enum class Kind { Conv, Fc, HeadRaw, Q };
  Kind kind = Kind::Q;
  int conv_index = 0;  // zero-based, only meaningful for Kind::Conv

  static LayerId conv(int one_based) { return {Kind::Conv, one_based - 1}; }
  static LayerId fc() { return {Kind::Fc, 0}; }
  static LayerId head_raw() { return {Kind::HeadRaw, 0}; }
  static LayerId q() { return {Kind::Q, 0}; }

  /// Accepts "conv1".."convN", "fc", "head_raw", "q" (alias "head_q").
  static LayerId parse(std::string_view text);
  std::string name() const;

  bool operator==(const LayerId&) const = default;
};

/// The scalar an input-gradient or activation-maximization run targets.
/// Conv units are post-ReLU activations; a Channel target is the mean of the
/// channel's spatial map.
struct Objective {
  enum class Target { Unit, Channel };
  LayerId layer = LayerId::q();
  Target target = Target::Unit;
  int index = 0;  // channel (conv), unit (fc, head_raw) or action (q)
  int y = 0;
  int x = 0;

  static Objective conv_unit(int layer, int channel, int y, int x) {
    return {LayerId::conv(layer), Target::Unit, channel, y, x};
  }
  static Objective conv_channel(int layer, int channel) { return {LayerId::conv(layer), Target::Channel, channel, 0, 0}; }
  static Objective fc_unit(int unit) { return {LayerId::fc(), Target::Unit, unit, 0, 0}; }
  static Objective action(int a) { return {LayerId::q(), Target::Unit, a, 0, 0}; }

  /// "q:A", "head_raw:U", "fc:U", "convL:C" (channel) or "convL:C@Y,X" (unit).
  static Objective parse(std::string_view text);
  std::string str() const;
};

struct ActivationTrace {
  std::vector<Tensor> conv;  // post-ReLU, one per conv layer
  Tensor fc;                 // post-ReLU
  Tensor head_raw;
  Tensor head_q;
  std::optional<float> value;  // state value (ActorCritic only)
  int chosen_action = 0;

  const Tensor& layer(const LayerId& id) const;
};

bool bit_equal(const ActivationTrace& a, const ActivationTrace& b) noexcept;

struct HeadOutput {
  Tensor raw;
  Tensor q;
  std::optional<float> value;
};

/// Q: q = raw. Dueling: raw = [V, A...], q = V + A - mean(A).
/// C51: raw = per-action atom logits, q = expected support value.
/// ActorCritic: raw = [logits..., V], q = logits.
HeadOutput head_forward(const Tensor& features, const NetworkSpec& spec, const NamedTensors& params);

/// Softmax over the policy outputs (ActorCritic logits, or q for other heads).
std::vector<double> action_distribution(const ActivationTrace& trace);

/// Checks tensor presence and shapes against the spec (no value scan).
void check_model_shapes(const FrozenModel& model);

void check_objective(const NetworkSpec& spec, const Objective& objective);

ActivationTrace forward_with_trace(const FrozenModel& model, const Tensor& obs);

double objective_value(const ActivationTrace& trace, const Objective& objective);

struct ObjectiveGradient {
  double value = 0.0;
  Tensor gradient;  // d objective / d obs, 4×84×84
};

ObjectiveGradient objective_gradient(const FrozenModel& model, const Tensor& obs, const Objective& objective);

inline Tensor input_gradient(const FrozenModel& model, const Tensor& obs, const Objective& objective) {
  return objective_gradient(model, obs, objective).gradient;
}

}  // namespace azoo
