#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "environment.hpp"
#include "model.hpp"
#include "network.hpp"
#include "preprocess.hpp"

namespace azoo {

enum class PolicyMode { Greedy, Sampling };

std::string_view to_string(PolicyMode mode) noexcept;
PolicyMode parse_policy_mode(std::string_view text);

inline constexpr int kDefaultRolloutSteps = 2500;

struct StepRecord {
  RgbFrame frame;  // the frame the action was chosen on
  Observation obs;
  RamState ram{};
  int action = 0;
  double reward = 0.0;  // reward returned by this step
  double score = 0.0;   // cumulative, including this step
  bool done = false;
};

struct RolloutMeta {
  ModelMeta model;
  std::string env_id;
  std::uint64_t seed = 0;
  PolicyMode mode = PolicyMode::Greedy;
  int max_steps = kDefaultRolloutSteps;

  bool operator==(const RolloutMeta&) const = default;
};

struct Rollout {
  RolloutMeta meta;
  std::vector<StepRecord> steps;
  std::optional<std::vector<ActivationTrace>> traces;  // one per step when captured

  std::size_t size() const noexcept { return steps.size(); }
};

bool rollouts_equal(const Rollout& a, const Rollout& b);

struct RecordOptions {
  int max_steps = kDefaultRolloutSteps;
  PolicyMode mode = PolicyMode::Greedy;
  std::uint64_t seed = 0;
  bool capture_activations = false;
};

/// Plays one episode with the model and records every step. Greedy mode takes
/// the argmax of the head outputs; sampling mode draws from their softmax.
Rollout record_rollout(const FrozenModel& model, Environment& env, const RecordOptions& options = {});

/// Chooses an action from the current observation (and RAM, for scripted
/// controllers).
using PolicyFn = std::function<int(const Observation&, const RamState&)>;

/// Plays one episode without recording and returns the final score.
double play_episode(Environment& env, std::uint64_t seed, int max_steps, const PolicyFn& policy);

/// Writes manifest.json, frames.bin, obs.bin, ram.bin, steps.json and, when
/// traces are present, act_{layer}.bin.
void save_rollout(const Rollout& rollout, const std::filesystem::path& dir);
Rollout load_rollout(const std::filesystem::path& dir);

/// Streams of one traced layer for every step (e.g. "conv1", "fc", "head_q").
std::vector<std::string> trace_layer_names(std::size_t n_conv);

}  // namespace azoo
