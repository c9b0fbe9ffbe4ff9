#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "preprocess.hpp"

namespace azoo {

struct EnvSnapshot {
  RgbFrame frame;
  RamState ram{};
};

struct EnvStep {
  RgbFrame frame;
  RamState ram{};
  double reward = 0.0;
  bool done = false;
};

/// Adapter point for emulators. Implementations must be deterministic given
/// the reset seed and the action sequence. Instances are single-owner.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string id() const = 0;
  virtual int n_actions() const = 0;
  virtual EnvSnapshot reset(std::uint64_t seed) = 0;
  virtual EnvStep step(int action) = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// "catch": an avatar confined to a row near the bottom of the screen and one
/// falling object at a time. Actions: 0 noop, 1 left, 2 right, 3 catch. A
/// catch action while the object overlaps the avatar scores +1. Episodes end
/// after `horizon` steps.
///
/// RAM layout: [0] avatar x, [1] object x, [2] object y, [3..4] score (LE),
/// [5..6] step (LE), [7] misses (mod 256); remaining bytes are zero.
class CatchEnv final : public Environment {
 public:
  static constexpr int kNoop = 0, kLeft = 1, kRight = 2, kCatch = 3;
  static constexpr int kAvatarY = 186, kAvatarW = 16, kAvatarH = 8, kAvatarStep = 8;
  static constexpr int kObjectSize = 8, kFallSpeed = 6;
  static constexpr int kMaxAvatarX = static_cast<int>(kFrameWidth) - kAvatarW;
  static constexpr int kMaxObjectX = static_cast<int>(kFrameWidth) - kObjectSize;

  explicit CatchEnv(int horizon = 2500);

  std::string id() const override { return "catch"; }
  int n_actions() const override { return 4; }
  EnvSnapshot reset(std::uint64_t seed) override;
  EnvStep step(int action) override;

  int horizon() const noexcept { return horizon_; }

 private:
  void respawn();
  RgbFrame render() const;
  RamState ram() const;

  int horizon_;
  std::mt19937_64 rng_;
  int avatar_x_ = 0;
  int object_x_ = 0;
  int object_y_ = 0;
  int score_ = 0;
  int steps_ = 0;
  int misses_ = 0;
};

/// Scripted near-optimal controller for CatchEnv, reading only RAM.
int catch_scripted_action(const RamState& ram);

/// Known ids: "catch". `horizon` bounds the episode length.
std::unique_ptr<Environment> make_env(const std::string& id, int horizon = 2500);
EnvFactory env_factory(const std::string& id, int horizon = 2500);

}  // namespace azoo
