#include "environment.hpp"

#include <algorithm>

#include "error.hpp"

namespace azoo {

CatchEnv::CatchEnv(int horizon) : horizon_(horizon) {
  if (horizon < 1) fail(ErrorKind::Config, "catch horizon must be positive");
}

void CatchEnv::respawn() {
  object_x_ = static_cast<int>(rng_() % static_cast<std::uint64_t>(kMaxObjectX + 1));
  object_y_ = 0;
}

EnvSnapshot CatchEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  avatar_x_ = kMaxAvatarX / 2 / kAvatarStep * kAvatarStep;
  score_ = steps_ = misses_ = 0;
  respawn();
  return {render(), ram()};
}

EnvStep CatchEnv::step(int action) {
  if (action < 0 || action >= n_actions()) fail(ErrorKind::OutOfRange, "catch action must be in [0,4)");
  if (action == kLeft) avatar_x_ = std::max(0, avatar_x_ - kAvatarStep);
  if (action == kRight) avatar_x_ = std::min(kMaxAvatarX, avatar_x_ + kAvatarStep);
  object_y_ += kFallSpeed;

  EnvStep out;
  const bool overlap_rows = object_y_ + kObjectSize > kAvatarY && object_y_ < kAvatarY + kAvatarH;
  const bool overlap_cols = object_x_ + kObjectSize > avatar_x_ && object_x_ < avatar_x_ + kAvatarW;
  if (action == kCatch && overlap_rows && overlap_cols) {
    out.reward = 1.0;
    ++score_;
    respawn();
  } else if (object_y_ >= static_cast<int>(kFrameHeight)) {
    ++misses_;
    respawn();
  }
  ++steps_;
  out.done = steps_ >= horizon_;
  out.frame = render();
  out.ram = ram();
  return out;
}

RgbFrame CatchEnv::render() const {
  RgbFrame f;
  f.fill_rect(0, 0, kFrameHeight, kFrameWidth, {16, 24, 64});
  f.fill_rect(kAvatarY + kAvatarH + 4, 0, kFrameHeight, kFrameWidth, {40, 120, 40});
  // Score gauge along the top edge, wrapping every 40 points.
  f.fill_rect(2, 0, 4, static_cast<std::size_t>(score_ % 40) * 4, {200, 200, 200});
  if (object_y_ < static_cast<int>(kFrameHeight))
    f.fill_rect(static_cast<std::size_t>(object_y_), static_cast<std::size_t>(object_x_), kObjectSize, kObjectSize,
                {220, 60, 60});
  f.fill_rect(kAvatarY, static_cast<std::size_t>(avatar_x_), kAvatarH, kAvatarW, {240, 200, 60});
  return f;
}

RamState CatchEnv::ram() const {
  RamState r{};
  r[0] = static_cast<std::uint8_t>(avatar_x_);
  r[1] = static_cast<std::uint8_t>(object_x_);
  r[2] = static_cast<std::uint8_t>(std::min(object_y_, 255));
  r[3] = static_cast<std::uint8_t>(score_ & 0xff);
  r[4] = static_cast<std::uint8_t>((score_ >> 8) & 0xff);
  r[5] = static_cast<std::uint8_t>(steps_ & 0xff);
  r[6] = static_cast<std::uint8_t>((steps_ >> 8) & 0xff);
  r[7] = static_cast<std::uint8_t>(misses_ & 0xff);
  return r;
}

int catch_scripted_action(const RamState& ram) {
  const int ax = ram[0], ox = ram[1], oy = ram[2];
  const bool aligned = ox + CatchEnv::kObjectSize > ax && ox < ax + CatchEnv::kAvatarW;
  if (aligned) {
    // The catch is judged after this step's fall.
    const int next_y = oy + CatchEnv::kFallSpeed;
    const bool rows = next_y + CatchEnv::kObjectSize > CatchEnv::kAvatarY &&
                      next_y < CatchEnv::kAvatarY + CatchEnv::kAvatarH;
    return rows ? CatchEnv::kCatch : CatchEnv::kNoop;
  }
  return ox + CatchEnv::kObjectSize / 2 < ax + CatchEnv::kAvatarW / 2 ? CatchEnv::kLeft : CatchEnv::kRight;
}

std::unique_ptr<Environment> make_env(const std::string& id, int horizon) {
  if (id == "catch") return std::make_unique<CatchEnv>(horizon);
  fail(ErrorKind::Config, "unknown environment '" + id + "'");
}

EnvFactory env_factory(const std::string& id, int horizon) {
  make_env(id, horizon);  // validate eagerly
  return [id, horizon] { return make_env(id, horizon); };
}

}  // namespace azoo
