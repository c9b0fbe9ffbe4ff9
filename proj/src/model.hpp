#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "params.hpp"
#include "spec.hpp"

namespace azoo {

enum class Algorithm { A2C, IMPALA, DQN, Rainbow, ApeX, ES, GA, Other };

std::string_view to_string(Algorithm algorithm) noexcept;
Algorithm parse_algorithm(std::string_view text);

/// Which training snapshot a frozen model was culled at.
struct CheckpointTag {
  enum class Criterion { Final, Initial, Hours, Frames, HumanLevel };
  Criterion criterion = Criterion::Final;
  std::int64_t amount = 0;  // hours or frames; zero otherwise

  bool operator==(const CheckpointTag&) const = default;

  static CheckpointTag final_tag() { return {}; }
  static CheckpointTag hours(std::int64_t h);
  static CheckpointTag frames(std::int64_t n);

  /// "final", "initial", "human_level", "hours:4", "frames:400000000".
  std::string str() const;
  static CheckpointTag parse(std::string_view text);
};

struct ModelMeta {
  std::string game = "unknown";
  Algorithm algorithm = Algorithm::Other;
  std::string run_id = "0";
  CheckpointTag checkpoint;
  std::uint32_t format_version = 1;

  bool operator==(const ModelMeta&) const = default;
};

struct FrozenModel {
  NetworkSpec spec;
  NamedTensors tensors;
  ModelMeta meta;

  int n_actions() const noexcept { return spec.n_actions; }
};

bool bit_equal(const FrozenModel& a, const FrozenModel& b) noexcept;

struct Violation {
  enum class Kind { InvalidSpec, Missing, WrongShape, Extra, NonFinite };
  Kind kind;
  std::string tensor;
  Shape expected;
  Shape actual;

  std::string message() const;
};

/// Empty iff every tensor the spec implies is present with the right shape,
/// nothing else is present, and all values are finite.
std::vector<Violation> validate_model(const FrozenModel& model);

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const FrozenModel& model, const std::filesystem::path& path);
/// With validate=false, spec violations are left for validate_model to report;
/// container corruption is always rejected.
FrozenModel load_model(const std::filesystem::path& path, bool validate = true);

std::vector<std::uint8_t> serialize_model(const FrozenModel& model);
FrozenModel deserialize_model(std::span<const std::uint8_t> bytes, bool validate = true);

/// He-style Gaussian initialization with zero biases; useful for synthetic
/// models and tests.
FrozenModel make_random_model(const NetworkSpec& spec, const ModelMeta& meta, std::uint64_t seed);

}  // namespace azoo
