#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "environment.hpp"
#include "model.hpp"
#include "rollout.hpp"

namespace azoo {

inline const std::vector<double> kDefaultObservationSigmas{0.0, 0.05, 0.1, 0.2, 0.4, 0.8};
inline const std::vector<double> kDefaultParameterSigmas{0.0, 0.005, 0.01, 0.02, 0.05, 0.1};

/// Seed of episode `episode` within a run seeded with `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode) noexcept;

struct ScoreStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single episode
  int n = 0;
};

ScoreStats summarize_scores(const std::vector<double>& scores);

/// Final scores of greedy episodes, one per episode, in episode order.
std::vector<double> episode_scores(const FrozenModel& model, const EnvFactory& make_env, int episodes,
                                   std::uint64_t seed, int max_steps = kDefaultRolloutSteps);

double eval_score(const FrozenModel& model, const EnvFactory& make_env, int episodes, std::uint64_t seed,
                  int max_steps = kDefaultRolloutSteps);

/// Uniform-random actions every step.
std::vector<double> random_play_scores(const EnvFactory& make_env, int episodes, std::uint64_t seed,
                                       int max_steps = kDefaultRolloutSteps);
double random_play_baseline(const EnvFactory& make_env, int episodes, std::uint64_t seed,
                            int max_steps = kDefaultRolloutSteps);

struct SweepCurve {
  std::string label;
  std::string game;
  std::string algorithm;
  std::vector<double> sigmas;
  std::vector<double> mean_scores;
  std::vector<double> stddevs;
  int episodes = 0;
  std::uint64_t seed = 0;
};

struct SweepOptions {
  int episodes = 3;
  std::uint64_t seed = 0;
  int max_steps = kDefaultRolloutSteps;
};

/// obs' = clip(obs + N(0, sigma²), 0, 1) at every step. The noise stream is
/// seeded per episode, so all sigmas share the same underlying draws.
SweepCurve observation_noise_sweep(const FrozenModel& model, const EnvFactory& make_env,
                                   const std::vector<double>& sigmas, const SweepOptions& options);

/// Adds fresh N(0, sigma²) noise to the conv weights (not biases, fc or head)
/// of a per-episode copy of the model.
SweepCurve parameter_noise_sweep(const FrozenModel& model, const EnvFactory& make_env,
                                 const std::vector<double>& sigmas, const SweepOptions& options);

enum class NormalizationMode { AlgorithmBest, OverallBest };

std::string_view to_string(NormalizationMode mode) noexcept;

struct NormalizedCurve {
  std::string label;
  std::string game;
  std::string algorithm;
  std::vector<double> sigmas;
  std::vector<double> values;  // empty when the denominator is undefined
  bool excluded = false;
  double baseline = 0.0;  // the curve's own sigma=0 score
};

struct Exclusion {
  std::string label;
  std::string game;
  std::string reason;
  double baseline = 0.0;
  double random = 0.0;
};

struct NormalizedCurves {
  NormalizationMode mode = NormalizationMode::AlgorithmBest;
  std::map<std::string, double> random_baselines;  // per game
  std::vector<NormalizedCurve> curves;
  std::vector<Exclusion> exclusions;
};

/// (s - r) / (b - r): b is the curve's own sigma=0 score (AlgorithmBest) or
/// the best sigma=0 score of any curve on the game (OverallBest). In
/// AlgorithmBest mode a curve whose baseline is not above random play
/// excludes every curve of its game from aggregation.
NormalizedCurves normalize_curves(const std::vector<SweepCurve>& curves,
                                  const std::map<std::string, double>& random_baselines, NormalizationMode mode);

struct AggregateCurve {
  std::string algorithm;
  std::vector<double> sigmas;
  std::vector<double> mean_values;
  int n_curves = 0;
};

/// Mean normalized value per algorithm over non-excluded curves.
std::vector<AggregateCurve> aggregate_by_algorithm(const NormalizedCurves& normalized);

}  // namespace azoo
