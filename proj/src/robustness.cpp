#include "robustness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "error.hpp"
#include "network.hpp"

namespace azoo {

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode) noexcept {
  // splitmix64 finalizer over (seed, episode)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (episode + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ScoreStats summarize_scores(const std::vector<double>& scores) {
  ScoreStats s;
  s.n = static_cast<int>(scores.size());
  if (scores.empty()) return s;
  double sum = 0.0;
  for (double v : scores) sum += v;
  s.mean = sum / static_cast<double>(scores.size());
  if (scores.size() > 1) {
    double ss = 0.0;
    for (double v : scores) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(scores.size() - 1));
  }
  return s;
}

namespace {

void check_episodes(int episodes) {
  if (episodes < 1) fail(ErrorKind::Config, "episodes must be >= 1");
}

void check_sigmas(const std::vector<double>& sigmas) {
  if (sigmas.empty() || sigmas.front() != 0.0) fail(ErrorKind::Config, "sigma schedule must start at 0");
  for (std::size_t i = 1; i < sigmas.size(); ++i)
    if (!(sigmas[i] > sigmas[i - 1])) fail(ErrorKind::Config, "sigma schedule must be strictly ascending");
}

PolicyFn greedy(const FrozenModel& model) {
  return [&model](const Observation& obs, const RamState&) { return forward_with_trace(model, obs.tensor()).chosen_action; };
}

SweepCurve make_curve(const FrozenModel& model, const std::vector<double>& sigmas, const SweepOptions& o) {
  SweepCurve c;
  c.label = model.meta.game + "/" + std::string(to_string(model.meta.algorithm)) + "/" + model.meta.run_id;
  c.game = model.meta.game;
  c.algorithm = std::string(to_string(model.meta.algorithm));
  c.sigmas = sigmas;
  c.episodes = o.episodes;
  c.seed = o.seed;
  return c;
}

void add_point(SweepCurve& c, const std::vector<double>& scores) {
  const auto s = summarize_scores(scores);
  c.mean_scores.push_back(s.mean);
  c.stddevs.push_back(s.stddev);
}

}  // namespace

std::vector<double> episode_scores(const FrozenModel& model, const EnvFactory& make_env, int episodes,
                                   std::uint64_t seed, int max_steps) {
  check_episodes(episodes);
  check_model_shapes(model);
  std::vector<double> scores;
  for (int e = 0; e < episodes; ++e) {
    auto env = make_env();
    if (env->n_actions() != model.n_actions()) fail(ErrorKind::Config, "model/environment action count mismatch");
    scores.push_back(play_episode(*env, episode_seed(seed, static_cast<std::uint64_t>(e)), max_steps, greedy(model)));
  }
  return scores;
}

double eval_score(const FrozenModel& model, const EnvFactory& make_env, int episodes, std::uint64_t seed,
                  int max_steps) {
  return summarize_scores(episode_scores(model, make_env, episodes, seed, max_steps)).mean;
}

std::vector<double> random_play_scores(const EnvFactory& make_env, int episodes, std::uint64_t seed, int max_steps) {
  check_episodes(episodes);
  std::vector<double> scores;
  for (int e = 0; e < episodes; ++e) {
    auto env = make_env();
    const auto es = episode_seed(seed, static_cast<std::uint64_t>(e));
    std::mt19937_64 rng(es ^ 0xA5A5A5A5A5A5A5A5ull);
    std::uniform_int_distribution<int> pick(0, env->n_actions() - 1);
    scores.push_back(play_episode(*env, es, max_steps, [&](const Observation&, const RamState&) { return pick(rng); }));
  }
  return scores;
}

double random_play_baseline(const EnvFactory& make_env, int episodes, std::uint64_t seed, int max_steps) {
  return summarize_scores(random_play_scores(make_env, episodes, seed, max_steps)).mean;
}

SweepCurve observation_noise_sweep(const FrozenModel& model, const EnvFactory& make_env,
                                   const std::vector<double>& sigmas, const SweepOptions& o) {
  check_sigmas(sigmas);
  check_episodes(o.episodes);
  check_model_shapes(model);
  SweepCurve curve = make_curve(model, sigmas, o);
  for (double sigma : sigmas) {
    std::vector<double> scores;
    for (int e = 0; e < o.episodes; ++e) {
      const auto es = episode_seed(o.seed, static_cast<std::uint64_t>(e));
      std::mt19937_64 noise_rng(es ^ 0x5DEECE66Dull);
      std::normal_distribution<double> normal(0.0, 1.0);
      auto env = make_env();
      if (env->n_actions() != model.n_actions()) fail(ErrorKind::Config, "model/environment action count mismatch");
      scores.push_back(play_episode(*env, es, o.max_steps, [&](const Observation& obs, const RamState&) {
        Tensor x = obs.tensor();
        if (sigma > 0.0)
          for (auto& v : x.data()) v = std::clamp(static_cast<float>(v + sigma * normal(noise_rng)), 0.0f, 1.0f);
        return forward_with_trace(model, x).chosen_action;
      }));
    }
    add_point(curve, scores);
  }
  return curve;
}

SweepCurve parameter_noise_sweep(const FrozenModel& model, const EnvFactory& make_env,
                                 const std::vector<double>& sigmas, const SweepOptions& o) {
  check_sigmas(sigmas);
  check_episodes(o.episodes);
  check_model_shapes(model);
  SweepCurve curve = make_curve(model, sigmas, o);
  for (double sigma : sigmas) {
    std::vector<double> scores;
    for (int e = 0; e < o.episodes; ++e) {
      const auto es = episode_seed(o.seed, static_cast<std::uint64_t>(e));
      FrozenModel perturbed = model;
      if (sigma > 0.0) {
        std::mt19937_64 rng(es ^ 0x2545F4914F6CDD1Dull);
        std::normal_distribution<double> normal(0.0, sigma);
        for (std::size_t l = 0; l < model.spec.conv_layers.size(); ++l)
          for (auto& v : perturbed.tensors.get("conv" + std::to_string(l + 1) + ".w").data())
            v = static_cast<float>(v + normal(rng));
      }
      auto env = make_env();
      if (env->n_actions() != model.n_actions()) fail(ErrorKind::Config, "model/environment action count mismatch");
      scores.push_back(play_episode(*env, es, o.max_steps, greedy(perturbed)));
    }
    add_point(curve, scores);
  }
  return curve;
}

std::string_view to_string(NormalizationMode mode) noexcept {
  return mode == NormalizationMode::AlgorithmBest ? "algorithm_best" : "overall_best";
}

NormalizedCurves normalize_curves(const std::vector<SweepCurve>& curves,
                                  const std::map<std::string, double>& random_baselines, NormalizationMode mode) {
  NormalizedCurves out;
  out.mode = mode;
  out.random_baselines = random_baselines;
  std::map<std::string, double> best_by_game;
  for (const auto& c : curves) {
    if (c.mean_scores.empty() || c.mean_scores.size() != c.sigmas.size())
      fail(ErrorKind::InvalidArgument, "curve " + c.label + " has mismatched sigmas and scores");
    if (!random_baselines.contains(c.game)) fail(ErrorKind::InvalidArgument, "no random baseline for game " + c.game);
    auto [it, inserted] = best_by_game.try_emplace(c.game, c.mean_scores.front());
    if (!inserted) it->second = std::max(it->second, c.mean_scores.front());
  }

  std::map<std::string, std::string> excluded_games;  // game -> offending label
  for (const auto& c : curves) {
    const double r = random_baselines.at(c.game);
    NormalizedCurve n{c.label, c.game, c.algorithm, c.sigmas, {}, false, c.mean_scores.front()};
    const double b = mode == NormalizationMode::AlgorithmBest ? c.mean_scores.front() : best_by_game.at(c.game);
    if (b - r <= 0.0) {
      n.excluded = true;
      out.exclusions.push_back({c.label, c.game,
                                mode == NormalizationMode::AlgorithmBest
                                    ? "noiseless score does not exceed random play"
                                    : "best noiseless score on the game does not exceed random play",
                                b, r});
      excluded_games.try_emplace(c.game, c.label);
    } else {
      for (double s : c.mean_scores) n.values.push_back((s - r) / (b - r));
    }
    out.curves.push_back(std::move(n));
  }

  for (auto& n : out.curves) {
    const auto it = excluded_games.find(n.game);
    if (it == excluded_games.end() || n.excluded) continue;
    n.excluded = true;
    out.exclusions.push_back({n.label, n.game, "game excluded: " + it->second + " does not exceed random play",
                              n.baseline, random_baselines.at(n.game)});
  }
  return out;
}

std::vector<AggregateCurve> aggregate_by_algorithm(const NormalizedCurves& normalized) {
  std::map<std::string, AggregateCurve> acc;
  for (const auto& c : normalized.curves) {
    if (c.excluded || c.values.empty()) continue;
    auto& a = acc[c.algorithm];
    if (a.n_curves == 0) {
      a.algorithm = c.algorithm;
      a.sigmas = c.sigmas;
      a.mean_values.assign(c.values.size(), 0.0);
    } else if (a.sigmas != c.sigmas) {
      fail(ErrorKind::InvalidArgument, "curves of " + c.algorithm + " use different sigma schedules");
    }
    for (std::size_t i = 0; i < c.values.size(); ++i) a.mean_values[i] += c.values[i];
    ++a.n_curves;
  }
  std::vector<AggregateCurve> out;
  for (auto& [name, a] : acc) {
    for (auto& v : a.mean_values) v /= a.n_curves;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace azoo
