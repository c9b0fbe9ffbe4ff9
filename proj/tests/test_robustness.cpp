#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "error.hpp"
#include "robustness.hpp"
#include "support.hpp"

using namespace azoo;
using namespace azoo::testing;

namespace {

constexpr int kHorizon = 150;

EnvFactory catch_factory() { return env_factory("catch", kHorizon); }

// One action, reward 1 every third step.
class TickEnv final : public Environment {
 public:
  std::string id() const override { return "tick"; }
  int n_actions() const override { return 1; }
  EnvSnapshot reset(std::uint64_t) override {
    t_ = 0;
    return {};
  }
  EnvStep step(int) override {
    ++t_;
    EnvStep s;
    s.reward = t_ % 3 == 0 ? 1.0 : 0.0;
    s.done = t_ >= 30;
    return s;
  }

 private:
  int t_ = 0;
};

SweepCurve curve(std::string label, std::string game, std::string alg, std::vector<double> scores) {
  SweepCurve c;
  c.label = std::move(label);
  c.game = std::move(game);
  c.algorithm = std::move(alg);
  for (std::size_t i = 0; i < scores.size(); ++i) c.sigmas.push_back(0.1 * static_cast<double>(i));
  c.mean_scores = std::move(scores);
  c.stddevs.assign(c.mean_scores.size(), 0.0);
  return c;
}

// Normal-approximation 95% interval of a sample mean.
std::pair<double, double> interval95(const std::vector<double>& v) {
  const auto s = summarize_scores(v);
  const double h = 1.96 * s.stddev / std::sqrt(static_cast<double>(s.n));
  return {s.mean - h, s.mean + h};
}

}  // namespace

TEST(EvalScore, DeterministicGivenSeed) {
  const FrozenModel m = tiny_model(HeadKind::Q, 4, 1);
  const auto a = episode_scores(m, catch_factory(), 3, 7, kHorizon);
  const auto b = episode_scores(m, catch_factory(), 3, 7, kHorizon);
  EXPECT_EQ(a, b);
  EXPECT_EQ(eval_score(m, catch_factory(), 3, 7, kHorizon), summarize_scores(a).mean);
  // A greedy policy on a deterministic environment with the same reset seed
  // replays the same episode, so its score has zero spread.
  auto env = make_env("catch", kHorizon);
  std::vector<double> same;
  for (int k = 0; k < 3; ++k)
    same.push_back(play_episode(*env, 5, kHorizon, [&](const Observation& o, const RamState&) {
      return forward_with_trace(m, o.tensor()).chosen_action;
    }));
  EXPECT_EQ(summarize_scores(same).stddev, 0.0);
  EXPECT_THROW(eval_score(m, catch_factory(), 0, 7, kHorizon), Error);
}

TEST(EvalScore, ScriptedPolicyBeatsRandomPlay) {
  double scripted = 0.0;
  for (int e = 0; e < 10; ++e) {
    auto env = make_env("catch", kHorizon);
    scripted += play_episode(*env, episode_seed(3, static_cast<std::uint64_t>(e)), kHorizon,
                             [](const Observation&, const RamState& r) { return catch_scripted_action(r); });
  }
  EXPECT_GT(scripted / 10, random_play_baseline(catch_factory(), 10, 3, kHorizon));
}

TEST(RandomPlay, ReproducibleAndSingleActionExact) {
  EXPECT_EQ(random_play_baseline(catch_factory(), 20, 4, kHorizon), random_play_baseline(catch_factory(), 20, 4, kHorizon));
  const EnvFactory tick = [] { return std::unique_ptr<Environment>(std::make_unique<TickEnv>()); };
  TickEnv env;
  const double only = play_episode(env, 0, 100, [](const Observation&, const RamState&) { return 0; });
  EXPECT_EQ(only, 10.0);
  EXPECT_EQ(random_play_baseline(tick, 5, 9, 100), only);
}

TEST(ObservationSweep, ZeroSigmaEqualsBaselineAndSeedStable) {
  const FrozenModel m = tiny_model(HeadKind::Dueling, 4, 2);
  SweepOptions o;
  o.episodes = 3;
  o.seed = 11;
  o.max_steps = kHorizon;
  const auto a = observation_noise_sweep(m, catch_factory(), {0.0, 0.1, 0.4}, o);
  EXPECT_EQ(a.mean_scores.front(), eval_score(m, catch_factory(), 3, 11, kHorizon));
  const auto b = observation_noise_sweep(m, catch_factory(), {0.0, 0.1, 0.4}, o);
  EXPECT_EQ(a.mean_scores, b.mean_scores);
  EXPECT_EQ(a.stddevs, b.stddevs);
  EXPECT_EQ(a.episodes, 3);
  EXPECT_EQ(a.sigmas, (std::vector<double>{0.0, 0.1, 0.4}));
}

TEST(ObservationSweep, SaturatingNoiseLooksLikeRandomPlay) {
  // With sigma = 10 the clipped observation is essentially coin flips, so the
  // policy's score interval must overlap random play's over 20 seeds.
  const FrozenModel m = tiny_model(HeadKind::Q, 4, 3);
  SweepOptions o;
  o.episodes = 20;
  o.seed = 12;
  o.max_steps = kHorizon;
  const auto c = observation_noise_sweep(m, catch_factory(), {0.0, 10.0}, o);
  const auto random = random_play_scores(catch_factory(), 20, 12, kHorizon);
  const double half = 1.96 * c.stddevs[1] / std::sqrt(20.0);
  const auto [rlo, rhi] = interval95(random);
  EXPECT_LE(c.mean_scores[1] - half, rhi);
  EXPECT_GE(c.mean_scores[1] + half, rlo);
}

TEST(ParameterSweep, BaselineScopeAndDeterminism) {
  const FrozenModel m = tiny_model(HeadKind::Q, 4, 4);
  const FrozenModel copy = m;
  SweepOptions o;
  o.episodes = 2;
  o.seed = 13;
  o.max_steps = kHorizon;
  const auto a = parameter_noise_sweep(m, catch_factory(), {0.0, 0.05, 0.5}, o);
  EXPECT_EQ(a.mean_scores.front(), eval_score(m, catch_factory(), 2, 13, kHorizon));
  EXPECT_TRUE(bit_equal(m, copy));  // fc and everything else untouched
  const auto b = parameter_noise_sweep(m, catch_factory(), {0.0, 0.05, 0.5}, o);
  EXPECT_EQ(a.mean_scores, b.mean_scores);
  observation_noise_sweep(m, catch_factory(), {0.0, 0.3}, o);
  EXPECT_TRUE(bit_equal(m, copy));
}

TEST(Sweeps, RejectBadSchedules) {
  const FrozenModel m = tiny_model(HeadKind::Q, 4, 5);
  SweepOptions o;
  o.episodes = 1;
  o.max_steps = 5;
  for (const std::vector<double>& s : {std::vector<double>{0.0, 0.2, 0.1}, {0.1, 0.2}, {}, {0.0, 0.0}}) {
    EXPECT_THROW(observation_noise_sweep(m, catch_factory(), s, o), Error);
    EXPECT_THROW(parameter_noise_sweep(m, catch_factory(), s, o), Error);
  }
  EXPECT_EQ(kDefaultObservationSigmas.front(), 0.0);
  EXPECT_EQ(kDefaultParameterSigmas.front(), 0.0);
}

TEST(Normalize, AlgorithmBestMapsBaselineToOneAndRandomToZero) {
  const std::map<std::string, double> r{{"g", 2.0}};
  const auto n = normalize_curves({curve("a", "g", "DQN", {10.0, 6.0, 2.0}), curve("b", "g", "A2C", {4.0, 3.0, 1.0})}, r,
                                  NormalizationMode::AlgorithmBest);
  ASSERT_EQ(n.curves.size(), 2u);
  EXPECT_TRUE(n.exclusions.empty());
  EXPECT_EQ(n.curves[0].values, (std::vector<double>{1.0, 0.5, 0.0}));
  EXPECT_EQ(n.curves[1].values, (std::vector<double>{1.0, 0.5, -0.5}));
}

TEST(Normalize, OverallBestUsesBestOnGame) {
  const std::map<std::string, double> r{{"g", 2.0}, {"h", 0.0}};
  const auto n = normalize_curves(
      {curve("a", "g", "DQN", {10.0, 6.0}), curve("b", "g", "A2C", {4.0, 3.0}), curve("c", "h", "A2C", {5.0, 5.0})}, r,
      NormalizationMode::OverallBest);
  EXPECT_EQ(n.curves[0].values, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(n.curves[1].values, (std::vector<double>{0.25, 0.125}));
  EXPECT_EQ(n.curves[2].values, (std::vector<double>{1.0, 1.0}));
}

TEST(Normalize, BelowRandomCurveExcludesItsGame) {
  const std::map<std::string, double> r{{"g", 5.0}, {"h", 0.0}};
  const auto n = normalize_curves({curve("good", "g", "DQN", {10.0, 7.0}), curve("bad", "g", "ES", {3.0, 1.0}),
                                   curve("other", "h", "DQN", {4.0, 2.0})},
                                  r, NormalizationMode::AlgorithmBest);
  ASSERT_GE(n.exclusions.size(), 1u);
  EXPECT_EQ(n.exclusions[0].label, "bad");
  EXPECT_EQ(n.exclusions[0].baseline, 3.0);
  EXPECT_EQ(n.exclusions[0].random, 5.0);
  EXPECT_TRUE(n.curves[1].excluded);
  EXPECT_TRUE(n.curves[0].excluded);  // same game
  EXPECT_FALSE(n.curves[2].excluded);
  const auto agg = aggregate_by_algorithm(n);
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_EQ(agg[0].algorithm, "DQN");
  EXPECT_EQ(agg[0].n_curves, 1);
  EXPECT_EQ(agg[0].mean_values, (std::vector<double>{1.0, 0.5}));
}

TEST(Normalize, AffineInvariance) {
  const std::vector<SweepCurve> base{curve("a", "g", "DQN", {9.0, 4.5, 1.25}), curve("b", "g", "GA", {7.0, 6.0, 3.0})};
  std::vector<SweepCurve> shifted = base;
  for (auto& c : shifted)
    for (auto& s : c.mean_scores) s += 100.0;
  for (auto mode : {NormalizationMode::AlgorithmBest, NormalizationMode::OverallBest}) {
    const auto a = normalize_curves(base, {{"g", 1.0}}, mode);
    const auto b = normalize_curves(shifted, {{"g", 101.0}}, mode);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.curves[c].values[i], b.curves[c].values[i], 1e-12);
  }
}

TEST(Normalize, AggregatesMeanPerAlgorithm) {
  const std::map<std::string, double> r{{"g", 0.0}, {"h", 0.0}};
  const auto n = normalize_curves({curve("a", "g", "DQN", {4.0, 2.0}), curve("b", "h", "DQN", {8.0, 2.0})}, r,
                                  NormalizationMode::AlgorithmBest);
  const auto agg = aggregate_by_algorithm(n);
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_EQ(agg[0].mean_values, (std::vector<double>{1.0, 0.375}));
  EXPECT_THROW(normalize_curves({curve("a", "zzz", "DQN", {1.0})}, r, NormalizationMode::AlgorithmBest), Error);
}
