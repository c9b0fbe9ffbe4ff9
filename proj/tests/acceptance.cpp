// Acceptance runner: one PASS/FAIL line per top-level criterion.
//
// Exit status is nonzero when any criterion fails, unless that criterion was
// named with --xfail, in which case it still prints FAIL (marked expected).
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "distinguisher.hpp"
#include "dreamer.hpp"
#include "embedding.hpp"
#include "environment.hpp"
#include "error.hpp"
#include "filters.hpp"
#include "model.hpp"
#include "patches.hpp"
#include "robustness.hpp"
#include "rollout.hpp"
#include "support.hpp"

using namespace azoo;
using namespace azoo::testing;

namespace {

using Clock = std::chrono::steady_clock;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects sub-checks; the criterion passes when every one holds.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& text) { notes_.push_back(text); }
  bool passed() const { return failures_.empty(); }
  std::string detail() const {
    std::string out;
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) out += (out.empty() ? "failed: " : "; failed: ") + f;
    return out;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Verdict gradient_suite() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int cases = 0, unchecked = 0, coords = 0;
  const HeadKind heads[] = {HeadKind::Q, HeadKind::Dueling, HeadKind::C51, HeadKind::ActorCritic};
  for (int i = 0; i < 70; ++i, ++cases) {
    const FrozenModel m = random_model(heads[i % 4], 3 + i % 6, 1000 + static_cast<std::uint64_t>(i));
    const Tensor obs = uniform_tensor({4, 84, 84}, 2000 + static_cast<std::uint64_t>(i));
    const Objective o = random_objective(m, obs, rng);
    const auto r = check_input_gradient(m, obs, o, rng, 4, 1e-3);
    worst = std::max(worst, r.max_rel_error);
    coords += r.checked;
    if (r.checked == 0) ++unchecked;
  }
  for (int i = 0; i < 30; ++i, ++cases) {
    ClassifierSpec spec;
    spec.in_channels = 1 + i % 2;
    spec.in_size = 12 + 4 * (i % 3);
    spec.conv = {{2 + i % 3, 4, 2}};
    if (i % 2) spec.conv.push_back({3, 2, 1});
    spec.hidden = {6 + i % 5};
    spec.n_classes = 2 + i % 3;
    const ConvClassifier net(spec, 3000 + static_cast<std::uint64_t>(i));
    std::vector<Tensor> xs;
    std::vector<int> labels;
    for (int k = 0; k < 3; ++k) {
      xs.push_back(uniform_tensor({static_cast<std::size_t>(spec.in_channels), static_cast<std::size_t>(spec.in_size),
                                   static_cast<std::size_t>(spec.in_size)},
                                  4000 + static_cast<std::uint64_t>(i * 3 + k)));
      labels.push_back((i + k) % spec.n_classes);
    }
    const auto r = check_param_gradient(net, xs, labels, rng, 2, 1e-3);
    worst = std::max(worst, r.max_rel_error);
    coords += r.checked;
    if (r.checked == 0) ++unchecked;
  }
  const double elapsed = seconds_since(t0);
  v.note(std::to_string(cases) + " cases (70 input, 30 parameter), " + std::to_string(coords) + " coordinates");
  v.note("max rel error " + fmt("%.2e", worst));
  v.note("runtime " + fmt("%.1f s", elapsed));
  v.check(worst < 1e-3, "max rel error < 1e-3");
  v.check(unchecked == 0, std::to_string(unchecked) + " cases had no checkable coordinate");
  v.check(elapsed < 60.0, "runtime < 60 s");
  return v;
}

Verdict shapes_and_receptive_fields() {
  Verdict v;
  const NetworkSpec spec = make_spec(HeadKind::Q, 4);
  v.check(spec.conv_output_sizes() == std::vector<int>{20, 9, 7}, "conv chain 20/9/7");
  v.check(spec.flat_size() == 3136, "flat size 3136");
  const ReceptiveField want[] = {{8, 4}, {20, 8}, {36, 8}};
  for (int l = 1; l <= 3; ++l)
    v.check(receptive_field(spec, l) == want[l - 1], "receptive field of layer " + std::to_string(l));

  const FrozenModel m = all_positive_model(7);
  struct Unit {
    int layer, channel, y, x;
  };
  std::vector<Unit> units{{1, 0, 0, 0}, {1, 5, 19, 19}, {1, 9, 7, 12}, {2, 0, 0, 0}, {2, 3, 8, 8}, {2, 60, 3, 5}};
  std::mt19937_64 rng(77);
  for (int i = 0; i < 20; ++i)
    units.push_back({3, std::uniform_int_distribution<int>(0, 63)(rng), std::uniform_int_distribution<int>(0, 6)(rng),
                     std::uniform_int_distribution<int>(0, 6)(rng)});
  int agree = 0;
  for (const auto& u : units) {
    const auto rf = receptive_field(m.spec, u.layer);
    const auto s = perturbation_support(m, u.layer, u.channel, u.y, u.x, static_cast<std::uint64_t>(agree + 1));
    const bool ok = s.x0 == rf.origin(u.x) && s.y0 == rf.origin(u.y) && s.x1 - s.x0 == rf.size &&
                    s.y1 - s.y0 == rf.size && s.inside_hits == s.inside_probes && s.outside_hits == 0;
    if (ok) ++agree;
    v.check(ok, "perturbation oracle disagrees at layer " + std::to_string(u.layer) + " unit (" +
                    std::to_string(u.y) + "," + std::to_string(u.x) + ")");
  }
  v.note("perturbation oracle agrees on " + std::to_string(agree) + "/" + std::to_string(units.size()) +
         " units (20 random conv3)");
  return v;
}

Verdict temporal_bias_calibration() {
  Verdict v;
  FrozenModel m = random_model(HeadKind::Q, 4, 0);
  std::vector<double> biases;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& w : m.tensors.get("conv1.w").data()) w = static_cast<float>(n(rng));
    biases.push_back(present_bias(m));
  }
  const auto [lo, hi] = std::minmax_element(biases.begin(), biases.end());
  double mean = 0.0;
  for (double b : biases) mean += b / 100.0;
  const auto outside = std::count_if(biases.begin(), biases.end(), [](double b) { return b < 0.95 || b > 1.05; });
  v.note("100 draws: min " + fmt("%.4f", *lo) + ", max " + fmt("%.4f", *hi) + ", mean " + fmt("%.4f", mean) + ", " +
         std::to_string(outside) + " outside [0.95, 1.05]");
  v.check(outside == 0, "every draw within [0.95, 1.05]");

  Tensor& w = m.tensors.get("conv1.w");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (i / 64) % 4 == 3 ? 0.3f : 0.0f;
  v.check(present_bias(m) == 0.0, "present-only weights give exactly 0");
  return v;
}

Verdict robustness_harness() {
  Verdict v;
  constexpr int kHorizon = 150;
  const EnvFactory factory = env_factory("catch", kHorizon);
  const FrozenModel m = tiny_model(HeadKind::Q, 4, 1);
  SweepOptions o;
  o.episodes = 3;
  o.seed = 11;
  o.max_steps = kHorizon;
  const double baseline = eval_score(m, factory, 3, 11, kHorizon);
  const auto obs = observation_noise_sweep(m, factory, {0.0, 0.1, 0.3}, o);
  const auto par = parameter_noise_sweep(m, factory, {0.0, 0.02, 0.2}, o);
  v.check(obs.mean_scores.front() == baseline, "observation sweep at sigma 0 equals the noiseless score");
  v.check(par.mean_scores.front() == baseline, "parameter sweep at sigma 0 equals the noiseless score");
  v.note("noiseless score " + fmt("%.3f", baseline));

  const double random = random_play_baseline(factory, 10, 3, kHorizon);
  v.note("random play " + fmt("%.3f", random));
  auto curve = [](std::string label, std::string alg, std::vector<double> s) {
    SweepCurve c;
    c.label = std::move(label);
    c.game = "catch";
    c.algorithm = std::move(alg);
    for (std::size_t i = 0; i < s.size(); ++i) c.sigmas.push_back(0.1 * static_cast<double>(i));
    c.mean_scores = std::move(s);
    c.stddevs.assign(c.mean_scores.size(), 0.0);
    return c;
  };
  const std::map<std::string, double> randoms{{"catch", random}};
  const auto n = normalize_curves({curve("dqn", "DQN", {random + 8.0, random + 4.0, random}),
                                   curve("a2c", "A2C", {random + 2.0, random + 1.0, random})},
                                  randoms, NormalizationMode::AlgorithmBest);
  for (const auto& c : n.curves) {
    v.check(c.values.front() == 1.0, c.label + " baseline maps to 1.0");
    v.check(c.values.back() == 0.0, c.label + " random-play score maps to 0.0");
    v.check(std::abs(c.values[1] - 0.5) < 1e-12, c.label + " midpoint maps to 0.5");
  }
  v.check(n.exclusions.empty(), "no exclusions for above-random curves");

  const auto bad = normalize_curves({curve("dqn", "DQN", {random + 8.0, random}), curve("es", "ES", {random - 1.0, random - 2.0})},
                                    randoms, NormalizationMode::AlgorithmBest);
  // The offending curve is recorded first, then every other curve of its game.
  const bool excluded = bad.exclusions.size() == 2 && bad.exclusions[0].label == "es" &&
                        bad.exclusions[1].label == "dqn" && bad.curves[0].excluded && bad.curves[1].excluded &&
                        aggregate_by_algorithm(bad).empty();
  v.check(excluded, "below-random curve excludes its game");
  return v;
}

Verdict distinguisher() {
  Verdict v;
  auto textures = [](std::size_t n, bool stripes, std::uint64_t seed) {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(stripes ? stripe_texture(seed + i) : blob_texture(seed + i));
    return out;
  };
  auto rows_match = [](const Evaluation& e, const FrameDataset& d) {
    for (std::size_t c = 0; c < e.confusion.size(); ++c) {
      const auto count = std::count_if(d.test.begin(), d.test.end(), [&](std::size_t i) { return d.labels[i] == static_cast<int>(c); });
      if (e.confusion.row_sum(c) != count) return false;
    }
    return true;
  };

  const auto data = make_frame_dataset({textures(150, true, 10), textures(150, false, 10)}, {"stripes", "blobs"}, 1);
  TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.batch_size = 16;
  cfg.seed = 2;
  const auto trained = train_classifier(data, cfg);
  const auto e = evaluate(trained.classifier, data);
  v.note("texture classes: test mean F1 " + fmt("%.3f", e.mean_f1) + " after " + std::to_string(trained.history.size()) +
         " epochs");
  v.check(e.mean_f1 >= 0.95 && std::all_of(e.f1.begin(), e.f1.end(), [](double f) { return f >= 0.95; }),
          "test F1 >= 0.95");
  v.check(trained.history.size() <= 20, "within 20 epochs");
  v.check(rows_match(e, data), "confusion rows sum to class test counts (textures)");

  auto pool = textures(250, true, 500);
  auto more = textures(250, false, 500);
  pool.insert(pool.end(), more.begin(), more.end());
  std::mt19937_64 rng(3);
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto shuffled = make_frame_dataset({std::vector<Tensor>(pool.begin(), pool.begin() + 250),
                                            std::vector<Tensor>(pool.begin() + 250, pool.end())},
                                           {"x", "y"}, 4);
  TrainConfig scfg = cfg;
  scfg.seed = 5;
  const auto s = evaluate(train_classifier(shuffled, scfg).classifier, shuffled);
  v.note("shuffled labels: accuracy " + fmt("%.3f", s.accuracy));
  v.check(std::abs(s.accuracy - 0.5) <= 0.1, "shuffled-label accuracy within 0.1 of chance");
  v.check(rows_match(s, shuffled), "confusion rows sum to class test counts (shuffled)");

  v.check(std::abs(f1_score(0.6, 0.4) - 0.48) < 1e-12, "F1(0.6, 0.4) = 0.48");
  ConfusionMatrix cm({"a", "b"});
  cm.counts = {{3, 1}, {2, 4}};
  const auto h = evaluation_from_confusion(cm);
  v.check(std::abs(h.f1[0] - 2.0 * 0.6 * 0.75 / 1.35) < 1e-12 && std::abs(h.accuracy - 0.7) < 1e-12,
          "hand-computed confusion metrics");
  return v;
}

Verdict embedding() {
  Verdict v;
  // PCA on anisotropic data against the covariance eigen oracle.
  Matrix x(200, 80);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) x(i, j) = n(rng) * (1.0 + 0.2 * static_cast<double>(j % 17)) + 0.1 * j;
  const auto p = pca_reduce(x, 50);
  double ortho = 0.0;
  for (std::size_t a = 0; a < p.basis.cols; ++a)
    for (std::size_t b = 0; b < p.basis.cols; ++b) {
      double dot = 0.0;
      for (std::size_t r = 0; r < p.basis.rows; ++r) dot += p.basis(r, a) * p.basis(r, b);
      ortho = std::max(ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  const auto eig = covariance_eigenvalues(x);
  double eig_err = 0.0;
  bool ordered = true;
  for (std::size_t k = 0; k < p.explained_variance.size(); ++k) {
    eig_err = std::max(eig_err, std::abs(p.explained_variance[k] - eig[k]) / eig[k]);
    if (k && p.explained_variance[k] > p.explained_variance[k - 1]) ordered = false;
  }
  v.note("PCA orthonormality error " + fmt("%.1e", ortho) + ", eigenvalue rel error " + fmt("%.1e", eig_err));
  v.check(p.basis.cols == 50 && ortho <= 1e-5, "PCA basis orthonormal to 1e-5");
  v.check(ordered && eig_err < 1e-6, "variance order and values match the covariance eigen oracle");

  // Full-size run: 300 points, perplexity 30, 3000 iterations.
  std::vector<int> labels;
  const Matrix clusters = gaussian_clusters(3, 100, 60, 10.0, 11, labels);
  const auto t0 = Clock::now();
  const auto reduced = pca_reduce(clusters, 50);
  TsneConfig cfg;
  cfg.seed = 12;
  const auto t = tsne(reduced.projected, cfg);
  const double elapsed = seconds_since(t0);
  double perp_err = 0.0;
  for (double pp : t.affinities.perplexity) perp_err = std::max(perp_err, std::abs(pp - 30.0));
  const double purity = knn_purity(t.embedding, labels, 10);
  v.note("max perplexity deviation " + fmt("%.1e", perp_err));
  v.note("10-NN purity " + fmt("%.3f", purity));
  v.note("N=300 x 3000 iterations in " + fmt("%.1f s", elapsed));
  v.check(cfg.perplexity == 30.0 && cfg.iterations == 3000, "default configuration is perplexity 30, 3000 iterations");
  v.check(perp_err <= 1e-3, "per-point perplexity within 1e-3 of 30");
  v.check(purity >= 0.9, "three-cluster purity >= 0.9");
  v.check(elapsed < 300.0, "full run < 5 min");
  return v;
}

Verdict patch_finder() {
  Verdict v;
  const FrozenModel m = random_model(HeadKind::Q, 4, 21);
  const Rollout r = toy_rollout(m, 200, 22);
  std::vector<ActivationTrace> traces;
  for (const auto& s : r.steps) traces.push_back(forward_with_trace(m, s.obs.tensor()));
  int agree = 0, total = 0;
  for (int layer = 1; layer <= 3; ++layer)
    for (int filter : {0, 7, 31}) {
      ++total;
      double best = -1.0;
      std::size_t step = 0;
      int by = 0, bx = 0;
      for (std::size_t t = 0; t < traces.size(); ++t) {
        const Tensor& a = traces[t].conv[static_cast<std::size_t>(layer - 1)];
        for (std::size_t y = 0; y < a.dim(1); ++y)
          for (std::size_t x = 0; x < a.dim(2); ++x)
            if (a.at(static_cast<std::size_t>(filter), y, x) > best) {
              best = a.at(static_cast<std::size_t>(filter), y, x);
              step = t;
              by = static_cast<int>(y);
              bx = static_cast<int>(x);
            }
      }
      const auto hits = top_patches(m, r, layer, filter, 1);
      if (hits.size() == 1 && hits[0].value == best && hits[0].step == step && hits[0].unit_y == by &&
          hits[0].unit_x == bx)
        ++agree;
    }
  v.note("top-1 equals exhaustive argmax for " + std::to_string(agree) + "/" + std::to_string(total) +
         " (layer, filter) pairs on 200 steps");
  v.check(agree == total, "top-1 equals exhaustive argmax");

  // Planted template: conv1 filter 0 is a zero-mean cross on the present frame.
  FrozenModel t = m;
  Tensor& w = t.tensors.get("conv1.w");
  auto cross = [](int i, int j) { return (i == 3 || i == 4 || j == 3 || j == 4) ? 1.0f : 0.0f; };
  for (std::size_t c = 0; c < 4; ++c)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        w[(c * 8 + static_cast<std::size_t>(i)) * 8 + static_cast<std::size_t>(j)] = c == 3 ? cross(i, j) - 0.4375f : 0.0f;
  t.tensors.get("conv1.b")[0] = 0.0f;
  Rollout planted;
  const int py = 36, px = 60, at = 13;
  for (int s = 0; s < 30; ++s) {
    Tensor present = uniform_tensor({84, 84}, 600 + static_cast<std::uint64_t>(s), 0.3, 0.5);
    if (s == at)
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) present[static_cast<std::size_t>((py + i) * 84 + px + j)] = cross(i, j);
    StepRecord rec;
    const GrayFrame g = std::make_shared<const Tensor>(std::move(present));
    rec.obs = Observation({g, g, g, g});
    planted.steps.push_back(std::move(rec));
  }
  const auto hits = top_patches(t, planted, 1, 0, 1);
  const bool found = hits.size() == 1 && hits[0].step == static_cast<std::size_t>(at) && hits[0].rect == PixelRect{px, py, 8, 8};
  v.check(found, "planted template localized");
  if (found) v.note("planted patch found at step 13, rect (60,36) 8x8");
  return v;
}

Verdict dreamer() {
  Verdict v;
  const FrozenModel m = random_model(HeadKind::Q, 4, 31);
  auto in_range = [](const Tensor& x) {
    return std::all_of(x.data().begin(), x.data().end(), [](float f) { return f >= 0.0f && f <= 1.0f; });
  };
  for (const Objective& obj : {Objective::conv_unit(3, 20, 3, 3), Objective::action(0)}) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t s = 0; s < 100; ++s)
      best = std::max(best, objective_value(forward_with_trace(m, uniform_tensor({4, 84, 84}, 7000 + s)), obj));
    DreamConfig cfg;
    cfg.seed = 1;
    const auto r = synthesize(m, obj, cfg);
    const double got = objective_value(forward_with_trace(m, r.input), obj);
    v.note(obj.str() + ": dream " + fmt("%.4g", got) + " vs best random " + fmt("%.4g", best));
    v.check(got > best, obj.str() + " exceeds the best of 100 random inputs");
    v.check(in_range(r.input), obj.str() + " output clipped to [0, 1]");
    if (obj.layer == LayerId::q()) {
      const auto again = synthesize(m, obj, cfg);
      v.check(again.input.values() == r.input.values() && again.history == r.history, "same seed gives identical bits");
    }
  }
  DreamConfig plain, smooth;
  plain.iterations = smooth.iterations = 128;
  plain.seed = smooth.seed = 5;
  smooth.tv_weight = 10.0;
  const auto a = synthesize(m, Objective::conv_channel(2, 9), plain);
  const auto b = synthesize(m, Objective::conv_channel(2, 9), smooth);
  v.note("TV " + fmt("%.1f", total_variation(b.input)) + " (lambda 10) vs " + fmt("%.1f", total_variation(a.input)) +
         " (lambda 0)");
  v.check(total_variation(b.input) < total_variation(a.input), "TV-regularized output has lower TV");
  v.check(in_range(a.input) && in_range(b.input), "TV runs clipped to [0, 1]");
  return v;
}

Verdict formats() {
  Verdict v;
  TempDir dir;
  for (HeadKind h : {HeadKind::Q, HeadKind::C51}) {
    const FrozenModel m = random_model(h, 5, 41, Algorithm::Other, "r");
    save_model(m, dir / "m.azm");
    const FrozenModel back = load_model(dir / "m.azm");
    save_model(back, dir / "again.azm");
    v.check(bit_equal(m, back) && back.meta == m.meta, "model round trip is bit-exact");
    v.check(read_file(dir / "m.azm") == read_file(dir / "again.azm"), "re-saved model is byte-identical");
  }

  // Every byte of the tensor region and the checksum, flipped one at a time.
  const auto bytes = serialize_model(tiny_model(HeadKind::Dueling, 3, 42));
  const std::size_t header = static_cast<std::size_t>(bytes[8]) | static_cast<std::size_t>(bytes[9]) << 8 |
                             static_cast<std::size_t>(bytes[10]) << 16 | static_cast<std::size_t>(bytes[11]) << 24;
  std::size_t flips = 0, detected = 0;
  for (std::size_t i = 12 + header; i < bytes.size(); ++i)
    for (std::uint8_t mask : {std::uint8_t{0x01}, std::uint8_t{0xa5}}) {
      auto bad = bytes;
      bad[i] ^= mask;
      ++flips;
      try {
        deserialize_model(bad);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::ChecksumMismatch) ++detected;
      }
    }
  v.note(std::to_string(detected) + "/" + std::to_string(flips) + " single-byte corruptions detected");
  v.check(flips > 0 && detected == flips, "every single-byte corruption of the tensor region detected");

  const FrozenModel tiny = tiny_model(HeadKind::Q, 4, 43);
  const Rollout r = toy_rollout(tiny, 40, 44, true);
  save_rollout(r, dir / "ro");
  const Rollout rb = load_rollout(dir / "ro");
  save_rollout(rb, dir / "ro2");
  bool same_files = true;
  for (const auto& e : std::filesystem::directory_iterator(dir / "ro"))
    same_files = same_files && read_file(e.path()) == read_file(dir.path() / "ro2" / e.path().filename());
  v.check(rollouts_equal(r, rb), "rollout archive round trip is bit-exact");
  v.check(same_files, "re-saved rollout archive is byte-identical");

  v.check(kDefaultRolloutSteps == 2500 && RecordOptions{}.max_steps == 2500, "default rollout length constant is 2500");
  auto env = make_env("catch", kDefaultRolloutSteps);
  const Rollout full = record_rollout(tiny, *env);
  v.check(full.size() == 2500, "default recording has 2500 steps");
  v.note("default recording has " + std::to_string(full.size()) + " steps");
  return v;
}

struct Criterion {
  std::string key;
  std::string title;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::vector<std::string> xfail, only;
  app.add_option("--xfail", xfail, "Criterion keys expected to fail (reported, not fatal)");
  app.add_option("--only", only, "Run only these criterion keys");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"gradients", "Gradient suite", gradient_suite},
      {"shapes-rf", "Shape/receptive-field suite", shapes_and_receptive_fields},
      {"temporal-bias", "Temporal-bias calibration", temporal_bias_calibration},
      {"robustness", "Robustness harness", robustness_harness},
      {"distinguisher", "Distinguisher", distinguisher},
      {"embedding", "Embedding", embedding},
      {"patches", "Patch finder", patch_finder},
      {"dreamer", "Dreamer", dreamer},
      {"formats", "Formats", formats},
  };
  const std::set<std::string> expected(xfail.begin(), xfail.end());
  int fatal = 0, passed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.key) == only.end()) continue;
    ++ran;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const bool ok = v.passed();
    const bool xf = expected.count(c.key) > 0;
    if (ok) ++passed;
    if (!ok && !xf) ++fatal;
    std::printf("%s  %-28s [%6.1f s]  %s%s\n", ok ? "PASS" : "FAIL", c.title.c_str(), seconds_since(t0),
                v.detail().c_str(), !ok && xf ? "  (expected failure)" : "");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed", passed, ran);
  if (!expected.empty()) {
    std::string keys;
    for (const auto& k : expected) keys += (keys.empty() ? "" : ", ") + k;
    std::printf("; expected failures: %s", keys.c_str());
  }
  std::printf("\n");
  return fatal == 0 ? 0 : 1;
}
