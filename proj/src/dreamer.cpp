#include "dreamer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "error.hpp"
#include "preprocess.hpp"

namespace azoo {

void DreamConfig::check() const {
  if (iterations < 1) fail(ErrorKind::Config, "dream iterations must be at least 1");
  if (!(step >= 0.0) || jitter < 0 || !(tv_weight >= 0.0) || !(l1_weight >= 0.0))
    fail(ErrorKind::Config, "dream step, jitter and regularizer weights must be non-negative");
}

namespace {

void check_chw(const Tensor& x) {
  if (x.rank() != 3) fail(ErrorKind::Shape, "expected a C×H×W tensor, got " + shape_string(x.shape()));
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

void add_tv_gradient(const Tensor& x, double weight, Tensor& grad) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        if (y + 1 < h) {
          const int s = sign(static_cast<double>(x.at(ch, y + 1, xx)) - x.at(ch, y, xx));
          grad.at(ch, y + 1, xx) -= static_cast<float>(weight * s);
          grad.at(ch, y, xx) += static_cast<float>(weight * s);
        }
        if (xx + 1 < w) {
          const int s = sign(static_cast<double>(x.at(ch, y, xx + 1)) - x.at(ch, y, xx));
          grad.at(ch, y, xx + 1) -= static_cast<float>(weight * s);
          grad.at(ch, y, xx) += static_cast<float>(weight * s);
        }
      }
}

// out[c, y, x] = in[c, (y - dy) mod H, (x - dx) mod W]
Tensor roll(const Tensor& in, int dy, int dx) {
  Tensor out(in.shape());
  const auto h = static_cast<int>(in.dim(1)), w = static_cast<int>(in.dim(2));
  for (std::size_t c = 0; c < in.dim(0); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(c, static_cast<std::size_t>(((y + dy) % h + h) % h), static_cast<std::size_t>(((x + dx) % w + w) % w)) =
            in.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  return out;
}

double l1_norm(const Tensor& x) {
  double s = 0.0;
  for (float v : x.data()) s += std::abs(static_cast<double>(v));
  return s;
}

}  // namespace

double total_variation(const Tensor& x) {
  check_chw(x);
  double tv = 0.0;
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t y = 0; y < x.dim(1); ++y)
      for (std::size_t xx = 0; xx < x.dim(2); ++xx) {
        if (y + 1 < x.dim(1)) tv += std::abs(static_cast<double>(x.at(c, y + 1, xx)) - x.at(c, y, xx));
        if (xx + 1 < x.dim(2)) tv += std::abs(static_cast<double>(x.at(c, y, xx + 1)) - x.at(c, y, xx));
      }
  return tv;
}

double dream_objective(const FrozenModel& model, const Tensor& x, const Objective& objective, const DreamConfig& config) {
  const double act = objective_value(forward_with_trace(model, x), objective);
  return act - config.tv_weight * total_variation(x) - config.l1_weight * l1_norm(x);
}

Tensor dream_gradient(const FrozenModel& model, const Tensor& x, const Objective& objective, const DreamConfig& config) {
  Tensor grad = objective_gradient(model, x, objective).gradient;
  if (config.tv_weight > 0.0) add_tv_gradient(x, config.tv_weight, grad);
  if (config.l1_weight > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) grad[i] -= static_cast<float>(config.l1_weight * sign(x[i]));
  return grad;
}

DreamResult synthesize(const FrozenModel& model, const Objective& objective, const DreamConfig& config) {
  config.check();
  check_model_shapes(model);
  check_objective(model.spec, objective);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> init(0.4, 0.6);
  std::uniform_int_distribution<int> shift(-config.jitter, config.jitter);
  Tensor x({kStackDepth, kObsSize, kObsSize});
  for (auto& v : x.data()) v = static_cast<float>(init(rng));

  DreamResult out;
  out.history.push_back(dream_objective(model, x, objective, config));
  std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  for (int it = 1; it <= config.iterations; ++it) {
    const int dy = shift(rng), dx = shift(rng);
    Tensor grad = roll(objective_gradient(model, roll(x, dy, dx), objective).gradient, -dy, -dx);
    if (config.tv_weight > 0.0) add_tv_gradient(x, config.tv_weight, grad);
    if (config.l1_weight > 0.0)
      for (std::size_t i = 0; i < x.size(); ++i) grad[i] -= static_cast<float>(config.l1_weight * sign(x[i]));

    for (std::size_t i = 0; i < x.size(); ++i) {
      double delta = config.step * grad[i];
      if (config.optimizer == DreamOptimizer::Adam) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * static_cast<double>(grad[i]) * grad[i];
        const double mh = m[i] / (1.0 - std::pow(kBeta1, it)), vh = v[i] / (1.0 - std::pow(kBeta2, it));
        delta = config.step * mh / (std::sqrt(vh) + kEps);
      }
      x[i] = static_cast<float>(std::clamp(x[i] + delta, 0.0, 1.0));
    }
    out.history.push_back(dream_objective(model, x, objective, config));
  }
  out.input = std::move(x);
  return out;
}

}  // namespace azoo
