#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "environment.hpp"
#include "error.hpp"
#include "ops.hpp"
#include "preprocess.hpp"

namespace azoo::testing {

TempDir::TempDir() {
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    path_ = base / ("azoo-test-" + std::to_string(rd()) + std::to_string(rd()));
    if (std::filesystem::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Tensor uniform_tensor(const Shape& shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<float>(u(rng));
  return t;
}

FrozenModel random_model(HeadKind head, int n_actions, std::uint64_t seed, Algorithm algorithm, const std::string& run_id) {
  ModelMeta meta;
  meta.game = "catch";
  meta.algorithm = algorithm;
  meta.run_id = run_id;
  return make_random_model(make_spec(head, n_actions), meta, seed);
}

FrozenModel tiny_model(HeadKind head, int n_actions, std::uint64_t seed, const std::string& game) {
  NetworkSpec spec = make_spec(head, n_actions);
  for (auto& l : spec.conv_layers) l.out_channels = 2;
  spec.fc_width = 8;
  ModelMeta meta;
  meta.game = game;
  return make_random_model(spec, meta, seed);
}

Rollout toy_rollout(const FrozenModel& model, int steps, std::uint64_t seed, bool capture, PolicyMode mode) {
  CatchEnv env;
  RecordOptions opts;
  opts.max_steps = steps;
  opts.seed = seed;
  opts.capture_activations = capture;
  opts.mode = mode;
  return record_rollout(model, env, opts);
}

Objective random_objective(const FrozenModel& model, const Tensor& obs, std::mt19937_64& rng) {
  const auto trace = forward_with_trace(model, obs);
  const auto& spec = model.spec;
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  auto active_index = [&](const Tensor& t) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] > 0.0f) active.push_back(i);
    if (active.empty()) return static_cast<std::size_t>(pick(static_cast<int>(t.size())));
    return active[static_cast<std::size_t>(pick(static_cast<int>(active.size())))];
  };
  switch (pick(5)) {
    case 0: {
      const int l = pick(static_cast<int>(spec.conv_layers.size()));
      const Tensor& a = trace.conv[static_cast<std::size_t>(l)];
      const std::size_t i = active_index(a);
      const std::size_t plane = a.dim(1) * a.dim(2);
      return Objective::conv_unit(l + 1, static_cast<int>(i / plane), static_cast<int>((i % plane) / a.dim(2)),
                                  static_cast<int>(i % a.dim(2)));
    }
    case 1: {
      const int l = pick(static_cast<int>(spec.conv_layers.size()));
      return Objective::conv_channel(l + 1, pick(spec.conv_layers[static_cast<std::size_t>(l)].out_channels));
    }
    case 2:
      return Objective::fc_unit(static_cast<int>(active_index(trace.fc)));
    case 3:
      return {LayerId::head_raw(), Objective::Target::Unit, pick(static_cast<int>(spec.head_raw_size())), 0, 0};
    default:
      return Objective::action(pick(spec.n_actions));
  }
}

namespace {

template <class Patterns>
bool same_pattern(const Patterns& a, const Patterns& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t i = 0; i < a[l].size(); ++i)
      if ((a[l][i] > 0.0f) != (b[l][i] > 0.0f)) return false;
  return true;
}

double rel_error(double a, double n) {
  const double d = std::max(std::abs(a), std::abs(n));
  return d == 0.0 ? 0.0 : std::abs(a - n) / d;
}

// Probes coordinate i: returns false when a kink is crossed.
template <class Eval>
bool probe(Eval&& eval, double& fd, double h) {
  auto [fp, pp] = eval(+h);
  auto [fm, pm] = eval(-h);
  if (!same_pattern(pp, pm)) return false;
  fd = (fp - fm) / (2.0 * h);
  return true;
}

template <class Eval>
void check_coordinates(std::span<const float> g, Eval&& eval_at, std::mt19937_64& rng, int extra, double h,
                       GradCheck& out) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(g[i]) > std::abs(g[best])) best = i;
  std::vector<std::size_t> pool;
  const double floor = 0.1 * std::abs(g[best]);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] != 0.0f && std::abs(g[i]) >= floor) pool.push_back(i);
  std::vector<std::size_t> order{best};
  std::shuffle(pool.begin(), pool.end(), rng);
  order.insert(order.end(), pool.begin(), pool.end());
  int done = 0;
  for (std::size_t k = 0; k < order.size() && done < extra + 1; ++k) {
    const std::size_t i = order[k];
    double fd = 0.0;
    if (!probe([&](double d) { return eval_at(i, d); }, fd, h)) {
      ++out.skipped;
      continue;
    }
    out.max_rel_error = std::max(out.max_rel_error, rel_error(g[i], fd));
    ++out.checked;
    ++done;
  }
}


// Valid convolution plus ReLU in double; x is (c, n, n), returns (o, on, on).
std::vector<double> conv_relu(const std::vector<double>& x, std::size_t c, std::size_t n,
                              const std::vector<double>& w, const std::vector<double>& b, std::size_t o, std::size_t k,
                              std::size_t s, std::size_t& on) {
  on = (n - k) / s + 1;
  std::vector<double> y(o * on * on);
  for (std::size_t oc = 0; oc < o; ++oc)
    for (std::size_t yy = 0; yy < on; ++yy)
      for (std::size_t xx = 0; xx < on; ++xx) {
        double a = b[oc];
        for (std::size_t ic = 0; ic < c; ++ic)
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
              a += w[((oc * c + ic) * k + i) * k + j] * x[(ic * n + yy * s + i) * n + xx * s + j];
        y[(oc * on + yy) * on + xx] = std::max(0.0, a);
      }
  return y;
}

std::vector<double> dense(const std::vector<double>& w, const std::vector<double>& b, const std::vector<double>& in) {
  std::vector<double> out(b.size());
  for (std::size_t r = 0; r < out.size(); ++r) {
    double a = b[r];
    for (std::size_t i = 0; i < in.size(); ++i) a += w[r * in.size() + i] * in[i];
    out[r] = a;
  }
  return out;
}

std::vector<double> widen(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Double-precision forward written directly from the tensor layout; the
// finite-difference side of the input check runs through this, so float
// rounding between layers does not swamp the difference quotient.
struct ReferenceTrace {
  std::vector<std::vector<double>> relu;  // each conv layer, then fc
  std::vector<std::size_t> side;          // spatial size of each conv output
  std::vector<double> raw, q;
};

ReferenceTrace reference_forward(const FrozenModel& m, std::vector<double> x) {
  ReferenceTrace t;
  std::size_t c = NetworkSpec::kInputChannels, n = NetworkSpec::kInputSize;
  for (std::size_t l = 0; l < m.spec.conv_layers.size(); ++l) {
    const std::string p = "conv" + std::to_string(l + 1);
    const Tensor& w = m.tensors.get(p + ".w");
    std::size_t on = 0;
    std::vector<double> y = conv_relu(x, c, n, widen(w), widen(m.tensors.get(p + ".b")), w.dim(0), w.dim(2),
                                      static_cast<std::size_t>(m.spec.conv_layers[l].stride), on);
    const std::size_t o = w.dim(0);
    t.relu.push_back(y);
    t.side.push_back(on);
    x = std::move(y);
    c = o;
    n = on;
  }
  std::vector<double> fc = dense(widen(m.tensors.get("fc.w")), widen(m.tensors.get("fc.b")), x);
  for (auto& v : fc) v = std::max(0.0, v);
  t.relu.push_back(fc);
  auto append = [&](const std::string& name) {
    const auto part = dense(widen(m.tensors.get(name + ".w")), widen(m.tensors.get(name + ".b")), fc);
    t.raw.insert(t.raw.end(), part.begin(), part.end());
  };
  const std::size_t a = static_cast<std::size_t>(m.spec.n_actions);
  switch (m.spec.head) {
    case HeadKind::Q:
      append("head");
      t.q = t.raw;
      break;
    case HeadKind::ActorCritic:
      append("head.policy");
      append("head.value");
      t.q.assign(t.raw.begin(), t.raw.begin() + static_cast<std::ptrdiff_t>(a));
      break;
    case HeadKind::Dueling: {
      append("head.value");
      append("head.adv");
      const double mean = std::accumulate(t.raw.begin() + 1, t.raw.end(), 0.0) / static_cast<double>(a);
      for (std::size_t i = 0; i < a; ++i) t.q.push_back(t.raw[0] + t.raw[1 + i] - mean);
      break;
    }
    case HeadKind::C51: {
      append("head");
      const auto z = m.spec.c51->support();
      for (std::size_t act = 0; act < a; ++act) {
        const double* logits = t.raw.data() + act * z.size();
        const double top = *std::max_element(logits, logits + z.size());
        double norm = 0.0, e = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
          const double p = std::exp(logits[i] - top);
          norm += p;
          e += p * z[i];
        }
        t.q.push_back(e / norm);
      }
      break;
    }
  }
  return t;
}

// Mean cross-entropy of the classifier in double, with every ReLU output.
using DoubleParams = std::map<std::string, std::vector<double>>;

std::pair<double, std::vector<std::vector<double>>> reference_loss(const ClassifierSpec& spec, const DoubleParams& p,
                                                                   const std::vector<Tensor>& inputs,
                                                                   const std::vector<int>& labels) {
  double total = 0.0;
  std::vector<std::vector<double>> pattern;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    std::vector<double> x = widen(inputs[b]);
    std::size_t c = static_cast<std::size_t>(spec.in_channels), n = static_cast<std::size_t>(spec.in_size);
    for (std::size_t l = 0; l < spec.conv.size(); ++l) {
      const std::string name = "conv" + std::to_string(l + 1);
      const auto& cl = spec.conv[l];
      std::size_t on = 0;
      x = conv_relu(x, c, n, p.at(name + ".w"), p.at(name + ".b"), static_cast<std::size_t>(cl.out_channels),
                    static_cast<std::size_t>(cl.kernel), static_cast<std::size_t>(cl.stride), on);
      pattern.push_back(x);
      c = static_cast<std::size_t>(cl.out_channels);
      n = on;
    }
    for (std::size_t l = 0; l <= spec.hidden.size(); ++l) {
      const std::string name = "fc" + std::to_string(l + 1);
      x = dense(p.at(name + ".w"), p.at(name + ".b"), x);
      if (l < spec.hidden.size()) {
        for (auto& v : x) v = std::max(0.0, v);
        pattern.push_back(x);
      }
    }
    const double top = *std::max_element(x.begin(), x.end());
    double norm = 0.0;
    for (double v : x) norm += std::exp(v - top);
    total += std::log(norm) + top - x[static_cast<std::size_t>(labels[b])];
  }
  return {total / static_cast<double>(inputs.size()), pattern};
}

double reference_objective(const ReferenceTrace& t, const Objective& o) {
  switch (o.layer.kind) {
    case LayerId::Kind::Conv: {
      const std::size_t l = static_cast<std::size_t>(o.layer.conv_index), n = t.side[l];
      const auto& a = t.relu[l];
      const std::size_t c = static_cast<std::size_t>(o.index);
      if (o.target == Objective::Target::Unit)
        return a[(c * n + static_cast<std::size_t>(o.y)) * n + static_cast<std::size_t>(o.x)];
      return std::accumulate(a.begin() + static_cast<std::ptrdiff_t>(c * n * n),
                             a.begin() + static_cast<std::ptrdiff_t>((c + 1) * n * n), 0.0) /
             static_cast<double>(n * n);
    }
    case LayerId::Kind::Fc: return t.relu.back()[static_cast<std::size_t>(o.index)];
    case LayerId::Kind::HeadRaw: return t.raw[static_cast<std::size_t>(o.index)];
    case LayerId::Kind::Q: return t.q[static_cast<std::size_t>(o.index)];
  }
  return 0.0;
}

}  // namespace

GradCheck check_input_gradient(const FrozenModel& model, const Tensor& obs, const Objective& objective,
                               std::mt19937_64& rng, int extra, double h) {
  GradCheck out;
  const auto analytic = objective_gradient(model, obs, objective);
  const std::vector<double> base(obs.data().begin(), obs.data().end());
  auto eval_at = [&](std::size_t i, double d) {
    std::vector<double> x = base;
    x[i] += d;
    const auto t = reference_forward(model, std::move(x));
    return std::pair{reference_objective(t, objective), t.relu};
  };
  check_coordinates(analytic.gradient.data(), eval_at, rng, extra, h, out);
  return out;
}

GradCheck check_param_gradient(const ConvClassifier& net, const std::vector<Tensor>& inputs,
                               const std::vector<int>& labels, std::mt19937_64& rng, int per_tensor, double h) {
  GradCheck out;
  std::vector<const Tensor*> ptrs;
  for (const auto& t : inputs) ptrs.push_back(&t);
  const auto analytic = param_gradient(net, ptrs, labels);
  DoubleParams base;
  for (const auto& [name, shape] : net.spec().layout()) base[name] = widen(net.params().get(name));
  for (const auto& [name, g] : analytic.gradients) {
    auto eval_at = [&, name = name](std::size_t i, double d) {
      DoubleParams p = base;
      p.at(name)[i] += d;
      return reference_loss(net.spec(), p, inputs, labels);
    };
    check_coordinates(g.data(), eval_at, rng, per_tensor - 1, h, out);
  }
  return out;
}

Tensor stripe_texture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int period = std::uniform_int_distribution<int>(6, 12)(rng);
  const int phase = std::uniform_int_distribution<int>(0, period - 1)(rng);
  const bool vertical = rng() & 1;
  Tensor t({1, kObsSize, kObsSize});
  for (std::size_t y = 0; y < kObsSize; ++y)
    for (std::size_t x = 0; x < kObsSize; ++x) {
      const int c = static_cast<int>(vertical ? x : y) + phase;
      t.at(0, y, x) = (c / (period / 2)) % 2 ? 0.8f : 0.2f;
    }
  return t;
}

Tensor blob_texture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(10.0, 74.0);
  Tensor t({1, kObsSize, kObsSize}, 0.5f);
  for (int b = 0; b < 4; ++b) {
    const double cy = pos(rng), cx = pos(rng);
    for (std::size_t y = 0; y < kObsSize; ++y)
      for (std::size_t x = 0; x < kObsSize; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        t.at(0, y, x) = static_cast<float>(std::min(1.0, t.at(0, y, x) + 0.5 * std::exp(-d2 / 60.0)));
      }
  }
  return t;
}

Matrix gaussian_clusters(int clusters, int n, int dims, double separation, std::uint64_t seed, std::vector<int>& labels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(static_cast<std::size_t>(clusters * n), static_cast<std::size_t>(dims));
  labels.clear();
  for (int c = 0; c < clusters; ++c)
    for (int i = 0; i < n; ++i) {
      const std::size_t r = static_cast<std::size_t>(c * n + i);
      for (int d = 0; d < dims; ++d) x(r, static_cast<std::size_t>(d)) = g(rng);
      // Centres sit on orthogonal axes, pairwise `separation` apart.
      x(r, static_cast<std::size_t>(c)) += separation / std::sqrt(2.0);
      labels.push_back(c);
    }
  return x;
}

double knn_purity(const Matrix& e, const std::vector<int>& labels, int k) {
  const std::size_t n = e.rows;
  double same = 0.0;
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < e.cols; ++c) s += (e(i, c) - e(j, c)) * (e(i, c) - e(j, c));
      d[j] = {j == i ? std::numeric_limits<double>::infinity() : s, j};
    }
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    for (int m = 0; m < k; ++m) same += labels[d[static_cast<std::size_t>(m)].second] == labels[i];
  }
  return same / static_cast<double>(n * static_cast<std::size_t>(k));
}

std::vector<double> covariance_eigenvalues(const Matrix& x) {
  const std::size_t n = x.rows, d = x.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c) / static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += (x(r, a) - mean[a]) * (x(r, b) - mean[b]);
  cov /= static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + d);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

double row_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

FrozenModel all_positive_model(std::uint64_t seed) {
  FrozenModel m = random_model(HeadKind::Q, 4, seed);
  for (auto& [name, t] : m.tensors)
    for (auto& v : t.data()) v = 0.01f;
  return m;
}

PerturbedSupport perturbation_support(const FrozenModel& model, int layer, int channel, int y, int x,
                                      std::uint64_t seed) {
  const Tensor base = uniform_tensor({kStackDepth, kObsSize, kObsSize}, 99, 0.2, 0.8);
  const auto c = static_cast<std::size_t>(channel), uy = static_cast<std::size_t>(y), ux = static_cast<std::size_t>(x);
  // Forward through the first `layer` conv layers only.
  auto unit = [&](const Tensor& in) {
    Tensor a = in;
    for (int l = 0; l < layer; ++l) {
      const std::string p = "conv" + std::to_string(l + 1);
      a = relu(conv2d_forward(a, model.tensors.get(p + ".w"), model.tensors.get(p + ".b"),
                              model.spec.conv_layers[static_cast<std::size_t>(l)].stride));
    }
    return a.at(c, uy, ux);
  };
  const float ref = unit(base);
  const int n = static_cast<int>(kObsSize);
  // Perturbs every pixel (all channels) for which pred(row, col) holds.
  auto moved = [&](auto pred) {
    Tensor probe = base;
    for (int py = 0; py < n; ++py)
      for (int px = 0; px < n; ++px)
        if (pred(py, px))
          for (std::size_t ch = 0; ch < kStackDepth; ++ch) probe.at(ch, static_cast<std::size_t>(py), static_cast<std::size_t>(px)) += 0.5f;
    return unit(probe) != ref;
  };
  // Smallest r in [0, n] with pred_r true, for predicates monotone in r.
  auto search = [&](auto pred_r) {
    int lo = 0, hi = n;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (pred_r(mid))
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  };
  PerturbedSupport s;
  // Rows [0, r) move the unit iff r > min row; rows [r + 1, n) iff r < max row.
  s.y0 = search([&](int r) { return moved([&](int py, int) { return py < r; }); }) - 1;
  s.y1 = search([&](int r) { return !moved([&](int py, int) { return py > r; }); }) + 1;
  s.x0 = search([&](int r) { return moved([&](int, int px) { return px < r; }); }) - 1;
  s.x1 = search([&](int r) { return !moved([&](int, int px) { return px > r; }); }) + 1;

  auto pixel = [&](int py, int px) { return moved([&](int a, int b) { return a == py && b == px; }); };
  std::mt19937_64 rng(seed);
  std::vector<std::pair<int, int>> inside{{s.y0, s.x0}, {s.y0, s.x1 - 1}, {s.y1 - 1, s.x0}, {s.y1 - 1, s.x1 - 1}};
  for (int k = 0; k < 12; ++k)
    inside.emplace_back(std::uniform_int_distribution<int>(s.y0, s.y1 - 1)(rng),
                        std::uniform_int_distribution<int>(s.x0, s.x1 - 1)(rng));
  for (auto [py, px] : inside) {
    ++s.inside_probes;
    s.inside_hits += pixel(py, px);
  }
  const int my = (s.y0 + s.y1) / 2, mx = (s.x0 + s.x1) / 2;
  for (auto [py, px] : std::vector<std::pair<int, int>>{{s.y0 - 1, mx}, {s.y1, mx}, {my, s.x0 - 1}, {my, s.x1}}) {
    if (py < 0 || px < 0 || py >= n || px >= n) continue;
    ++s.outside_probes;
    s.outside_hits += pixel(py, px);
  }
  return s;
}

}  // namespace azoo::testing
