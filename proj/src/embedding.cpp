#include "embedding.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>

#include "error.hpp"
#include "fileio.hpp"
#include "image.hpp"

namespace azoo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

PcaResult pca_reduce(const Matrix& x, std::size_t dims) {
  if (x.rows < 2) fail(ErrorKind::InsufficientData, "PCA needs at least two rows");
  if (x.cols == 0 || dims == 0) fail(ErrorKind::InvalidArgument, "PCA needs at least one feature and one component");
  const auto n = static_cast<Eigen::Index>(x.rows);
  const auto d = static_cast<Eigen::Index>(x.cols);
  Eigen::Map<const RowMatrix> data(x.data.data(), n, d);
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const RowMatrix centered = data.rowwise() - mean;
  if (centered.cwiseAbs().maxCoeff() == 0.0) fail(ErrorKind::Degenerate, "PCA input has zero variance");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(centered), Eigen::ComputeThinV);
  const std::size_t k = std::min({dims, x.cols, x.rows});
  Eigen::MatrixXd basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index at = 0;
    basis.col(c).cwiseAbs().maxCoeff(&at);
    if (basis(at, c) < 0) basis.col(c) *= -1.0;
  }
  const Eigen::MatrixXd projected = centered * basis;

  PcaResult out;
  out.projected = Matrix(x.rows, k);
  out.basis = Matrix(x.cols, k);
  out.mean.assign(mean.data(), mean.data() + d);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < k; ++c) out.projected(r, c) = projected(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t r = 0; r < x.cols; ++r)
    for (std::size_t c = 0; c < k; ++c) out.basis(r, c) = basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  const auto& s = svd.singularValues();
  for (std::size_t c = 0; c < k; ++c) {
    const double sv = c < static_cast<std::size_t>(s.size()) ? s(static_cast<Eigen::Index>(c)) : 0.0;
    out.explained_variance.push_back(sv * sv / static_cast<double>(x.rows - 1));
  }
  return out;
}

namespace {

Matrix squared_distances(const Matrix& y) {
  Matrix d(y.rows, y.rows);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = i + 1; j < y.rows; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < y.cols; ++c) {
        const double diff = y(i, c) - y(j, c);
        s += diff * diff;
      }
      d(i, j) = s;
      d(j, i) = s;
    }
  return d;
}

// Entropy (nats) of row i at precision beta; fills p with the normalized row.
double row_entropy(const Matrix& dist, std::size_t i, double beta, double dmin, std::vector<double>& p) {
  double sum = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < dist.cols; ++j) {
    if (j == i) {
      p[j] = 0.0;
      continue;
    }
    const double shifted = dist(i, j) - dmin;
    p[j] = std::exp(-beta * shifted);
    sum += p[j];
    weighted += shifted * p[j];
  }
  for (auto& v : p) v /= sum;
  return std::log(sum) + beta * weighted / sum;
}

void check_tsne_input(const Matrix& y, double perplexity) {
  if (!(perplexity > 0.0)) fail(ErrorKind::InvalidArgument, "perplexity must be positive");
  if (static_cast<double>(y.rows) <= 3.0 * perplexity)
    fail(ErrorKind::InsufficientData, "t-SNE needs more than 3*perplexity points (have " + std::to_string(y.rows) + ")");
  if (y.cols == 0) fail(ErrorKind::InvalidArgument, "t-SNE input has no features");
  for (double v : y.data)
    if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "t-SNE input contains non-finite values");
}

}  // namespace

Affinities conditional_affinities(const Matrix& y, double perplexity, double entropy_tolerance) {
  check_tsne_input(y, perplexity);
  const std::size_t n = y.rows;
  const Matrix dist = squared_distances(y);
  const double target = std::log(perplexity);
  Affinities out{Matrix(n, n), std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, dist(i, j));
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h = row_entropy(dist, i, beta, dmin, p);
    for (int it = 0; it < 200 && std::abs(h - target) > entropy_tolerance; ++it) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = row_entropy(dist, i, beta, dmin, p);
    }
    out.beta[i] = beta;
    out.perplexity[i] = std::exp(h);
    std::copy(p.begin(), p.end(), out.conditional.data.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return out;
}

Matrix joint_affinities(const Matrix& conditional) {
  const std::size_t n = conditional.rows;
  Matrix p(n, n);
  const double norm = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) = (conditional(i, j) + conditional(j, i)) / norm;
  return p;
}

namespace {

// Student-t numerators 1/(1+d²) and their sum over i≠j.
double student_t(const Matrix& emb, Matrix& num) {
  const std::size_t n = emb.rows;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = emb(i, 0) - emb(j, 0), dy = emb(i, 1) - emb(j, 1);
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num(i, j) = v;
      num(j, i) = v;
      sum += 2.0 * v;
    }
  }
  return sum;
}

constexpr double kFloor = 1e-12;

}  // namespace

double tsne_kl(const Matrix& joint, const Matrix& embedding) {
  if (embedding.cols != 2 || embedding.rows != joint.rows) fail(ErrorKind::Shape, "embedding does not match affinities");
  Matrix num(joint.rows, joint.rows);
  const double sum = student_t(embedding, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < joint.rows; ++i)
    for (std::size_t j = 0; j < joint.rows; ++j) {
      if (i == j) continue;
      const double p = joint(i, j);
      if (p <= 0.0) continue;
      kl += p * std::log(std::max(p, kFloor) / std::max(num(i, j) / sum, kFloor));
    }
  return kl;
}

TsneResult tsne(const Matrix& y, const TsneConfig& config) {
  if (config.iterations < 0) fail(ErrorKind::InvalidArgument, "iteration count must be non-negative");
  TsneResult out;
  out.affinities = conditional_affinities(y, config.perplexity, config.entropy_tolerance);
  const Matrix p = joint_affinities(out.affinities.conditional);
  const std::size_t n = y.rows;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> init(0.0, 1e-2);
  Matrix emb(n, 2);
  for (auto& v : emb.data) v = init(rng);
  out.initial_kl = tsne_kl(p, emb);

  Matrix update(n, 2), gains(n, 2, 1.0), grad(n, 2), num(n, n);
  for (int it = 0; it < config.iterations; ++it) {
    const double exaggeration = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = it < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    const double sum = student_t(emb, num);
    std::fill(grad.data.begin(), grad.data.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = (exaggeration * p(i, j) - num(i, j) / sum) * num(i, j);
        gx += w * (emb(i, 0) - emb(j, 0));
        gy += w * (emb(i, 1) - emb(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }
    for (std::size_t k = 0; k < emb.data.size(); ++k) {
      const bool same_sign = (grad.data[k] > 0.0) == (update.data[k] > 0.0);
      gains.data[k] = same_sign ? std::max(gains.data[k] * 0.8, 0.01) : gains.data[k] + 0.2;
      update.data[k] = momentum * update.data[k] - config.learning_rate * gains.data[k] * grad.data[k];
      emb.data[k] += update.data[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += emb(i, 0);
      my += emb(i, 1);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      emb(i, 0) -= mx;
      emb(i, 1) -= my;
    }
  }
  for (double v : emb.data)
    if (!std::isfinite(v)) fail(ErrorKind::Degenerate, "t-SNE diverged");
  out.final_kl = tsne_kl(p, emb);
  out.embedding = std::move(emb);
  return out;
}

std::vector<double> unpack_ram_bits(const RamState& ram) {
  std::vector<double> bits;
  bits.reserve(ram.size() * 8);
  for (std::uint8_t byte : ram)
    for (int b = 7; b >= 0; --b) bits.push_back((byte >> b) & 1 ? 1.0 : 0.0);
  return bits;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string frame_ref(std::size_t rollout, std::size_t step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frames/r%zu_s%05zu.png", rollout, step);
  return buf;
}

std::size_t series_for(std::vector<EmbeddingSeries>& series, const ModelMeta& meta) {
  const std::string algorithm(to_string(meta.algorithm));
  for (std::size_t s = 0; s < series.size(); ++s)
    if (series[s].algorithm == algorithm && series[s].run_id == meta.run_id) return s;
  series.push_back({algorithm, meta.run_id, kPalette[series.size() % std::size(kPalette)]});
  return series.size() - 1;
}

// Identical feature rows are embedded once and share coordinates, so repeated
// states (e.g. the same rollout supplied twice) land on identical points.
EmbeddingResult finish(const Matrix& features, const EmbeddingParams& params, std::vector<EmbeddingSeries> series,
                       std::vector<EmbeddingPoint> points) {
  std::map<std::vector<double>, std::size_t> index;
  std::vector<std::size_t> slot(features.rows);
  Matrix unique(0, features.cols);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto row = features.row(i);
    auto [it, inserted] = index.try_emplace(std::vector<double>(row.begin(), row.end()), unique.rows);
    if (inserted) {
      unique.data.insert(unique.data.end(), row.begin(), row.end());
      ++unique.rows;
    }
    slot[i] = it->second;
  }
  check_tsne_input(unique, params.tsne.perplexity);
  const PcaResult pca = pca_reduce(unique, params.pca_dims);
  const TsneResult t = tsne(pca.projected, params.tsne);
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i].x = t.embedding(slot[i], 0);
    points[i].y = t.embedding(slot[i], 1);
  }
  return {params, std::move(series), std::move(points)};
}

}  // namespace

EmbeddingResult embed_ram_joint(std::span<const Rollout* const> rollouts, const EmbeddingParams& params) {
  if (rollouts.empty()) fail(ErrorKind::InvalidArgument, "joint embedding needs at least one rollout");
  std::size_t total = 0;
  for (const Rollout* r : rollouts) {
    if (!r) fail(ErrorKind::InvalidArgument, "null rollout");
    total += r->size();
  }
  Matrix features(total, kRamBytes * 8);
  std::vector<EmbeddingSeries> series;
  std::vector<EmbeddingPoint> points;
  points.reserve(total);
  std::size_t row = 0;
  for (std::size_t ri = 0; ri < rollouts.size(); ++ri) {
    const Rollout& r = *rollouts[ri];
    const std::size_t s = series_for(series, r.meta.model);
    for (std::size_t t = 0; t < r.size(); ++t, ++row) {
      const auto bits = unpack_ram_bits(r.steps[t].ram);
      std::copy(bits.begin(), bits.end(), features.data.begin() + static_cast<std::ptrdiff_t>(row * features.cols));
      points.push_back({0.0, 0.0, s, ri, t, r.steps[t].score, frame_ref(ri, t)});
    }
  }
  return finish(features, params, std::move(series), std::move(points));
}

Matrix layer_activations(const FrozenModel& model, const Rollout& rollout, const LayerId& layer) {
  if (layer.kind == LayerId::Kind::Conv &&
      (layer.conv_index < 0 || static_cast<std::size_t>(layer.conv_index) >= model.spec.conv_layers.size()))
    fail(ErrorKind::OutOfRange, "layer " + layer.name() + " does not exist in this network");
  if (rollout.size() == 0) fail(ErrorKind::InsufficientData, "rollout has no steps");
  const bool cached = rollout.traces && rollout.traces->size() == rollout.size();
  Matrix out;
  for (std::size_t t = 0; t < rollout.size(); ++t) {
    const ActivationTrace trace = cached ? (*rollout.traces)[t] : forward_with_trace(model, rollout.steps[t].obs.tensor());
    const auto values = trace.layer(layer).data();
    if (t == 0) out = Matrix(rollout.size(), values.size());
    if (values.size() != out.cols) fail(ErrorKind::Shape, "cached activations have inconsistent sizes");
    std::copy(values.begin(), values.end(), out.data.begin() + static_cast<std::ptrdiff_t>(t * out.cols));
  }
  return out;
}

EmbeddingResult embed_hidden(const FrozenModel& model, const Rollout& rollout, const LayerId& layer,
                             const EmbeddingParams& params) {
  const Matrix features = layer_activations(model, rollout, layer);
  std::vector<EmbeddingSeries> series;
  const std::size_t s = series_for(series, model.meta);
  std::vector<EmbeddingPoint> points;
  for (std::size_t t = 0; t < rollout.size(); ++t) points.push_back({0.0, 0.0, s, 0, t, rollout.steps[t].score, frame_ref(0, t)});
  return finish(features, params, std::move(series), std::move(points));
}

namespace {

Image thumbnail(const RgbFrame& frame) {
  const int w = static_cast<int>(kFrameWidth) / 2, h = static_cast<int>(kFrameHeight) / 2;
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto* p = frame.pixels.data() + (static_cast<std::size_t>(2 * y) * kFrameWidth + static_cast<std::size_t>(2 * x)) * 3;
      img.set(x, y, {p[0], p[1], p[2]});
    }
  return img;
}

}  // namespace

void export_embedding(const EmbeddingResult& result, std::span<const Rollout* const> rollouts,
                      const std::filesystem::path& dir) {
  for (const auto& pt : result.points) {
    if (pt.rollout_index >= rollouts.size() || !rollouts[pt.rollout_index])
      fail(ErrorKind::InvalidArgument, "embedding refers to a rollout that was not supplied");
    if (pt.step >= rollouts[pt.rollout_index]->size()) fail(ErrorKind::OutOfRange, "embedding point step out of range");
  }
  ensure_directory(dir / "frames");

  const auto& tc = result.params.tsne;
  nlohmann::json j;
  j["params"] = {{"pca_dims", result.params.pca_dims},
                 {"perplexity", tc.perplexity},
                 {"iterations", tc.iterations},
                 {"seed", tc.seed},
                 {"learning_rate", tc.learning_rate},
                 {"early_exaggeration", tc.early_exaggeration},
                 {"exaggeration_iterations", tc.exaggeration_iterations}};
  j["series"] = nlohmann::json::array();
  for (const auto& s : result.series)
    j["series"].push_back({{"algorithm", s.algorithm}, {"run_id", s.run_id}, {"color_hint", s.color_hint}});
  j["points"] = nlohmann::json::array();
  for (const auto& pt : result.points) {
    j["points"].push_back({{"x", pt.x},
                           {"y", pt.y},
                           {"series_index", pt.series_index},
                           {"rollout_index", pt.rollout_index},
                           {"step", pt.step},
                           {"score", pt.score},
                           {"frame_ref", pt.frame_ref}});
    write_png(thumbnail(rollouts[pt.rollout_index]->steps[pt.step].frame), dir / pt.frame_ref);
  }
  write_text_file(dir / "embedding.json", j.dump(1));
}

EmbeddingResult load_embedding(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    const auto j = nlohmann::json::parse(text);
    EmbeddingResult r;
    const auto& p = j.at("params");
    r.params.pca_dims = p.at("pca_dims").get<std::size_t>();
    r.params.tsne.perplexity = p.at("perplexity").get<double>();
    r.params.tsne.iterations = p.at("iterations").get<int>();
    r.params.tsne.seed = p.at("seed").get<std::uint64_t>();
    r.params.tsne.learning_rate = p.value("learning_rate", r.params.tsne.learning_rate);
    r.params.tsne.early_exaggeration = p.value("early_exaggeration", r.params.tsne.early_exaggeration);
    r.params.tsne.exaggeration_iterations = p.value("exaggeration_iterations", r.params.tsne.exaggeration_iterations);
    for (const auto& s : j.at("series"))
      r.series.push_back({s.at("algorithm").get<std::string>(), s.at("run_id").get<std::string>(),
                          s.at("color_hint").get<std::string>()});
    for (const auto& pt : j.at("points")) {
      EmbeddingPoint e;
      e.x = pt.at("x").get<double>();
      e.y = pt.at("y").get<double>();
      e.series_index = pt.at("series_index").get<std::size_t>();
      e.rollout_index = pt.value("rollout_index", std::size_t{0});
      e.step = pt.at("step").get<std::size_t>();
      e.score = pt.at("score").get<double>();
      e.frame_ref = pt.at("frame_ref").get<std::string>();
      if (e.series_index >= r.series.size()) fail(ErrorKind::Malformed, "point refers to an unknown series");
      r.points.push_back(std::move(e));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Malformed, std::string("embedding.json: ") + e.what());
  }
}

}  // namespace azoo
