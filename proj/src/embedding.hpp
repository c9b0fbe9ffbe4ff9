#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "network.hpp"
#include "rollout.hpp"

namespace azoo {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

struct PcaResult {
  Matrix projected;  // N×k
  Matrix basis;      // D×k, orthonormal columns
  std::vector<double> mean;
  std::vector<double> explained_variance;  // descending, sample variance (N−1)
};

/// Projects onto the top min(dims, D, N) principal components. Each basis
/// vector is signed so its largest-magnitude entry is positive.
PcaResult pca_reduce(const Matrix& x, std::size_t dims = 50);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 3000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double entropy_tolerance = 1e-6;  // nats
  std::uint64_t seed = 0;
};

struct Affinities {
  Matrix conditional;  // row i holds p_{j|i}
  std::vector<double> beta;
  std::vector<double> perplexity;  // exp(entropy) achieved per row
};

/// Per-point Gaussian bandwidths found by bisection on the precision.
Affinities conditional_affinities(const Matrix& y, double perplexity, double entropy_tolerance = 1e-6);

/// Symmetrized joint distribution (p_{j|i} + p_{i|j}) / 2N.
Matrix joint_affinities(const Matrix& conditional);

/// KL(P || Q) for the Student-t similarities of a 2-D embedding.
double tsne_kl(const Matrix& joint, const Matrix& embedding);

struct TsneResult {
  Matrix embedding;  // N×2
  Affinities affinities;
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

/// Exact-gradient t-SNE. Requires N > 3·perplexity.
TsneResult tsne(const Matrix& y, const TsneConfig& config = {});

struct EmbeddingParams {
  std::size_t pca_dims = 50;
  TsneConfig tsne;
};

struct EmbeddingSeries {
  std::string algorithm;
  std::string run_id;
  std::string color_hint;

  bool operator==(const EmbeddingSeries&) const = default;
};

struct EmbeddingPoint {
  double x = 0.0;
  double y = 0.0;
  std::size_t series_index = 0;
  std::size_t rollout_index = 0;  // position in the input rollout list
  std::size_t step = 0;
  double score = 0.0;
  std::string frame_ref;

  bool operator==(const EmbeddingPoint&) const = default;
};

struct EmbeddingResult {
  EmbeddingParams params;
  std::vector<EmbeddingSeries> series;
  std::vector<EmbeddingPoint> points;
};

/// 1024 binary features, most significant bit of each byte first.
std::vector<double> unpack_ram_bits(const RamState& ram);

/// Joint PCA + t-SNE over the RAM bits of every step of every rollout.
/// Rollouts sharing (algorithm, run_id) share a series.
EmbeddingResult embed_ram_joint(std::span<const Rollout* const> rollouts, const EmbeddingParams& params = {});

/// Activation vectors of one layer, from the cached trace or recomputed.
Matrix layer_activations(const FrozenModel& model, const Rollout& rollout, const LayerId& layer);

EmbeddingResult embed_hidden(const FrozenModel& model, const Rollout& rollout, const LayerId& layer = LayerId::fc(),
                             const EmbeddingParams& params = {});

/// Writes embedding.json and one thumbnail per point under frames/.
/// rollouts must be the list the embedding was computed from.
void export_embedding(const EmbeddingResult& result, std::span<const Rollout* const> rollouts,
                      const std::filesystem::path& dir);

/// Parses embedding.json (thumbnails are not read).
EmbeddingResult load_embedding(const std::filesystem::path& path);

}  // namespace azoo
