#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance runner.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "embedding.hpp"
#include "model.hpp"
#include "network.hpp"
#include "rollout.hpp"
#include "train.hpp"

namespace azoo::testing {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Tensor uniform_tensor(const Shape& shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0);

FrozenModel random_model(HeadKind head, int n_actions, std::uint64_t seed, Algorithm algorithm = Algorithm::Other,
                         const std::string& run_id = "0");

/// Default kernel/stride chain with 2-channel convs and an 8-wide fc: cheap to
/// run in episode-heavy tests.
FrozenModel tiny_model(HeadKind head, int n_actions, std::uint64_t seed, const std::string& game = "catch");

Rollout toy_rollout(const FrozenModel& model, int steps, std::uint64_t seed, bool capture = false,
                    PolicyMode mode = PolicyMode::Greedy);

/// Every objective kind the network supports, drawn at random; unit targets
/// are chosen among units that are active on `obs` when any are.
Objective random_objective(const FrozenModel& model, const Tensor& obs, std::mt19937_64& rng);

struct GradCheck {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;  // coordinates whose ±h neighbourhood crosses a ReLU kink
};

/// Central differences on single input coordinates: the largest-|g| one plus
/// `extra` random coordinates with |g| ≥ 10% of the largest. Coordinates whose
/// ±h probes change the ReLU pattern are resampled, since the finite
/// difference is then not a derivative estimate.
GradCheck check_input_gradient(const FrozenModel& model, const Tensor& obs, const Objective& objective,
                               std::mt19937_64& rng, int extra = 4, double h = 1e-3);

/// The same procedure over classifier parameters, per tensor.
GradCheck check_param_gradient(const ConvClassifier& net, const std::vector<Tensor>& inputs,
                               const std::vector<int>& labels, std::mt19937_64& rng, int per_tensor = 2,
                               double h = 1e-3);

/// Two visually distinct deterministic texture families (1×84×84).
Tensor stripe_texture(std::uint64_t seed);
Tensor blob_texture(std::uint64_t seed);

/// n points per cluster in `dims` dimensions, unit-variance clusters whose
/// centres are `separation` apart along orthogonal axes.
Matrix gaussian_clusters(int clusters, int n, int dims, double separation, std::uint64_t seed,
                         std::vector<int>& labels);

/// Fraction of k-nearest neighbours (Euclidean, 2-D) sharing the point's label.
double knn_purity(const Matrix& embedding, const std::vector<int>& labels, int k);

/// Naive covariance eigendecomposition: eigenvalues in descending order.
std::vector<double> covariance_eigenvalues(const Matrix& x);

/// Entropy (nats) of one probability row, skipping zeros.
double row_entropy(std::span<const double> p);

/// Brute-force perturbation oracle for the set of input pixels that move one
/// conv unit. The bounding box comes from binary searches over row and column
/// blocks; `inside_hits`/`inside_probes` count single-pixel probes inside the
/// box (corners plus a random sample) that moved the unit, and
/// `outside_hits` counts probes on the ring just outside the box that did.
struct PerturbedSupport {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // exclusive upper bounds
  int inside_probes = 0;
  int inside_hits = 0;
  int outside_probes = 0;
  int outside_hits = 0;
};
PerturbedSupport perturbation_support(const FrozenModel& model, int layer, int channel, int y, int x,
                                      std::uint64_t seed = 0);

/// A model with positive, constant weights everywhere (no dead units), used
/// by the perturbation oracle so every input pixel in the receptive field
/// reaches the probed unit.
FrozenModel all_positive_model(std::uint64_t seed);

}  // namespace azoo::testing
