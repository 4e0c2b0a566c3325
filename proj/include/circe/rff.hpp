#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "circe/circe.hpp"
#include "circe/kernels.hpp"
#include "circe/krr_loo.hpp"

namespace circe {

/// Random Fourier features for the Gaussian kernel with bandwidth sigma2:
/// r_i(x) = sqrt(2 / D) cos(w_i . x + b_i), w_i ~ N(0, I / sigma2), b_i ~ U[0, 2 pi).
struct RffMap {
  Matrix frequencies;  // d_total x dim
  Vector phases;       // d_total
  double sigma2 = 1.0;
  std::uint64_t seed = 0;

  Index d_total() const { return frequencies.rows(); }
  Index dim() const { return frequencies.cols(); }
};

RffMap sample_rff(Index dim, Index d_total, double sigma2, std::uint64_t seed);

/// Feature matrix (n x D) restricted to `active` columns of the map, scaled by
/// sqrt(2 / D) with D = active.size(). An empty `active` selects all features.
Matrix rff_features(const RffMap& map, const MatrixRef& points, const std::vector<Index>& active = {});

/// Holdout weights projected onto the feature bases, at the full D0 scaling:
///   w1r = R_y(Y)^T W1 R_z(Z),   w2r = R_y(Y)^T W2 R_y(Y),
/// with W1 = (R_y(Y) R_y(Y)^T + lambda I)^-1 and W2 = W1 R_z(Z) R_z(Z)^T W1,
/// the holdout ridge fit under the approximate kernels.
struct RffCmeWeights {
  Matrix w1r;
  Matrix w2r;
  std::size_t refresh_period = 0;  // 0 means never resample
};

RffCmeWeights precompute_rff_weights(const CmeModel& model, const RffMap& y_map, const RffMap& z_map,
                                     std::size_t refresh_period = 0);

/// Uniform draw of d_active of the d_total feature indices without
/// replacement, from a counter-based stream keyed on (seed, batch_index).
/// Returned sorted. d_active == d_total gives all indices.
std::vector<Index> active_subset(Index d_total, Index d_active, std::uint64_t seed, std::uint64_t batch_index);

CenteredGram centered_gram_rff(const MatrixRef& batch_y, const MatrixRef& batch_z, const RffCmeWeights& weights,
                               const RffMap& y_map, const RffMap& z_map, const std::vector<Index>& active,
                               const KernelParams& y_params, const KernelParams& z_params);

CirceEstimate circe_rff(const MatrixRef& batch_x_gram, const MatrixRef& batch_y, const MatrixRef& batch_z,
                        const RffCmeWeights& weights, const RffMap& y_map, const RffMap& z_map, Index d_active,
                        std::uint64_t batch_index, Variant variant, const KernelParams& y_params,
                        const KernelParams& z_params);

struct RffSettings {
  Index d_total = 512;
  Index d_active = 512;
  std::size_t refresh_period = 0;
};

/// Batch-indexed RFF estimator. Maps and projected weights are resampled
/// every refresh_period batches; the state for refresh round r depends only
/// on (seed, r), so results do not depend on the order batches are seen in.
class RffCirceEstimator {
 public:
  RffCirceEstimator(std::shared_ptr<const CmeModel> model, RffSettings settings, std::uint64_t seed);

  CenteredGram centered_gram(const MatrixRef& batch_y, const MatrixRef& batch_z, std::uint64_t batch_index) const;

  const RffSettings& settings() const { return settings_; }
  const CmeModel& model() const { return *model_; }

 private:
  struct State {
    std::uint64_t round;
    RffMap y_map;
    RffMap z_map;
    RffCmeWeights weights;
  };

  std::shared_ptr<const State> state_for(std::uint64_t round) const;

  std::shared_ptr<const CmeModel> model_;
  RffSettings settings_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  mutable std::shared_ptr<const State> state_;
};

}  // namespace circe
