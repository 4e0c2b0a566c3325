#include "circe/rff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "circe/rng.hpp"

namespace circe {

namespace {

constexpr Index kBlock = 128;

// out = lhs * rhs computed in fixed column blocks of rhs, so the partition
// (and therefore every floating-point operation) is the same for any thread count.
Matrix blocked_product(const Matrix& lhs, const Matrix& rhs) {
  Matrix out(lhs.rows(), rhs.cols());
  const Index n_blocks = (rhs.cols() + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (Index blk = 0; blk < n_blocks; ++blk) {
    const Index start = blk * kBlock;
    const Index width = std::min(kBlock, rhs.cols() - start);
    out.middleCols(start, width).noalias() = lhs * rhs.middleCols(start, width);
  }
  return out;
}

Matrix select(const Matrix& m, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i), static_cast<Index>(j)) = m(idx[i], idx[j]);
  }
  return out;
}

}  // namespace

RffMap sample_rff(Index dim, Index d_total, double sigma2, std::uint64_t seed) {
  require(dim >= 1, "sample_rff: dimension must be positive");
  require(d_total >= 1, "sample_rff: need at least one feature");
  KernelParams::gaussian(sigma2).validate();

  Rng rng(derive_seed(seed, {0x5246ULL}));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(sigma2));
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);

  RffMap map;
  map.sigma2 = sigma2;
  map.seed = seed;
  map.frequencies.resize(d_total, dim);
  map.phases.resize(d_total);
  for (Index i = 0; i < d_total; ++i) {
    for (Index k = 0; k < dim; ++k) map.frequencies(i, k) = normal(rng);
    map.phases[i] = uniform(rng);
  }
  return map;
}

Matrix rff_features(const RffMap& map, const MatrixRef& points, const std::vector<Index>& active) {
  require(points.cols() == map.dim(), "rff_features: point dimension does not match the map");
  if (active.empty()) {
    return cosine_features(points, map.frequencies, map.phases, std::sqrt(2.0 / static_cast<double>(map.d_total())));
  }
  const auto d = static_cast<Index>(active.size());
  Matrix freq(d, map.dim());
  Vector phase(d);
  for (Index j = 0; j < d; ++j) {
    const Index src = active[static_cast<std::size_t>(j)];
    require(src >= 0 && src < map.d_total(), "rff_features: active index out of range");
    freq.row(j) = map.frequencies.row(src);
    phase[j] = map.phases[src];
  }
  return cosine_features(points, freq, phase, std::sqrt(2.0 / static_cast<double>(d)));
}

RffCmeWeights precompute_rff_weights(const CmeModel& model, const RffMap& y_map, const RffMap& z_map,
                                     std::size_t refresh_period) {
  require(y_map.dim() == model.holdout_y.cols(), "precompute_rff_weights: y map dimension mismatch");
  require(z_map.dim() == model.holdout_z.cols(), "precompute_rff_weights: z map dimension mismatch");
  require(y_map.sigma2 == model.y_params.sigma2, "precompute_rff_weights: y map bandwidth differs from model");
  require(z_map.sigma2 == model.z_params.sigma2, "precompute_rff_weights: z map bandwidth differs from model");

  const Matrix ry = rff_features(y_map, model.holdout_y);  // M x D0
  const Matrix rz = rff_features(z_map, model.holdout_z);
  const Matrix ryt = ry.transpose();
  const Matrix rzt = rz.transpose();

  // The ridge inverse is refit on the feature Gram of Y rather than reusing
  // model.w1: the exact inverse has eigenvalues up to 1/lambda and amplifies
  // the feature approximation error of K_yY.
  const RidgeSolver solver(blocked_product(ry, ryt), model.lambda);
  const Matrix w1 = solver.inverse();
  Matrix w2 = blocked_product(blocked_product(w1, blocked_product(rz, rzt)), w1);
  w2 = (0.5 * (w2 + w2.transpose())).eval();

  RffCmeWeights w;
  w.refresh_period = refresh_period;
  w.w1r = blocked_product(blocked_product(ryt, w1), rz);
  w.w2r = blocked_product(blocked_product(ryt, w2), ry);
  w.w2r = (0.5 * (w.w2r + w.w2r.transpose())).eval();
  return w;
}

std::vector<Index> active_subset(Index d_total, Index d_active, std::uint64_t seed, std::uint64_t batch_index) {
  require(d_active >= 1, "active_subset: need at least one active feature");
  require(d_active <= d_total, "active_subset: d_active exceeds the sampled feature count");
  std::vector<Index> idx(static_cast<std::size_t>(d_total));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (d_active == d_total) return idx;

  Rng rng(derive_seed(seed, {0x5355ULL, batch_index}));
  for (Index i = 0; i < d_active; ++i) {
    std::uniform_int_distribution<Index> pick(i, d_total - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(d_active));
  std::sort(idx.begin(), idx.end());
  return idx;
}

CenteredGram centered_gram_rff(const MatrixRef& batch_y, const MatrixRef& batch_z, const RffCmeWeights& weights,
                               const RffMap& y_map, const RffMap& z_map, const std::vector<Index>& active,
                               const KernelParams& y_params, const KernelParams& z_params) {
  require(batch_y.rows() >= 2, "circe_rff: batch needs at least two points");
  require(batch_y.rows() == batch_z.rows(), "circe_rff: y and z batches differ in size");
  require(weights.w1r.rows() == y_map.d_total() && weights.w1r.cols() == z_map.d_total(),
          "circe_rff: weights were built from different maps");

  const Index d0 = y_map.d_total();
  const auto d = static_cast<Index>(active.size());
  const Matrix ry = rff_features(y_map, batch_y, active);
  const Matrix rz = rff_features(z_map, batch_z, active);
  const bool full = d == d0;
  const Matrix w1 = full ? weights.w1r : select(weights.w1r, active);
  const Matrix w2 = full ? weights.w2r : select(weights.w2r, active);
  // Stored weights carry the 2/D0 scaling; the active features carry 2/D.
  const double rescale = static_cast<double>(d0) / static_cast<double>(d);

  const Matrix cross = rescale * (ry * w1) * rz.transpose();
  const Matrix self = rescale * (ry * w2) * ry.transpose();
  const Matrix k_yy = gram_entries(batch_y, batch_y, y_params);
  const Matrix k_zz = gram_entries(batch_z, batch_z, z_params);
  Matrix khat = hadamard(k_yy, k_zz - cross - cross.transpose() + self);
  khat = (0.5 * (khat + khat.transpose())).eval();
  return {std::move(khat), static_cast<std::size_t>(batch_y.rows())};
}

CirceEstimate circe_rff(const MatrixRef& batch_x_gram, const MatrixRef& batch_y, const MatrixRef& batch_z,
                        const RffCmeWeights& weights, const RffMap& y_map, const RffMap& z_map, Index d_active,
                        std::uint64_t batch_index, Variant variant, const KernelParams& y_params,
                        const KernelParams& z_params) {
  if (d_active > y_map.d_total()) throw UsageError("circe_rff: d_active exceeds D0");
  const auto active = active_subset(y_map.d_total(), d_active, y_map.seed, batch_index);
  const CenteredGram cg = centered_gram_rff(batch_y, batch_z, weights, y_map, z_map, active, y_params, z_params);
  return circe_statistic(batch_x_gram, cg, variant);
}

RffCirceEstimator::RffCirceEstimator(std::shared_ptr<const CmeModel> model, RffSettings settings, std::uint64_t seed)
    : model_(std::move(model)), settings_(settings), seed_(seed) {
  require(model_ != nullptr, "RffCirceEstimator: missing model");
  require(settings_.d_active >= 1 && settings_.d_active <= settings_.d_total,
          "RffCirceEstimator: need 1 <= d_active <= d_total");
}

std::shared_ptr<const RffCirceEstimator::State> RffCirceEstimator::state_for(std::uint64_t round) const {
  {
    std::lock_guard lock(mutex_);
    if (state_ && state_->round == round) return state_;
  }
  auto fresh = std::make_shared<State>();
  fresh->round = round;
  fresh->y_map = sample_rff(model_->holdout_y.cols(), settings_.d_total, model_->y_params.sigma2,
                            derive_seed(seed_, {round, 1}));
  fresh->z_map = sample_rff(model_->holdout_z.cols(), settings_.d_total, model_->z_params.sigma2,
                            derive_seed(seed_, {round, 2}));
  fresh->weights = precompute_rff_weights(*model_, fresh->y_map, fresh->z_map, settings_.refresh_period);
  std::shared_ptr<const State> result = std::move(fresh);
  std::lock_guard lock(mutex_);
  state_ = result;
  return result;
}

CenteredGram RffCirceEstimator::centered_gram(const MatrixRef& batch_y, const MatrixRef& batch_z,
                                              std::uint64_t batch_index) const {
  const std::uint64_t round = settings_.refresh_period == 0 ? 0 : batch_index / settings_.refresh_period;
  const auto state = state_for(round);
  const auto active = active_subset(settings_.d_total, settings_.d_active, derive_seed(seed_, {3}), batch_index);
  return centered_gram_rff(batch_y, batch_z, state->weights, state->y_map, state->z_map, active, model_->y_params,
                           model_->z_params);
}

}  // namespace circe
