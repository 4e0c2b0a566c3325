#include "circe/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "circe/rng.hpp"

namespace circe {

namespace {

constexpr Index kMinTailBatch = 8;

Matrix take_rows(const Matrix& m, const std::vector<Index>& idx) {
  if (m.size() == 0) return m;
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = m.row(idx[r]);
  return out;
}

}  // namespace

Dataset rows_of(const Dataset& d, const std::vector<Index>& idx) {
  return {take_rows(d.inputs, idx), take_rows(d.target, idx), take_rows(d.y, idx), take_rows(d.z, idx)};
}

double mse(const MlpModel& model, const Dataset& data) {
  require(data.size() >= 1, "mse: empty dataset");
  const Vector err = predict(model, data.inputs) - data.target.col(0);
  return err.squaredNorm() / static_cast<double>(data.size());
}

TrainResult train(const TrainConfig& config, const Dataset& data, const CirceContext& cme, const Dataset* eval_in,
                  const Dataset* eval_ood, const MlpModel* init) {
  require(config.batch_size >= 2, "train: batch size must be at least 2");
  require(config.epochs >= 0, "train: epochs must be nonnegative");
  require(config.reg.gamma >= 0.0, "train: gamma must be nonnegative");
  require(data.size() >= 2, "train: need at least two training points");
  require(data.target.rows() == data.size() && data.target.cols() == 1, "train: target must be n x 1");
  if (config.reg.method == Method::circe && config.reg.gamma > 0.0) {
    require(!cme.empty(), "train: circe regularization needs a conditional mean model");
  }

  std::vector<Index> widths{data.inputs.cols()};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(1);

  TrainResult result;
  if (init != nullptr) {
    require(init->widths == widths, "train: initial model widths do not match the configuration");
    result.model = *init;
  } else {
    result.model = init_mlp(widths, derive_seed(config.seed, {0x494e4954ULL}));
  }

  Vector params = flatten(result.model);
  AdamState adam;
  const Index n = data.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::uint64_t batch_index = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_seed(config.seed, {0x53485546ULL, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    double stat_sum = 0.0;
    std::size_t finite_steps = 0;
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index len = std::min(config.batch_size, n - start);
      if (start > 0 && len < kMinTailBatch) break;
      const std::vector<Index> idx(order.begin() + start, order.begin() + start + len);
      const Dataset batch = rows_of(data, idx);
      BatchView view{batch.inputs, batch.target, batch.y, batch.z, batch_index++};

      unflatten(result.model, params);
      const LossResult lr = loss_and_grad(result.model, view, cme, config.reg);
      ++result.steps;
      if (!lr.finite) {
        ++result.skipped;
        continue;
      }
      optimizer_step(params, adam, lr.grad, config.optimizer);
      loss_sum += lr.loss;
      stat_sum += lr.statistic;
      ++finite_steps;
    }
    unflatten(result.model, params);

    EpochLog log;
    log.epoch = epoch;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    log.train_loss = finite_steps > 0 ? loss_sum / static_cast<double>(finite_steps) : nan;
    log.statistic = finite_steps > 0 ? stat_sum / static_cast<double>(finite_steps) : nan;
    log.mse_in = eval_in != nullptr ? mse(result.model, *eval_in) : nan;
    log.mse_ood = eval_ood != nullptr ? mse(result.model, *eval_ood) : nan;
    result.log.push_back(log);
  }
  unflatten(result.model, params);
  result.unstable = static_cast<double>(result.skipped) > 0.01 * static_cast<double>(result.steps);
  return result;
}

}  // namespace circe
