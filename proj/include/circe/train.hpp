#pragma once

#include <cstdint>
#include <vector>

#include "circe/mlp.hpp"

namespace circe {

/// Standardized arrays the trainer consumes. target is n x 1.
struct Dataset {
  Matrix inputs;
  Matrix target;
  Matrix y;
  Matrix z;

  Index size() const { return inputs.rows(); }
};

Dataset rows_of(const Dataset& d, const std::vector<Index>& idx);

struct TrainConfig {
  std::vector<Index> hidden = std::vector<Index>(9, 64);
  Regularizer reg;
  Index batch_size = 256;
  int epochs = 100;
  OptimizerSettings optimizer{Optimizer::adamw, 1e-4, 0.3};
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // mean over finite steps
  double statistic = 0.0;   // mean batch statistic over finite steps
  double mse_in = 0.0;      // NaN without an eval set
  double mse_ood = 0.0;     // NaN without an OOD set
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLog> log;
  std::size_t steps = 0;
  std::size_t skipped = 0;
  bool unstable = false;  // more than 1% of steps skipped
};

double mse(const MlpModel& model, const Dataset& data);

/// Shuffled mini-batch training. A trailing partial batch is used if it has
/// at least 8 points. Steps with a non-finite loss or gradient are skipped.
/// `init` replaces the random initialization when given (same widths).
TrainResult train(const TrainConfig& config, const Dataset& data, const CirceContext& cme,
                  const Dataset* eval_in = nullptr, const Dataset* eval_ood = nullptr,
                  const MlpModel* init = nullptr);

}  // namespace circe
