#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "circe/krr_loo.hpp"
#include "circe/scm.hpp"
#include "circe/train.hpp"

namespace circe {

struct VcfResult {
  double value = 0.0;
  Index n_interventions = 0;
  Index n_points = 0;
};

/// Predictions for every row of a (possibly intervened) batch.
using BatchPredictor = std::function<Vector(const ScmBatch&)>;

/// For every point, z' is resampled n_interventions times from the batch's own
/// Z column, the point is regenerated with intervene_z, and the sample
/// variance of the predictions is taken. VCF is the mean over points.
VcfResult eval_vcf(const BatchPredictor& predictor, const ScmBatch& batch, Index n_interventions,
                   std::uint64_t seed);

/// Indices of the non-dominated (mse, vcf) points, both minimized, ordered by
/// mse then vcf then index.
std::vector<std::size_t> pareto_front(const std::vector<std::pair<double, double>>& points);

inline constexpr int kSchemaVersion = 1;

struct RunRecord {
  std::string case_id;
  std::string method;
  std::string variant;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double sigma2_y = 0.0;
  double sigma2_z = 0.0;
  double mse_in = 0.0;
  std::optional<double> mse_ood;
  double vcf = 0.0;
  double statistic_final = 0.0;
  bool unstable = false;
  double wall_seconds = 0.0;
};

void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const RunRecord& r);
std::vector<RunRecord> read_csv(std::istream& is);

struct NonlinearSettings {
  double alpha = 1.0;
  double sigma_z = 1.0;
  double sigma_y = 0.5;
};

struct ExperimentConfig {
  std::vector<ScmCase> cases{ScmCase::uni1};
  std::vector<Method> methods{Method::none, Method::circe};
  std::vector<double> gammas{0.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  Index n = 10000;
  Index n_train = 8000;
  Index d = 2;
  Index holdout = 1000;
  bool reuse_holdout = false;
  NonlinearSettings nonlinear;

  TrainConfig train;  // reg.method / reg.gamma / seed are set per run
  // Unset means the per-case default: univariate 1e-4 / 0.3, otherwise 3e-4 / 0.1.
  std::optional<double> lr;
  std::optional<double> weight_decay;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> sigma2_y_grid = default_sigma2_grid();
  double sigma2_z = 1.0;
  bool use_rff = true;
  RffSettings rff;
  Index vcf_interventions = 20;
};

/// Strict JSON reader: unknown keys and wrong types are ConfigErrors.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Log-spaced grid with `points` values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int points);

/// Standardized splits plus the raw batches needed for counterfactuals.
struct PreparedData {
  ScmBatch raw_train;  // training points that reach the optimizer
  ScmBatch raw_holdout;
  ScmBatch raw_eval;
  std::optional<ScmBatch> raw_ood;
  Standardizer inputs;
  Standardizer target;
  Standardizer y;
  Standardizer z;
  Dataset train;
  Dataset holdout;
  Dataset eval;
  std::optional<Dataset> ood;

  Dataset standardize(const ScmBatch& raw) const;
};

/// The training configuration a run of `c` actually uses.
TrainConfig effective_train_config(const ExperimentConfig& cfg, ScmCase c);

PreparedData prepare_data(const ExperimentConfig& cfg, ScmCase c, std::uint64_t seed);

/// LOO selection of (lambda, sigma2_y) on the standardized holdout split.
std::pair<CmeModel, LooReport> fit_holdout_cme(const ExperimentConfig& cfg, const PreparedData& data);

struct RunOutput {
  RunRecord record;
  TrainResult trained;
};

RunOutput run_single(const ExperimentConfig& cfg, ScmCase c, Method method, double gamma, std::uint64_t seed);

struct SweepSummary {
  std::size_t rows = 0;
  std::size_t unstable = 0;
};

/// Cross product cases x methods x gammas x seeds. Rows are written in that
/// order through one writer regardless of `workers`. A run that throws is
/// recorded as an unstable row with NaN metrics.
SweepSummary run_sweep(const ExperimentConfig& cfg, std::ostream& csv, int workers = 1);

}  // namespace circe
