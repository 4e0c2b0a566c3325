#include "circe/krr_loo.hpp"

#include <cmath>
#include <limits>

namespace circe {

namespace {

void check_holdout(const MatrixRef& holdout_y, const MatrixRef& holdout_z) {
  require(holdout_y.rows() >= 2, "holdout needs at least two points");
  require(holdout_y.rows() == holdout_z.rows(), "holdout y and z have different point counts");
}

struct Fit {
  Matrix w1;
  Matrix w2;
};

Fit fit_from_grams(const Matrix& k_yy, const Matrix& k_zz, double lambda) {
  Fit f;
  f.w1 = RidgeSolver(k_yy, lambda).inverse();
  f.w2 = f.w1 * k_zz * f.w1;
  f.w2 = (0.5 * (f.w2 + f.w2.transpose())).eval();
  return f;
}

// With A = K(K + lambda I)^-1 = I - lambda W1, the residual psi(z_i) - F(y_i)
// has coefficient vector lambda * W1 e_i over the holdout features, so its
// squared norm is lambda^2 (W1 K_ZZ W1)_ii and 1 - A_ii = lambda (W1)_ii.
double loo_from_fit(const Fit& f, double lambda) {
  const Index m = f.w1.rows();
  double total = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double one_minus_a = lambda * f.w1(i, i);
    if (!(one_minus_a > kLooGuard)) return std::numeric_limits<double>::infinity();
    const double resid = std::max(0.0, lambda * lambda * f.w2(i, i));
    total += resid / (one_minus_a * one_minus_a);
  }
  const double err = total / static_cast<double>(m);
  return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
}

}  // namespace

CmeModel fit_cme(const MatrixRef& holdout_y, const MatrixRef& holdout_z, double lambda,
                 const KernelParams& y_params, const KernelParams& z_params) {
  check_holdout(holdout_y, holdout_z);
  require(lambda >= 0.0 && std::isfinite(lambda), "fit_cme: lambda must be non-negative");
  y_params.validate();
  z_params.validate();

  const Matrix k_yy = gram_entries(holdout_y, holdout_y, y_params);
  const Matrix k_zz = gram_entries(holdout_z, holdout_z, z_params);
  Fit f = fit_from_grams(k_yy, k_zz, lambda);

  CmeModel model;
  model.holdout_y = holdout_y;
  model.holdout_z = holdout_z;
  model.lambda = lambda;
  model.y_params = y_params;
  model.z_params = z_params;
  model.w1 = std::move(f.w1);
  model.w2 = std::move(f.w2);
  return model;
}

Matrix cme_weights(const CmeModel& model, const MatrixRef& query_y) {
  require(query_y.cols() == model.holdout_y.cols(), "cme_weights: y dimension mismatch");
  return model.w1 * gram_entries(model.holdout_y, query_y, model.y_params);
}

double loo_error(const MatrixRef& holdout_y, const MatrixRef& holdout_z, double lambda,
                 const KernelParams& y_params, const KernelParams& z_params) {
  check_holdout(holdout_y, holdout_z);
  require(lambda > 0.0, "loo_error: lambda must be positive");
  y_params.validate();
  z_params.validate();
  const Matrix k_yy = gram_entries(holdout_y, holdout_y, y_params);
  const Matrix k_zz = gram_entries(holdout_z, holdout_z, z_params);
  try {
    return loo_from_fit(fit_from_grams(k_yy, k_zz, lambda), lambda);
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::pair<CmeModel, LooReport> select_hyperparams(const MatrixRef& holdout_y, const MatrixRef& holdout_z,
                                                  const std::vector<double>& lambda_grid,
                                                  const std::vector<double>& sigma2_y_grid,
                                                  const KernelParams& z_params) {
  check_holdout(holdout_y, holdout_z);
  if (lambda_grid.empty() || sigma2_y_grid.empty()) {
    throw ConfigError("select_hyperparams: empty hyperparameter grid");
  }
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw ConfigError("select_hyperparams: lambda grid values must be positive");
  }
  for (double s : sigma2_y_grid) {
    if (!(s > 0.0)) throw ConfigError("select_hyperparams: sigma2 grid values must be positive");
  }
  z_params.validate();

  LooReport report;
  for (double s2 : sigma2_y_grid) {
    for (double l : lambda_grid) report.grid.push_back({l, s2});
  }
  report.errors.assign(report.grid.size(), std::numeric_limits<double>::infinity());

  const Matrix k_zz = gram_entries(holdout_z, holdout_z, z_params);
  const auto n_sigma = static_cast<long>(sigma2_y_grid.size());
  const std::size_t n_lambda = lambda_grid.size();

  // Grid points are independent; each writes only its own slot.
#pragma omp parallel for schedule(dynamic)
  for (long si = 0; si < n_sigma; ++si) {
    const auto s = static_cast<std::size_t>(si);
    const Matrix k_yy = gram_entries(holdout_y, holdout_y, KernelParams::gaussian(sigma2_y_grid[s]));
    for (std::size_t li = 0; li < n_lambda; ++li) {
      double err = std::numeric_limits<double>::infinity();
      try {
        err = loo_from_fit(fit_from_grams(k_yy, k_zz, lambda_grid[li]), lambda_grid[li]);
      } catch (const NumericalError&) {
      }
      report.errors[s * n_lambda + li] = err;
    }
  }

  bool found = false;
  for (std::size_t i = 0; i < report.grid.size(); ++i) {
    if (!std::isfinite(report.errors[i])) continue;
    if (!found) {
      report.best = i;
      found = true;
      continue;
    }
    const auto& cand = report.grid[i];
    const auto& cur = report.grid[report.best];
    const double e = report.errors[i];
    const double eb = report.errors[report.best];
    const bool better = e < eb || (e == eb && (cand.lambda > cur.lambda ||
                                               (cand.lambda == cur.lambda && cand.sigma2_y > cur.sigma2_y)));
    if (better) report.best = i;
  }
  if (!found) throw ConfigError("select_hyperparams: every grid point is invalid");

  const auto& best = report.grid[report.best];
  CmeModel model = fit_cme(holdout_y, holdout_z, best.lambda, KernelParams::gaussian(best.sigma2_y), z_params);
  return {std::move(model), std::move(report)};
}

}  // namespace circe
