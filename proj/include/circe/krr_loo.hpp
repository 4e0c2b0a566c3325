#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "circe/kernels.hpp"

namespace circe {

/// Kernel ridge regression of psi(z) on y fitted on a holdout set.
/// The conditional mean embedding at y is sum_i [K_yY W1]_i psi(z_i).
struct CmeModel {
  Matrix holdout_y;  // M x dim_y
  Matrix holdout_z;  // M x dim_z
  double lambda = 0.0;
  KernelParams y_params;
  KernelParams z_params;
  Matrix w1;  // (K_YY + lambda I)^-1
  Matrix w2;  // W1 K_ZZ W1

  Index size() const { return holdout_y.rows(); }
};

struct LooReport {
  struct Point {
    double lambda;
    double sigma2_y;
  };
  std::vector<Point> grid;
  std::vector<double> errors;  // +inf marks an invalid grid point
  std::size_t best = 0;
};

/// Holdout values 1 - A_ii at or below this are treated as interpolating and
/// get an infinite LOO error.
inline constexpr double kLooGuard = 1e-10;

/// lambda may be 0 (pure interpolation); duplicate holdout points then make
/// the solve fail with a NumericalError.
CmeModel fit_cme(const MatrixRef& holdout_y, const MatrixRef& holdout_z, double lambda,
                 const KernelParams& y_params, const KernelParams& z_params);

/// Weights over the holdout features for each query point: column b holds
/// W1 K_{Y y_b}, so mu(y_b) = sum_i column(b)_i psi(z_i). Shape M x B.
Matrix cme_weights(const CmeModel& model, const MatrixRef& query_y);

/// Closed-form leave-one-out error
///   (1/M) sum_i |psi(z_i) - F(y_i)|^2 / (1 - A_ii)^2,  A = K_YY (K_YY + lambda I)^-1.
/// Returns +inf if some 1 - A_ii <= kLooGuard or the solve fails.
double loo_error(const MatrixRef& holdout_y, const MatrixRef& holdout_z, double lambda,
                 const KernelParams& y_params, const KernelParams& z_params);

/// Evaluates the LOO error on lambda_grid x sigma2_y_grid and refits at the
/// argmin. Ties go to the larger lambda, then the larger sigma2_y.
std::pair<CmeModel, LooReport> select_hyperparams(const MatrixRef& holdout_y, const MatrixRef& holdout_z,
                                                  const std::vector<double>& lambda_grid,
                                                  const std::vector<double>& sigma2_y_grid,
                                                  const KernelParams& z_params);

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{0.001, 0.01, 0.1, 1.0};
  return grid;
}

inline const std::vector<double>& default_sigma2_grid() {
  static const std::vector<double> grid{0.001, 0.01, 0.1, 1.0};
  return grid;
}

}  // namespace circe
