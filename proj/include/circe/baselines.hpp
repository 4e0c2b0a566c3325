#pragma once

#include <string_view>

#include "circe/kernels.hpp"

namespace circe {

/// Generalized covariance measure over all (x_j, z_k) coordinate pairs.
/// Residuals come from per-batch kernel ridge regressions onto y.
struct GcmEstimate {
  double value = 0.0;              // max_jk |T_jk|
  Matrix raw_covs;                 // d_x x d_z normalized statistics T_jk, NaN for excluded pairs
  double regularizer_value = 0.0;  // log-sum-exp smooth max of |T_jk|
};

struct HscicEstimate {
  double value = 0.0;
};

inline constexpr double kGcmTemperature = 10.0;
inline constexpr double kGcmVarianceGuard = 1e-12;
// A product residual whose spread is this small next to its mean is constant
// up to rounding; the pair is excluded like a zero-variance one.
inline constexpr double kGcmRelativeGuard = 1e-8;

GcmEstimate gcm_statistic(const MatrixRef& x_feats, const MatrixRef& z, const MatrixRef& y,
                          const KernelParams& y_params, double lambda, double tau = kGcmTemperature);

HscicEstimate hscic_statistic(const MatrixRef& x_feats, const MatrixRef& z, const MatrixRef& y,
                              const KernelParams& x_params, const KernelParams& z_params,
                              const KernelParams& y_params, double lambda);

enum class Baseline { gcm, hscic };

struct BaselineInputs {
  MatrixRef x_feats;
  MatrixRef z;
  MatrixRef y;
  KernelParams x_params;
  KernelParams z_params;
  KernelParams y_params;
  double lambda;
  double tau = kGcmTemperature;
};

/// Gradient (B x d_x) of the GCM regularizer_value or the HSCIC value with
/// respect to x_feats. Regression weights depend on y only and are constant.
Matrix baseline_grad_wrt_features(Baseline which, const BaselineInputs& in);

/// Value and gradient in one pass; `value` is regularizer_value for GCM.
struct BaselineWithGrad {
  double value = 0.0;
  double reported = 0.0;  // hard-max GCM or HSCIC value
  Matrix grad;
};
BaselineWithGrad baseline_with_grad(Baseline which, const BaselineInputs& in);

}  // namespace circe
