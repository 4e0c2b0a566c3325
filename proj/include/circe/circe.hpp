#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

#include "circe/kernels.hpp"
#include "circe/krr_loo.hpp"

namespace circe {

/// plain:    Tr(Kxx Khat) / (B(B-1))
/// debiased: diagonals of both factors removed before the trace
/// centered: Tr(H Kxx H Khat) / (B(B-1)), H = I - 11^T / B
enum class Variant { plain, debiased, centered };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

/// K_yy (Hadamard) Gram of conditionally centered Z features for one batch.
struct CenteredGram {
  Matrix khat_c;
  std::size_t batch_size = 0;
};

struct CirceEstimate {
  double value = 0.0;
  Variant variant = Variant::plain;
  std::size_t batch_size = 0;
};

/// Khat = K_yy o (K_zz - K_yY W1 K_Zz - (K_yY W1 K_Zz)^T + K_yY W2 K_Yy).
/// The supplied bandwidths must match the ones the model was fitted with.
CenteredGram centered_gram(const MatrixRef& batch_y, const MatrixRef& batch_z, const CmeModel& model,
                           const KernelParams& y_params, const KernelParams& z_params);

CirceEstimate circe_statistic(const MatrixRef& k_xx, const CenteredGram& cg, Variant variant);
CirceEstimate circe_statistic(const GramMatrix& k_xx, const CenteredGram& cg, Variant variant);

/// d(statistic)/d(K_xx), a B x B matrix.
Matrix circe_gram_weights(const CenteredGram& cg, Variant variant);

/// Statistic and its gradient with respect to encoder features x (B x d),
/// with Khat held fixed (it depends on y and z only).
struct CirceWithGrad {
  CirceEstimate estimate;
  Matrix grad;
};
CirceWithGrad circe_with_feature_grad(const MatrixRef& features, const KernelParams& x_params,
                                      const CenteredGram& cg, Variant variant);

/// A conditional mean embedding given analytically through its inner products:
///   cross(z, y) = <psi(z), mu(y)>,   inner(y, y') = <mu(y), mu(y')>.
struct ConditionalMeanOracle {
  std::function<double(const Vector& z, const Vector& y)> cross;
  std::function<double(const Vector& y, const Vector& yp)> inner;
};

/// mu(y) = sum_s coeffs(y)_s psi(support_s).
ConditionalMeanOracle kernel_expansion_mean(Matrix support, std::function<Vector(const Vector&)> coeffs,
                                            const KernelParams& z_params);

/// Exact embedding for Z = g(Y) + N(0, noise_var I) under a Gaussian z-kernel.
ConditionalMeanOracle gaussian_additive_mean(std::function<Vector(const Vector&)> g, double noise_var,
                                             const KernelParams& z_params);

CenteredGram centered_gram_oracle(const MatrixRef& batch_y, const MatrixRef& batch_z,
                                  const ConditionalMeanOracle& mu, const KernelParams& y_params,
                                  const KernelParams& z_params);

/// CIRCE with the true conditional mean in place of the holdout regression.
CirceEstimate circe_oracle(const MatrixRef& batch_x_feats, const MatrixRef& batch_y, const MatrixRef& batch_z,
                           const ConditionalMeanOracle& mu, const KernelParams& x_params,
                           const KernelParams& y_params, const KernelParams& z_params, Variant variant);

}  // namespace circe
