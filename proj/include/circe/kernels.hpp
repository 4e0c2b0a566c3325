#pragma once

#include <Eigen/Dense>

#include "circe/errors.hpp"

namespace circe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using MatrixRef = Eigen::Ref<const Matrix>;
using VectorRef = Eigen::Ref<const Vector>;

enum class KernelFamily { gaussian };

/// Gaussian kernel k(x, x') = exp(-|x - x'|^2 / (2 sigma2)).
/// The bandwidth is stored as sigma^2, the same unit the hyperparameter grids use.
struct KernelParams {
  KernelFamily family = KernelFamily::gaussian;
  double sigma2 = 1.0;

  static KernelParams gaussian(double sigma2) { return {KernelFamily::gaussian, sigma2}; }
  void validate() const;
  bool operator==(const KernelParams&) const = default;
};

struct GramMatrix {
  Matrix entries;
  KernelParams row_params;
  KernelParams col_params;

  Index rows() const { return entries.rows(); }
  Index cols() const { return entries.cols(); }
};

double kernel_eval(const VectorRef& x, const VectorRef& xp, const KernelParams& params);

/// Entry (i, j) = k(rows_i, cols_j). Point sets hold one point per row.
/// Parallel over rows; each entry is computed independently so the result
/// does not depend on the thread count.
GramMatrix gram(const MatrixRef& rows, const MatrixRef& cols, const KernelParams& params);
Matrix gram_entries(const MatrixRef& rows, const MatrixRef& cols, const KernelParams& params);

/// Cholesky factorization of K + lambda I with jitter escalation.
/// On failure the diagonal is bumped by 1e-10 * mean(diag K), then x10 per
/// retry, up to 1e-4 * mean(diag K); after that a NumericalError is thrown.
class RidgeSolver {
 public:
  RidgeSolver(const MatrixRef& k, double lambda);

  Matrix solve(const MatrixRef& b) const;
  Matrix inverse() const;
  double jitter() const { return jitter_; }
  Index size() const { return n_; }

 private:
  Matrix system_;  // K + lambda I, without jitter
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
  Index n_ = 0;
};

/// Returns S with (K + lambda I) S = B.
Matrix regularized_solve(const MatrixRef& k, double lambda, const MatrixRef& b);

/// sum_ij A_ij B_ji without forming A B. Per-row partial sums are combined
/// serially, so the value is independent of the thread count.
double trace_product(const MatrixRef& a, const MatrixRef& b);

Matrix hadamard(const MatrixRef& a, const MatrixRef& b);

/// Gradient of sum_ij G_ij k(x_i, x_j) with respect to the points x (B x d),
/// using dk(x_i, x_j)/dx_i = -((x_i - x_j) / sigma2) k(x_i, x_j).
/// `k` must be gram(x, x).
Matrix gram_gradient(const MatrixRef& points, const MatrixRef& k, const MatrixRef& weights,
                     const KernelParams& params);

/// out(i, j) = scale * cos(<points_i, frequencies_j> + phases_j), rows of
/// `frequencies` are the sampled spectral points.
Matrix cosine_features(const MatrixRef& points, const MatrixRef& frequencies, const VectorRef& phases,
                       double scale);

/// Smallest eigenvalue of the symmetric part of `a`.
double min_eigenvalue(const MatrixRef& a);

}  // namespace circe
