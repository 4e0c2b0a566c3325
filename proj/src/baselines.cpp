#include "circe/baselines.hpp"

#include <cmath>
#include <limits>

namespace circe {

namespace {

void check_batch(const MatrixRef& x, const MatrixRef& z, const MatrixRef& y, double lambda) {
  require(x.rows() >= 8, "baseline statistics need a batch of at least 8 points");
  require(x.rows() == z.rows() && x.rows() == y.rows(), "baseline statistics: batch sizes differ");
  require(lambda > 0.0, "baseline statistics: lambda must be positive");
}

struct GcmState {
  GcmEstimate est;
  Matrix rx;  // residuals of x on y, B x d_x
  Matrix rz;
  RidgeSolver solver;
};

GcmState gcm_state(const MatrixRef& x, const MatrixRef& z, const MatrixRef& y, const KernelParams& y_params,
                   double lambda, double tau) {
  check_batch(x, z, y, lambda);
  require(tau > 0.0, "gcm: temperature must be positive");
  const Matrix k_y = gram_entries(y, y, y_params);
  RidgeSolver solver(k_y, lambda);
  // Ridge residual t - K(K + lambda I)^-1 t = lambda (K + lambda I)^-1 t.
  Matrix rx = lambda * solver.solve(x);
  Matrix rz = lambda * solver.solve(z);

  const auto b = static_cast<double>(x.rows());
  GcmEstimate est;
  est.raw_covs = Matrix::Constant(x.cols(), z.cols(), std::numeric_limits<double>::quiet_NaN());
  double best = -1.0;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index k = 0; k < z.cols(); ++k) {
      const Vector r = rx.col(j).cwiseProduct(rz.col(k));
      const double m = r.mean();
      const double var = (r.array() - m).square().sum() / b;
      const double sd = std::sqrt(var);
      if (!(sd >= kGcmVarianceGuard) || sd < kGcmRelativeGuard * std::abs(m)) continue;
      const double t = std::sqrt(b) * m / sd;
      est.raw_covs(j, k) = t;
      best = std::max(best, std::abs(t));
    }
  }
  if (best < 0.0) throw NumericalError("gcm: every coordinate pair failed the variance guard");
  est.value = best;

  double acc = 0.0;
  for (Index j = 0; j < est.raw_covs.rows(); ++j) {
    for (Index k = 0; k < est.raw_covs.cols(); ++k) {
      const double t = est.raw_covs(j, k);
      if (std::isnan(t)) continue;
      acc += std::exp(tau * (std::abs(t) - best));
    }
  }
  est.regularizer_value = best + std::log(acc) / tau;
  return {std::move(est), std::move(rx), std::move(rz), std::move(solver)};
}

struct HscicState {
  double value;
  Matrix wt;  // column i = (K_y + lambda I)^-1 K_y e_i
  Matrix k_x;
  Matrix k_z;
  Matrix pz;  // K_z wt
  Vector zz;  // w_i^T K_z w_i
};

HscicState hscic_state(const MatrixRef& x, const MatrixRef& z, const MatrixRef& y, const KernelParams& x_params,
                       const KernelParams& z_params, const KernelParams& y_params, double lambda) {
  check_batch(x, z, y, lambda);
  const Matrix k_y = gram_entries(y, y, y_params);
  HscicState s;
  s.wt = regularized_solve(k_y, lambda, k_y);
  s.k_x = gram_entries(x, x, x_params);
  s.k_z = gram_entries(z, z, z_params);
  const Matrix px = s.k_x * s.wt;
  s.pz = s.k_z * s.wt;
  const Matrix q = hadamard(s.k_x, s.k_z) * s.wt;

  const Vector joint = s.wt.cwiseProduct(q).colwise().sum().transpose();
  const Vector xx = s.wt.cwiseProduct(px).colwise().sum().transpose();
  s.zz = s.wt.cwiseProduct(s.pz).colwise().sum().transpose();
  const Vector mixed = s.wt.cwiseProduct(px).cwiseProduct(s.pz).colwise().sum().transpose();
  s.value = (joint - 2.0 * mixed + xx.cwiseProduct(s.zz)).mean();
  return s;
}

}  // namespace

GcmEstimate gcm_statistic(const MatrixRef& x_feats, const MatrixRef& z, const MatrixRef& y,
                          const KernelParams& y_params, double lambda, double tau) {
  return gcm_state(x_feats, z, y, y_params, lambda, tau).est;
}

HscicEstimate hscic_statistic(const MatrixRef& x_feats, const MatrixRef& z, const MatrixRef& y,
                              const KernelParams& x_params, const KernelParams& z_params,
                              const KernelParams& y_params, double lambda) {
  return {hscic_state(x_feats, z, y, x_params, z_params, y_params, lambda).value};
}

BaselineWithGrad baseline_with_grad(Baseline which, const BaselineInputs& in) {
  BaselineWithGrad out;
  if (which == Baseline::gcm) {
    GcmState s = gcm_state(in.x_feats, in.z, in.y, in.y_params, in.lambda, in.tau);
    const Index n = in.x_feats.rows();
    const auto b = static_cast<double>(n);
    const double best = s.est.value;

    // Softmax weights of the log-sum-exp; they sum to one.
    Matrix weight = Matrix::Zero(s.est.raw_covs.rows(), s.est.raw_covs.cols());
    double norm = 0.0;
    for (Index j = 0; j < weight.rows(); ++j) {
      for (Index k = 0; k < weight.cols(); ++k) {
        const double t = s.est.raw_covs(j, k);
        if (std::isnan(t)) continue;
        weight(j, k) = std::exp(in.tau * (std::abs(t) - best));
        norm += weight(j, k);
      }
    }
    weight /= norm;

    Matrix g_rx = Matrix::Zero(n, in.x_feats.cols());
    for (Index j = 0; j < weight.rows(); ++j) {
      for (Index k = 0; k < weight.cols(); ++k) {
        const double t = s.est.raw_covs(j, k);
        if (std::isnan(t) || weight(j, k) == 0.0) continue;
        const Vector r = s.rx.col(j).cwiseProduct(s.rz.col(k));
        const double m = r.mean();
        const double var = (r.array() - m).square().sum() / b;
        const double sd = std::sqrt(var);
        // dT/dR_i = (1/sqrt(B)) [1/sd - m (R_i - m) / sd^3]
        const Vector dt_dr = ((1.0 / sd) - (m / (var * sd)) * (r.array() - m)).matrix() / std::sqrt(b);
        const double sign = t >= 0.0 ? 1.0 : -1.0;
        g_rx.col(j) += weight(j, k) * sign * dt_dr.cwiseProduct(s.rz.col(k));
      }
    }
    out.value = s.est.regularizer_value;
    out.reported = s.est.value;
    out.grad = in.lambda * s.solver.solve(g_rx);
    return out;
  }

  HscicState s = hscic_state(in.x_feats, in.z, in.y, in.x_params, in.z_params, in.y_params, in.lambda);
  const auto b = static_cast<double>(in.x_feats.rows());
  const Matrix u = s.wt.cwiseProduct(s.pz);
  Matrix g = hadamard(s.wt * s.wt.transpose(), s.k_z) - 2.0 * u * s.wt.transpose() +
             s.wt * s.zz.asDiagonal() * s.wt.transpose();
  g /= b;
  out.value = s.value;
  out.reported = s.value;
  out.grad = gram_gradient(in.x_feats, s.k_x, g, in.x_params);
  return out;
}

Matrix baseline_grad_wrt_features(Baseline which, const BaselineInputs& in) {
  return baseline_with_grad(which, in).grad;
}

}  // namespace circe
