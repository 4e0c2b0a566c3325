#include "circe/kernels.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

namespace circe {

namespace {

constexpr double kResidualTol = 1e-8;
constexpr int kMaxRefinements = 6;
// Per-dimension normwise backward error accepted when the residual test fails.
constexpr double kBackwardTol = 1e-14;
// Below this many entries the parallel region costs more than it saves.
constexpr Index kParallelThreshold = 4096;

}  // namespace

void KernelParams::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw UsageError("kernel bandwidth sigma2 must be positive and finite, got " + std::to_string(sigma2));
  }
}

double kernel_eval(const VectorRef& x, const VectorRef& xp, const KernelParams& params) {
  params.validate();
  require(x.size() == xp.size(), "kernel_eval: dimension mismatch");
  double d2 = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    const double diff = x[k] - xp[k];
    d2 += diff * diff;
  }
  return std::exp(-d2 / (2.0 * params.sigma2));
}

Matrix gram_entries(const MatrixRef& rows, const MatrixRef& cols, const KernelParams& params) {
  params.validate();
  require(rows.rows() > 0 && cols.rows() > 0, "gram: empty point set");
  require(rows.cols() == cols.cols(), "gram: point sets have different dimension");

  // Column-per-point copies keep the inner distance loop contiguous.
  const Matrix rt = rows.transpose();
  const Matrix ct = cols.transpose();
  const Index n = rows.rows();
  const Index m = cols.rows();
  const Index dim = rows.cols();
  const double scale = -1.0 / (2.0 * params.sigma2);
  Matrix out(n, m);

#pragma omp parallel for schedule(static) if (n * m > kParallelThreshold)
  for (Index j = 0; j < m; ++j) {
    const double* cj = ct.col(j).data();
    for (Index i = 0; i < n; ++i) {
      const double* ri = rt.col(i).data();
      double d2 = 0.0;
      for (Index k = 0; k < dim; ++k) {
        const double diff = ri[k] - cj[k];
        d2 += diff * diff;
      }
      out(i, j) = std::exp(scale * d2);
    }
  }
  return out;
}

GramMatrix gram(const MatrixRef& rows, const MatrixRef& cols, const KernelParams& params) {
  return {gram_entries(rows, cols, params), params, params};
}

RidgeSolver::RidgeSolver(const MatrixRef& k, double lambda) : n_(k.rows()) {
  require(k.rows() == k.cols(), "regularized_solve: matrix must be square");
  require(k.rows() > 0, "regularized_solve: empty matrix");
  require(lambda >= 0.0 && std::isfinite(lambda), "regularized_solve: lambda must be non-negative");

  system_ = k;
  system_.diagonal().array() += lambda;

  const double mean_diag = std::abs(k.diagonal().mean()) > 0.0 ? std::abs(k.diagonal().mean()) : 1.0;
  Matrix work = system_;
  llt_.compute(work);
  double jitter = 1e-10 * mean_diag;
  while (llt_.info() != Eigen::Success) {
    if (jitter > 1e-4 * mean_diag * (1.0 + 1e-12)) {
      throw NumericalError("regularized_solve: factorization failed after jitter escalation");
    }
    work = system_;
    work.diagonal().array() += jitter;
    llt_.compute(work);
    jitter_ = jitter;
    jitter *= 10.0;
  }
}

Matrix RidgeSolver::solve(const MatrixRef& b) const {
  require(b.rows() == n_, "regularized_solve: right-hand side has wrong row count");
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Matrix::Zero(b.rows(), b.cols());

  // Iterative refinement against the unjittered system, stopping at the
  // tolerance or when the residual no longer halves.
  Matrix s = llt_.solve(b);
  Matrix r = b - system_ * s;
  double rel = r.norm() / bnorm;
  for (int it = 0; it < kMaxRefinements && std::isfinite(rel) && rel > kResidualTol; ++it) {
    const Matrix next = s + llt_.solve(r);
    const Matrix r_next = b - system_ * next;
    const double rel_next = r_next.norm() / bnorm;
    if (!(rel_next < rel)) break;
    const bool stalled = rel_next > 0.5 * rel;
    s = next;
    r = r_next;
    rel = rel_next;
    if (stalled) break;
  }
  if (!std::isfinite(rel)) throw NumericalError("regularized_solve: non-finite solution");
  if (rel <= kResidualTol) return s;

  // For an ill-conditioned system the residual relative to b cannot reach the
  // tolerance in double precision; a backward-stable solution is accepted.
  const double backward = r.norm() / (system_.norm() * s.norm() + bnorm);
  if (backward > kBackwardTol * static_cast<double>(n_)) {
    throw NumericalError("regularized_solve: relative residual " + std::to_string(rel) +
                         " above tolerance (backward error " + std::to_string(backward) + ")");
  }
  return s;
}

Matrix RidgeSolver::inverse() const {
  Matrix inv = solve(Matrix::Identity(n_, n_));
  return 0.5 * (inv + inv.transpose());
}

Matrix regularized_solve(const MatrixRef& k, double lambda, const MatrixRef& b) {
  require(lambda > 0.0, "regularized_solve: lambda must be positive");
  return RidgeSolver(k, lambda).solve(b);
}

double trace_product(const MatrixRef& a, const MatrixRef& b) {
  require(a.rows() == a.cols() && b.rows() == b.cols(), "trace_product: matrices must be square");
  require(a.rows() == b.rows(), "trace_product: size mismatch");
  const Index n = a.rows();
  std::vector<double> partial(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(static) if (n * n > kParallelThreshold)
  for (Index j = 0; j < n; ++j) {
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) acc += a(i, j) * b(j, i);
    partial[static_cast<std::size_t>(j)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

Matrix hadamard(const MatrixRef& a, const MatrixRef& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  return a.cwiseProduct(b);
}

Matrix gram_gradient(const MatrixRef& points, const MatrixRef& k, const MatrixRef& weights,
                     const KernelParams& params) {
  params.validate();
  const Index n = points.rows();
  require(k.rows() == n && k.cols() == n, "gram_gradient: gram has wrong shape");
  require(weights.rows() == n && weights.cols() == n, "gram_gradient: weights have wrong shape");

  const Matrix pt = points.transpose();
  const Index dim = points.cols();
  const double inv_s2 = 1.0 / params.sigma2;
  Matrix out_t = Matrix::Zero(dim, n);

#pragma omp parallel for schedule(static) if (n * n > kParallelThreshold)
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = (weights(i, j) + weights(j, i)) * k(i, j) * inv_s2;
      if (c == 0.0) continue;
      for (Index d = 0; d < dim; ++d) out_t(d, i) += c * (pt(d, j) - pt(d, i));
    }
  }
  return out_t.transpose();
}

Matrix cosine_features(const MatrixRef& points, const MatrixRef& frequencies, const VectorRef& phases,
                       double scale) {
  require(points.cols() == frequencies.cols(), "cosine_features: dimension mismatch");
  require(frequencies.rows() == phases.size(), "cosine_features: phase count mismatch");
  const Index n = points.rows();
  const Index d = frequencies.rows();
  const Index dim = points.cols();
  const Matrix pt = points.transpose();
  const Matrix ft = frequencies.transpose();
  Matrix out(n, d);

#pragma omp parallel for schedule(static) if (n * d > kParallelThreshold)
  for (Index j = 0; j < d; ++j) {
    const double* w = ft.col(j).data();
    for (Index i = 0; i < n; ++i) {
      const double* x = pt.col(i).data();
      double arg = phases[j];
      for (Index k = 0; k < dim; ++k) arg += w[k] * x[k];
      out(i, j) = scale * std::cos(arg);
    }
  }
  return out;
}

double min_eigenvalue(const MatrixRef& a) {
  require(a.rows() == a.cols(), "min_eigenvalue: matrix must be square");
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace circe
