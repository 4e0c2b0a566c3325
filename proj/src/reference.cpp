#include "circe/reference.hpp"

#include <cmath>

namespace circe::reference {

Matrix gram(const MatrixRef& rows, const MatrixRef& cols, const KernelParams& params) {
  params.validate();
  require(rows.rows() > 0 && cols.rows() > 0, "gram: empty point set");
  require(rows.cols() == cols.cols(), "gram: point sets have different dimension");
  Matrix out(rows.rows(), cols.rows());
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < cols.rows(); ++j) {
      double d2 = 0.0;
      for (Index k = 0; k < rows.cols(); ++k) {
        const double diff = rows(i, k) - cols(j, k);
        d2 += diff * diff;
      }
      out(i, j) = std::exp((-1.0 / (2.0 * params.sigma2)) * d2);
    }
  }
  return out;
}

double trace_product(const MatrixRef& a, const MatrixRef& b) {
  require(a.rows() == a.cols() && b.rows() == b.cols() && a.rows() == b.rows(),
          "trace_product: size mismatch");
  double total = 0.0;
  for (Index j = 0; j < a.rows(); ++j) {
    double acc = 0.0;
    for (Index i = 0; i < a.rows(); ++i) acc += a(i, j) * b(j, i);
    total += acc;
  }
  return total;
}

Matrix gram_gradient(const MatrixRef& points, const MatrixRef& k, const MatrixRef& weights,
                     const KernelParams& params) {
  const Index n = points.rows();
  Matrix out = Matrix::Zero(n, points.cols());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = (weights(i, j) + weights(j, i)) * k(i, j) * (1.0 / params.sigma2);
      if (c == 0.0) continue;
      for (Index d = 0; d < points.cols(); ++d) out(i, d) += c * (points(j, d) - points(i, d));
    }
  }
  return out;
}

Matrix cosine_features(const MatrixRef& points, const MatrixRef& frequencies, const VectorRef& phases,
                       double scale) {
  Matrix out(points.rows(), frequencies.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = 0; j < frequencies.rows(); ++j) {
      double arg = phases[j];
      for (Index k = 0; k < points.cols(); ++k) arg += frequencies(j, k) * points(i, k);
      out(i, j) = scale * std::cos(arg);
    }
  }
  return out;
}

}  // namespace circe::reference
