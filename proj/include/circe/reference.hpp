#pragma once

// Serial reference implementations of the OpenMP kernels. These are kept for
// testing and benchmarking only; the library never calls them.

#include "circe/kernels.hpp"

namespace circe::reference {

Matrix gram(const MatrixRef& rows, const MatrixRef& cols, const KernelParams& params);
double trace_product(const MatrixRef& a, const MatrixRef& b);
Matrix gram_gradient(const MatrixRef& points, const MatrixRef& k, const MatrixRef& weights,
                     const KernelParams& params);
Matrix cosine_features(const MatrixRef& points, const MatrixRef& frequencies,
                       const VectorRef& phases, double scale);

}  // namespace circe::reference
