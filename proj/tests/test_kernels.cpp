#include <cmath>

#include <Eigen/Eigenvalues>

#include "circe/kernels.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace circe;
using namespace testing_support;

TEST_CASE("kernel_eval closed form and symmetry") {
  const auto p = KernelParams::gaussian(1.0);
  Vector x(1), xp(1);
  x << 0.0;
  xp << std::sqrt(2.0);
  CHECK(kernel_eval(x, xp, p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(kernel_eval(x, x, p) == 1.0);

  const Matrix a = normal(100, 3, 1);
  const Matrix b = normal(100, 3, 2);
  for (Index i = 0; i < 100; ++i) {
    CHECK(kernel_eval(a.row(i).transpose(), b.row(i).transpose(), p) ==
          kernel_eval(b.row(i).transpose(), a.row(i).transpose(), p));
  }
}

TEST_CASE("kernel_eval rejects bad input") {
  Vector x(2), y(3);
  x.setZero();
  y.setZero();
  CHECK_THROWS_AS(kernel_eval(x, y, KernelParams::gaussian(1.0)), UsageError);
  CHECK_THROWS_AS(kernel_eval(x, x, KernelParams::gaussian(0.0)), UsageError);
  CHECK_THROWS_AS(kernel_eval(x, x, KernelParams::gaussian(-1.0)), UsageError);
}

TEST_CASE("gram matches an entrywise oracle") {
  const Matrix a = normal(37, 2, 3);
  const Matrix b = normal(23, 2, 4);
  const GramMatrix g = gram(a, b, KernelParams::gaussian(0.7));
  CHECK(max_rel_err(g.entries, naive_gram(a, b, 0.7)) < 1e-14);
  CHECK(g.row_params == KernelParams::gaussian(0.7));

  const Matrix ba = gram_entries(b, a, KernelParams::gaussian(0.7));
  CHECK((g.entries - ba.transpose()).cwiseAbs().maxCoeff() == 0.0);

  const Matrix one = gram_entries(a.topRows(1), a.topRows(1), KernelParams::gaussian(0.7));
  CHECK(one.rows() == 1);
  CHECK(one(0, 0) == 1.0);
}

TEST_CASE("gram is PSD with entries in [0, 1]") {
  const Matrix a = normal(50, 3, 5);
  const Matrix k = gram_entries(a, a, KernelParams::gaussian(1.0));
  CHECK(min_eigenvalue(k) >= -1e-10);
  CHECK(k.minCoeff() >= 0.0);
  CHECK(k.maxCoeff() <= 1.0);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);

  const Matrix z = normal(50, 1, 6);
  const Matrix kz = gram_entries(z, z, KernelParams::gaussian(0.1));
  CHECK(min_eigenvalue(hadamard(k, kz)) >= -1e-10 * 50);
}

TEST_CASE("gram rejects empty or mismatched sets") {
  const Matrix a = normal(4, 2, 7);
  CHECK_THROWS_AS(gram(Matrix(0, 2), a, KernelParams::gaussian(1.0)), UsageError);
  CHECK_THROWS_AS(gram(a, normal(3, 3, 8), KernelParams::gaussian(1.0)), UsageError);
}

TEST_CASE("regularized_solve") {
  SUBCASE("identity Gram") {
    Matrix pts(3, 1);
    pts << 0.0, 100.0, 200.0;
    const Matrix k = gram_entries(pts, pts, KernelParams::gaussian(1e-3));
    const Matrix s = regularized_solve(k, 1.0, Matrix::Identity(3, 3));
    CHECK((s - 0.5 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("residual on a random SPD system") {
    const Matrix g = normal(20, 20, 9);
    const Matrix k = g * g.transpose();
    const Matrix b = normal(20, 4, 10);
    const Matrix s = regularized_solve(k, 0.3, b);
    const Matrix r = (k + 0.3 * Matrix::Identity(20, 20)) * s - b;
    CHECK(r.norm() / b.norm() <= 1e-8);
  }
  SUBCASE("dominant ridge") {
    const Matrix p = normal(10, 2, 11);
    const Matrix k = gram_entries(p, p, KernelParams::gaussian(1.0));
    const Matrix b = normal(10, 2, 12);
    const Matrix s = regularized_solve(k, 1e6, b);
    CHECK(max_rel_err(s, b / 1e6) <= 1e-4);
  }
  SUBCASE("ill-conditioned Gram stays within the residual bound") {
    Matrix p(30, 1);
    for (Index i = 0; i < 30; ++i) p(i, 0) = 0.05 * static_cast<double>(i);
    const Matrix k = gram_entries(p, p, KernelParams::gaussian(1.0));
    const double lambda = 3e-9;  // condition number about 1e10
    const Matrix sys = k + lambda * Matrix::Identity(30, 30);
    Eigen::SelfAdjointEigenSolver<Matrix> es(sys);
    CHECK(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff() >= 1e9);
    const Matrix b = sys * normal(30, 2, 13);
    const Matrix s = regularized_solve(k, lambda, b);
    CHECK((sys * s - b).norm() / b.norm() <= 1e-8);

    // An arbitrary right-hand side is solved backward-stably.
    const Matrix c = normal(30, 1, 14);
    const Matrix t = regularized_solve(k, lambda, c);
    const double backward = (sys * t - c).norm() / (sys.norm() * t.norm() + c.norm());
    CHECK(backward <= 30 * 1e-14);
  }
  SUBCASE("bad arguments") {
    const Matrix k = Matrix::Identity(3, 3);
    CHECK_THROWS_AS(regularized_solve(k, 0.0, k), UsageError);
    CHECK_THROWS_AS(regularized_solve(k, 1.0, Matrix::Identity(4, 4)), UsageError);
    CHECK_THROWS_AS(regularized_solve(Matrix::Ones(3, 4), 1.0, k), UsageError);
  }
}

TEST_CASE("RidgeSolver with lambda 0 on duplicated points fails numerically") {
  Matrix p(4, 1);
  p << 0.0, 0.0, 1.0, 1.0;
  const Matrix k = gram_entries(p, p, KernelParams::gaussian(1.0));
  CHECK_THROWS_AS(RidgeSolver(k, 0.0).solve(Matrix::Identity(4, 4)), NumericalError);
}

TEST_CASE("trace_product") {
  CHECK(trace_product(Matrix::Identity(3, 3), Matrix::Identity(3, 3)) == 3.0);

  const Matrix a = normal(10, 10, 14);
  const Matrix b = normal(10, 10, 15);
  double brute = 0.0;
  for (Index i = 0; i < 10; ++i) {
    for (Index j = 0; j < 10; ++j) brute += a(i, j) * b(j, i);
  }
  CHECK(trace_product(a, b) == doctest::Approx(brute).epsilon(1e-13));

  // Tr(A (B o C)) = Tr((A o B^T) C) for symmetric B: brute force both sides.
  Matrix s1 = normal(10, 10, 16), s2 = normal(10, 10, 17), s3 = normal(10, 10, 18);
  s1 = s1 + s1.transpose().eval();
  s2 = s2 + s2.transpose().eval();
  s3 = s3 + s3.transpose().eval();
  CHECK(trace_product(s1, hadamard(s2, s3)) ==
        doctest::Approx(trace_product(hadamard(s1, s2), s3)).epsilon(1e-12));

  // Bilinearity and transpose invariance.
  CHECK(trace_product(2.0 * s1 + s2, s3) ==
        doctest::Approx(2.0 * trace_product(s1, s3) + trace_product(s2, s3)).epsilon(1e-12));
  CHECK(trace_product(s1.transpose(), s3.transpose()) == doctest::Approx(trace_product(s1, s3)).epsilon(1e-13));

  const Matrix p = normal(12, 2, 19);
  const Matrix k1 = gram_entries(p, p, KernelParams::gaussian(0.5));
  const Matrix k2 = gram_entries(p, p, KernelParams::gaussian(2.0));
  CHECK(trace_product(k1, k2) >= -1e-12);

  CHECK_THROWS_AS(trace_product(Matrix::Identity(3, 3), Matrix::Identity(4, 4)), UsageError);
}

TEST_CASE("gram_gradient matches central differences") {
  const Matrix x = normal(9, 2, 20);
  const Matrix w = normal(9, 9, 21);
  const auto p = KernelParams::gaussian(0.8);
  const Matrix g = gram_gradient(x, gram_entries(x, x, p), w, p);
  const double h = 1e-6;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index d = 0; d < x.cols(); ++d) {
      Matrix xp = x, xm = x;
      xp(i, d) += h;
      xm(i, d) -= h;
      const double fd = (w.cwiseProduct(naive_gram(xp, xp, 0.8)).sum() - w.cwiseProduct(naive_gram(xm, xm, 0.8)).sum()) /
                        (2.0 * h);
      CHECK(g(i, d) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}
