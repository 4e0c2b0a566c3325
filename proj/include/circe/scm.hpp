#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "circe/kernels.hpp"

namespace circe {

/// Y -> Z, Y -> A, Z -> A, Y -> B, Z -> B, A -> B structural models, plus the
/// nonlinear "image proxy" task where the observed coordinate is Y + alpha xi^2.
enum class ScmCase { uni1, uni2, multi1, multi2, nonlinear };

std::string_view to_string(ScmCase c);
ScmCase parse_case(std::string_view s);

/// Samples with their exogenous noise, so every point can be regenerated
/// under an intervention on Z.
///
/// For ScmCase::nonlinear the fields are reused: a is the observed 2-vector
/// (y_drive + alpha z^2, y + xi_y), b the target Y, z = xi_z, eps_a = xi_y and
/// eps_b = y_drive (Y itself in-domain, an independent copy when shifted).
struct ScmBatch {
  ScmCase case_id = ScmCase::uni1;
  Matrix a;
  Matrix b;  // n x 1
  Matrix y;
  Matrix z;
  Matrix eps_a;
  Matrix eps_b;
  Matrix eps_z;
  double alpha = 0.0;
  bool has_noises = true;

  Index size() const { return y.rows(); }
};

struct ScmPoint {
  Vector a;
  double b = 0.0;
  Vector y;
  Vector z;
};

/// Exogenous noises eps_A, eps_B are N(0, 0.1) read as variance 0.1.
/// `d` is the Z dimension for multi1 and the Y dimension for multi2; it is
/// ignored by the univariate cases. Values are raw (not standardized).
ScmBatch gen_scm(ScmCase c, Index n, Index d, std::uint64_t seed);

/// x = (Y + alpha xi_z^2, Y + xi_y), z = xi_z, target Y ~ N(0, 1),
/// xi_z ~ N(0, sigma_z^2), xi_y ~ N(0, sigma_y^2). With `shifted` the first
/// coordinate is driven by an independent copy of Y.
ScmBatch gen_nonlinear_gcm_case(Index n, double alpha, double sigma_z, double sigma_y, std::uint64_t seed,
                                bool shifted = false);

/// Regenerates point i with Z set to z_new and the original noises.
ScmPoint intervene_z(const ScmBatch& batch, Index i, const VectorRef& z_new);

/// Whole-batch version: row i of z_new replaces z_i.
ScmBatch intervene_z_all(const ScmBatch& batch, const MatrixRef& z_new);

ScmBatch slice(const ScmBatch& batch, Index begin, Index count);

/// Rows in `idx` order.
ScmBatch gather(const ScmBatch& batch, const std::vector<Index>& idx);

/// Predictor inputs: [a | y | z] for the SCM cases, a alone for nonlinear.
Matrix model_inputs(const ScmBatch& batch);

/// Columns a0.., b, y0.., z0.., one row per sample.
void write_batch_csv(std::ostream& os, const ScmBatch& batch);

/// Per-column affine standardization fitted on a training split.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const MatrixRef& data);
  Matrix apply(const MatrixRef& data) const;
  Matrix invert(const MatrixRef& data) const;
};

/// Toy linear task: z ~ N(0, sz2), y = z + xi1 (or z' + xi1 when shifted),
/// x = (y + xi2, z), xi1 ~ N(0, s1), xi2 ~ N(0, s2) (variances).
struct ToyBatch {
  Matrix x;  // n x 2
  Matrix y;  // n x 1
  Matrix z;  // n x 1
  Vector xi1;
  Vector xi2;
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double sigmaz_sq = 0.0;
  bool shifted = false;
};

ToyBatch gen_toy(Index n, double sigma1_sq, double sigma2_sq, double sigmaz_sq, bool shifted, std::uint64_t seed);

}  // namespace circe
