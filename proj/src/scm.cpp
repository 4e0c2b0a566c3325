#include "circe/scm.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "circe/rng.hpp"

namespace circe {

namespace {

const double kNoiseSd = std::sqrt(0.1);

Matrix normal_matrix(Rng& rng, Index rows, Index cols, double sd) {
  std::normal_distribution<double> dist(0.0, sd);
  Matrix m(rows, cols);
  // Row-major fill so a prefix of rows does not depend on n.
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

Index a_dim(ScmCase c) { return c == ScmCase::nonlinear ? 2 : 1; }

// Structural equations for A and B given Y, Z and the stored noises of point i.
void structural(const ScmBatch& s, Index i, const VectorRef& z, Eigen::Ref<Vector> a, double& b) {
  const double ea = s.eps_a(i, 0);
  const double eb = s.eps_b(i, 0);
  switch (s.case_id) {
    case ScmCase::uni1: {
      const double y = s.y(i, 0);
      const double av = 0.5 * z[0] * ea + 2.0 * y;
      a[0] = av;
      b = 0.5 * std::exp(-av * y) * std::sin(2.0 * av * y) + 5.0 * z[0] + 0.2 * eb;
      return;
    }
    case ScmCase::uni2: {
      const double y = s.y(i, 0);
      const double av = std::exp(-0.5 * z[0] * z[0]) * std::sin(2.0 * z[0]) + 2.0 * y + 0.2 * ea;
      a[0] = av;
      b = std::sin(2.0 * av * y) * std::exp(-0.5 * av * y) + 5.0 * z[0] + 0.2 * eb;
      return;
    }
    case ScmCase::multi1: {
      const double y = s.y(i, 0);
      const double zsum = z.sum();
      const double av = std::exp(-0.5 * z[0]) + zsum * std::sin(y) + 0.1 * ea;
      a[0] = av;
      b = std::exp(-0.5 * z[1]) * zsum + av * y + 0.1 * eb;
      return;
    }
    case ScmCase::multi2: {
      const double ysum = s.y.row(i).sum();
      const double zv = z[0];
      const double av = std::exp(-0.5 * zv) + std::sin(ysum) * zv + 0.1 * ea;
      a[0] = av;
      b = std::exp(-0.5 * zv) * zv + ysum + zv + av * s.y(i, 0) + 0.1 * eb;
      return;
    }
    case ScmCase::nonlinear: {
      a[0] = eb + s.alpha * z[0] * z[0];
      a[1] = s.y(i, 0) + ea;
      b = s.y(i, 0);
      return;
    }
  }
}

void fill_structural(ScmBatch& s) {
  s.a.resize(s.size(), a_dim(s.case_id));
  s.b.resize(s.size(), 1);
  for (Index i = 0; i < s.size(); ++i) {
    Vector a(s.a.cols());
    double b = 0.0;
    structural(s, i, s.z.row(i).transpose(), a, b);
    s.a.row(i) = a.transpose();
    s.b(i, 0) = b;
  }
}

ScmBatch select_rows(const ScmBatch& s, const std::vector<Index>& idx) {
  auto take = [&](const Matrix& m) {
    Matrix out(static_cast<Index>(idx.size()), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = m.row(idx[r]);
    return out;
  };
  ScmBatch out;
  out.case_id = s.case_id;
  out.alpha = s.alpha;
  out.has_noises = s.has_noises;
  out.a = take(s.a);
  out.b = take(s.b);
  out.y = take(s.y);
  out.z = take(s.z);
  if (s.has_noises) {
    out.eps_a = take(s.eps_a);
    out.eps_b = take(s.eps_b);
    out.eps_z = take(s.eps_z);
  }
  return out;
}

}  // namespace

std::string_view to_string(ScmCase c) {
  switch (c) {
    case ScmCase::uni1: return "uni1";
    case ScmCase::uni2: return "uni2";
    case ScmCase::multi1: return "multi1";
    case ScmCase::multi2: return "multi2";
    case ScmCase::nonlinear: return "nonlinear";
  }
  return "uni1";
}

ScmCase parse_case(std::string_view s) {
  if (s == "uni1") return ScmCase::uni1;
  if (s == "uni2") return ScmCase::uni2;
  if (s == "multi1") return ScmCase::multi1;
  if (s == "multi2") return ScmCase::multi2;
  if (s == "nonlinear") return ScmCase::nonlinear;
  throw UsageError("unknown SCM case: " + std::string(s));
}

ScmBatch gen_scm(ScmCase c, Index n, Index d, std::uint64_t seed) {
  require(n >= 1, "gen_scm: n must be positive");
  if (c == ScmCase::nonlinear) throw UsageError("gen_scm: use gen_nonlinear_gcm_case for the nonlinear task");
  if (c == ScmCase::multi1 || c == ScmCase::multi2) require(d >= 2, "gen_scm: multivariate cases need d >= 2");

  const Index dy = c == ScmCase::multi2 ? d : 1;
  const Index dz = c == ScmCase::multi1 ? d : 1;
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c), 0x53434dULL}));

  ScmBatch s;
  s.case_id = c;
  s.y = normal_matrix(rng, n, dy, 1.0);
  s.eps_z = normal_matrix(rng, n, dz, 1.0);
  s.eps_a = normal_matrix(rng, n, 1, kNoiseSd);
  s.eps_b = normal_matrix(rng, n, 1, kNoiseSd);

  s.z.resize(n, dz);
  for (Index i = 0; i < n; ++i) {
    if (c == ScmCase::multi2) {
      s.z(i, 0) = s.y.row(i).squaredNorm() + s.eps_z(i, 0);
    } else {
      const double y2 = s.y(i, 0) * s.y(i, 0);
      for (Index k = 0; k < dz; ++k) s.z(i, k) = y2 + s.eps_z(i, k);
    }
  }
  fill_structural(s);
  return s;
}

ScmBatch gen_nonlinear_gcm_case(Index n, double alpha, double sigma_z, double sigma_y, std::uint64_t seed,
                                bool shifted) {
  require(n >= 1, "gen_nonlinear_gcm_case: n must be positive");
  require(alpha > 0.0, "gen_nonlinear_gcm_case: alpha must be positive");
  require(sigma_z > 0.0 && sigma_y >= 0.0, "gen_nonlinear_gcm_case: invalid noise scale");

  Rng rng(derive_seed(seed, {0x4e4c49ULL}));
  ScmBatch s;
  s.case_id = ScmCase::nonlinear;
  s.alpha = alpha;
  s.y = normal_matrix(rng, n, 1, 1.0);
  s.z = normal_matrix(rng, n, 1, sigma_z);
  s.eps_z = s.z;
  s.eps_a = normal_matrix(rng, n, 1, sigma_y);
  const Matrix copy = normal_matrix(rng, n, 1, 1.0);
  s.eps_b = shifted ? copy : s.y;
  fill_structural(s);
  return s;
}

ScmPoint intervene_z(const ScmBatch& batch, Index i, const VectorRef& z_new) {
  require(batch.has_noises, "intervene_z: batch does not retain exogenous noises");
  require(i >= 0 && i < batch.size(), "intervene_z: index out of range");
  require(z_new.size() == batch.z.cols(), "intervene_z: z dimension mismatch");
  ScmPoint p;
  p.a.resize(batch.a.cols());
  structural(batch, i, z_new, p.a, p.b);
  p.y = batch.y.row(i).transpose();
  p.z = z_new;
  return p;
}

ScmBatch intervene_z_all(const ScmBatch& batch, const MatrixRef& z_new) {
  require(batch.has_noises, "intervene_z: batch does not retain exogenous noises");
  require(z_new.rows() == batch.size() && z_new.cols() == batch.z.cols(), "intervene_z_all: shape mismatch");
  ScmBatch out = batch;
  out.z = z_new;
  fill_structural(out);
  return out;
}

ScmBatch slice(const ScmBatch& batch, Index begin, Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= batch.size(), "slice: range out of bounds");
  std::vector<Index> idx(static_cast<std::size_t>(count));
  for (Index r = 0; r < count; ++r) idx[static_cast<std::size_t>(r)] = begin + r;
  return select_rows(batch, idx);
}

ScmBatch gather(const ScmBatch& batch, const std::vector<Index>& idx) {
  for (Index i : idx) require(i >= 0 && i < batch.size(), "gather: index out of range");
  return select_rows(batch, idx);
}

Matrix model_inputs(const ScmBatch& batch) {
  if (batch.case_id == ScmCase::nonlinear) return batch.a;
  Matrix x(batch.size(), batch.a.cols() + batch.y.cols() + batch.z.cols());
  x << batch.a, batch.y, batch.z;
  return x;
}

void write_batch_csv(std::ostream& os, const ScmBatch& batch) {
  std::string header;
  for (Index j = 0; j < batch.a.cols(); ++j) header += "a" + std::to_string(j) + ",";
  header += "b";
  for (Index j = 0; j < batch.y.cols(); ++j) header += ",y" + std::to_string(j);
  for (Index j = 0; j < batch.z.cols(); ++j) header += ",z" + std::to_string(j);
  os << header << '\n';
  os.precision(17);
  for (Index i = 0; i < batch.size(); ++i) {
    for (Index j = 0; j < batch.a.cols(); ++j) os << batch.a(i, j) << ',';
    os << batch.b(i, 0);
    for (Index j = 0; j < batch.y.cols(); ++j) os << ',' << batch.y(i, j);
    for (Index j = 0; j < batch.z.cols(); ++j) os << ',' << batch.z(i, j);
    os << '\n';
  }
}

Standardizer Standardizer::fit(const MatrixRef& data) {
  require(data.rows() >= 2, "Standardizer: need at least two rows");
  Standardizer s;
  s.mean = data.colwise().mean().transpose();
  s.scale.resize(data.cols());
  for (Index j = 0; j < data.cols(); ++j) {
    const double var = (data.col(j).array() - s.mean[j]).square().sum() / static_cast<double>(data.rows());
    s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const MatrixRef& data) const {
  require(data.cols() == mean.size(), "Standardizer: column count mismatch");
  Matrix out = data;
  out.rowwise() -= mean.transpose();
  out.array().rowwise() /= scale.transpose().array();
  return out;
}

Matrix Standardizer::invert(const MatrixRef& data) const {
  require(data.cols() == mean.size(), "Standardizer: column count mismatch");
  Matrix out = data;
  out.array().rowwise() *= scale.transpose().array();
  out.rowwise() += mean.transpose();
  return out;
}

ToyBatch gen_toy(Index n, double sigma1_sq, double sigma2_sq, double sigmaz_sq, bool shifted, std::uint64_t seed) {
  require(n >= 1, "gen_toy: n must be positive");
  require(sigma1_sq > 0.0 && sigma2_sq > 0.0 && sigmaz_sq > 0.0, "gen_toy: variances must be positive");
  Rng rng(derive_seed(seed, {0x544f59ULL}));
  ToyBatch t;
  t.sigma1_sq = sigma1_sq;
  t.sigma2_sq = sigma2_sq;
  t.sigmaz_sq = sigmaz_sq;
  t.shifted = shifted;
  const Matrix z = normal_matrix(rng, n, 1, std::sqrt(sigmaz_sq));
  const Matrix z_other = normal_matrix(rng, n, 1, std::sqrt(sigmaz_sq));
  t.xi1 = normal_matrix(rng, n, 1, std::sqrt(sigma1_sq)).col(0);
  t.xi2 = normal_matrix(rng, n, 1, std::sqrt(sigma2_sq)).col(0);
  t.z = z;
  t.y = (shifted ? z_other : z) + Matrix(t.xi1);
  t.x.resize(n, 2);
  t.x.col(0) = t.y.col(0) + t.xi2;
  t.x.col(1) = z.col(0);
  return t;
}

}  // namespace circe
