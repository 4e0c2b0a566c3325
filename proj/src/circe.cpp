#include "circe/circe.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace circe {

namespace {

Matrix double_center(const MatrixRef& a) {
  const Vector row_mean = a.rowwise().mean();
  const Vector col_mean = a.colwise().mean().transpose();
  const double grand = a.mean();
  Matrix out = a;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean.transpose();
  out.array() += grand;
  return out;
}

double normalizer(std::size_t b) {
  const auto bd = static_cast<double>(b);
  return 1.0 / (bd * (bd - 1.0));
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::plain: return "plain";
    case Variant::debiased: return "debiased";
    case Variant::centered: return "centered";
  }
  return "plain";
}

Variant parse_variant(std::string_view s) {
  if (s == "plain") return Variant::plain;
  if (s == "debiased") return Variant::debiased;
  if (s == "centered") return Variant::centered;
  throw UsageError("unknown estimator variant: " + std::string(s));
}

CenteredGram centered_gram(const MatrixRef& batch_y, const MatrixRef& batch_z, const CmeModel& model,
                           const KernelParams& y_params, const KernelParams& z_params) {
  require(y_params == model.y_params, "centered_gram: y bandwidth differs from the fitted model");
  require(z_params == model.z_params, "centered_gram: z bandwidth differs from the fitted model");
  require(batch_y.rows() >= 2, "centered_gram: batch needs at least two points");
  require(batch_y.rows() == batch_z.rows(), "centered_gram: y and z batches differ in size");

  const Matrix k_yy = gram_entries(batch_y, batch_y, y_params);
  const Matrix k_zz = gram_entries(batch_z, batch_z, z_params);
  const Matrix k_Yy = gram_entries(model.holdout_y, batch_y, y_params);  // M x B
  const Matrix k_Zz = gram_entries(model.holdout_z, batch_z, z_params);  // M x B

  const Matrix cross = (model.w1 * k_Yy).transpose() * k_Zz;  // K_yY W1 K_Zz
  const Matrix self = k_Yy.transpose() * (model.w2 * k_Yy);   // K_yY W2 K_Yy
  Matrix kc = k_zz - cross - cross.transpose() + self;
  Matrix khat = hadamard(k_yy, kc);
  khat = (0.5 * (khat + khat.transpose())).eval();
  return {std::move(khat), static_cast<std::size_t>(batch_y.rows())};
}

CirceEstimate circe_statistic(const MatrixRef& k_xx, const CenteredGram& cg, Variant variant) {
  const std::size_t b = cg.batch_size;
  require(b >= 2, "circe_statistic: batch needs at least two points");
  require(k_xx.rows() == static_cast<Index>(b) && k_xx.cols() == static_cast<Index>(b),
          "circe_statistic: K_xx does not match the batch size");

  double tr = 0.0;
  switch (variant) {
    case Variant::plain:
      tr = trace_product(k_xx, cg.khat_c);
      break;
    case Variant::debiased:
      tr = trace_product(k_xx, cg.khat_c) - k_xx.diagonal().dot(cg.khat_c.diagonal());
      break;
    case Variant::centered:
      tr = trace_product(double_center(k_xx), cg.khat_c);
      break;
  }
  return {tr * normalizer(b), variant, b};
}

CirceEstimate circe_statistic(const GramMatrix& k_xx, const CenteredGram& cg, Variant variant) {
  return circe_statistic(k_xx.entries, cg, variant);
}

Matrix circe_gram_weights(const CenteredGram& cg, Variant variant) {
  const double c = normalizer(cg.batch_size);
  Matrix w = cg.khat_c.transpose();
  switch (variant) {
    case Variant::plain:
      break;
    case Variant::debiased:
      w.diagonal().setZero();
      break;
    case Variant::centered:
      w = double_center(w);
      break;
  }
  return c * w;
}

CirceWithGrad circe_with_feature_grad(const MatrixRef& features, const KernelParams& x_params,
                                      const CenteredGram& cg, Variant variant) {
  const Matrix k_xx = gram_entries(features, features, x_params);
  CirceWithGrad out;
  out.estimate = circe_statistic(k_xx, cg, variant);
  out.grad = gram_gradient(features, k_xx, circe_gram_weights(cg, variant), x_params);
  return out;
}

ConditionalMeanOracle kernel_expansion_mean(Matrix support, std::function<Vector(const Vector&)> coeffs,
                                            const KernelParams& z_params) {
  z_params.validate();
  auto sup = std::make_shared<const Matrix>(std::move(support));
  auto k_uu = std::make_shared<const Matrix>(gram_entries(*sup, *sup, z_params));
  auto fn = std::make_shared<const std::function<Vector(const Vector&)>>(std::move(coeffs));

  ConditionalMeanOracle mu;
  mu.cross = [sup, fn, z_params](const Vector& z, const Vector& y) {
    const Vector c = (*fn)(y);
    require(c.size() == sup->rows(), "kernel_expansion_mean: coefficient count mismatch");
    const Matrix kz = gram_entries(*sup, z.transpose(), z_params);
    return c.dot(kz.col(0));
  };
  mu.inner = [k_uu, fn](const Vector& y, const Vector& yp) {
    const Vector c = (*fn)(y);
    const Vector cp = (*fn)(yp);
    return c.dot(*k_uu * cp);
  };
  return mu;
}

ConditionalMeanOracle gaussian_additive_mean(std::function<Vector(const Vector&)> g, double noise_var,
                                             const KernelParams& z_params) {
  z_params.validate();
  require(noise_var >= 0.0, "gaussian_additive_mean: negative noise variance");
  auto fn = std::make_shared<const std::function<Vector(const Vector&)>>(std::move(g));
  const double s2 = z_params.sigma2;

  ConditionalMeanOracle mu;
  mu.cross = [fn, s2, noise_var](const Vector& z, const Vector& y) {
    const Vector m = (*fn)(y);
    const double v = s2 + noise_var;
    const double amp = std::pow(s2 / v, 0.5 * static_cast<double>(m.size()));
    return amp * std::exp(-(z - m).squaredNorm() / (2.0 * v));
  };
  mu.inner = [fn, s2, noise_var](const Vector& y, const Vector& yp) {
    const Vector m = (*fn)(y);
    const Vector mp = (*fn)(yp);
    const double v = s2 + 2.0 * noise_var;
    const double amp = std::pow(s2 / v, 0.5 * static_cast<double>(m.size()));
    return amp * std::exp(-(m - mp).squaredNorm() / (2.0 * v));
  };
  return mu;
}

CenteredGram centered_gram_oracle(const MatrixRef& batch_y, const MatrixRef& batch_z,
                                  const ConditionalMeanOracle& mu, const KernelParams& y_params,
                                  const KernelParams& z_params) {
  require(batch_y.rows() >= 2, "centered_gram_oracle: batch needs at least two points");
  require(batch_y.rows() == batch_z.rows(), "centered_gram_oracle: y and z batches differ in size");
  const Index b = batch_y.rows();
  const Matrix k_yy = gram_entries(batch_y, batch_y, y_params);
  const Matrix k_zz = gram_entries(batch_z, batch_z, z_params);

  Matrix cross(b, b);  // cross(i, j) = <psi(z_i), mu(y_j)>
  Matrix inner(b, b);
  for (Index j = 0; j < b; ++j) {
    const Vector yj = batch_y.row(j).transpose();
    for (Index i = 0; i < b; ++i) {
      cross(i, j) = mu.cross(batch_z.row(i).transpose(), yj);
      inner(i, j) = mu.inner(batch_y.row(i).transpose(), yj);
    }
  }
  Matrix kc = k_zz - cross - cross.transpose() + inner;
  Matrix khat = hadamard(k_yy, kc);
  khat = (0.5 * (khat + khat.transpose())).eval();
  return {std::move(khat), static_cast<std::size_t>(b)};
}

CirceEstimate circe_oracle(const MatrixRef& batch_x_feats, const MatrixRef& batch_y, const MatrixRef& batch_z,
                           const ConditionalMeanOracle& mu, const KernelParams& x_params,
                           const KernelParams& y_params, const KernelParams& z_params, Variant variant) {
  require(batch_x_feats.rows() == batch_y.rows(), "circe_oracle: x and y batches differ in size");
  const CenteredGram cg = centered_gram_oracle(batch_y, batch_z, mu, y_params, z_params);
  return circe_statistic(gram_entries(batch_x_feats, batch_x_feats, x_params), cg, variant);
}

}  // namespace circe
