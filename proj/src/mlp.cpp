#include "circe/mlp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "circe/rng.hpp"

namespace circe {

Index MlpModel::parameter_count() const {
  Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

MlpModel init_mlp(std::vector<Index> widths, std::uint64_t seed, double slope) {
  require(widths.size() >= 2, "init_mlp: need at least input and output widths");
  for (Index w : widths) require(w >= 1, "init_mlp: widths must be positive");
  MlpModel m;
  m.widths = std::move(widths);
  m.slope = slope;
  m.seed = seed;
  Rng rng(derive_seed(seed, {0x4d4c50ULL}));
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    const Index fan_in = m.widths[l];
    const Index fan_out = m.widths[l + 1];
    const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
    std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(fan_in)));
    Matrix w(fan_out, fan_in);
    for (Index i = 0; i < fan_out; ++i) {
      for (Index j = 0; j < fan_in; ++j) w(i, j) = dist(rng);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Vector::Zero(fan_out));
  }
  return m;
}

ForwardResult forward(const MlpModel& model, const MatrixRef& inputs) {
  require(!model.weights.empty(), "forward: empty model");
  require(inputs.cols() == model.input_dim(), "forward: input dimension does not match the first layer");
  ForwardResult r;
  r.post.push_back(inputs);
  const std::size_t n = model.n_layers();
  for (std::size_t l = 0; l < n; ++l) {
    Matrix z = r.post.back() * model.weights[l].transpose();
    z.rowwise() += model.biases[l].transpose();
    Matrix h = z;
    if (l + 1 < n) h = z.unaryExpr([s = model.slope](double v) { return v > 0.0 ? v : s * v; });
    r.pre.push_back(std::move(z));
    r.post.push_back(std::move(h));
  }
  r.features = r.post[n - 1];
  r.prediction = r.post[n].col(0);
  return r;
}

Vector predict(const MlpModel& model, const MatrixRef& inputs) { return forward(model, inputs).prediction; }

Vector flatten(const MlpModel& model) {
  Vector out(model.parameter_count());
  Index off = 0;
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    const Matrix& w = model.weights[l];
    out.segment(off, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
    off += w.size();
    out.segment(off, model.biases[l].size()) = model.biases[l];
    off += model.biases[l].size();
  }
  return out;
}

void unflatten(MlpModel& model, const VectorRef& params) {
  require(params.size() == model.parameter_count(), "unflatten: parameter count mismatch");
  Index off = 0;
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    Matrix& w = model.weights[l];
    Eigen::Map<Vector>(w.data(), w.size()) = params.segment(off, w.size());
    off += w.size();
    model.biases[l] = params.segment(off, model.biases[l].size());
    off += model.biases[l].size();
  }
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::none: return "none";
    case Method::circe: return "circe";
    case Method::hscic: return "hscic";
    case Method::gcm: return "gcm";
  }
  return "none";
}

Method parse_method(std::string_view s) {
  if (s == "none") return Method::none;
  if (s == "circe") return Method::circe;
  if (s == "hscic") return Method::hscic;
  if (s == "gcm") return Method::gcm;
  throw UsageError("unknown method: " + std::string(s));
}

std::string_view to_string(RegTarget t) { return t == RegTarget::prediction ? "prediction" : "features"; }

RegTarget parse_reg_target(std::string_view s) {
  if (s == "prediction") return RegTarget::prediction;
  if (s == "features") return RegTarget::features;
  throw UsageError("unknown regularization target: " + std::string(s));
}

std::string_view to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "adamw"; }

Optimizer parse_optimizer(std::string_view s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "adamw") return Optimizer::adamw;
  throw UsageError("unknown optimizer: " + std::string(s));
}

CirceContext CirceContext::exact(std::shared_ptr<const CmeModel> model) {
  require(model != nullptr, "CirceContext: missing model");
  CirceContext c;
  c.model_ = std::move(model);
  return c;
}

CirceContext CirceContext::rff(std::shared_ptr<const CmeModel> model, RffSettings settings, std::uint64_t seed) {
  CirceContext c = exact(model);
  c.rff_ = std::make_shared<RffCirceEstimator>(std::move(model), settings, seed);
  return c;
}

const CmeModel& CirceContext::model() const {
  require(model_ != nullptr, "CirceContext: no conditional mean model");
  return *model_;
}

CenteredGram CirceContext::centered_gram(const MatrixRef& batch_y, const MatrixRef& batch_z,
                                         std::uint64_t batch_index) const {
  if (rff_) return rff_->centered_gram(batch_y, batch_z, batch_index);
  const CmeModel& m = model();
  return circe::centered_gram(batch_y, batch_z, m, m.y_params, m.z_params);
}

LossResult loss_and_grad(const MlpModel& model, const BatchView& batch, const CirceContext& cme,
                         const Regularizer& reg) {
  require(reg.gamma >= 0.0, "loss_and_grad: gamma must be nonnegative");
  const Index b = batch.inputs.rows();
  require(b >= 1 && batch.target.rows() == b, "loss_and_grad: target does not match the batch");
  const bool regularize = reg.method != Method::none && reg.gamma > 0.0;
  if (regularize) {
    require(b >= 2, "loss_and_grad: regularized objective needs a batch of at least two");
    require(batch.y.rows() == b && batch.z.rows() == b, "loss_and_grad: y/z do not match the batch");
  }

  const ForwardResult fw = forward(model, batch.inputs);
  const Vector err = fw.prediction - batch.target.col(0);
  LossResult out;
  out.mse = err.squaredNorm() / static_cast<double>(b);
  out.loss = out.mse;

  const std::size_t n = model.n_layers();
  Matrix g_out = Matrix::Zero(b, model.widths.back());
  g_out.col(0) = (2.0 / static_cast<double>(b)) * err;
  Matrix g_feat_extra;

  if (regularize) {
    const bool on_pred = reg.target == RegTarget::prediction;
    const Matrix feats = on_pred ? Matrix(fw.prediction) : fw.features;
    double value = 0.0;
    Matrix g;
    try {
      if (reg.method == Method::circe) {
        const CenteredGram cg = cme.centered_gram(batch.y, batch.z, batch.batch_index);
        CirceWithGrad r = circe_with_feature_grad(feats, reg.x_params, cg, reg.variant);
        value = r.estimate.value;
        out.statistic = value;
        g = std::move(r.grad);
      } else {
        const Baseline which = reg.method == Method::gcm ? Baseline::gcm : Baseline::hscic;
        BaselineInputs in{feats, batch.z, batch.y, reg.x_params, reg.z_params, reg.y_params, reg.lambda};
        BaselineWithGrad r = baseline_with_grad(which, in);
        value = r.value;
        out.statistic = r.reported;
        g = std::move(r.grad);
      }
    } catch (const NumericalError&) {
      out.finite = false;
      out.loss = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    out.loss += reg.gamma * value;
    if (on_pred) {
      g_out.col(0) += reg.gamma * g.col(0);
    } else {
      g_feat_extra = reg.gamma * g;
    }
  }

  // Backward pass.
  out.grad.resize(model.parameter_count());
  std::vector<Matrix> gw(n);
  std::vector<Vector> gb(n);
  Matrix delta = std::move(g_out);
  for (std::size_t l = n; l-- > 0;) {
    gw[l] = delta.transpose() * fw.post[l];
    gb[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix gh = delta * model.weights[l];
    if (l == n - 1 && g_feat_extra.size() > 0) gh += g_feat_extra;
    const Matrix& z = fw.pre[l - 1];
    for (Index j = 0; j < gh.cols(); ++j) {
      for (Index i = 0; i < gh.rows(); ++i) {
        if (!(z(i, j) > 0.0)) gh(i, j) *= model.slope;
      }
    }
    delta = std::move(gh);
  }
  Index off = 0;
  for (std::size_t l = 0; l < n; ++l) {
    out.grad.segment(off, gw[l].size()) = Eigen::Map<const Vector>(gw[l].data(), gw[l].size());
    off += gw[l].size();
    out.grad.segment(off, gb[l].size()) = gb[l];
    off += gb[l].size();
  }
  out.finite = std::isfinite(out.loss) && out.grad.allFinite();
  return out;
}

void optimizer_step(Vector& params, AdamState& state, const VectorRef& grad, const OptimizerSettings& opt) {
  require(params.size() == grad.size(), "optimizer_step: gradient size mismatch");
  if (state.m.size() != params.size()) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
    state.t = 0;
  }
  Vector g = grad;
  if (opt.kind == Optimizer::adam && opt.weight_decay != 0.0) g += opt.weight_decay * params;
  state.t += 1;
  state.m = opt.beta1 * state.m + (1.0 - opt.beta1) * g;
  state.v = opt.beta2 * state.v + (1.0 - opt.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
  if (opt.kind == Optimizer::adamw && opt.weight_decay != 0.0) params *= 1.0 - opt.lr * opt.weight_decay;
  params.array() -= opt.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + opt.eps);
}

}  // namespace circe
