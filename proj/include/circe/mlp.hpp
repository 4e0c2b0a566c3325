#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "circe/baselines.hpp"
#include "circe/circe.hpp"
#include "circe/kernels.hpp"
#include "circe/rff.hpp"

namespace circe {

inline constexpr double kLeakySlope = 0.01;

/// Fully connected network: leaky-ReLU on every hidden layer, linear output.
/// weights[l] is widths[l+1] x widths[l]; inputs are rows.
struct MlpModel {
  std::vector<Index> widths;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  double slope = kLeakySlope;
  std::uint64_t seed = 0;

  std::size_t n_layers() const { return weights.size(); }
  Index parameter_count() const;
  Index input_dim() const { return widths.front(); }
};

/// He-normal weights, zero biases.
MlpModel init_mlp(std::vector<Index> widths, std::uint64_t seed, double slope = kLeakySlope);

struct ForwardResult {
  Matrix features;    // penultimate activations (the input itself for a single layer)
  Vector prediction;  // first output column
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // post[0] = inputs, post[l+1] = activation of layer l
};

ForwardResult forward(const MlpModel& model, const MatrixRef& inputs);
Vector predict(const MlpModel& model, const MatrixRef& inputs);

/// Parameters flattened layer by layer: weights (column-major) then biases.
Vector flatten(const MlpModel& model);
void unflatten(MlpModel& model, const VectorRef& params);

enum class Method { none, circe, hscic, gcm };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

/// What the statistic sees: the scalar prediction or the penultimate features.
enum class RegTarget { prediction, features };
std::string_view to_string(RegTarget t);
RegTarget parse_reg_target(std::string_view s);

/// Where CIRCE gets its conditionally centered Z Gram: the exact holdout
/// regression or the RFF approximation of it.
class CirceContext {
 public:
  CirceContext() = default;
  static CirceContext exact(std::shared_ptr<const CmeModel> model);
  static CirceContext rff(std::shared_ptr<const CmeModel> model, RffSettings settings, std::uint64_t seed);

  bool empty() const { return model_ == nullptr; }
  const CmeModel& model() const;
  CenteredGram centered_gram(const MatrixRef& batch_y, const MatrixRef& batch_z, std::uint64_t batch_index) const;

 private:
  std::shared_ptr<const CmeModel> model_;
  std::shared_ptr<const RffCirceEstimator> rff_;
};

struct Regularizer {
  Method method = Method::none;
  double gamma = 0.0;
  Variant variant = Variant::centered;
  RegTarget target = RegTarget::prediction;
  KernelParams x_params = KernelParams::gaussian(1.0);
  // Per-batch regressions of the baselines.
  KernelParams y_params = KernelParams::gaussian(1.0);
  KernelParams z_params = KernelParams::gaussian(1.0);
  double lambda = 0.1;
};

struct BatchView {
  MatrixRef inputs;
  MatrixRef target;  // B x 1
  MatrixRef y;
  MatrixRef z;
  std::uint64_t batch_index = 0;
};

struct LossResult {
  double loss = 0.0;
  double mse = 0.0;
  double statistic = 0.0;  // reported statistic (hard max for GCM), 0 without a regularizer
  Vector grad;             // flattened like flatten()
  bool finite = true;
};

/// MSE(prediction, target) + gamma * statistic(reg target, z, y), with its
/// gradient by backprop. The statistic's y/z-only parts are held fixed.
LossResult loss_and_grad(const MlpModel& model, const BatchView& batch, const CirceContext& cme,
                         const Regularizer& reg);

enum class Optimizer { adam, adamw };
std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

struct AdamState {
  Vector m;
  Vector v;
  std::uint64_t t = 0;
};

struct OptimizerSettings {
  Optimizer kind = Optimizer::adamw;
  double lr = 1e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam step on `params` in place. adam adds weight_decay * params to the
/// gradient; adamw shrinks params by lr * weight_decay * params separately.
void optimizer_step(Vector& params, AdamState& state, const VectorRef& grad, const OptimizerSettings& opt);

}  // namespace circe
