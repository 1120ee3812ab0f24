#pragma once

#include <span>
#include <vector>

#include "halo/geometry.hpp"
#include "halo/network.hpp"

namespace halo {

struct OptimConfig {
  double base_lr_encoder = 1e-3;
  double base_lr_head = 1e-2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double poly_power = 0.5;
  long total_steps = 2000;

  void validate() const;
};

/// base_lr * (1 - step / total_steps)^power; steps past the end give 0.
double poly_lr(const OptimConfig& cfg, long step, double base_lr);

/// grad' = grad + wd * param; buf = momentum * buf + grad'; param -= lr * buf.
void sgd_step_euclidean(std::span<double> param, std::span<const double> grad,
                        std::span<double> buffer, double lr, const OptimConfig& cfg);

/// Riemannian SGD on one ball point. The ambient gradient is rescaled by the
/// inverse metric (1 - c||p||^2)^2 / 4, accumulated into a tangent momentum
/// buffer (reused at the new point without transport), and applied through
/// the exponential map. No weight decay.
BallPoint rsgd_step_manifold(const BallPoint& p, const Vec& ambient_grad, Vec& buffer, double lr,
                             const ManifoldParams& m, const OptimConfig& cfg);

/// Momentum buffers for every parameter tensor of a model plus the step
/// counter driving the schedule.
struct OptimState {
  std::vector<std::vector<double>> buffers;
  long step = 0;
};

class RiemannianSgd {
 public:
  RiemannianSgd(OptimConfig cfg, const ModelParams& shape_like);

  /// Applies one update to every parameter group and advances the schedule.
  void step(Model& model, const ModelGradients& grads);

  const OptimConfig& config() const { return cfg_; }
  const OptimState& state() const { return state_; }
  double current_lr(ParamGroup group) const;

 private:
  OptimConfig cfg_;
  OptimState state_;
};

}  // namespace halo
