#include "halo/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace halo {

void OptimConfig::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be >= 0");
  if (!(poly_power > 0.0)) throw std::invalid_argument("poly power must be > 0");
  if (total_steps < 0) throw std::invalid_argument("total steps must be >= 0");
  if (!(base_lr_encoder >= 0.0) || !(base_lr_head >= 0.0)) {
    throw std::invalid_argument("learning rates must be >= 0");
  }
}

double poly_lr(const OptimConfig& cfg, long step, double base_lr) {
  if (cfg.total_steps <= 0 || step >= cfg.total_steps) return 0.0;
  if (step <= 0) return base_lr;
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return base_lr * std::pow(frac, cfg.poly_power);
}

void sgd_step_euclidean(std::span<double> param, std::span<const double> grad,
                        std::span<double> buffer, double lr, const OptimConfig& cfg) {
  if (param.size() != grad.size() || param.size() != buffer.size()) {
    throw std::invalid_argument("sgd step: shape mismatch");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + cfg.weight_decay * param[i];
    buffer[i] = cfg.momentum * buffer[i] + g;
    param[i] -= lr * buffer[i];
  }
}

BallPoint rsgd_step_manifold(const BallPoint& p, const Vec& ambient_grad, Vec& buffer, double lr,
                             const ManifoldParams& m, const OptimConfig& cfg) {
  if (buffer.size() != p.dim()) buffer = Vec::Zero(p.dim());
  const double shrink = 1.0 - m.c * p.coords.squaredNorm();
  const Vec riem = ambient_grad * (shrink * shrink / 4.0);
  buffer = cfg.momentum * buffer + riem;
  return project_to_ball(exp_map(p, -lr * buffer, m).coords, m);
}

RiemannianSgd::RiemannianSgd(OptimConfig cfg, const ModelParams& shape_like) : cfg_(cfg) {
  cfg_.validate();
  ModelParams copy = shape_like;
  for (const auto& v : parameter_views(copy)) state_.buffers.emplace_back(v.size(), 0.0);
}

double RiemannianSgd::current_lr(ParamGroup group) const {
  const double base = group == ParamGroup::encoder ? cfg_.base_lr_encoder : cfg_.base_lr_head;
  return poly_lr(cfg_, state_.step, base);
}

void RiemannianSgd::step(Model& model, const ModelGradients& grads) {
  auto params = parameter_views(model.params);
  ModelGradients g = grads;
  const auto gviews = parameter_views(g);
  if (params.size() != gviews.size() || params.size() != state_.buffers.size()) {
    throw std::invalid_argument("optimizer: parameter layout changed");
  }
  const auto& m = model.config.manifold;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& pv = params[t];
    const auto& gv = gviews[t];
    auto& buf = state_.buffers[t];
    if (pv.size() != gv.size() || pv.size() != buf.size()) {
      throw std::invalid_argument("optimizer: shape mismatch for " + pv.name);
    }
    const double lr = current_lr(pv.group);
    if (pv.group != ParamGroup::manifold) {
      sgd_step_euclidean(pv.values(), gv.values(), buf, lr, cfg_);
      continue;
    }
    // One ball point per row.
    for (Eigen::Index r = 0; r < pv.rows; ++r) {
      const auto off = static_cast<std::size_t>(r * pv.cols);
      Eigen::Map<Vec> prow(pv.data + off, pv.cols);
      Eigen::Map<const Vec> grow(gv.data + off, pv.cols);
      Eigen::Map<Vec> brow(buf.data() + off, pv.cols);
      Vec b = brow;
      const BallPoint next = rsgd_step_manifold(BallPoint(Vec(prow)), Vec(grow), b, lr, m, cfg_);
      prow = next.coords;
      brow = b;
    }
  }
  ++state_.step;
}

}  // namespace halo
