#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "halo/network.hpp"

namespace halo::testing {

struct GradCheckResult {
  double worst = 0.0;         // max |analytic - numeric| / max(1, |analytic|)
  std::string worst_param;
  std::vector<std::string> groups_seen;
};

inline double batch_loss(const Model& model, const RowMatrix& x, const std::vector<int>& y) {
  ForwardCache cache;
  forward(model, x, Mode::train, cache);
  return softmax_ce_loss(cache.logits, y).loss;
}

/// Random model and batch; offsets are drawn away from the origin so the
/// manifold gradients are exercised in general position.
inline Model random_model(std::mt19937_64& rng, HfrNormalization norm, bool use_hfr = true) {
  ModelConfig cfg;
  std::uniform_int_distribution<int> dim(2, 5);
  cfg.dims = {dim(rng), dim(rng) + 2, dim(rng), dim(rng), 0};
  cfg.use_hfr = use_hfr;
  cfg.hfr_norm = norm;
  Model model = init_model(cfg, rng());
  std::normal_distribution<double> g(0.0, 0.3);
  for (Eigen::Index r = 0; r < model.params.gyroplanes.offsets.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.params.gyroplanes.offsets.cols(); ++c) {
      model.params.gyroplanes.offsets(r, c) = g(rng) / std::sqrt(static_cast<double>(cfg.dims.embed_dim));
    }
  }
  return model;
}

inline GradCheckResult check_gradients(Model model, std::mt19937_64& rng, int batch = 32,
                                       double step = 1e-5) {
  const auto& d = model.config.dims;
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, d.num_classes - 1);
  RowMatrix x(batch, d.input_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  std::vector<int> y(static_cast<std::size_t>(batch));
  for (auto& v : y) v = cls(rng);
  y[0] = kUnlabeled;

  ForwardCache cache;
  forward(model, x, Mode::train, cache);
  const LossResult loss = softmax_ce_loss(cache.logits, y);
  ModelGradients grads = backward(model, cache, loss, y);

  GradCheckResult result;
  auto pviews = parameter_views(model.params);
  auto gviews = parameter_views(grads);
  for (std::size_t v = 0; v < pviews.size(); ++v) {
    result.groups_seen.push_back(pviews[v].name);
    for (std::size_t i = 0; i < pviews[v].size(); ++i) {
      double& theta = pviews[v].data[i];
      const double saved = theta;
      theta = saved + step;
      const double up = batch_loss(model, x, y);
      theta = saved - step;
      const double down = batch_loss(model, x, y);
      theta = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = gviews[v].data[i];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
      if (err > result.worst) {
        result.worst = err;
        result.worst_param = pviews[v].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace halo::testing
