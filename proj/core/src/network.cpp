#include "halo/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace halo {

void PixelBatch::validate(int num_classes, Eigen::Index input_dim) const {
  if (features.cols() != input_dim) {
    throw std::invalid_argument("batch feature width " + std::to_string(features.cols()) +
                                " does not match input dim " + std::to_string(input_dim));
  }
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw std::invalid_argument("batch label count does not match feature rows");
  }
  if (!coords.empty() && static_cast<Eigen::Index>(coords.size()) != features.rows()) {
    throw std::invalid_argument("batch coordinate count does not match feature rows");
  }
  for (int y : labels) {
    if (y != kUnlabeled && (y < 0 || y >= num_classes)) {
      throw std::invalid_argument("label " + std::to_string(y) + " out of range");
    }
  }
}

void ModelConfig::validate() const {
  manifold.validate();
  if (dims.input_dim < 1 || dims.embed_dim < 1 || dims.num_classes < 1 || dims.hidden_dim < 0 ||
      dims.hfr_hidden < 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) {
    throw std::invalid_argument("bn momentum must lie in [0, 1)");
  }
}

namespace {

DenseLayer xavier_layer(int in, int out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-a, a);
  DenseLayer layer{RowMatrix(out, in), Eigen::VectorXd::Zero(out)};
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
  return layer;
}

DenseLayer zero_layer_like(const DenseLayer& l) {
  return {RowMatrix::Zero(l.weight.rows(), l.weight.cols()),
          Eigen::VectorXd::Zero(l.bias.size())};
}

void add_bias(RowMatrix& m, const Eigen::VectorXd& b) { m.rowwise() += b.transpose(); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Per-class quantities that do not depend on the embedding.
struct PlaneConsts {
  const double* p;
  const double* w;
  double pp;      // ||p||^2
  double lambda;  // 2 / (1 - c ||p||^2)
  double wn;      // ||w||
};

PlaneConsts plane_consts(const GyroplaneParams& gp, int cls, const ManifoldParams& m) {
  PlaneConsts k{};
  k.p = gp.offsets.row(cls).data();
  k.w = gp.normals.row(cls).data();
  k.pp = gp.offsets.row(cls).squaredNorm();
  k.lambda = 2.0 / (1.0 - m.c * k.pp);
  k.wn = gp.normals.row(cls).norm();
  return k;
}

// Quantities of q = (-p) (+)_c h and the signed distance, for one pair.
struct PairTerms {
  double ah;     // <a, h> with a = -p
  double hh;     // ||h||^2
  double alpha;  // 1 + 2c<a,h> + c||h||^2
  double beta;   // 1 - c||a||^2
  double denom;  // 1 + 2c<a,h> + c^2 ||a||^2 ||h||^2
  double qw;     // <q, w>
  double qq;     // ||q||^2
  double conf;   // 1 - c||q||^2 (floored)
  double arg;    // asinh argument
  double dist;   // signed gyroplane distance
};

PairTerms pair_terms(const PlaneConsts& k, const double* h, Eigen::Index n,
                     const ManifoldParams& m, double* q) {
  const double c = m.c;
  const double sc = m.sqrt_c();
  PairTerms t{};
  double ph = 0.0, hh = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    ph += k.p[j] * h[j];
    hh += h[j] * h[j];
  }
  t.ah = -ph;
  t.hh = hh;
  t.alpha = 1.0 + 2.0 * c * t.ah + c * hh;
  t.beta = 1.0 - c * k.pp;
  t.denom = 1.0 + 2.0 * c * t.ah + c * c * k.pp * hh;
  double qw = 0.0, qq = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double qj = (t.alpha * -k.p[j] + t.beta * h[j]) / t.denom;
    q[j] = qj;
    qw += qj * k.w[j];
    qq += qj * qj;
  }
  t.qw = qw;
  t.qq = qq;
  t.conf = std::max(1.0 - c * qq, 1e-15);
  t.arg = 2.0 * sc * qw / (t.conf * k.wn);
  t.dist = std::asinh(t.arg) / sc;
  return t;
}

}  // namespace

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const auto& d = config.dims;
  Model model;
  model.config = config;

  auto& enc = model.params.encoder.layers;
  if (d.hidden_dim > 0) {
    enc.push_back(xavier_layer(d.input_dim, d.hidden_dim, rng));
    enc.push_back(xavier_layer(d.hidden_dim, d.embed_dim, rng));
  } else {
    enc.push_back(xavier_layer(d.input_dim, d.embed_dim, rng));
  }

  const int k = d.hfr_width();
  auto& hfr = model.params.hfr;
  hfr.fc1 = xavier_layer(d.embed_dim, k, rng);
  hfr.bn_gamma = Eigen::VectorXd::Ones(k);
  hfr.bn_beta = Eigen::VectorXd::Zero(k);
  hfr.fc2 = xavier_layer(k, d.embed_dim, rng);
  model.bn_stats.mean = Eigen::VectorXd::Zero(k);
  model.bn_stats.var = Eigen::VectorXd::Ones(k);

  auto& gp = model.params.gyroplanes;
  gp.offsets = RowMatrix(d.num_classes, d.embed_dim);
  gp.normals = RowMatrix(d.num_classes, d.embed_dim);
  std::uniform_real_distribution<double> small(-1e-3, 1e-3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < gp.offsets.size(); ++i) gp.offsets.data()[i] = small(rng);
  for (Eigen::Index i = 0; i < gp.normals.size(); ++i) gp.normals.data()[i] = normal(rng);
  return model;
}

ModelGradients zeros_like(const ModelParams& params) {
  ModelGradients g;
  for (const auto& l : params.encoder.layers) g.encoder.layers.push_back(zero_layer_like(l));
  g.hfr.fc1 = zero_layer_like(params.hfr.fc1);
  g.hfr.fc2 = zero_layer_like(params.hfr.fc2);
  g.hfr.bn_gamma = Eigen::VectorXd::Zero(params.hfr.bn_gamma.size());
  g.hfr.bn_beta = Eigen::VectorXd::Zero(params.hfr.bn_beta.size());
  g.gyroplanes.offsets =
      RowMatrix::Zero(params.gyroplanes.offsets.rows(), params.gyroplanes.offsets.cols());
  g.gyroplanes.normals =
      RowMatrix::Zero(params.gyroplanes.normals.rows(), params.gyroplanes.normals.cols());
  return g;
}

std::vector<ParamView> parameter_views(ModelParams& params) {
  std::vector<ParamView> views;
  auto add_matrix = [&](std::string name, RowMatrix& m, ParamGroup g) {
    views.push_back({std::move(name), m.data(), m.rows(), m.cols(), g});
  };
  auto add_vector = [&](std::string name, Eigen::VectorXd& v, ParamGroup g) {
    views.push_back({std::move(name), v.data(), v.size(), 1, g});
  };
  for (std::size_t i = 0; i < params.encoder.layers.size(); ++i) {
    auto& l = params.encoder.layers[i];
    add_matrix("encoder." + std::to_string(i) + ".weight", l.weight, ParamGroup::encoder);
    add_vector("encoder." + std::to_string(i) + ".bias", l.bias, ParamGroup::encoder);
  }
  add_matrix("hfr.fc1.weight", params.hfr.fc1.weight, ParamGroup::head);
  add_vector("hfr.fc1.bias", params.hfr.fc1.bias, ParamGroup::head);
  add_vector("hfr.bn.gamma", params.hfr.bn_gamma, ParamGroup::head);
  add_vector("hfr.bn.beta", params.hfr.bn_beta, ParamGroup::head);
  add_matrix("hfr.fc2.weight", params.hfr.fc2.weight, ParamGroup::head);
  add_vector("hfr.fc2.bias", params.hfr.fc2.bias, ParamGroup::head);
  add_matrix("gyroplanes.offsets", params.gyroplanes.offsets, ParamGroup::manifold);
  add_matrix("gyroplanes.normals", params.gyroplanes.normals, ParamGroup::head);
  return views;
}

RowMatrix encoder_forward(const EncoderParams& params, const RowMatrix& features) {
  if (params.layers.empty()) throw std::invalid_argument("encoder has no layers");
  RowMatrix x = features;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    if (x.cols() != l.weight.cols()) {
      throw std::invalid_argument("encoder layer " + std::to_string(i) + " expects width " +
                                  std::to_string(l.weight.cols()) + ", got " +
                                  std::to_string(x.cols()));
    }
    RowMatrix y = x * l.weight.transpose();
    add_bias(y, l.bias);
    if (i + 1 < params.layers.size()) y = y.array().tanh().matrix();
    x = std::move(y);
  }
  return x;
}

std::string_view to_string(HfrNormalization n) {
  switch (n) {
    case HfrNormalization::per_pixel: return "per_pixel";
    case HfrNormalization::per_channel: return "per_channel";
    case HfrNormalization::batch: return "batch";
  }
  return "unknown";
}

HfrNormalization hfr_normalization_from_string(std::string_view name) {
  if (name == "per_pixel" || name == "per-pixel") return HfrNormalization::per_pixel;
  if (name == "per_channel" || name == "per-channel") return HfrNormalization::per_channel;
  if (name == "batch") return HfrNormalization::batch;
  throw std::invalid_argument("unknown reweighting normalization: " + std::string(name));
}

RowMatrix hfr_forward(const HfrParams& params, const BatchNormStats& stats, const RowMatrix& z,
                      Mode mode, HfrNormalization norm, double bn_eps, ForwardCache* cache) {
  if (!z.allFinite()) throw std::invalid_argument("non-finite features entering reweighting");
  const Eigen::Index b = z.rows();

  RowMatrix pre = z * params.fc1.weight.transpose();
  add_bias(pre, params.fc1.bias);

  Eigen::VectorXd mean, var;
  if (mode == Mode::train && b > 1) {
    mean = pre.colwise().mean().transpose();
    var = (pre.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  } else {
    mean = stats.mean;
    var = stats.var;
  }
  const Eigen::ArrayXd inv_std = (var.array() + bn_eps).rsqrt();
  RowMatrix xhat = ((pre.rowwise() - mean.transpose()).array().rowwise() *
                    inv_std.transpose())
                       .matrix();
  RowMatrix act = (xhat.array().rowwise() * params.bn_gamma.array().transpose()).matrix();
  add_bias(act, params.bn_beta);
  act = act.cwiseMax(0.0);

  RowMatrix logits = act * params.fc2.weight.transpose();
  add_bias(logits, params.fc2.bias);
  RowMatrix weights = logits.unaryExpr([](double v) { return sigmoid(v); });

  Eigen::VectorXd normalizers;
  RowMatrix out(z.rows(), z.cols());
  if (norm == HfrNormalization::per_pixel) {
    normalizers = z.cwiseAbs().rowwise().sum();
    for (Eigen::Index i = 0; i < b; ++i) {
      const double s = normalizers(i);
      if (s == 0.0) {
        out.row(i).setZero();
      } else {
        out.row(i) = z.row(i).cwiseProduct(weights.row(i)) / s;
      }
    }
  } else if (norm == HfrNormalization::per_channel) {
    normalizers = z.cwiseAbs().colwise().mean().transpose();
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double s = normalizers(j);
      if (s == 0.0) {
        out.col(j).setZero();
      } else {
        out.col(j) = z.col(j).cwiseProduct(weights.col(j)) / s;
      }
    }
  } else {
    normalizers = Eigen::VectorXd::Constant(1, z.cwiseAbs().sum());
    const double s = normalizers(0);
    if (s == 0.0) {
      out.setZero();
    } else {
      out = z.cwiseProduct(weights) / s;
    }
  }

  if (cache != nullptr) {
    cache->hfr_pre = std::move(pre);
    cache->hfr_xhat = std::move(xhat);
    cache->bn_mean = std::move(mean);
    cache->bn_var = std::move(var);
    cache->hfr_act = std::move(act);
    cache->weights = std::move(weights);
    cache->normalizers = std::move(normalizers);
  }
  return out;
}

RowMatrix exp_map_origin_rows(const RowMatrix& tangent, const ManifoldParams& m,
                              Eigen::VectorXi* clipped) {
  const double sc = m.sqrt_c();
  const double limit = m.max_norm();
  RowMatrix h(tangent.rows(), tangent.cols());
  if (clipped != nullptr) clipped->setZero(tangent.rows());
  for (Eigen::Index i = 0; i < tangent.rows(); ++i) {
    const double r = tangent.row(i).norm();
    if (r == 0.0) {
      h.row(i).setZero();
      continue;
    }
    h.row(i) = (std::tanh(sc * r) / (sc * r)) * tangent.row(i);
    const double hn = h.row(i).norm();
    if (hn > limit) {
      h.row(i) *= limit / hn;
      if (clipped != nullptr) (*clipped)(i) = 1;
    }
  }
  return h;
}

double gyroplane_distance(const GyroplaneParams& gp, int cls, std::span<const double> h,
                          const ManifoldParams& m) {
  const auto k = plane_consts(gp, cls, m);
  std::vector<double> q(h.size());
  return pair_terms(k, h.data(), static_cast<Eigen::Index>(h.size()), m, q.data()).dist;
}

RowMatrix mlr_logits(const GyroplaneParams& gp, const RowMatrix& embeddings,
                     const ManifoldParams& m) {
  const Eigen::Index b = embeddings.rows();
  const Eigen::Index n = embeddings.cols();
  const auto classes = static_cast<int>(gp.offsets.rows());
  if (gp.offsets.cols() != n || gp.normals.cols() != n || gp.normals.rows() != classes) {
    throw std::invalid_argument("gyroplane shapes do not match embedding dim");
  }
  RowMatrix logits(b, classes);
  std::vector<double> q(static_cast<std::size_t>(n));
  for (int y = 0; y < classes; ++y) {
    const auto k = plane_consts(gp, y, m);
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto t = pair_terms(k, embeddings.row(i).data(), n, m, q.data());
      logits(i, y) = k.lambda * k.wn * t.dist;
    }
  }
  return logits;
}

void forward(const Model& model, const RowMatrix& features, Mode mode, ForwardCache& cache) {
  const auto& params = model.params;
  const auto& cfg = model.config;
  if (features.cols() != cfg.dims.input_dim) {
    throw std::invalid_argument("feature width " + std::to_string(features.cols()) +
                                " does not match model input dim " +
                                std::to_string(cfg.dims.input_dim));
  }
  cache.mode = mode;
  cache.layer_inputs.clear();
  RowMatrix x = features;
  const auto& layers = params.encoder.layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    cache.layer_inputs.push_back(x);
    RowMatrix y = x * layers[i].weight.transpose();
    add_bias(y, layers[i].bias);
    if (i + 1 < layers.size()) y = y.array().tanh().matrix();
    x = std::move(y);
  }
  cache.z = std::move(x);

  if (cfg.use_hfr) {
    cache.tangent = hfr_forward(params.hfr, model.bn_stats, cache.z, mode, cfg.hfr_norm,
                                cfg.bn_eps, &cache);
  } else {
    cache.tangent = cache.z;
  }
  cache.embeddings = exp_map_origin_rows(cache.tangent, cfg.manifold, &cache.clipped);
  cache.logits = mlr_logits(params.gyroplanes, cache.embeddings, cfg.manifold);
}

RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      p(i, j) = std::exp(logits(i, j) - mx);
      z += p(i, j);
    }
    p.row(i) /= z;
  }
  return p;
}

LossResult softmax_ce_loss(const RowMatrix& logits, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw std::invalid_argument("label count does not match logits rows");
  }
  LossResult out;
  out.probs = softmax_rows(logits);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y == kUnlabeled) continue;
    if (y < 0 || y >= logits.cols()) throw std::invalid_argument("label out of range");
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    total += lse - logits(i, y);
    ++out.labeled;
  }
  if (out.labeled == 0) throw std::invalid_argument("empty supervision");
  out.loss = total / out.labeled;
  return out;
}

ModelGradients backward(const Model& model, const ForwardCache& cache, const LossResult& loss,
                        std::span<const int> labels) {
  const auto& params = model.params;
  const auto& cfg = model.config;
  const auto& m = cfg.manifold;
  const double c = m.c;
  const double sc = m.sqrt_c();
  const Eigen::Index b = cache.logits.rows();
  const Eigen::Index n = cache.embeddings.cols();
  const auto classes = static_cast<int>(cache.logits.cols());

  ModelGradients g = zeros_like(params);

  // d loss / d logits
  RowMatrix g_logits = RowMatrix::Zero(b, classes);
  const double inv_n = 1.0 / loss.labeled;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y == kUnlabeled) continue;
    g_logits.row(i) = loss.probs.row(i) * inv_n;
    g_logits(i, y) -= inv_n;
  }

  // Hyperbolic MLR.
  RowMatrix g_h = RowMatrix::Zero(b, n);
  std::vector<double> q(static_cast<std::size_t>(n));
  std::vector<double> g_q(static_cast<std::size_t>(n));
  for (int y = 0; y < classes; ++y) {
    const auto k = plane_consts(params.gyroplanes, y, m);
    double* gp_row = g.gyroplanes.offsets.row(y).data();
    double* gw_row = g.gyroplanes.normals.row(y).data();
    for (Eigen::Index i = 0; i < b; ++i) {
      const double gz = g_logits(i, y);
      if (gz == 0.0) continue;
      const double* h = cache.embeddings.row(i).data();
      const auto t = pair_terms(k, h, n, m, q.data());

      // zeta = lambda * ||w|| * d
      const double g_lambda = gz * k.wn * t.dist;
      double g_wn = gz * k.lambda * t.dist;
      const double g_d = gz * k.lambda * k.wn;
      const double g_arg = g_d / (sc * std::sqrt(1.0 + t.arg * t.arg));
      const double g_qw = g_arg * 2.0 * sc / (t.conf * k.wn);
      const double g_qq = (1.0 - c * t.qq > 1e-15) ? g_arg * t.arg * c / t.conf : 0.0;
      g_wn += -g_arg * t.arg / k.wn;

      for (Eigen::Index j = 0; j < n; ++j) {
        g_q[j] = g_qw * k.w[j] + 2.0 * g_qq * q[j];
        gw_row[j] += g_qw * q[j] + g_wn * k.w[j] / k.wn;
      }

      // q = (alpha a + beta h) / D with a = -p.
      double gq_q = 0.0, g_alpha = 0.0, g_beta = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        gq_q += g_q[j] * q[j];
        g_alpha += g_q[j] * -k.p[j];
        g_beta += g_q[j] * h[j];
      }
      g_alpha /= t.denom;
      g_beta /= t.denom;
      const double g_den = -gq_q / t.denom;
      double* gh_row = g_h.row(i).data();
      for (Eigen::Index j = 0; j < n; ++j) {
        const double a = -k.p[j];
        const double gu = g_q[j] / t.denom;
        const double g_a = t.alpha * gu + g_alpha * 2.0 * c * h[j] - g_beta * 2.0 * c * a +
                           g_den * (2.0 * c * h[j] + 2.0 * c * c * t.hh * a);
        gh_row[j] += t.beta * gu + g_alpha * 2.0 * c * (a + h[j]) +
                     g_den * (2.0 * c * a + 2.0 * c * c * k.pp * h[j]);
        // lambda_p = 2 / (1 - c||p||^2)  =>  d lambda / d p = c lambda^2 p
        gp_row[j] += -g_a + g_lambda * c * k.lambda * k.lambda * k.p[j];
      }
    }
  }

  // Exponential map at the origin (with optional margin projection).
  RowMatrix g_t(b, n);
  const double limit = m.max_norm();
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto v = cache.tangent.row(i);
    const auto gh = g_h.row(i);
    const double r = v.norm();
    if (r == 0.0) {
      g_t.row(i) = gh;
      continue;
    }
    const double vg = v.dot(gh);
    if (cache.clipped.size() == b && cache.clipped(i) != 0) {
      g_t.row(i) = (limit / r) * (gh - (vg / (r * r)) * v);
      continue;
    }
    const double sr = sc * r;
    double alpha, dalpha_over_r;
    if (sr < 1e-4) {
      alpha = 1.0 - sr * sr / 3.0;
      dalpha_over_r = -2.0 * c / 3.0;
    } else {
      const double th = std::tanh(sr);
      alpha = th / sr;
      dalpha_over_r = ((1.0 - th * th) / r - th / (sc * r * r)) / r;
    }
    g_t.row(i) = alpha * gh + (dalpha_over_r * vg) * v;
  }

  // Feature reweighting.
  RowMatrix g_z;
  if (cfg.use_hfr) {
    const auto& z = cache.z;
    const auto& lw = cache.weights;
    g_z = RowMatrix::Zero(b, n);
    RowMatrix g_l = RowMatrix::Zero(b, n);
    auto accumulate_group = [&](Eigen::Index r0, Eigen::Index r1, double s) {
      if (s == 0.0) return;
      double cross = 0.0;
      for (Eigen::Index i = r0; i < r1; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) cross += g_t(i, j) * z(i, j) * lw(i, j);
      }
      const double inv_s = 1.0 / s;
      const double corr = cross * inv_s * inv_s;
      for (Eigen::Index i = r0; i < r1; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double zij = z(i, j);
          const double sign = (zij > 0.0) - (zij < 0.0);
          g_l(i, j) = g_t(i, j) * zij * inv_s;
          g_z(i, j) = g_t(i, j) * lw(i, j) * inv_s - sign * corr;
        }
      }
    };
    if (cfg.hfr_norm == HfrNormalization::per_pixel) {
      for (Eigen::Index i = 0; i < b; ++i) accumulate_group(i, i + 1, cache.normalizers(i));
    } else if (cfg.hfr_norm == HfrNormalization::per_channel) {
      // out_ij = z_ij L_ij / s_j with s_j = mean_i |z_ij|.
      const double inv_b = 1.0 / static_cast<double>(b);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double s = cache.normalizers(j);
        if (s == 0.0) continue;
        double cross = 0.0;
        for (Eigen::Index i = 0; i < b; ++i) cross += g_t(i, j) * z(i, j) * lw(i, j);
        const double corr = cross * inv_b / (s * s);
        for (Eigen::Index i = 0; i < b; ++i) {
          const double zij = z(i, j);
          const double sign = (zij > 0.0) - (zij < 0.0);
          g_l(i, j) = g_t(i, j) * zij / s;
          g_z(i, j) = g_t(i, j) * lw(i, j) / s - sign * corr;
        }
      }
    } else {
      accumulate_group(0, b, cache.normalizers(0));
    }

    const auto& hp = params.hfr;
    auto& gh = g.hfr;
    RowMatrix g_a2 = g_l.cwiseProduct(lw.cwiseProduct((1.0 - lw.array()).matrix()));
    gh.fc2.weight = g_a2.transpose() * cache.hfr_act;
    gh.fc2.bias = g_a2.colwise().sum().transpose();
    RowMatrix g_y = g_a2 * hp.fc2.weight;
    g_y = g_y.cwiseProduct((cache.hfr_act.array() > 0.0).cast<double>().matrix());
    gh.bn_gamma = g_y.cwiseProduct(cache.hfr_xhat).colwise().sum().transpose();
    gh.bn_beta = g_y.colwise().sum().transpose();
    RowMatrix g_xhat = (g_y.array().rowwise() * hp.bn_gamma.array().transpose()).matrix();
    const Eigen::ArrayXd inv_std = (cache.bn_var.array() + cfg.bn_eps).rsqrt();
    RowMatrix g_pre;
    if (cache.mode == Mode::train && b > 1) {
      const Eigen::RowVectorXd sum_g = g_xhat.colwise().sum();
      const Eigen::RowVectorXd sum_gx = g_xhat.cwiseProduct(cache.hfr_xhat).colwise().sum();
      const double bd = static_cast<double>(b);
      RowMatrix tmp = (g_xhat * bd).rowwise() - sum_g;
      tmp -= (cache.hfr_xhat.array().rowwise() * sum_gx.array()).matrix();
      g_pre = ((tmp.array().rowwise() * inv_std.transpose()) / bd).matrix();
    } else {
      g_pre = (g_xhat.array().rowwise() * inv_std.transpose()).matrix();
    }
    gh.fc1.weight = g_pre.transpose() * z;
    gh.fc1.bias = g_pre.colwise().sum().transpose();
    g_z += g_pre * hp.fc1.weight;
  } else {
    g_z = std::move(g_t);
  }

  // Encoder.
  const auto& layers = params.encoder.layers;
  RowMatrix g_out = std::move(g_z);
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& in = cache.layer_inputs[li];
    g.encoder.layers[li].weight = g_out.transpose() * in;
    g.encoder.layers[li].bias = g_out.colwise().sum().transpose();
    if (li > 0) {
      RowMatrix g_in = g_out * layers[li].weight;
      g_out = g_in.cwiseProduct((1.0 - in.array().square()).matrix());
    }
  }
  return g;
}

void update_bn_stats(Model& model, const ForwardCache& cache) {
  if (!model.config.use_hfr || cache.mode != Mode::train) return;
  const double mom = model.config.bn_momentum;
  const auto b = static_cast<double>(cache.z.rows());
  if (b < 2) return;
  const Eigen::VectorXd unbiased = cache.bn_var * (b / (b - 1.0));
  model.bn_stats.mean = mom * model.bn_stats.mean + (1.0 - mom) * cache.bn_mean;
  model.bn_stats.var = mom * model.bn_stats.var + (1.0 - mom) * unbiased;
}

Prediction predict(const Model& model, const RowMatrix& features) {
  ForwardCache cache;
  forward(model, features, Mode::eval, cache);
  return {std::move(cache.embeddings), softmax_rows(cache.logits)};
}

}  // namespace halo
