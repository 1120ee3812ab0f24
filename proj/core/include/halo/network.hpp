#pragma once

// Pixel classifier: MLP encoder -> feature reweighting -> exponential map at
// the origin -> hyperbolic multinomial logistic regression over gyroplanes.
// Forward and backward passes are written out by hand; there is no autodiff.

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halo/geometry.hpp"

namespace halo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kUnlabeled = -1;

struct PixelCoord {
  int image = 0;
  int row = 0;
  int col = 0;
  auto operator<=>(const PixelCoord&) const = default;
};

struct PixelBatch {
  RowMatrix features;              // [B x D_in]
  std::vector<int> labels;         // kUnlabeled marks unsupervised rows
  std::vector<PixelCoord> coords;  // optional; empty or size B

  Eigen::Index size() const { return features.rows(); }
  /// Throws std::invalid_argument on inconsistent shapes or labels.
  void validate(int num_classes, Eigen::Index input_dim) const;
};

/// y = x W^T + b, W is [out x in].
struct DenseLayer {
  RowMatrix weight;
  Eigen::VectorXd bias;
};

/// tanh between consecutive layers, no activation after the last one.
struct EncoderParams {
  std::vector<DenseLayer> layers;
};

/// fc1 -> batch norm (affine) -> ReLU -> fc2 -> sigmoid.
struct HfrParams {
  DenseLayer fc1;
  Eigen::VectorXd bn_gamma;
  Eigen::VectorXd bn_beta;
  DenseLayer fc2;
};

struct BatchNormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

/// Row y holds the offset p_y (a ball point) and orientation w_y.
struct GyroplaneParams {
  RowMatrix offsets;  // [C x N]
  RowMatrix normals;  // [C x N]
};

/// How the reweighting normalizer |Z| is formed: the L1 mass of each pixel's
/// feature row, the mean absolute value of each feature column over the
/// pixel block, or one L1 mass over the whole block.
enum class HfrNormalization { per_pixel, per_channel, batch };

std::string_view to_string(HfrNormalization n);
HfrNormalization hfr_normalization_from_string(std::string_view name);

struct ModelDims {
  int input_dim = 8;
  int hidden_dim = 32;
  int embed_dim = 16;
  int num_classes = 8;
  int hfr_hidden = 0;  // 0 means embed_dim

  int hfr_width() const { return hfr_hidden > 0 ? hfr_hidden : embed_dim; }
};

struct ModelConfig {
  ModelDims dims;
  ManifoldParams manifold;
  bool use_hfr = true;
  HfrNormalization hfr_norm = HfrNormalization::per_pixel;
  double bn_momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double bn_eps = 1e-5;

  void validate() const;
};

struct ModelParams {
  EncoderParams encoder;
  HfrParams hfr;
  GyroplaneParams gyroplanes;
};

/// Gradients mirror the parameter layout.
using ModelGradients = ModelParams;

struct Model {
  ModelConfig config;
  ModelParams params;
  BatchNormStats bn_stats;
};

/// Seeded initialization (Xavier-uniform dense layers, near-origin offsets).
Model init_model(const ModelConfig& config, std::uint64_t seed);

/// Zero-valued gradients with the model's shapes.
ModelGradients zeros_like(const ModelParams& params);

enum class ParamGroup { encoder, head, manifold };

/// Flat row-major view of one parameter tensor.
struct ParamView {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  ParamGroup group = ParamGroup::encoder;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
  std::span<double> values() const { return {data, size()}; }
};

/// Views in a fixed order; names are the checkpoint tensor names.
std::vector<ParamView> parameter_views(ModelParams& params);

enum class Mode { train, eval };

/// Intermediate activations kept for backward().
struct ForwardCache {
  Mode mode = Mode::eval;
  std::vector<RowMatrix> layer_inputs;  // input of every encoder layer
  RowMatrix z;                          // encoder output
  RowMatrix hfr_pre;                    // fc1 output
  RowMatrix hfr_xhat;                   // batch-normalized fc1 output
  Eigen::VectorXd bn_mean;
  Eigen::VectorXd bn_var;
  RowMatrix hfr_act;                    // ReLU output
  RowMatrix weights;                    // L, entries in (0, 1)
  Eigen::VectorXd normalizers;          // |Z| per group
  RowMatrix tangent;                    // reweighted features, tangent at origin
  RowMatrix embeddings;                 // ball points h
  Eigen::VectorXi clipped;              // 1 where the margin projection fired
  RowMatrix logits;                     // [B x C]
};

RowMatrix encoder_forward(const EncoderParams& params, const RowMatrix& features);

/// Returns Z~ = (Z / |Z|) * L. Groups whose |Z| is 0 map to zero rows.
RowMatrix hfr_forward(const HfrParams& params, const BatchNormStats& stats, const RowMatrix& z,
                      Mode mode, HfrNormalization norm, double bn_eps = 1e-5,
                      ForwardCache* cache = nullptr);

/// Row-wise exp_map at the origin followed by the margin projection.
RowMatrix exp_map_origin_rows(const RowMatrix& tangent, const ManifoldParams& m,
                              Eigen::VectorXi* clipped = nullptr);

/// Signed gyroplane distance for one embedding row and one class.
double gyroplane_distance(const GyroplaneParams& gp, int cls, std::span<const double> h,
                          const ManifoldParams& m);

/// zeta_y = lambda_{p_y} ||w_y|| d(h, H_y), signed. Output [B x C].
RowMatrix mlr_logits(const GyroplaneParams& gp, const RowMatrix& embeddings,
                     const ManifoldParams& m);

/// Full forward pass; fills `cache`.
void forward(const Model& model, const RowMatrix& features, Mode mode, ForwardCache& cache);

struct LossResult {
  double loss = 0.0;
  RowMatrix probs;  // softmax of every row, labeled or not
  int labeled = 0;
};

/// Mean cross-entropy over labeled rows. Throws std::invalid_argument
/// ("empty supervision") when no row is labeled.
LossResult softmax_ce_loss(const RowMatrix& logits, std::span<const int> labels);

/// Row-wise softmax.
RowMatrix softmax_rows(const RowMatrix& logits);

/// Analytic gradients of the mean cross-entropy. Gyroplane offsets receive
/// their ambient Euclidean gradient.
ModelGradients backward(const Model& model, const ForwardCache& cache, const LossResult& loss,
                        std::span<const int> labels);

/// Folds the batch statistics of a train-mode forward into the running
/// statistics.
void update_bn_stats(Model& model, const ForwardCache& cache);

/// Eval-mode forward returning embeddings and softmax probabilities.
struct Prediction {
  RowMatrix embeddings;
  RowMatrix probs;
};
Prediction predict(const Model& model, const RowMatrix& features);

/// Checkpoint directory: manifest.json plus one little-endian float64
/// row-major file per tensor. Written atomically.
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

}  // namespace halo
