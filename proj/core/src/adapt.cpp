#include "halo/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "halo/io.hpp"

namespace halo {

namespace {

enum Stream : std::uint64_t { kInit = 0, kPretrainBatches = 1, kAdaptBatches = 2, kStrategy = 3,
                              kEnsemble = 4, kFineTuneBatches = 5 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Draws training batches from a labeled source pool and an (optional)
// labeled target pool.
class BatchSampler {
 public:
  BatchSampler(const PixelDataset& source, const PixelDataset& target,
               std::vector<std::size_t> target_pool, std::uint64_t seed)
      : source_(source), target_(target), target_pool_(std::move(target_pool)), rng_(seed) {}

  void set_target_pool(std::vector<std::size_t> pool) { target_pool_ = std::move(pool); }

  bool has_supervision() const { return !source_.empty() || !target_pool_.empty(); }

  void draw(int batch_size, RowMatrix& features, std::vector<int>& labels) {
    const bool use_source = !source_.empty();
    const bool use_target = !target_pool_.empty();
    int n_target = 0;
    if (use_target) n_target = use_source ? batch_size / 2 : batch_size;
    const int n_source = batch_size - n_target;

    features.resize(batch_size, use_source ? source_.feature_dim : target_.feature_dim);
    labels.resize(static_cast<std::size_t>(batch_size));
    int row = 0;
    if (n_source > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, source_.pixel_count() - 1);
      for (int i = 0; i < n_source; ++i, ++row) copy_row(source_, pick(rng_), features, labels, row);
    }
    if (n_target > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, target_pool_.size() - 1);
      for (int i = 0; i < n_target; ++i, ++row) {
        copy_row(target_, target_pool_[pick(rng_)], features, labels, row);
      }
    }
  }

 private:
  static void copy_row(const PixelDataset& ds, std::size_t flat, RowMatrix& features,
                       std::vector<int>& labels, int row) {
    const float* f = ds.features.data() + flat * ds.feature_dim;
    for (int d = 0; d < ds.feature_dim; ++d) features(row, d) = f[d];
    labels[static_cast<std::size_t>(row)] = ds.labels[flat];
  }

  const PixelDataset& source_;
  const PixelDataset& target_;
  std::vector<std::size_t> target_pool_;
  std::mt19937_64 rng_;
};

void train_steps(Model& model, RiemannianSgd& opt, BatchSampler& sampler, long steps,
                 int batch_size, TrainingTrace* trace) {
  RowMatrix features;
  std::vector<int> labels;
  ForwardCache cache;
  for (long s = 0; s < steps; ++s) {
    if (!sampler.has_supervision()) throw TrainingError("empty supervision: no labeled pixels");
    sampler.draw(batch_size, features, labels);
    forward(model, features, Mode::train, cache);
    const LossResult loss = softmax_ce_loss(cache.logits, labels);
    if (!std::isfinite(loss.loss)) {
      throw TrainingError("non-finite loss at step " + std::to_string(opt.state().step));
    }
    const ModelGradients grads = backward(model, cache, loss, labels);
    update_bn_stats(model, cache);
    opt.step(model, grads);
    if (trace != nullptr) {
      trace->loss.push_back(loss.loss);
      trace->max_embedding_norm.push_back(cache.embeddings.rowwise().norm().maxCoeff());
    }
  }
}

OptimConfig phase_optim(const RunConfig& cfg, long steps) {
  OptimConfig o = cfg.optim;
  o.total_steps = std::max(1L, steps);
  return o;
}

void check_compatible(const PixelDataset& a, const PixelDataset& b) {
  if (a.empty() || b.empty()) return;
  if (a.feature_dim != b.feature_dim || a.num_classes != b.num_classes) {
    throw std::invalid_argument("source and target datasets disagree in feature dim or classes");
  }
}

void check_model_fits(const Model& model, const PixelDataset& ds) {
  if (ds.empty()) return;
  if (ds.feature_dim != model.config.dims.input_dim) {
    throw std::invalid_argument("dataset feature dim " + std::to_string(ds.feature_dim) +
                                " does not match model input dim " +
                                std::to_string(model.config.dims.input_dim));
  }
  if (ds.num_classes > model.config.dims.num_classes) {
    throw std::invalid_argument("dataset has more classes than the model");
  }
}

std::vector<std::size_t> labeled_pool(const LabelMask& mask) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.labeled(i)) pool.push_back(i);
  }
  return pool;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5851F42D4C957F2DULL));
}

void RunConfig::validate() const {
  model.validate();
  optim.validate();
  acquisition.validate();
  if (pretrain_steps < 0 || adapt_steps < 0) throw std::invalid_argument("step counts must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (adapt_steps % acquisition.rounds != 0) {
    throw std::invalid_argument("adapt steps must be a multiple of the round count");
  }
}

EvalReport evaluate_predictions(std::span<const std::uint16_t> ground_truth,
                                std::span<const int> predicted, int num_classes) {
  if (ground_truth.size() != predicted.size()) {
    throw std::invalid_argument("evaluate: prediction and ground truth differ in length");
  }
  if (num_classes < 1) throw std::invalid_argument("evaluate: need at least one class");
  EvalReport r;
  r.num_classes = num_classes;
  const auto c = static_cast<std::size_t>(num_classes);
  r.confusion.assign(c * c, 0);
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    const int g = ground_truth[i];
    const int p = predicted[i];
    if (g >= num_classes || p < 0 || p >= num_classes) {
      throw std::invalid_argument("evaluate: label out of range at pixel " + std::to_string(i));
    }
    ++r.confusion[static_cast<std::size_t>(g) * c + static_cast<std::size_t>(p)];
  }
  r.iou.assign(c, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int defined = 0;
  for (int k = 0; k < num_classes; ++k) {
    std::int64_t tp = r.count(k, k), fp = 0, fn = 0;
    for (int j = 0; j < num_classes; ++j) {
      if (j == k) continue;
      fp += r.count(j, k);
      fn += r.count(k, j);
    }
    const std::int64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    r.iou[static_cast<std::size_t>(k)] = static_cast<double>(tp) / static_cast<double>(denom);
    sum += r.iou[static_cast<std::size_t>(k)];
    ++defined;
  }
  r.miou = defined > 0 ? sum / defined : 0.0;
  return r;
}

std::vector<int> DatasetInference::predicted() const {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg = 0;
    probs.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

DatasetInference infer(const Model& model, const PixelDataset& dataset) {
  check_model_fits(model, dataset);
  DatasetInference out;
  const auto n = dataset.pixel_count();
  out.embeddings.resize(static_cast<Eigen::Index>(n), model.config.dims.embed_dim);
  out.probs.resize(static_cast<Eigen::Index>(n), model.config.dims.num_classes);
  // One block per image: the per-channel normalizer is taken over a block.
  const std::size_t block = std::max<std::size_t>(1, dataset.pixels_per_image());
  for (std::size_t begin = 0; begin < n; begin += block) {
    const std::size_t end = std::min(n, begin + block);
    const Prediction p = predict(model, dataset.slice(begin, end));
    const auto b = static_cast<Eigen::Index>(begin);
    const auto len = static_cast<Eigen::Index>(end - begin);
    out.embeddings.middleRows(b, len) = p.embeddings;
    out.probs.middleRows(b, len) = p.probs;
  }
  return out;
}

EvalReport evaluate_miou(const Model& model, const PixelDataset& dataset) {
  const auto inf = infer(model, dataset);
  return evaluate_predictions(dataset.labels, inf.predicted(), model.config.dims.num_classes);
}

void TrainingTrace::append(const TrainingTrace& other) {
  loss.insert(loss.end(), other.loss.begin(), other.loss.end());
  max_embedding_norm.insert(max_embedding_norm.end(), other.max_embedding_norm.begin(),
                            other.max_embedding_norm.end());
}

Model pretrain(const RunConfig& cfg, const PixelDataset& source, TrainingTrace* trace) {
  cfg.validate();
  if (source.empty()) throw std::invalid_argument("pretrain: empty source dataset");
  Model model = init_model(cfg.model, derive_seed(cfg.seed, kInit));
  check_model_fits(model, source);
  if (cfg.pretrain_steps == 0) return model;
  RiemannianSgd opt(phase_optim(cfg, cfg.pretrain_steps), model.params);
  const PixelDataset none;
  BatchSampler sampler(source, none, {}, derive_seed(cfg.seed, kPretrainBatches));
  train_steps(model, opt, sampler, cfg.pretrain_steps, cfg.batch_size, trace);
  return model;
}

AdaptResult adapt(Model model, const PixelDataset& source, const PixelDataset& target,
                  const RunConfig& cfg) {
  cfg.validate();
  if (target.empty()) throw std::invalid_argument("adapt: empty target dataset");
  check_compatible(source, target);
  check_model_fits(model, source);
  check_model_fits(model, target);

  const auto& acq = cfg.acquisition;
  AdaptResult result;
  result.mask = LabelMask::empty(target.images, target.height, target.width);
  RiemannianSgd opt(phase_optim(cfg, cfg.adapt_steps), model.params);
  BatchSampler sampler(source, target, {}, derive_seed(cfg.seed, kAdaptBatches));
  std::mt19937_64 strategy_rng(derive_seed(cfg.seed, kStrategy));
  const long segment = cfg.adapt_steps / acq.rounds;
  const std::size_t n_target = target.pixel_count();

  DatasetInference current = infer(model, target);
  for (int r = 1; r <= acq.rounds; ++r) {
    const std::size_t quota = round_quota(acq, n_target, r);
    if (quota > 0) {
      const ScoreMap radius = radius_map(current.embeddings, target.images, target.height,
                                         target.width, model.config.manifold);
      const ScoreMap entropy = entropy_map(current.probs, target.images, target.height, target.width);
      StrategyInputs in{&radius, &entropy, &target.labels, target.images, target.height, target.width};
      ScoreMap scores = strategy_scores(acq.strategy, in, strategy_rng);
      if (acq.mode == AcquisitionMode::region) scores = region_scores(scores, acq.region_size);
      const auto picked = select_pixels(scores, result.mask, quota);
      result.mask.mark(picked, r);
      for (const auto& p : picked) {
        const auto i = result.mask.index(p);
        result.log.push_back({r, p, static_cast<int>(target.labels[i]), scores.values[i]});
      }
      sampler.set_target_pool(labeled_pool(result.mask));
    }
    train_steps(model, opt, sampler, segment, cfg.batch_size, &result.trace);
    current = infer(model, target);
    result.rounds.push_back(
        evaluate_predictions(target.labels, current.predicted(), model.config.dims.num_classes));
  }
  result.model = std::move(model);
  return result;
}

Model fine_tune(Model model, const PixelDataset& source, const PixelDataset& target,
                const LabelMask& mask, const RunConfig& cfg, TrainingTrace* trace) {
  cfg.validate();
  check_compatible(source, target);
  if (mask.size() != target.pixel_count()) {
    throw std::invalid_argument("fine_tune: label mask does not match the target dataset");
  }
  RiemannianSgd opt(phase_optim(cfg, cfg.adapt_steps), model.params);
  BatchSampler sampler(source, target, labeled_pool(mask), derive_seed(cfg.seed, kFineTuneBatches));
  train_steps(model, opt, sampler, cfg.adapt_steps, cfg.batch_size, trace);
  return model;
}

EnsembleProbs train_ensemble(const PixelDataset& source, const PixelDataset& target,
                             const LabelMask& mask, const RunConfig& cfg, int members) {
  if (members < 2) throw std::invalid_argument("ensemble too small");
  EnsembleProbs e;
  e.images = target.images;
  e.height = target.height;
  e.width = target.width;
  for (int m = 0; m < members; ++m) {
    RunConfig member_cfg = cfg;
    member_cfg.seed = derive_seed(cfg.seed, kEnsemble + 16 * static_cast<std::uint64_t>(m + 1));
    Model model = fine_tune(pretrain(member_cfg, source), source, target, mask, member_cfg);
    e.members.push_back(infer(model, target).probs);
  }
  return e;
}

void write_eval_csv(const std::vector<EvalReport>& rounds, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "round,class,iou,miou\n";
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const auto& rep = rounds[r];
    for (int k = 0; k < rep.num_classes; ++k) {
      const double v = rep.iou[static_cast<std::size_t>(k)];
      out << r + 1 << ',' << k << ',' << (std::isnan(v) ? std::string() : io::format_double(v))
          << ',' << io::format_double(rep.miou) << '\n';
    }
  }
  io::write_text(path, out.str());
}

}  // namespace halo
