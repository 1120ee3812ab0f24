#pragma once

// Source pretraining, round-based active adaptation on the target split, and
// mIoU evaluation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "halo/acquisition.hpp"
#include "halo/network.hpp"
#include "halo/optim.hpp"
#include "halo/synthdata.hpp"
#include "halo/uncertainty.hpp"

namespace halo {

/// A non-finite loss or parameter, or a batch with no supervision.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelConfig model;
  OptimConfig optim;  // total_steps is set per phase from the step counts below
  AcquisitionConfig acquisition;
  long pretrain_steps = 2000;
  long adapt_steps = 2000;
  int batch_size = 256;
  std::uint64_t seed = 0;

  /// Sub-configs valid, batch_size >= 2, adapt_steps a multiple of rounds.
  void validate() const;
};

struct EvalReport {
  int num_classes = 0;
  std::vector<double> iou;               // NaN where the class is absent from gt and prediction
  double miou = 0.0;                     // mean over defined entries
  std::vector<std::int64_t> confusion;   // [gt x pred], row-major

  std::int64_t count(int gt, int pred) const {
    return confusion[static_cast<std::size_t>(gt) * num_classes + pred];
  }
};

/// Confusion matrix and IoU_c = TP / (TP + FP + FN) from flat label arrays.
EvalReport evaluate_predictions(std::span<const std::uint16_t> ground_truth,
                                std::span<const int> predicted, int num_classes);

/// Eval-mode embeddings and probabilities for every pixel of a dataset.
struct DatasetInference {
  RowMatrix embeddings;  // [pixels x N]
  RowMatrix probs;       // [pixels x C]
  std::vector<int> predicted() const;
};

DatasetInference infer(const Model& model, const PixelDataset& dataset);

EvalReport evaluate_miou(const Model& model, const PixelDataset& dataset);

/// Per training step: loss and the largest embedding norm in the batch.
struct TrainingTrace {
  std::vector<double> loss;
  std::vector<double> max_embedding_norm;
  void append(const TrainingTrace& other);
};

/// Trains cfg.pretrain_steps steps on uniformly sampled source pixels.
/// pretrain_steps == 0 returns the seeded initialization.
Model pretrain(const RunConfig& cfg, const PixelDataset& source, TrainingTrace* trace = nullptr);

struct AdaptResult {
  Model model;
  AcquisitionLog log;
  std::vector<EvalReport> rounds;  // one per round, after its training segment
  LabelMask mask;
  TrainingTrace trace;
};

/// Each of the cfg.acquisition.rounds rounds acquires round_quota target
/// pixels with the current model, then trains adapt_steps / rounds steps on
/// batches that are half source, half acquired target (all source when no
/// target label exists yet, all target when the source is empty), then
/// evaluates on the target split. Optimizer state persists across rounds.
/// BudgetExhausted propagates from the selection.
AdaptResult adapt(Model model, const PixelDataset& source, const PixelDataset& target,
                  const RunConfig& cfg);

/// Trains adapt_steps steps with a fixed target label mask and no acquisition.
Model fine_tune(Model model, const PixelDataset& source, const PixelDataset& target,
                const LabelMask& mask, const RunConfig& cfg, TrainingTrace* trace = nullptr);

/// M members, each pretrained from its own seed and fine-tuned on `mask`;
/// returns their target probabilities.
EnsembleProbs train_ensemble(const PixelDataset& source, const PixelDataset& target,
                             const LabelMask& mask, const RunConfig& cfg, int members);

/// CSV round,class,iou,miou with one row per (round, class); undefined IoU is empty.
void write_eval_csv(const std::vector<EvalReport>& rounds, const std::filesystem::path& path);

/// Mixes a seed with a stream id; used to derive independent RNG streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace halo
