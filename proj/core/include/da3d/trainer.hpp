#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "da3d/bag_store.hpp"
#include "da3d/metrics.hpp"
#include "da3d/model.hpp"
#include "da3d/objective.hpp"
#include "da3d/optimizer.hpp"
#include "da3d/rng.hpp"
#include "da3d/split.hpp"

namespace da3d {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  double dropout = 0.0;
  double lambda = 0.1;
  double tau = 0.07;
  int attention_hidden = 128;
  int head_hidden = 256;
  int embedding_dim = 128;
  int num_classes = 2;
  std::uint64_t seed = 0;
  int log_every = 0;  // print progress every k epochs; 0 = silent
  bool double_precision = false;
  bool stratified_batches = false;
  bool cosine_decay = false;
  bool variance_global_classes = false;
  bool log_wallclock = false;

  void validate() const;
  ModelDims dims(int input_dim) const;
  ObjectiveConfig objective() const;
  OptimizerHyper optimizer_hyper() const;
  std::string to_json() const;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown<double> train;  // means over the epoch's batches
  LossBreakdown<double> val;    // whole validation set as one batch
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // argmin of val total, earliest on ties
  double best_val_total = 0.0;

  // One JSON object per line: epoch, ce, contra, var, total, val_total,
  // val_acc, seconds. `seconds` is written as 0 unless `wallclock`.
  std::string to_jsonl(bool wallclock) const;
};

struct TrainResult {
  ModelParams<float> best;
  ModelParams<float> final;
  TrainHistory history;
  int degenerate_samples = 0;  // zero-norm embeddings seen during training
};

ModelParams<float> initial_params(const TrainConfig& config, int input_dim);

// Batches over a shuffled order of `n` training indices. Every batch has
// `batch_size` members except the last; a final batch of one is folded into
// the one before it. Stratified mode interleaves classes before batching.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size,
                                                   Rng& rng,
                                                   const std::vector<int>& labels = {},
                                                   bool stratified = false);

// Loss of the full `ids` set treated as a single batch, plus accuracy.
struct SetLoss {
  LossBreakdown<double> loss;
  double accuracy = 0.0;
};
SetLoss set_loss(const ModelParams<float>& params, const std::vector<std::string>& ids,
                 const BagStore& store, const TrainConfig& config);

TrainResult train(const TrainConfig& config, const std::vector<std::string>& train_ids,
                  const std::vector<std::string>& val_ids, const BagStore& store);

struct MetricSummary {
  double accuracy = 0.0;
  double auc = 0.0;
  double macro_f1 = 0.0;
  double fnr = 0.0;
};

struct KFoldReport {
  std::vector<EvalReport> folds;
  std::vector<TrainHistory> histories;
  std::vector<ModelParams<float>> models;  // best checkpoint per fold
  MetricSummary mean;
  MetricSummary stddev;  // population standard deviation over folds

  std::string to_json() const;
};

// Fold i trains with seed + i on fold_train(i), selects on the shared val
// list, and is scored on fold_test(i).
KFoldReport run_kfold(const TrainConfig& config, const SplitAssignment& split,
                      const BagStore& store, int positive_class);

}  // namespace da3d
