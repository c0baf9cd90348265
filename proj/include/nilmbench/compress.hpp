#pragma once

#include <vector>

#include "nilmbench/model.hpp"

namespace nilmbench {

// L1 norm of each filter's weights, bias excluded.
std::vector<double> score_filters(const FilterBank& bank);

struct PruneMask {
  // per conv layer: sorted kept filter indices (at least one per layer)
  std::vector<std::vector<int>> kept;
};

struct PruneResult {
  ModelParams params;
  PruneMask mask;
};

// Keeps round((1-fraction)*n) highest-L1 filters per conv layer (minimum 1,
// ties keep the lower index), drops the matching kernel slices of the next
// layer, and drops the shared-dense input columns of removed last-layer
// channels. Throws std::invalid_argument unless 0 <= fraction < 1.
PruneResult prune_model(const ModelParams& params, double fraction);

int kept_filter_count(int filters, double fraction);

struct PruneReport {
  double fraction = 0.0;
  std::vector<double> layer_fraction_pruned;
  long long params_before = 0;
  long long params_after = 0;
  long long conv_ops_before = 0;
  long long conv_ops_after = 0;
  long long dense_ops_before = 0;
  long long dense_ops_after = 0;
  std::vector<double> mae_before;  // per task, on the eval split, watts
  std::vector<double> mae_after;   // after retrain
};

struct CompressResult {
  ModelParams params;
  PruneReport report;
};

// The four-step recipe: train to convergence on `train_batch`, score, prune
// at `fraction`, retrain the pruned model. MAE is measured on `eval_batch`
// before pruning and after retraining.
CompressResult compress_pipeline(const WindowBatch& train_batch, const WindowBatch& eval_batch,
                                 const ArchSpec& arch, double fraction,
                                 const TrainConfig& train_cfg, const TrainConfig& retrain_cfg,
                                 std::uint64_t init_seed);

// Same, starting from an already trained model (skips step one).
CompressResult compress_pretrained(const ModelParams& trained, const WindowBatch& train_batch,
                                   const WindowBatch& eval_batch, double fraction,
                                   const TrainConfig& retrain_cfg);

// Per-task MAE of a model on a labeled batch, in watts.
std::vector<double> eval_mae_watts(const ModelParams& params, const WindowBatch& batch);

}  // namespace nilmbench
