#pragma once

#include <cstdint>
#include <vector>

#include "nilmbench/metrics.hpp"
#include "nilmbench/model.hpp"

namespace nilmbench {

// Column-centered sample covariance with 1/(n-1) normalization.
// features is row-major n x dim, n >= 2.
std::vector<double> covariance(const std::vector<double>& features, std::size_t n, int dim);

// ||C_s - C_t||_F^2 / (4 dim^2)
double coral_loss(const std::vector<double>& cov_s, const std::vector<double>& cov_t, int dim);

struct CoralGrad {
  double loss = 0.0;
  std::vector<double> grad_source;  // d loss / d source features, n_s x dim
  std::vector<double> grad_target;  // d loss / d target features, n_t x dim
};

CoralGrad coral_loss_grad(const std::vector<double>& feat_s, std::size_t n_s,
                          const std::vector<double>& feat_t, std::size_t n_t, int dim);

double edge_loss(double regression_loss, double coral, double lambda);

struct CoralConfig {
  enum class AlignLayer { SharedDense, Flatten };
  AlignLayer layer = AlignLayer::SharedDense;
  double lambda = 1.0;
  int target_batch = 64;
  // lambda ramps linearly from 0 over this fraction of the total steps
  double warmup_fraction = 0.1;
};

struct PersonalizeResult {
  ModelParams params;
  std::vector<double> epoch_regression_loss;
  std::vector<double> epoch_coral_loss;
  bool diverged = false;
};

// Unsupervised client personalization: conv layers are frozen (bit-identical
// on return), dense layers minimize source regression loss plus
// lambda * CORAL between source and target activations at the configured
// layer. Target windows carry no labels by construction.
PersonalizeResult personalize(const ModelParams& cloud_model, const WindowBatch& source,
                              const TargetWindows& target, const CoralConfig& coral_cfg,
                              const TrainConfig& train_cfg);

// CORAL loss between source and target activations under a given model; used
// to probe alignment before/after personalization.
double coral_probe(const ModelParams& params, const WindowBatch& source,
                   const TargetWindows& target, CoralConfig::AlignLayer layer,
                   std::size_t max_windows = 512);

struct TransferRow {
  int layers_transferred = 0;  // 1..7
  bool fine_tuned = false;     // false = transferred layers kept fixed
  double mae = 0.0;
  double sae = 0.0;
  double f1 = 0.0;
  double final_train_loss = 0.0;
};

struct TransferGridResult {
  std::vector<TransferRow> rows;  // exactly 2 x n_layers

  std::string to_csv() const;
};

struct GridConfig {
  TrainConfig retrain;
  std::uint64_t init_seed = 0;
  double on_threshold_watts = kDefaultOnThresholdWatts;
};

// For every prefix length n and both modes, copies layers 1..n from the
// source model, randomly re-initializes the rest, retrains on the target
// train split and evaluates on the target eval split.
TransferGridResult transfer_grid(const ModelParams& source_model,
                                 const WindowBatch& target_train,
                                 const WindowBatch& target_eval, const GridConfig& cfg);

}  // namespace nilmbench
