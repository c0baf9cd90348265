#pragma once

#include <cstdint>
#include <vector>

#include "nilmbench/data.hpp"
#include "nilmbench/rng.hpp"
#include "nilmbench/tensor.hpp"

namespace nilmbench {

struct ConvLayerSpec {
  int filters = 0;
  int kernel = 0;
};

struct ArchSpec {
  int window_size = 0;
  std::vector<ConvLayerSpec> conv;
  int dense_width = 1024;
  int n_tasks = 1;

  bool operator==(const ArchSpec& other) const;
  int n_layers() const { return static_cast<int>(conv.size()) + 2; }
};

// Default trunk: five conv layers (30,10),(30,8),(40,6),(50,5),(50,5), stride 1,
// shared dense 1024, one linear scalar head per task.
ArchSpec default_arch(int window_size, int n_tasks);

// Widths after each conv layer under w' = w - k + 1. Throws if any width
// drops below 1 (window too small for the stack).
std::vector<int> conv_output_widths(const ArchSpec& arch);
int flatten_size(const ArchSpec& arch);

// Full parameter set. Layers are indexed 0..n-1 conv, n = shared dense,
// n+1 = task heads; freeze_mask has one flag per layer (1 = frozen).
struct ModelParams {
  ArchSpec arch;
  std::vector<FilterBank> conv;
  DenseLayer shared_dense;
  std::vector<DenseLayer> heads;
  std::vector<std::uint8_t> freeze_mask;

  int n_conv() const { return static_cast<int>(conv.size()); }
  int dense_layer_index() const { return n_conv(); }
  int heads_layer_index() const { return n_conv() + 1; }
  bool frozen(int layer) const { return freeze_mask[layer] != 0; }
};

ModelParams build_seq2point(int window_size, int n_tasks, std::uint64_t seed);
ModelParams build_from_arch(const ArchSpec& arch, std::uint64_t seed);

// Applies fn(layer_index, array) to every parameter array, conv first, then
// shared dense, then heads. The visitation order is the canonical flat layout
// used by serialization, averaging and digests.
template <typename Params, typename Fn>
void for_each_param_array(Params& params, Fn&& fn) {
  for (int i = 0; i < params.n_conv(); ++i) {
    fn(i, params.conv[i].weights);
    fn(i, params.conv[i].bias);
  }
  fn(params.dense_layer_index(), params.shared_dense.weights);
  fn(params.dense_layer_index(), params.shared_dense.bias);
  for (auto& head : params.heads) {
    fn(params.heads_layer_index(), head.weights);
    fn(params.heads_layer_index(), head.bias);
  }
}

long long param_count(const ModelParams& params);

// Conv cost by the per-layer formula n_out * n_in * k * w_out.
long long conv_layer_ops(const ArchSpec& arch, int layer);
long long op_count(const ArchSpec& arch);  // sum of conv_layer_ops
long long dense_op_count(const ArchSpec& arch);  // multiply-adds, reported separately

// Per-window activations kept for the backward pass (post-ReLU).
struct ForwardCache {
  std::vector<Tensor2> conv_post;       // one per conv layer
  std::vector<double> dense_post;       // after ReLU
  std::vector<double> head_out;         // one scalar per task
};

void forward_window(const ModelParams& params, const double* window, ForwardCache& cache);

// Batched inference: returns count x n_tasks predictions, window-major.
std::vector<double> predict(const ModelParams& params, const double* inputs, std::size_t count);
std::vector<double> predict(const ModelParams& params, const WindowBatch& batch);

// Shared-dense activations (post-ReLU) for a batch of windows, row-major
// count x dense_width. Used for covariance alignment.
std::vector<double> dense_features(const ModelParams& params, const double* inputs,
                                   std::size_t count);
// Flattened conv-stack output, count x flatten_size.
std::vector<double> flatten_features(const ModelParams& params, const double* inputs,
                                     std::size_t count);

struct TrainConfig {
  int epochs = 1;
  int batch_size = 64;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  AdamConfig adam() const {
    AdamConfig a;
    a.learning_rate = learning_rate;
    return a;
  }
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean combined loss per epoch
  bool diverged = false;
};

// Mini-batch Adam on the summed per-task MSE. Frozen layers receive no
// updates. On a non-finite loss or gradient the run aborts and the parameters
// from the end of the last completed epoch are returned with diverged=true.
TrainResult train(const ModelParams& params, const WindowBatch& batch, const TrainConfig& cfg);

}  // namespace nilmbench
