#include "nilmbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nilmbench {

bool ArchSpec::operator==(const ArchSpec& other) const {
  if (window_size != other.window_size || dense_width != other.dense_width ||
      n_tasks != other.n_tasks || conv.size() != other.conv.size()) {
    return false;
  }
  for (std::size_t i = 0; i < conv.size(); ++i) {
    if (conv[i].filters != other.conv[i].filters || conv[i].kernel != other.conv[i].kernel) {
      return false;
    }
  }
  return true;
}

ArchSpec default_arch(int window_size, int n_tasks) {
  ArchSpec arch;
  arch.window_size = window_size;
  arch.conv = {{30, 10}, {30, 8}, {40, 6}, {50, 5}, {50, 5}};
  arch.dense_width = 1024;
  arch.n_tasks = n_tasks;
  return arch;
}

std::vector<int> conv_output_widths(const ArchSpec& arch) {
  std::vector<int> widths;
  widths.reserve(arch.conv.size());
  int w = arch.window_size;
  for (const auto& layer : arch.conv) {
    w = conv_output_width(w, layer.kernel);
    if (w < 1) {
      throw std::invalid_argument("window " + std::to_string(arch.window_size) +
                                  " too small for the conv stack");
    }
    widths.push_back(w);
  }
  return widths;
}

int flatten_size(const ArchSpec& arch) {
  if (arch.conv.empty()) return arch.window_size;
  return arch.conv.back().filters * conv_output_widths(arch).back();
}

ModelParams build_from_arch(const ArchSpec& arch, std::uint64_t seed) {
  if (arch.n_tasks < 1) throw std::invalid_argument("build: n_tasks < 1");
  conv_output_widths(arch);  // validates widths stay positive

  const Rng root(seed);
  ModelParams p;
  p.arch = arch;

  int in_ch = 1;
  for (std::size_t i = 0; i < arch.conv.size(); ++i) {
    const auto& spec = arch.conv[i];
    FilterBank f(spec.filters, in_ch, spec.kernel);
    Rng rng = root.stream("init.conv", i);
    const double scale = std::sqrt(2.0 / static_cast<double>(in_ch * spec.kernel));
    for (double& w : f.weights) w = rng.normal(0.0, scale);
    p.conv.push_back(std::move(f));
    in_ch = spec.filters;
  }

  const int flat = flatten_size(arch);
  p.shared_dense = DenseLayer(arch.dense_width, flat);
  {
    Rng rng = root.stream("init.dense");
    const double scale = std::sqrt(2.0 / static_cast<double>(flat));
    for (double& w : p.shared_dense.weights) w = rng.normal(0.0, scale);
  }
  for (int t = 0; t < arch.n_tasks; ++t) {
    DenseLayer head(1, arch.dense_width);
    Rng rng = root.stream("init.head", static_cast<std::uint64_t>(t));
    const double scale = std::sqrt(1.0 / static_cast<double>(arch.dense_width));
    for (double& w : head.weights) w = rng.normal(0.0, scale);
    p.heads.push_back(std::move(head));
  }
  p.freeze_mask.assign(static_cast<std::size_t>(arch.n_layers()), 0);
  return p;
}

ModelParams build_seq2point(int window_size, int n_tasks, std::uint64_t seed) {
  return build_from_arch(default_arch(window_size, n_tasks), seed);
}

long long param_count(const ModelParams& params) {
  long long n = 0;
  for_each_param_array(params, [&](int, const std::vector<double>& a) {
    n += static_cast<long long>(a.size());
  });
  return n;
}

long long conv_layer_ops(const ArchSpec& arch, int layer) {
  if (layer < 0 || layer >= static_cast<int>(arch.conv.size())) {
    throw std::invalid_argument("conv_layer_ops: layer out of range");
  }
  const std::vector<int> widths = conv_output_widths(arch);
  const long long n_in = layer == 0 ? 1 : arch.conv[layer - 1].filters;
  const long long n_out = arch.conv[layer].filters;
  const long long k = arch.conv[layer].kernel;
  const long long w_out = widths[layer];
  return n_out * n_in * k * w_out;
}

long long op_count(const ArchSpec& arch) {
  long long total = 0;
  for (int i = 0; i < static_cast<int>(arch.conv.size()); ++i) total += conv_layer_ops(arch, i);
  return total;
}

long long dense_op_count(const ArchSpec& arch) {
  const long long shared = static_cast<long long>(arch.dense_width) * flatten_size(arch);
  const long long heads = static_cast<long long>(arch.n_tasks) * arch.dense_width;
  return shared + heads;
}

void forward_window(const ModelParams& params, const double* window, ForwardCache& cache) {
  const int w = params.arch.window_size;
  Tensor2 x(1, w);
  std::copy(window, window + w, x.data.begin());

  cache.conv_post.resize(params.conv.size());
  for (std::size_t i = 0; i < params.conv.size(); ++i) {
    Tensor2 out = conv1d_forward(i == 0 ? x : cache.conv_post[i - 1], params.conv[i]);
    relu_inplace(out.data);
    cache.conv_post[i] = std::move(out);
  }

  const std::vector<double>& flat = cache.conv_post.back().data;
  cache.dense_post = dense_forward(flat, params.shared_dense);
  relu_inplace(cache.dense_post);

  cache.head_out.resize(params.heads.size());
  for (std::size_t t = 0; t < params.heads.size(); ++t) {
    cache.head_out[t] = dense_forward(cache.dense_post, params.heads[t])[0];
  }
}

std::vector<double> predict(const ModelParams& params, const double* inputs, std::size_t count) {
  const int n_tasks = params.arch.n_tasks;
  std::vector<double> preds(count * n_tasks);
  ForwardCache cache;
  for (std::size_t i = 0; i < count; ++i) {
    forward_window(params, inputs + i * params.arch.window_size, cache);
    for (int t = 0; t < n_tasks; ++t) preds[i * n_tasks + t] = cache.head_out[t];
  }
  return preds;
}

std::vector<double> predict(const ModelParams& params, const WindowBatch& batch) {
  if (batch.window != params.arch.window_size) {
    throw std::invalid_argument("predict: window size mismatch");
  }
  return predict(params, batch.inputs.data(), batch.count);
}

std::vector<double> dense_features(const ModelParams& params, const double* inputs,
                                   std::size_t count) {
  const int dim = params.arch.dense_width;
  std::vector<double> out(count * static_cast<std::size_t>(dim));
  ForwardCache cache;
  for (std::size_t i = 0; i < count; ++i) {
    forward_window(params, inputs + i * params.arch.window_size, cache);
    std::copy(cache.dense_post.begin(), cache.dense_post.end(),
              out.begin() + i * static_cast<std::size_t>(dim));
  }
  return out;
}

std::vector<double> flatten_features(const ModelParams& params, const double* inputs,
                                     std::size_t count) {
  const std::size_t dim = static_cast<std::size_t>(flatten_size(params.arch));
  std::vector<double> out(count * dim);
  ForwardCache cache;
  for (std::size_t i = 0; i < count; ++i) {
    forward_window(params, inputs + i * params.arch.window_size, cache);
    const std::vector<double>& flat = cache.conv_post.back().data;
    std::copy(flat.begin(), flat.end(), out.begin() + i * dim);
  }
  return out;
}

namespace {

// Gradient accumulators mirroring the canonical parameter layout.
struct GradBuffers {
  std::vector<std::vector<double>*> params;
  std::vector<std::vector<double>> grads;
  std::vector<int> layer_of;

  explicit GradBuffers(ModelParams& p) {
    for_each_param_array(p, [&](int layer, std::vector<double>& a) {
      params.push_back(&a);
      grads.emplace_back(a.size(), 0.0);
      layer_of.push_back(layer);
    });
  }

  void zero() {
    for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
  }
};

}  // namespace

TrainResult train(const ModelParams& initial, const WindowBatch& batch, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs < 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
  if (batch.window != initial.arch.window_size) {
    throw std::invalid_argument("train: window size mismatch");
  }
  if (batch.n_tasks != initial.arch.n_tasks) {
    throw std::invalid_argument("train: batch provides " + std::to_string(batch.n_tasks) +
                                " tasks, model expects " + std::to_string(initial.arch.n_tasks));
  }
  if (batch.count == 0) throw std::invalid_argument("train: empty batch");

  TrainResult result;
  result.params = initial;
  ModelParams& p = result.params;
  const int n_conv = p.n_conv();
  const int n_tasks = p.arch.n_tasks;
  const int w = p.arch.window_size;

  // lowest layer that still needs gradients; everything below is skipped
  int lowest_unfrozen = p.arch.n_layers();
  for (int l = 0; l < p.arch.n_layers(); ++l) {
    if (!p.frozen(l)) {
      lowest_unfrozen = l;
      break;
    }
  }
  const bool nothing_trainable = lowest_unfrozen == p.arch.n_layers();

  GradBuffers buffers(p);
  std::vector<AdamState> states;
  states.reserve(buffers.grads.size());
  for (const auto& g : buffers.grads) states.emplace_back(g.size());
  const AdamConfig adam_cfg = cfg.adam();

  const Rng root(cfg.seed);
  std::vector<std::size_t> order(batch.count);
  std::iota(order.begin(), order.end(), 0);

  ModelParams last_good = p;
  std::vector<ForwardCache> caches(static_cast<std::size_t>(cfg.batch_size));
  Tensor2 x_window(1, w);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle = root.stream("shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = batch.count; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.next_below(i)]);
    }

    double epoch_loss_acc = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t begin = 0; begin < batch.count; begin += cfg.batch_size) {
      const std::size_t b = std::min<std::size_t>(cfg.batch_size, batch.count - begin);

      for (std::size_t j = 0; j < b; ++j) {
        forward_window(p, batch.input_row(order[begin + j]), caches[j]);
      }

      // combined loss: sum over tasks of per-task MSE
      double loss = 0.0;
      std::vector<std::vector<double>> grad_head(n_tasks, std::vector<double>(b));
      for (int t = 0; t < n_tasks; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
          const double d = caches[j].head_out[t] - batch.target(t, order[begin + j]);
          acc += d * d;
          grad_head[t][j] = 2.0 * d / static_cast<double>(b);
        }
        loss += acc / static_cast<double>(b);
      }
      if (!std::isfinite(loss)) {
        result.params = last_good;
        result.diverged = true;
        return result;
      }
      epoch_loss_acc += loss;
      ++n_batches;
      if (nothing_trainable) continue;

      buffers.zero();
      const int dense_idx = p.dense_layer_index();
      std::vector<double>& gw_dense = buffers.grads[2 * n_conv];
      std::vector<double>& gb_dense = buffers.grads[2 * n_conv + 1];
      const int dense_width = p.arch.dense_width;
      const int flat_dim = p.shared_dense.in_dim;
      std::vector<double> grad_dense_post(dense_width);
      std::vector<double> grad_flat(flat_dim);

      for (std::size_t j = 0; j < b; ++j) {
        ForwardCache& cache = caches[j];

        // heads
        std::fill(grad_dense_post.begin(), grad_dense_post.end(), 0.0);
        for (int t = 0; t < n_tasks; ++t) {
          const double g = grad_head[t][j];
          std::vector<double>& gw_head = buffers.grads[2 * n_conv + 2 + 2 * t];
          std::vector<double>& gb_head = buffers.grads[2 * n_conv + 2 + 2 * t + 1];
          const double* hw = p.heads[t].weights.data();
          for (int i = 0; i < dense_width; ++i) {
            gw_head[i] += g * cache.dense_post[i];
            grad_dense_post[i] += g * hw[i];
          }
          gb_head[0] += g;
        }
        if (lowest_unfrozen > dense_idx) continue;

        // shared dense (through its ReLU; dense_post == 0 blocks the gradient)
        const std::vector<double>& flat = cache.conv_post.back().data;
        const bool need_conv = lowest_unfrozen < n_conv;
        if (need_conv) std::fill(grad_flat.begin(), grad_flat.end(), 0.0);
        const double* dw = p.shared_dense.weights.data();
        for (int o = 0; o < dense_width; ++o) {
          if (cache.dense_post[o] <= 0.0) continue;
          const double go = grad_dense_post[o];
          gb_dense[o] += go;
          double* gw_row = gw_dense.data() + static_cast<std::size_t>(o) * flat_dim;
          const double* w_row = dw + static_cast<std::size_t>(o) * flat_dim;
          if (need_conv) {
            for (int i = 0; i < flat_dim; ++i) {
              gw_row[i] += go * flat[i];
              grad_flat[i] += go * w_row[i];
            }
          } else {
            for (int i = 0; i < flat_dim; ++i) gw_row[i] += go * flat[i];
          }
        }
        if (!need_conv) continue;

        // conv stack, top down to the lowest unfrozen layer
        Tensor2 grad_post(cache.conv_post.back().channels, cache.conv_post.back().width);
        std::copy(grad_flat.begin(), grad_flat.end(), grad_post.data.begin());
        for (int layer = n_conv - 1; layer >= lowest_unfrozen; --layer) {
          const Tensor2& post = cache.conv_post[layer];
          for (std::size_t i = 0; i < grad_post.data.size(); ++i) {
            if (post.data[i] <= 0.0) grad_post.data[i] = 0.0;
          }
          const Tensor2* input;
          if (layer == 0) {
            std::copy(batch.input_row(order[begin + j]),
                      batch.input_row(order[begin + j]) + w, x_window.data.begin());
            input = &x_window;
          } else {
            input = &cache.conv_post[layer - 1];
          }
          ConvGrads cg = conv1d_backward(*input, p.conv[layer], grad_post);
          std::vector<double>& gw = buffers.grads[2 * layer];
          std::vector<double>& gb = buffers.grads[2 * layer + 1];
          for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += cg.grad_weights[i];
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += cg.grad_bias[i];
          grad_post = std::move(cg.grad_x);
        }
      }

      for (std::size_t a = 0; a < buffers.grads.size(); ++a) {
        if (p.frozen(buffers.layer_of[a])) continue;
        if (!adam_update(*buffers.params[a], buffers.grads[a], states[a], adam_cfg)) {
          result.params = last_good;
          result.diverged = true;
          return result;
        }
      }
    }

    result.epoch_loss.push_back(epoch_loss_acc / static_cast<double>(n_batches));
    last_good = p;
  }
  return result;
}

}  // namespace nilmbench
