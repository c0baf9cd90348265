#pragma once

#include <cstddef>
#include <vector>

namespace nilmbench {

// Channel-major 2-D array: data[c * width + i].
struct Tensor2 {
  int channels = 0;
  int width = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int channels_, int width_)
      : channels(channels_), width(width_),
        data(static_cast<std::size_t>(channels_) * width_, 0.0) {}

  double& at(int c, int i) { return data[static_cast<std::size_t>(c) * width + i]; }
  double at(int c, int i) const { return data[static_cast<std::size_t>(c) * width + i]; }
  const double* row(int c) const { return data.data() + static_cast<std::size_t>(c) * width; }
  double* row(int c) { return data.data() + static_cast<std::size_t>(c) * width; }
};

// 1-D convolution filters: weights[f][c][k] flattened, one bias per filter.
struct FilterBank {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_size = 0;
  int stride = 1;
  std::vector<double> weights;  // out_channels * in_channels * kernel_size
  std::vector<double> bias;     // out_channels

  FilterBank() = default;
  FilterBank(int out_ch, int in_ch, int k, int stride_ = 1)
      : out_channels(out_ch), in_channels(in_ch), kernel_size(k), stride(stride_),
        weights(static_cast<std::size_t>(out_ch) * in_ch * k, 0.0),
        bias(static_cast<std::size_t>(out_ch), 0.0) {}

  double& w(int f, int c, int k) {
    return weights[(static_cast<std::size_t>(f) * in_channels + c) * kernel_size + k];
  }
  double w(int f, int c, int k) const {
    return weights[(static_cast<std::size_t>(f) * in_channels + c) * kernel_size + k];
  }
  const double* filter(int f) const {
    return weights.data() + static_cast<std::size_t>(f) * in_channels * kernel_size;
  }
};

// Output width under valid convolution, w' = w - k + s. Only s = 1 is used by
// the shipped layers; the general form is kept for the cost arithmetic.
int conv_output_width(int input_width, int kernel_size, int stride = 1);

// Valid cross-correlation, stride 1. Throws std::invalid_argument on channel
// mismatch or a window shorter than the kernel.
Tensor2 conv1d_forward(const Tensor2& x, const FilterBank& f);

struct ConvGrads {
  Tensor2 grad_x;
  std::vector<double> grad_weights;  // same layout as FilterBank::weights
  std::vector<double> grad_bias;
};

ConvGrads conv1d_backward(const Tensor2& x, const FilterBank& f, const Tensor2& grad_out);

// Affine map y = W x + b with W row-major (out_dim x in_dim).
struct DenseLayer {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<double> weights;  // out_dim * in_dim
  std::vector<double> bias;     // out_dim

  DenseLayer() = default;
  DenseLayer(int out_d, int in_d)
      : out_dim(out_d), in_dim(in_d),
        weights(static_cast<std::size_t>(out_d) * in_d, 0.0),
        bias(static_cast<std::size_t>(out_d), 0.0) {}
};

std::vector<double> dense_forward(const std::vector<double>& x, const DenseLayer& layer);

struct DenseGrads {
  std::vector<double> grad_x;
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;
};

DenseGrads dense_backward(const std::vector<double>& x, const DenseLayer& layer,
                          const std::vector<double>& grad_out);

// max(x, 0) elementwise; the subgradient at exactly 0 is taken as 0.
std::vector<double> relu(const std::vector<double>& x);
std::vector<double> relu_backward(const std::vector<double>& x,
                                  const std::vector<double>& grad_out);
void relu_inplace(std::vector<double>& x);

// Mean squared error over all elements; gradient is 2*(pred - target)/n.
double mse_loss(const std::vector<double>& pred, const std::vector<double>& target);
double mse_loss_grad(const std::vector<double>& pred, const std::vector<double>& target,
                     std::vector<double>& grad_out);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators for one parameter array.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam step, applied in place. Returns false (and leaves params
// and state untouched) if any gradient is non-finite, so the caller can treat
// the run as diverged.
bool adam_update(std::vector<double>& params, const std::vector<double>& grads,
                 AdamState& state, const AdamConfig& cfg);

bool all_finite(const std::vector<double>& values);

}  // namespace nilmbench
