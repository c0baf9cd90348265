#include "nilmbench/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nilmbench {

int conv_output_width(int input_width, int kernel_size, int stride) {
  return input_width - kernel_size + stride;
}

Tensor2 conv1d_forward(const Tensor2& x, const FilterBank& f) {
  if (x.channels != f.in_channels) {
    throw std::invalid_argument("conv1d_forward: input has " + std::to_string(x.channels) +
                                " channels, filter bank expects " +
                                std::to_string(f.in_channels));
  }
  if (x.width < f.kernel_size) {
    throw std::invalid_argument("conv1d_forward: window " + std::to_string(x.width) +
                                " shorter than kernel " + std::to_string(f.kernel_size));
  }
  if (f.stride != 1) {
    throw std::invalid_argument("conv1d_forward: only stride 1 is supported");
  }

  const int out_w = conv_output_width(x.width, f.kernel_size, f.stride);
  Tensor2 out(f.out_channels, out_w);
  const int k = f.kernel_size;

  for (int o = 0; o < f.out_channels; ++o) {
    double* out_row = out.row(o);
    const double b = f.bias[o];
    for (int i = 0; i < out_w; ++i) out_row[i] = b;
    for (int c = 0; c < f.in_channels; ++c) {
      const double* x_row = x.row(c);
      const double* w = f.filter(o) + static_cast<std::size_t>(c) * k;
      for (int t = 0; t < k; ++t) {
        const double wt = w[t];
        const double* xs = x_row + t;
        for (int i = 0; i < out_w; ++i) out_row[i] += wt * xs[i];
      }
    }
  }
  return out;
}

ConvGrads conv1d_backward(const Tensor2& x, const FilterBank& f, const Tensor2& grad_out) {
  if (x.channels != f.in_channels) {
    throw std::invalid_argument("conv1d_backward: channel mismatch");
  }
  const int out_w = conv_output_width(x.width, f.kernel_size, f.stride);
  if (grad_out.channels != f.out_channels || grad_out.width != out_w) {
    throw std::invalid_argument("conv1d_backward: grad_out shape mismatch");
  }

  ConvGrads g;
  g.grad_x = Tensor2(x.channels, x.width);
  g.grad_weights.assign(f.weights.size(), 0.0);
  g.grad_bias.assign(f.bias.size(), 0.0);
  const int k = f.kernel_size;

  for (int o = 0; o < f.out_channels; ++o) {
    const double* go = grad_out.row(o);
    double acc_b = 0.0;
    for (int i = 0; i < out_w; ++i) acc_b += go[i];
    g.grad_bias[o] = acc_b;

    for (int c = 0; c < f.in_channels; ++c) {
      const double* x_row = x.row(c);
      double* gx_row = g.grad_x.row(c);
      const double* w = f.filter(o) + static_cast<std::size_t>(c) * k;
      double* gw = g.grad_weights.data() +
                   (static_cast<std::size_t>(o) * f.in_channels + c) * k;
      for (int t = 0; t < k; ++t) {
        const double wt = w[t];
        const double* xs = x_row + t;
        double* gxs = gx_row + t;
        double acc_w = 0.0;
        for (int i = 0; i < out_w; ++i) {
          acc_w += xs[i] * go[i];
          gxs[i] += wt * go[i];
        }
        gw[t] += acc_w;
      }
    }
  }
  return g;
}

std::vector<double> dense_forward(const std::vector<double>& x, const DenseLayer& layer) {
  if (static_cast<int>(x.size()) != layer.in_dim) {
    throw std::invalid_argument("dense_forward: input size " + std::to_string(x.size()) +
                                " != in_dim " + std::to_string(layer.in_dim));
  }
  std::vector<double> y(layer.out_dim);
  for (int o = 0; o < layer.out_dim; ++o) {
    const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
    double acc = layer.bias[o];
    for (int i = 0; i < layer.in_dim; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
  return y;
}

DenseGrads dense_backward(const std::vector<double>& x, const DenseLayer& layer,
                          const std::vector<double>& grad_out) {
  if (static_cast<int>(x.size()) != layer.in_dim ||
      static_cast<int>(grad_out.size()) != layer.out_dim) {
    throw std::invalid_argument("dense_backward: shape mismatch");
  }
  DenseGrads g;
  g.grad_x.assign(layer.in_dim, 0.0);
  g.grad_weights.assign(layer.weights.size(), 0.0);
  g.grad_bias = grad_out;
  for (int o = 0; o < layer.out_dim; ++o) {
    const double go = grad_out[o];
    const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
    double* gw = g.grad_weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
    for (int i = 0; i < layer.in_dim; ++i) {
      gw[i] = go * x[i];
      g.grad_x[i] += go * w[i];
    }
  }
  return g;
}

std::vector<double> relu(const std::vector<double>& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

void relu_inplace(std::vector<double>& x) {
  for (double& v : x)
    if (v <= 0.0) v = 0.0;
}

std::vector<double> relu_backward(const std::vector<double>& x,
                                  const std::vector<double>& grad_out) {
  if (x.size() != grad_out.size()) {
    throw std::invalid_argument("relu_backward: shape mismatch");
  }
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

double mse_loss(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw std::invalid_argument("mse_loss: shape mismatch or empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double mse_loss_grad(const std::vector<double>& pred, const std::vector<double>& target,
                     std::vector<double>& grad_out) {
  if (pred.size() != target.size() || pred.empty()) {
    throw std::invalid_argument("mse_loss_grad: shape mismatch or empty input");
  }
  const double n = static_cast<double>(pred.size());
  grad_out.resize(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
    grad_out[i] = 2.0 * d / n;
  }
  return acc / n;
}

bool all_finite(const std::vector<double>& values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

bool adam_update(std::vector<double>& params, const std::vector<double>& grads,
                 AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_update: size mismatch");
  }
  if (!all_finite(grads)) return false;

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
  return true;
}

}  // namespace nilmbench
