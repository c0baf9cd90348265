#pragma once

// Test-side oracles, independent of the library's forward/backward paths.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace oracles {

// Central finite differences of a scalar functional over a flat vector.
template <typename F>
std::vector<double> finite_diff(std::vector<double> x, F&& f, double step = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max(std::abs(a[i]) + std::abs(b[i]), 1e-6);
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Structural parameter count from the architecture description alone:
// conv layers contribute n_out*n_in*k + n_out, widths shrink by k-1 per layer,
// the shared dense consumes channels*width, each head is dense_width + 1.
inline long long param_count(int window, const std::vector<std::pair<int, int>>& conv,
                             int dense_width, int n_tasks) {
  long long total = 0;
  long long in_ch = 1;
  long long width = window;
  for (const auto& [filters, kernel] : conv) {
    total += static_cast<long long>(filters) * in_ch * kernel + filters;
    in_ch = filters;
    width = width - kernel + 1;
  }
  total += static_cast<long long>(dense_width) * (in_ch * width) + dense_width;
  total += static_cast<long long>(n_tasks) * (dense_width + 1);
  return total;
}

inline std::vector<long long> conv_widths(int window,
                                          const std::vector<std::pair<int, int>>& conv) {
  std::vector<long long> widths;
  long long w = window;
  for (const auto& [filters, kernel] : conv) {
    (void)filters;
    w = w - kernel + 1;
    widths.push_back(w);
  }
  return widths;
}

}  // namespace oracles
