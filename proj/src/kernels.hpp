#pragma once

#include <cmath>
#include <cstddef>
#include <span>

// Dense row-major kernels shared by the forward and backward passes.
namespace sameside::kernels {

// out[m x n] = a[m x k] * b[k x n] + bias[n]
inline void matmul_bias(std::span<const double> a, std::span<const double> b, std::span<const double> bias,
                        std::span<double> out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = bias[j];
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

// grad_w[k x n] += a[m x k]^T * d[m x n];  grad_b[n] += column sums of d
inline void accumulate_weight_grad(std::span<const double> a, std::span<const double> d, std::span<double> grad_w,
                                   std::span<double> grad_b, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* drow = d.data() + i * n;
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* grow = grad_w.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) grow[j] += av * drow[j];
    }
    for (std::size_t j = 0; j < n; ++j) grad_b[j] += drow[j];
  }
}

// out[m x k] (+)= d[m x n] * w[k x n]^T
inline void matmul_transposed(std::span<const double> d, std::span<const double> w, std::span<double> out,
                              std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* drow = d.data() + i * n;
    double* orow = out.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* wrow = w.data() + p * n;
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += drow[j] * wrow[j];
      orow[p] = accumulate ? orow[p] + sum : sum;
    }
  }
}

inline constexpr double kGeluScale = 0.7978845608;
inline constexpr double kGeluCubic = 0.044715;

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluScale * (x + kGeluCubic * x * x * x)));
}

inline double gelu_derivative(double x) {
  const double t = std::tanh(kGeluScale * (x + kGeluCubic * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluScale * (1.0 + 3.0 * kGeluCubic * x * x);
}

}  // namespace sameside::kernels
