#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kac {

/// Layer normalization with learnable affine parameters, population
/// (divide-by-n) variance.
struct LayerNorm {
  std::vector<double> gain;
  std::vector<double> bias;
  double epsilon = 1e-5;
  bool affine = true;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t n, double eps = 1e-5)
      : gain(n, 1.0), bias(n, 0.0), epsilon(eps) {}

  std::size_t dim() const { return gain.size(); }

  struct Cache {
    double inv_std = 0.0;
    std::vector<double> xhat;  // normalized pre-affine values
  };

  /// out_p = gain_p * (x_p - mean) / sqrt(var + epsilon) + bias_p
  void forward(std::span<const double> x, std::span<double> out, Cache* cache = nullptr) const;

  /// Accumulates gradients of sum(g . out) into d_gain/d_bias/d_x given the
  /// forward cache. Any of the gradient spans may be empty to skip it.
  void backward(const Cache& cache, std::span<const double> g, std::span<double> d_gain,
                std::span<double> d_bias, std::span<double> d_x) const;
};

}  // namespace kac
