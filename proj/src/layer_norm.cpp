#include "kac/layer_norm.hpp"

#include <cmath>

#include "kac/error.hpp"

namespace kac {

void LayerNorm::forward(std::span<const double> x, std::span<double> out, Cache* cache) const {
  const std::size_t n = dim();
  if (x.size() != n || out.size() != n)
    throw DimensionError("LayerNorm::forward: vector length does not match dim");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + epsilon);
  if (cache) {
    cache->inv_std = inv_std;
    cache->xhat.resize(n);
  }
  for (std::size_t p = 0; p < n; ++p) {
    const double xh = (x[p] - mean) * inv_std;
    if (cache) cache->xhat[p] = xh;
    out[p] = affine ? gain[p] * xh + bias[p] : xh;
  }
}

void LayerNorm::backward(const Cache& cache, std::span<const double> g, std::span<double> d_gain,
                         std::span<double> d_bias, std::span<double> d_x) const {
  const std::size_t n = dim();
  // u = dJ/d xhat
  std::vector<double> u(n);
  for (std::size_t p = 0; p < n; ++p) u[p] = affine ? g[p] * gain[p] : g[p];
  if (!d_gain.empty() && affine)
    for (std::size_t p = 0; p < n; ++p) d_gain[p] += g[p] * cache.xhat[p];
  if (!d_bias.empty() && affine)
    for (std::size_t p = 0; p < n; ++p) d_bias[p] += g[p];
  if (d_x.empty()) return;
  double mean_u = 0.0, mean_ux = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    mean_u += u[p];
    mean_ux += u[p] * cache.xhat[p];
  }
  mean_u /= static_cast<double>(n);
  mean_ux /= static_cast<double>(n);
  for (std::size_t p = 0; p < n; ++p)
    d_x[p] += cache.inv_std * (u[p] - mean_u - cache.xhat[p] * mean_ux);
}

}  // namespace kac
