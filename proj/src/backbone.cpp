#include "kac/backbone.hpp"

#include <algorithm>

#include "kac/error.hpp"

namespace kac {

Backbone Backbone::make_identity() { return Backbone{}; }

Backbone Backbone::make_linear(std::size_t n, bool trainable) {
  Backbone b;
  b.identity = false;
  b.trainable = trainable;
  b.weights = Matrix::identity(n);
  return b;
}

void Backbone::apply(std::span<const double> x, std::span<double> f) const {
  if (identity) {
    if (f.size() != x.size()) throw DimensionError("Backbone: identity dims disagree");
    std::copy(x.begin(), x.end(), f.begin());
    return;
  }
  if (x.size() != weights.cols() || f.size() != weights.rows())
    throw DimensionError("Backbone: input length " + std::to_string(x.size()) + " vs " +
                         weights.shape_str());
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    double acc = 0.0;
    const double* row = weights.data() + i * weights.cols();
    for (std::size_t k = 0; k < weights.cols(); ++k) acc += row[k] * x[k];
    f[i] = acc;
  }
}

void Backbone::accumulate_grad(std::span<const double> x, std::span<const double> d_f,
                               Matrix& sink) const {
  if (identity) return;
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    const double g = d_f[i];
    if (g == 0.0) continue;
    double* row = sink.data() + i * weights.cols();
    for (std::size_t k = 0; k < weights.cols(); ++k) row[k] += g * x[k];
  }
}

}  // namespace kac
