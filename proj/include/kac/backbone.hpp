#pragma once

#include <cstddef>
#include <span>

#include "kac/matrix.hpp"

namespace kac {

/// Feature map between raw stream features and the head. The default is a
/// frozen identity (the stream's random projection already happened at
/// generation time). The trainable linear variant starts as the identity
/// and is updated jointly with the head, which is enough to reproduce
/// backbone-drift effects at desk scale.
struct Backbone {
  bool identity = true;
  bool trainable = false;
  Matrix weights;  // out x in when not identity

  static Backbone make_identity();
  static Backbone make_linear(std::size_t n, bool trainable);

  std::size_t out_dim(std::size_t in_dim) const { return identity ? in_dim : weights.rows(); }

  void apply(std::span<const double> x, std::span<double> f) const;

  /// d(J)/dW += outer(d_f, x); no-op for the identity.
  void accumulate_grad(std::span<const double> x, std::span<const double> d_f,
                       Matrix& sink) const;
};

}  // namespace kac
