#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kac/matrix.hpp"

namespace kac {

/// count equally spaced points covering [lo, hi]; both endpoints included
/// for count >= 2, the midpoint for count == 1.
std::vector<double> make_centers(std::size_t count, double lo, double hi);

/// x / (1 + exp(-x))
double silu(double x);
double silu_grad(double x);

/// Fixed grid of Gaussian bumps over [lo, hi]:
///   phi_i(x) = exp(-(x - c_i)^2 / (2 sigma_i^2)).
/// Centers and widths never receive gradients; only the weights layered on
/// top of the grid train.
struct RbfGrid {
  std::vector<double> centers;  // strictly increasing, spanning [lo, hi]
  std::vector<double> sigmas;   // per-center width, uniform by default
  double lo = -2.0;
  double hi = 2.0;

  RbfGrid() = default;
  RbfGrid(std::size_t count, double lo, double hi, double sigma);

  std::size_t count() const { return centers.size(); }
  void validate() const;
};

void rbf_eval(const RbfGrid& grid, double x, std::span<double> out);
std::vector<double> rbf_eval(const RbfGrid& grid, double x);

/// d phi_i / dx = -(x - c_i) / sigma_i^2 * phi_i(x)
void rbf_grad(const RbfGrid& grid, double x, std::span<double> out);
std::vector<double> rbf_grad(const RbfGrid& grid, double x);

/// Stacks rbf_eval row-wise: row p holds the bump values at x[p].
Matrix rbf_eval_matrix(const RbfGrid& grid, std::span<const double> x);

/// B-spline basis on a fixed nondecreasing knot vector, evaluated with the
/// Cox-de Boor recursion. Inputs are clamped to [lo, hi] before evaluation;
/// the basis is a partition of unity there when the knots extend degree
/// intervals beyond each side (see `uniform`).
struct BsplineBasis {
  std::size_t degree = 3;
  std::vector<double> knots;
  double lo = -2.0;
  double hi = 2.0;

  BsplineBasis() = default;
  BsplineBasis(std::size_t degree, std::vector<double> knots, double lo, double hi);

  /// basis_count functions of the given degree with uniform knots whose
  /// interior spans [lo, hi]; requires basis_count > degree.
  static BsplineBasis uniform(std::size_t basis_count, std::size_t degree, double lo, double hi);

  std::size_t count() const { return knots.size() - degree - 1; }
  void validate() const;
};

void bspline_eval(const BsplineBasis& basis, double x, std::span<double> out);
std::vector<double> bspline_eval(const BsplineBasis& basis, double x);

/// Derivative via the standard degree-reduction formula; zero for degree 0
/// and for inputs clamped at the interval ends.
void bspline_grad(const BsplineBasis& basis, double x, std::span<double> out);
std::vector<double> bspline_grad(const BsplineBasis& basis, double x);

Matrix bspline_eval_matrix(const BsplineBasis& basis, std::span<const double> x);

}  // namespace kac
