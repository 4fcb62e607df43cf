#include "kac/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kac/error.hpp"

namespace kac {

std::vector<double> make_centers(std::size_t count, double lo, double hi) {
  if (count == 0) throw ParameterError("make_centers: count must be >= 1");
  if (!(lo < hi)) throw ParameterError("make_centers: requires lo < hi");
  if (count == 1) return {0.5 * (lo + hi)};
  std::vector<double> c(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) c[i] = lo + step * static_cast<double>(i);
  c.front() = lo;
  c.back() = hi;
  return c;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

RbfGrid::RbfGrid(std::size_t count, double lo_, double hi_, double sigma)
    : centers(make_centers(count, lo_, hi_)), sigmas(count, sigma), lo(lo_), hi(hi_) {
  validate();
}

void RbfGrid::validate() const {
  if (centers.empty()) throw ParameterError("RbfGrid: needs at least one center");
  if (sigmas.size() != centers.size())
    throw DimensionError("RbfGrid: centers/sigmas length mismatch");
  for (std::size_t i = 1; i < centers.size(); ++i)
    if (!(centers[i - 1] < centers[i]))
      throw ParameterError("RbfGrid: centers must be strictly increasing");
  for (double s : sigmas)
    if (!(s > 0.0)) throw ParameterError("RbfGrid: sigma must be positive");
}

void rbf_eval(const RbfGrid& grid, double x, std::span<double> out) {
  const std::size_t n = grid.count();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x - grid.centers[i];
    const double s = grid.sigmas[i];
    out[i] = std::exp(-d * d / (2.0 * s * s));
  }
}

std::vector<double> rbf_eval(const RbfGrid& grid, double x) {
  std::vector<double> out(grid.count());
  rbf_eval(grid, x, out);
  return out;
}

void rbf_grad(const RbfGrid& grid, double x, std::span<double> out) {
  const std::size_t n = grid.count();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x - grid.centers[i];
    const double s2 = grid.sigmas[i] * grid.sigmas[i];
    out[i] = -(d / s2) * std::exp(-d * d / (2.0 * s2));
  }
}

std::vector<double> rbf_grad(const RbfGrid& grid, double x) {
  std::vector<double> out(grid.count());
  rbf_grad(grid, x, out);
  return out;
}

Matrix rbf_eval_matrix(const RbfGrid& grid, std::span<const double> x) {
  Matrix m(x.size(), grid.count());
  for (std::size_t p = 0; p < x.size(); ++p) rbf_eval(grid, x[p], m.row(p));
  return m;
}

BsplineBasis::BsplineBasis(std::size_t degree_, std::vector<double> knots_, double lo_, double hi_)
    : degree(degree_), knots(std::move(knots_)), lo(lo_), hi(hi_) {
  validate();
}

BsplineBasis BsplineBasis::uniform(std::size_t basis_count, std::size_t degree, double lo,
                                   double hi) {
  if (basis_count <= degree)
    throw ParameterError("BsplineBasis::uniform: basis_count must exceed degree");
  if (!(lo < hi)) throw ParameterError("BsplineBasis::uniform: requires lo < hi");
  // g interior intervals on [lo, hi], extended degree intervals on each side
  // so that the basis sums to one over the whole evaluation interval.
  const std::size_t g = basis_count - degree;
  const double h = (hi - lo) / static_cast<double>(g);
  std::vector<double> knots(g + 2 * degree + 1);
  for (std::size_t j = 0; j < knots.size(); ++j)
    knots[j] = lo + h * (static_cast<double>(j) - static_cast<double>(degree));
  return BsplineBasis(degree, std::move(knots), lo, hi);
}

void BsplineBasis::validate() const {
  if (knots.size() < degree + 2)
    throw ParameterError("BsplineBasis: knot vector too short for degree");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (knots[i] < knots[i - 1]) throw ParameterError("BsplineBasis: knots must be nondecreasing");
  if (!(lo < hi)) throw ParameterError("BsplineBasis: requires lo < hi");
}

namespace {

// Index k with knots[k] <= x < knots[k+1], restricted to spans that carry
// basis support; x at or beyond the last basis knot lands in the final span.
std::size_t find_span(const BsplineBasis& b, double x) {
  const std::size_t nb = b.count();
  const std::size_t d = b.degree;
  if (x >= b.knots[nb]) return nb - 1;
  if (x <= b.knots[d]) return d;
  std::size_t lo = d, hi = nb;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (x < b.knots[mid])
      hi = mid;
    else
      lo = mid;
  }
  return lo;
}

// Nonzero basis values N_{k-d..k,d}(x) by the triangular Cox-de Boor scheme.
void nonzero_basis(const BsplineBasis& b, std::size_t span, std::size_t degree, double x,
                   std::span<double> n) {
  n[0] = 1.0;
  std::vector<double> left(degree + 1), right(degree + 1);
  for (std::size_t j = 1; j <= degree; ++j) {
    left[j] = x - b.knots[span + 1 - j];
    right[j] = b.knots[span + j] - x;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      const double den = right[r + 1] + left[j - r];
      const double tmp = den != 0.0 ? n[r] / den : 0.0;
      n[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    n[j] = saved;
  }
}

}  // namespace

void bspline_eval(const BsplineBasis& basis, double x, std::span<double> out) {
  const double xc = std::clamp(x, basis.lo, basis.hi);
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t span = find_span(basis, xc);
  std::vector<double> n(basis.degree + 1);
  nonzero_basis(basis, span, basis.degree, xc, n);
  for (std::size_t j = 0; j <= basis.degree; ++j) out[span - basis.degree + j] = n[j];
}

std::vector<double> bspline_eval(const BsplineBasis& basis, double x) {
  std::vector<double> out(basis.count());
  bspline_eval(basis, x, out);
  return out;
}

void bspline_grad(const BsplineBasis& basis, double x, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (basis.degree == 0) return;
  // Clamping makes the basis constant outside [lo, hi].
  if (x < basis.lo || x > basis.hi) return;
  const std::size_t d = basis.degree;
  const std::size_t span = find_span(basis, x);
  std::vector<double> lower(d);  // N_{span-d+1..span, d-1}(x)
  nonzero_basis(basis, span, d - 1, x, lower);
  // B'_{i,d} = d * (B_{i,d-1}/(t_{i+d}-t_i) - B_{i+1,d-1}/(t_{i+d+1}-t_{i+1}))
  auto lower_at = [&](std::size_t i) -> double {
    const std::size_t first = span - d + 1;
    if (i < first || i > span) return 0.0;
    return lower[i - first];
  };
  for (std::size_t j = 0; j <= d; ++j) {
    const std::size_t i = span - d + j;
    const double den1 = basis.knots[i + d] - basis.knots[i];
    const double den2 = basis.knots[i + d + 1] - basis.knots[i + 1];
    double v = 0.0;
    if (den1 != 0.0) v += lower_at(i) / den1;
    if (den2 != 0.0) v -= lower_at(i + 1) / den2;
    out[i] = static_cast<double>(d) * v;
  }
}

std::vector<double> bspline_grad(const BsplineBasis& basis, double x) {
  std::vector<double> out(basis.count());
  bspline_grad(basis, x, out);
  return out;
}

Matrix bspline_eval_matrix(const BsplineBasis& basis, std::span<const double> x) {
  Matrix m(x.size(), basis.count());
  for (std::size_t p = 0; p < x.size(); ++p) bspline_eval(basis, x[p], m.row(p));
  return m;
}

}  // namespace kac
