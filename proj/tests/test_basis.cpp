#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "kac/basis.hpp"
#include "kac/error.hpp"
#include "kac/rng.hpp"

using namespace kac;

namespace {

// Direct recursive Cox-de Boor definition, used as the independent oracle.
double cox_de_boor(const std::vector<double>& t, std::size_t i, std::size_t d, double x) {
  if (d == 0) return t[i] <= x && x < t[i + 1] ? 1.0 : 0.0;
  double acc = 0.0;
  const double den1 = t[i + d] - t[i];
  if (den1 != 0.0) acc += (x - t[i]) / den1 * cox_de_boor(t, i, d - 1, x);
  const double den2 = t[i + d + 1] - t[i + 1];
  if (den2 != 0.0) acc += (t[i + d + 1] - x) / den2 * cox_de_boor(t, i + 1, d - 1, x);
  return acc;
}

}  // namespace

TEST_CASE("make_centers spacing and conventions") {
  CHECK(make_centers(2, -2.0, 2.0) == std::vector<double>{-2.0, 2.0});
  CHECK(make_centers(1, -2.0, 2.0) == std::vector<double>{0.0});
  CHECK_THROWS_AS(make_centers(0, -2.0, 2.0), ParameterError);

  const auto c4 = make_centers(4, -2.0, 2.0);
  REQUIRE(c4.size() == 4);
  CHECK(c4.front() == -2.0);
  CHECK(c4.back() == 2.0);
  // spacing oracle: (hi-lo)/(N-1)
  const double want = 4.0 / 3.0;
  for (std::size_t i = 1; i < c4.size(); ++i)
    CHECK(c4[i] - c4[i - 1] == doctest::Approx(want).epsilon(1e-15));
  CHECK(c4[1] == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("rbf_eval closed-form values") {
  const RbfGrid grid(4, -2.0, 2.0, 1.0);
  SUBCASE("value one exactly at the centers") {
    for (double c : grid.centers) {
      const auto v = rbf_eval(grid, c);
      bool hit = false;
      for (std::size_t i = 0; i < v.size(); ++i)
        if (grid.centers[i] == c) {
          CHECK(v[i] == 1.0);
          hit = true;
        }
      CHECK(hit);
    }
  }
  SUBCASE("one sigma from a center") {
    const auto v = rbf_eval(grid, grid.centers[1] + 1.0);
    CHECK(v[1] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(0.6065306597).epsilon(1e-9));
  }
  SUBCASE("x = 0 against the independent scalar pipeline") {
    const auto v = rbf_eval(grid, 0.0);
    CHECK(v[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(std::exp(-2.0 / 9.0)).epsilon(1e-14));
    CHECK(v[2] == doctest::Approx(std::exp(-2.0 / 9.0)).epsilon(1e-14));
    CHECK(v[3] == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  }
}

TEST_CASE("rbf_eval bounded in (0,1] and symmetric about the midpoint") {
  const RbfGrid grid(5, -2.0, 2.0, 0.8);
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double d = rng.uniform(0.0, 6.0);
    const auto right = rbf_eval(grid, d);
    auto left = rbf_eval(grid, -d);
    std::reverse(left.begin(), left.end());
    for (std::size_t i = 0; i < right.size(); ++i) {
      CHECK(right[i] > 0.0);
      CHECK(right[i] <= 1.0);
      CHECK(right[i] == doctest::Approx(left[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("rbf_eval_matrix stacks scalar evaluations") {
  const RbfGrid grid(4, -2.0, 2.0, 1.0);
  SUBCASE("single row degenerate stacking") {
    const std::vector<double> x{0.3};
    const Matrix m = rbf_eval_matrix(grid, x);
    REQUIRE(m.rows() == 1);
    CHECK(bits_equal(m.row(0), std::span<const double>(rbf_eval(grid, 0.3))));
  }
  SUBCASE("equal inputs give identical rows") {
    const std::vector<double> x{1.1, -0.4, 1.1};
    const Matrix m = rbf_eval_matrix(grid, x);
    CHECK(bits_equal(m.row(0), m.row(2)));
  }
  SUBCASE("random matrix against the per-entry oracle") {
    Rng rng(17);
    std::vector<double> x(5);
    for (auto& v : x) v = rng.uniform(-3.0, 3.0);
    const Matrix m = rbf_eval_matrix(grid, x);
    for (std::size_t p = 0; p < x.size(); ++p)
      for (std::size_t i = 0; i < grid.count(); ++i) {
        const double d = x[p] - grid.centers[i];
        CHECK(m(p, i) == doctest::Approx(std::exp(-d * d / 2.0)).epsilon(1e-14));
      }
  }
}

TEST_CASE("rbf_grad sign, zeros, and finite differences") {
  const RbfGrid grid(4, -2.0, 2.0, 1.0);
  const auto at_center = rbf_grad(grid, grid.centers[2]);
  CHECK(at_center[2] == 0.0);
  const auto right = rbf_grad(grid, grid.centers[2] + 0.7);
  CHECK(right[2] < 0.0);

  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const double x = rng.uniform(-10.0, 10.0);
    const double h = 1e-6;
    const auto g = rbf_grad(grid, x);
    const auto up = rbf_eval(grid, x + h);
    const auto dn = rbf_eval(grid, x - h);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(std::abs(g[i] - (up[i] - dn[i]) / (2.0 * h)) < 1e-6);
  }
}

TEST_CASE("bspline degree zero indicator basis") {
  const BsplineBasis b(0, {0.0, 1.0, 2.0}, 0.0, 2.0);
  REQUIRE(b.count() == 2);
  const auto v = bspline_eval(b, 0.5);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 0.0);
  const auto end = bspline_eval(b, 2.0);
  CHECK(end[1] == 1.0);
}

TEST_CASE("bspline partition of unity and nonnegativity") {
  const BsplineBasis b = BsplineBasis::uniform(8, 3, -2.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = -2.0 + 4.0 * (static_cast<double>(i) + 0.5) / 1000.0;
    const auto v = bspline_eval(b, x);
    double sum = 0.0;
    for (double vi : v) {
      CHECK(vi >= 0.0);
      sum += vi;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("bspline matches the recursive oracle on the uniform grid") {
  const BsplineBasis b = BsplineBasis::uniform(7, 3, -2.0, 2.0);
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = trial == 0 ? 0.0 : rng.uniform(-2.0, 2.0);
    const auto got = bspline_eval(b, x);
    for (std::size_t i = 0; i < b.count(); ++i)
      CHECK(got[i] == doctest::Approx(cox_de_boor(b.knots, i, b.degree, x)).epsilon(1e-12));
  }
}

TEST_CASE("bspline clamps out-of-range inputs") {
  const BsplineBasis b = BsplineBasis::uniform(6, 3, -2.0, 2.0);
  CHECK(bspline_eval(b, 5.0) == bspline_eval(b, 2.0));
  CHECK(bspline_eval(b, -9.0) == bspline_eval(b, -2.0));
  // derivative through the clamp is zero
  for (double g : bspline_grad(b, 5.0)) CHECK(g == 0.0);
}

TEST_CASE("bspline derivative matches finite differences") {
  const BsplineBasis b = BsplineBasis::uniform(8, 3, -2.0, 2.0);
  Rng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const double x = rng.uniform(-1.95, 1.95);
    const double h = 1e-6;
    const auto g = bspline_grad(b, x);
    const auto up = bspline_eval(b, x + h);
    const auto dn = bspline_eval(b, x - h);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(std::abs(g[i] - (up[i] - dn[i]) / (2.0 * h)) < 1e-5);
  }
}

TEST_CASE("silu values") {
  CHECK(silu(0.0) == 0.0);
  CHECK(std::abs(silu(20.0) - 20.0) < 1e-6);
  CHECK(silu(1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(silu(1.0) == doctest::Approx(0.7310585786).epsilon(1e-9));
  // gradient against finite differences
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = rng.uniform(-8.0, 8.0);
    const double h = 1e-6;
    CHECK(std::abs(silu_grad(x) - (silu(x + h) - silu(x - h)) / (2.0 * h)) < 1e-6);
  }
}
