#include <doctest.h>

#include <cmath>

#include "kac/error.hpp"
#include "kac/gradcheck.hpp"
#include "kac/heads.hpp"
#include "kac/optim.hpp"
#include "kac/rng.hpp"

using namespace kac;

namespace {

// Independent scalar pipeline LN -> bumps -> dot, no Matrix machinery.
std::vector<double> kac_scalar_oracle(const KacHead& head, std::span<const double> f) {
  const std::size_t n = head.feature_dim();
  const std::size_t nb = head.grid.count();
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  std::vector<double> logits(head.num_classes(), 0.0);
  for (std::size_t c = 0; c < head.num_classes(); ++c) {
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double xh = (f[p] - mean) / std::sqrt(var + head.ln.epsilon);
      const double xp = head.ln.gain[p] * xh + head.ln.bias[p];
      for (std::size_t i = 0; i < nb; ++i) {
        const double d = xp - head.grid.centers[i];
        const double s = head.grid.sigmas[i];
        acc += head.weights(c, p * nb + i) * std::exp(-d * d / (2.0 * s * s));
      }
    }
    logits[c] = acc;
  }
  return logits;
}

KacHead random_kac(std::size_t n, std::size_t nb, std::size_t classes, Rng& rng) {
  KacHead head(n, RbfGrid(nb, -2.0, 2.0, 1.0));
  head.expand(classes, rng);
  for (auto& v : head.weights.flat()) v = rng.uniform(-1.0, 1.0);
  return head;
}

}  // namespace

TEST_CASE("layer norm unit-variance pair and constant input") {
  LayerNorm ln(2);
  std::vector<double> out(2);
  ln.forward(std::vector<double>{1.0, -1.0}, out);
  const double want = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(out[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(-want).epsilon(1e-12));
  CHECK(out[0] == doctest::Approx(0.999995).epsilon(1e-6));

  LayerNorm ln4(4);
  ln4.bias = {0.5, 0.5, 0.5, 0.5};
  std::vector<double> out4(4);
  ln4.forward(std::vector<double>{3.0, 3.0, 3.0, 3.0}, out4);
  for (double v : out4) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("layer norm output is centered before affine") {
  LayerNorm ln(8);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(8), out(8);
    for (auto& v : x) v = rng.uniform(-4.0, 4.0);
    ln.forward(x, out);
    double mean = 0.0;
    for (double v : out) mean += v;
    CHECK(std::abs(mean / 8.0) < 1e-12);
  }
}

TEST_CASE("kac forward matches the hand-computed pipeline") {
  KacHead head(2, RbfGrid(1, -2.0, 2.0, 1.0));
  Rng rng(0);
  head.expand(1, rng);
  head.weights(0, 0) = 1.0;
  head.weights(0, 1) = 1.0;
  const std::vector<double> f{1.0, -1.0};
  const auto logits = head.forward(f);
  REQUIRE(logits.size() == 1);
  // LN(f) = +-0.999995..., each channel contributes exp(-x'^2/2)
  const double xp = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(logits[0] == doctest::Approx(2.0 * std::exp(-xp * xp / 2.0)).epsilon(1e-12));
  CHECK(logits[0] == doctest::Approx(1.21307).epsilon(1e-5));
  CHECK(bits_equal(std::span<const double>(logits),
                   std::span<const double>(kac_scalar_oracle(head, f))));
}

TEST_CASE("kac forward degenerate weight patterns") {
  Rng rng(9);
  KacHead head(5, RbfGrid(4, -2.0, 2.0, 1.0));
  head.expand(3, rng);
  std::vector<double> f{0.2, -1.0, 0.7, 2.2, -0.3};
  SUBCASE("zero weights give zero logits") {
    for (auto& v : head.weights.flat()) v = 0.0;
    for (double l : head.forward(f)) CHECK(l == 0.0);
  }
  SUBCASE("duplicate rows give duplicate logits") {
    for (auto& v : head.weights.flat()) v = rng.uniform(-1.0, 1.0);
    for (std::size_t j = 0; j < head.weights.cols(); ++j)
      head.weights(2, j) = head.weights(0, j);
    const auto logits = head.forward(f);
    CHECK(logits[0] == logits[2]);
  }
}

TEST_CASE("kac forward matches the scalar oracle on random configs") {
  Rng rng(1001);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + rng.next_below(8);
    const std::size_t nb = 1 + rng.next_below(6);
    KacHead head = random_kac(n, nb, 1 + rng.next_below(6), rng);
    for (auto& v : head.ln.gain) v = rng.uniform(0.5, 1.5);
    for (auto& v : head.ln.bias) v = rng.uniform(-0.5, 0.5);
    std::vector<double> f(n);
    for (auto& v : f) v = rng.uniform(-3.0, 3.0);
    const auto got = head.forward(f);
    const auto want = kac_scalar_oracle(head, f);
    for (std::size_t c = 0; c < got.size(); ++c)
      CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-12));
  }
}

TEST_CASE("factored form agrees with the consolidated form") {
  Rng rng(77);
  SUBCASE("C=1 full contraction") {
    const RbfGrid grid(3, -2.0, 2.0, 1.0);
    const LayerNorm ln(4);
    FactoredKacWeights fw{rand_uniform(rng, 1, 4, -1.0, 1.0), rand_uniform(rng, 3, 1, -1.0, 1.0)};
    std::vector<double> f{0.1, -0.7, 1.3, 0.4};
    std::vector<double> xp(4);
    ln.forward(f, xp);
    const Matrix phi = rbf_eval_matrix(grid, xp);
    double want = 0.0;
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t i = 0; i < 3; ++i) want += fw.w_c(0, p) * phi(p, i) * fw.w_q(i, 0);
    const auto got = forward_factored(fw, grid, ln, f);
    CHECK(got[0] == doctest::Approx(want).epsilon(1e-14));
  }
  SUBCASE("zero W_q gives zero logits") {
    const RbfGrid grid(4, -2.0, 2.0, 1.0);
    const LayerNorm ln(3);
    FactoredKacWeights fw{rand_uniform(rng, 5, 3, -1.0, 1.0), Matrix(4, 5)};
    for (double l : forward_factored(fw, grid, ln, std::vector<double>{0.3, 1.0, -0.2}))
      CHECK(l == 0.0);
  }
  SUBCASE("outer-product consolidation equivalence, 100 random configs") {
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.next_below(16);
      const std::size_t nb = 1 + rng.next_below(8);
      const std::size_t classes = 1 + rng.next_below(10);
      const RbfGrid grid(nb, -2.0, 2.0, rng.uniform(0.5, 1.5));
      LayerNorm ln(n);
      for (auto& v : ln.gain) v = rng.uniform(0.5, 1.5);
      for (auto& v : ln.bias) v = rng.uniform(-0.5, 0.5);
      FactoredKacWeights fw{rand_uniform(rng, classes, n, -1.0, 1.0),
                            rand_uniform(rng, nb, classes, -1.0, 1.0)};
      KacHead head(n, grid);
      Rng init(0);
      head.expand(classes, init);
      head.weights = consolidate(fw);
      head.ln = ln;
      std::vector<double> f(n);
      for (auto& v : f) v = rng.uniform(-3.0, 3.0);
      const auto via_diag = forward_factored(fw, grid, ln, f);
      const auto via_consolidated = head.forward(f);
      for (std::size_t c = 0; c < classes; ++c)
        CHECK(std::abs(via_diag[c] - via_consolidated[c]) <= 1e-12);
    }
  }
}

TEST_CASE("kac backward: trivial cases") {
  Rng rng(55);
  KacHead head = random_kac(4, 3, 3, rng);
  const std::vector<double> f{0.5, -0.2, 1.0, -1.4};

  auto params = head.params();
  HeadGrads grads;
  grads.match(params);

  SUBCASE("zero upstream zero gradients") {
    std::vector<double> d_f(4, 0.0);
    head.backward(f, std::vector<double>{0.0, 0.0, 0.0}, grads, d_f);
    for (const auto& slot : grads.slots)
      for (double g : slot) CHECK(g == 0.0);
    for (double g : d_f) CHECK(g == 0.0);
  }
  SUBCASE("dW is upstream outer the flattened feature map") {
    const std::vector<double> upstream{0.3, -1.1, 0.7};
    head.backward(f, upstream, grads, {});
    std::vector<double> phi(head.weights.cols());
    head.feature_map(f, phi);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < head.weights.cols(); ++j)
        CHECK(grads.slots[0][c * head.weights.cols() + j] ==
              doctest::Approx(upstream[c] * phi[j]).epsilon(1e-13));
  }
}

TEST_CASE("gradient checks: every head kind on a fixed config") {
  Rng rng(2);
  SUBCASE("kac n=8 N=4 C=5") {
    KacHead head = random_kac(8, 4, 5, rng);
    for (auto& v : head.ln.gain) v = rng.uniform(0.5, 1.5);
    for (auto& v : head.ln.bias) v = rng.uniform(-0.5, 0.5);
    std::vector<double> f(8), up(5);
    for (auto& v : f) v = rng.uniform(-3.0, 3.0);
    for (auto& v : up) v = rng.uniform(-1.0, 1.0);
    const auto r = gradcheck_one(head, f, up);
    CHECK(r.max_violation < 1e-4);
  }
  SUBCASE("all kinds via the harness") {
    for (const auto& r : gradcheck_all(4, 5)) {
      INFO(r.head_kind, " worst ", r.worst_param, "[", r.worst_index, "]");
      CHECK(r.max_violation < 1e-4);
    }
  }
  SUBCASE("corrupted gradients are caught") {
    const auto r = gradcheck_head("kac", 4, 1, /*corrupt=*/true);
    CHECK_FALSE(r.passed());
  }
}

TEST_CASE("expansion keeps old classes bit-identical") {
  Rng rng(8);
  KacHead head = random_kac(6, 4, 3, rng);
  const std::vector<double> f{0.1, 0.2, -0.9, 1.7, 0.0, -0.4};
  const auto before = head.forward(f);
  const Matrix w_before = head.weights;

  CHECK_THROWS_AS(head.expand(0, rng), ParameterError);

  head.expand(2, rng);
  CHECK(head.num_classes() == 5);
  CHECK(head.task_blocks() == std::vector<std::size_t>{3, 2});
  const auto after = head.forward(f);
  CHECK(bits_equal(std::span<const double>(after).first(3), std::span<const double>(before)));
  CHECK(bits_equal(std::span<const double>(head.weights.flat()).first(w_before.size()),
                   w_before.flat()));
}

TEST_CASE("expansion bookkeeping matches a replayed sequence") {
  Rng rng(12);
  LinearHead head(7);
  std::vector<std::size_t> replay;
  std::size_t total = 0;
  for (std::size_t step = 0; step < 6; ++step) {
    const std::size_t k = 1 + rng.next_below(4);
    replay.push_back(k);
    total += k;
    Rng init(Rng::mix(99, step));
    head.expand(k, init);
  }
  CHECK(head.task_blocks() == replay);
  CHECK(head.num_classes() == total);
  std::size_t sum = 0;
  for (auto b : head.task_blocks()) sum += b;
  CHECK(head.weights.rows() == sum);
}

TEST_CASE("bspline head decomposition") {
  Rng rng(21);
  const std::size_t n = 6;
  SUBCASE("spline-only with zero weights gives zero logits") {
    BsplineHead head(n, BsplineBasis::uniform(4, 3, -2.0, 2.0), false);
    head.expand(4, rng);
    for (auto& v : head.spline_weights.flat()) v = 0.0;
    std::vector<double> f(n);
    for (auto& v : f) v = rng.uniform(-2.0, 2.0);
    for (double l : head.forward(f)) CHECK(l == 0.0);
  }
  SUBCASE("residual-only equals a linear head over silu(LN(f))") {
    BsplineHead head(n, BsplineBasis::uniform(4, 3, -2.0, 2.0), true);
    head.expand(4, rng);
    for (auto& v : head.spline_weights.flat()) v = 0.0;
    std::vector<double> f(n);
    for (auto& v : f) v = rng.uniform(-3.0, 3.0);
    std::vector<double> xp(n);
    head.ln.forward(f, xp);
    const auto logits = head.forward(f);
    for (std::size_t c = 0; c < 4; ++c) {
      double want = 0.0;
      for (std::size_t p = 0; p < n; ++p) want += head.residual_weights(c, p) * silu(xp[p]);
      CHECK(logits[c] == doctest::Approx(want).epsilon(1e-13));
    }
  }
}

TEST_CASE("linear head with identity weights reproduces the input") {
  Rng rng(3);
  LinearHead head(4);
  head.expand(4, rng);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t p = 0; p < 4; ++p) head.weights(c, p) = c == p ? 1.0 : 0.0;
  std::fill(head.bias.begin(), head.bias.end(), 0.0);
  const std::vector<double> f{0.25, -1.5, 3.0, 0.0};
  const auto logits = head.forward(f);
  CHECK(bits_equal(std::span<const double>(logits), std::span<const double>(f)));
}

TEST_CASE("frozen MLP first layer never moves") {
  Rng rng(31);
  MlpHead head(5, 10, /*frozen_first_layer=*/true, rng);
  head.expand(3, rng);
  const Matrix w1_before = head.w1;
  const std::vector<double> b1_before = head.b1;

  OptimConfig oc;
  auto optimizer = make_optimizer(oc);
  auto params = head.params();
  HeadGrads grads;
  grads.match(params);
  std::vector<double> f(5), up(3);
  for (int step = 0; step < 100; ++step) {
    for (auto& v : f) v = rng.uniform(-2.0, 2.0);
    for (auto& v : up) v = rng.uniform(-1.0, 1.0);
    grads.zero();
    head.backward(f, up, grads, {});
    optimizer->step(params, grads);
  }
  CHECK(bits_equal(head.w1, w1_before));
  CHECK(bits_equal(std::span<const double>(head.b1), std::span<const double>(b1_before)));
  // the trained layer did move
  bool moved = false;
  for (double v : head.w2.flat()) moved = moved || v != 0.0;
  CHECK(moved);
}

TEST_CASE("activation map") {
  Rng rng(17);
  KacHead head(6, RbfGrid(4, -2.0, 2.0, 1.0));
  head.expand(3, rng);
  SUBCASE("zero weights map to zero scores") {
    for (auto& v : head.weights.flat()) v = 0.0;
    const Matrix map = head.activation_map();
    for (double v : map.flat()) CHECK(v == 0.0);
  }
  SUBCASE("single support concentrates on one channel") {
    for (auto& v : head.weights.flat()) v = 0.0;
    head.weights(1, 2 * 4 + 3) = -0.7;  // class 1, channel 2, bump 3
    const Matrix map = head.activation_map();
    for (std::size_t p = 0; p < 6; ++p) CHECK(map(1, p) == (p == 2 ? 1.0 : 0.0));
  }
  SUBCASE("random weights match the brute-force recomputation") {
    for (auto& v : head.weights.flat()) v = rng.uniform(-1.0, 1.0);
    const Matrix map = head.activation_map();
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> score(6, 0.0);
      double mx = 0.0;
      for (std::size_t p = 0; p < 6; ++p) {
        for (std::size_t i = 0; i < 4; ++i) score[p] += std::abs(head.weights(c, p * 4 + i));
        mx = std::max(mx, score[p]);
      }
      for (std::size_t p = 0; p < 6; ++p) {
        CHECK(map(c, p) == doctest::Approx(score[p] / mx).epsilon(1e-14));
        CHECK(map(c, p) >= 0.0);
        CHECK(map(c, p) <= 1.0);
      }
    }
  }
}

TEST_CASE("bounded feature map and logit bound") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.next_below(10);
    KacHead head = random_kac(n, 1 + rng.next_below(5), 1 + rng.next_below(5), rng);
    std::vector<double> f(n);
    for (auto& v : f) v = rng.uniform(-5.0, 5.0);
    std::vector<double> phi(head.weights.cols());
    head.feature_map(f, phi);
    for (double v : phi) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }
    const auto logits = head.forward(f);
    for (std::size_t c = 0; c < logits.size(); ++c) {
      double bound = 0.0;
      for (std::size_t j = 0; j < head.weights.cols(); ++j)
        bound += std::abs(head.weights(c, j));
      CHECK(std::abs(logits[c]) <= bound + 1e-12);
    }
  }
}

TEST_CASE("bump rows depend only on their own normalized channel") {
  const RbfGrid grid(4, -2.0, 2.0, 1.0);
  Rng rng(23);
  std::vector<double> xp(6);
  for (auto& v : xp) v = rng.uniform(-2.0, 2.0);
  const Matrix phi = rbf_eval_matrix(grid, xp);
  auto perturbed = xp;
  perturbed[3] += 0.37;
  const Matrix phi2 = rbf_eval_matrix(grid, perturbed);
  for (std::size_t p = 0; p < 6; ++p) {
    if (p == 3) {
      CHECK_FALSE(bits_equal(phi.row(p), phi2.row(p)));
    } else {
      CHECK(bits_equal(phi.row(p), phi2.row(p)));
    }
  }
}

TEST_CASE("argmax is invariant to positive weight scaling") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    KacHead head = random_kac(6, 4, 5, rng);
    std::vector<double> f(6);
    for (auto& v : f) v = rng.uniform(-3.0, 3.0);
    const auto base = head.forward(f);
    const auto argmax = [](const std::vector<double>& v) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < v.size(); ++j)
        if (v[j] > v[best]) best = j;
      return best;
    };
    const std::size_t want = argmax(base);
    for (double lambda : {0.5, 2.0, 7.3}) {
      KacHead scaled = head;
      for (auto& v : scaled.weights.flat()) v *= lambda;
      CHECK(argmax(scaled.forward(f)) == want);
    }
  }
}

TEST_CASE("dimension errors name the offending sizes") {
  Rng rng(1);
  KacHead head = random_kac(4, 2, 2, rng);
  CHECK_THROWS_AS(head.forward(std::vector<double>{1.0, 2.0}), DimensionError);
  FactoredKacWeights bad{Matrix(2, 4), Matrix(3, 5)};
  CHECK_THROWS_AS(
      forward_factored(bad, head.grid, head.ln, std::vector<double>{1.0, 2.0, 3.0, 4.0}),
      DimensionError);
}

TEST_CASE("parameter count report") {
  const auto r = kac_param_count(768, 4, 100);
  CHECK(r.weight_matrix == 307200);
  CHECK(r.linear_weights == 76800);
  CHECK(r.extra_over_linear == 230400);
  CHECK(r.note.find("307200") != std::string::npos);
  CHECK(r.note.find("0.23M") != std::string::npos);
}
