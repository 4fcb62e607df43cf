#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <numeric>

#include "kac/batch.hpp"
#include "kac/error.hpp"
#include "kac/rng.hpp"

using namespace kac;

namespace {

KacHead make_head_for_batch(Rng& rng, std::size_t n, std::size_t classes) {
  KacHead head(n, RbfGrid(4, -2.0, 2.0, 1.0));
  head.expand(classes, rng);
  for (auto& v : head.weights.flat()) v = rng.uniform(-0.5, 0.5);
  return head;
}

}  // namespace

TEST_CASE("parallel matmul is bit-identical to the serial reference") {
  Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n1 = 1 + rng.next_below(80), n2 = 1 + rng.next_below(80),
                      n3 = 1 + rng.next_below(80);
    const Matrix a = rand_uniform(rng, n1, n2, -1.0, 1.0);
    const Matrix b = rand_uniform(rng, n2, n3, -1.0, 1.0);
    CHECK(bits_equal(matmul(a, b), reference::matmul(a, b)));
  }
}

TEST_CASE("parallel batch logits and accuracy match the serial reference") {
  Rng rng(62);
  const KacHead head = make_head_for_batch(rng, 16, 6);
  const Backbone identity = Backbone::make_identity();
  const Matrix x = rand_normal(rng, 257, 16);  // odd count exercises tail chunks
  std::vector<int> y(x.rows());
  for (std::size_t s = 0; s < y.size(); ++s) y[s] = static_cast<int>(rng.next_below(6));

  CHECK(bits_equal(batch_logits(head, identity, x), reference::batch_logits(head, identity, x)));
  CHECK(count_correct(head, identity, x, y) == reference::count_correct(head, identity, x, y));
}

TEST_CASE("gradient accumulation: thread-count independent, near the serial sum") {
  Rng rng(63);
  const KacHead head = make_head_for_batch(rng, 12, 5);
  Backbone backbone = Backbone::make_linear(12, true);
  const Matrix x = rand_normal(rng, 100, 12);
  std::vector<int> y(x.rows());
  for (std::size_t s = 0; s < y.size(); ++s) y[s] = static_cast<int>(rng.next_below(5));
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);

  auto run_parallel = [&](int threads) {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(threads);
    auto head_copy = head;  // params() is non-const
    HeadGrads g;
    g.match(head_copy.params());
    Matrix bb(12, 12);
    const double loss =
        accumulate_ce_grads(head, backbone, x, idx, y, 0, head.num_classes(), g, &bb);
    omp_set_num_threads(saved);
    return std::tuple{loss, g, bb};
  };

  const auto [l1, g1, b1] = run_parallel(1);
  const auto [l2, g2, b2] = run_parallel(2);
  const auto [l4, g4, b4] = run_parallel(4);
  CHECK(l1 == l2);
  CHECK(l1 == l4);
  for (std::size_t i = 0; i < g1.slots.size(); ++i) {
    CHECK(bits_equal(g1.slots[i], g2.slots[i]));
    CHECK(bits_equal(g1.slots[i], g4.slots[i]));
  }
  CHECK(bits_equal(b1, b2));
  CHECK(bits_equal(b1, b4));

  // Against the plain serial sum the chunked tree only differs by rounding.
  auto head_copy = head;
  HeadGrads gs;
  gs.match(head_copy.params());
  Matrix bbs(12, 12);
  const double ls =
      reference::accumulate_ce_grads(head, backbone, x, idx, y, 0, head.num_classes(), gs, &bbs);
  CHECK(std::abs(l1 - ls) < 1e-12 * std::max(1.0, std::abs(ls)));
  for (std::size_t i = 0; i < gs.slots.size(); ++i)
    for (std::size_t j = 0; j < gs.slots[i].size(); ++j)
      CHECK(std::abs(g1.slots[i][j] - gs.slots[i][j]) < 1e-12);
  for (std::size_t j = 0; j < bbs.size(); ++j)
    CHECK(std::abs(b1.flat()[j] - bbs.flat()[j]) < 1e-12);
}

TEST_CASE("masked loss ignores rows outside the mask") {
  Rng rng(64);
  const KacHead head = make_head_for_batch(rng, 8, 6);
  const Backbone identity = Backbone::make_identity();
  const Matrix x = rand_normal(rng, 8, 8);
  std::vector<int> y(x.rows(), 4);  // all labels in block [3, 6)
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);

  auto head_copy = head;
  HeadGrads g;
  g.match(head_copy.params());
  accumulate_ce_grads(head, identity, x, idx, y, 3, 6, g, nullptr);
  // W rows of classes outside the mask receive no gradient
  const std::size_t cols = head.weights.cols();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < cols; ++j) CHECK(g.slots[0][c * cols + j] == 0.0);
  // a label outside the mask is a protocol error
  std::vector<int> bad_y(x.rows(), 1);
  g.zero();
  CHECK_THROWS_AS(accumulate_ce_grads(head, identity, x, idx, bad_y, 3, 6, g, nullptr),
                  ProtocolError);
}
