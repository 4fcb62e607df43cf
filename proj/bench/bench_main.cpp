// Wall-clock comparison of the OpenMP kernels against the serial reference
// implementations, with result checksums so the two paths can be eyeballed
// for agreement.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <numeric>

#include "kac/batch.hpp"
#include "kac/continual.hpp"
#include "kac/heads.hpp"
#include "kac/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& fn, int reps) {
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

double checksum(const kac::Matrix& m) {
  double acc = 0.0;
  for (double v : m.flat()) acc += v;
  return acc;
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-24s %12s %12s %8s\n", "kernel", "serial[ms]", "openmp[ms]", "speedup");

  kac::Rng rng(1234);

  {
    const kac::Matrix a = kac::rand_uniform(rng, 256, 256, -1.0, 1.0);
    const kac::Matrix b = kac::rand_uniform(rng, 256, 256, -1.0, 1.0);
    kac::Matrix r1, r2;
    const double ts = time_ms([&] { r1 = kac::reference::matmul(a, b); }, 5);
    const double tp = time_ms([&] { r2 = kac::matmul(a, b); }, 5);
    std::printf("%-24s %12.3f %12.3f %8.2f  (bitwise equal: %s)\n", "matmul 256^3", ts, tp,
                ts / tp, kac::bits_equal(r1, r2) ? "yes" : "NO");
  }

  kac::Rng head_rng(7);
  kac::KacHead head(64, kac::RbfGrid(8, -2.0, 2.0, 1.0));
  head.expand(40, head_rng);
  for (auto& p : head.params())
    for (std::size_t j = 0; j < p.size; ++j)
      if (p.name == "W") p.data[j] = head_rng.uniform(-0.5, 0.5);
  const kac::Backbone identity = kac::Backbone::make_identity();
  const kac::Matrix x = kac::rand_normal(rng, 4096, 64);

  {
    kac::Matrix r1, r2;
    const double ts = time_ms([&] { r1 = kac::reference::batch_logits(head, identity, x); }, 3);
    const double tp = time_ms([&] { r2 = kac::batch_logits(head, identity, x); }, 3);
    std::printf("%-24s %12.3f %12.3f %8.2f  (bitwise equal: %s)\n", "batch_logits 4096x64", ts,
                tp, ts / tp, kac::bits_equal(r1, r2) ? "yes" : "NO");
  }

  {
    std::vector<int> y(x.rows());
    for (std::size_t s = 0; s < y.size(); ++s) y[s] = static_cast<int>(s % head.num_classes());
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    auto params = head.params();
    kac::HeadGrads g1, g2;
    g1.match(params);
    g2.match(params);
    double l1 = 0.0, l2 = 0.0;
    const double ts = time_ms(
        [&] {
          g1.zero();
          l1 = kac::reference::accumulate_ce_grads(head, identity, x, idx, y, 0,
                                                   head.num_classes(), g1, nullptr);
        },
        3);
    const double tp = time_ms(
        [&] {
          g2.zero();
          l2 = kac::accumulate_ce_grads(head, identity, x, idx, y, 0, head.num_classes(), g2,
                                        nullptr);
        },
        3);
    double diff = std::abs(l1 - l2);
    for (std::size_t i = 0; i < g1.slots.size(); ++i)
      for (std::size_t j = 0; j < g1.slots[i].size(); ++j)
        diff = std::max(diff, std::abs(g1.slots[i][j] - g2.slots[i][j]));
    std::printf("%-24s %12.3f %12.3f %8.2f  (max |diff|: %.3g)\n", "ce_grads 4096x64", ts, tp,
                ts / tp, diff);
  }

  {
    std::vector<int> y(x.rows());
    for (std::size_t s = 0; s < y.size(); ++s) y[s] = static_cast<int>(s % head.num_classes());
    std::size_t c1 = 0, c2 = 0;
    const double ts = time_ms([&] { c1 = kac::reference::count_correct(head, identity, x, y); }, 3);
    const double tp = time_ms([&] { c2 = kac::count_correct(head, identity, x, y); }, 3);
    std::printf("%-24s %12.3f %12.3f %8.2f  (counts equal: %s)\n", "count_correct 4096", ts, tp,
                ts / tp, c1 == c2 ? "yes" : "NO");
  }

  (void)checksum;
  return 0;
}
