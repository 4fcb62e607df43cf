#include "kac/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "kac/error.hpp"

namespace kac {
namespace {

constexpr double kStep = 1e-6;

double objective(const Head& head, std::span<const double> f, std::span<const double> upstream) {
  std::vector<double> logits(head.num_classes());
  head.forward(f, logits);
  double j = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) j += upstream[c] * logits[c];
  return j;
}

void update_worst(GradCheckResult& r, double analytic, double fd, const std::string& name,
                  std::size_t index) {
  const double err = std::abs(analytic - fd);
  const double violation = err / std::max({std::abs(analytic), std::abs(fd), 1e-3});
  ++r.coords_checked;
  if (violation > r.max_violation) {
    r.max_violation = violation;
    r.worst_param = name;
    r.worst_index = index;
  }
}

HeadConfig random_head_config(const std::string& kind, Rng& rng) {
  HeadConfig cfg;
  cfg.kind = kind == "bspline_residual" ? "bspline" : kind;
  cfg.residual = kind == "bspline_residual";
  cfg.rbf_count = 1 + rng.next_below(4);
  cfg.sigma = rng.uniform(0.5, 1.5);
  cfg.spline_basis_count = 4 + rng.next_below(3);
  cfg.degree = 3;
  return cfg;
}

}  // namespace

GradCheckResult gradcheck_one(Head& head, std::span<const double> f,
                              std::span<const double> upstream, bool corrupt) {
  GradCheckResult result;
  result.head_kind = head.kind();

  auto params = head.params();
  HeadGrads grads;
  grads.match(params);
  std::vector<double> d_f(head.feature_dim(), 0.0);
  head.backward(f, upstream, grads, d_f);
  if (corrupt && !grads.slots.empty() && !grads.slots[0].empty()) grads.slots[0][0] += 1e-2;

  // parameters
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size; ++j) {
      double& theta = params[i].data[j];
      const double saved = theta;
      theta = saved + kStep;
      const double jp = objective(head, f, upstream);
      theta = saved - kStep;
      const double jm = objective(head, f, upstream);
      theta = saved;
      update_worst(result, grads.slots[i][j], (jp - jm) / (2.0 * kStep), params[i].name, j);
    }
  }
  // input feature
  std::vector<double> fp(f.begin(), f.end());
  for (std::size_t p = 0; p < fp.size(); ++p) {
    const double saved = fp[p];
    fp[p] = saved + kStep;
    const double jp = objective(head, fp, upstream);
    fp[p] = saved - kStep;
    const double jm = objective(head, fp, upstream);
    fp[p] = saved;
    update_worst(result, d_f[p], (jp - jm) / (2.0 * kStep), "f", p);
  }
  return result;
}

GradCheckResult gradcheck_head(const std::string& kind, std::uint64_t seed, std::size_t trials,
                               bool corrupt) {
  if (trials == 0) throw ParameterError("gradcheck: trials must be >= 1");
  GradCheckResult worst;
  worst.head_kind = kind;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(Rng::mix(seed, 0x67636b00u + t));
    const std::size_t n = 2 + rng.next_below(7);   // <= 8
    const std::size_t classes = 1 + rng.next_below(5);
    HeadConfig cfg = random_head_config(kind, rng);
    auto head = make_head(cfg, n, rng);
    head->expand(classes, rng);
    // randomize every parameter, layer-norm affine included
    for (auto& p : head->params()) {
      const bool is_gain = p.name == "ln.gain";
      for (std::size_t j = 0; j < p.size; ++j)
        p.data[j] = is_gain ? rng.uniform(0.5, 1.5) : rng.uniform(-1.0, 1.0);
    }
    std::vector<double> f(n), upstream(classes);
    for (auto& v : f) v = rng.uniform(-3.0, 3.0);
    for (auto& v : upstream) v = rng.uniform(-1.0, 1.0);
    GradCheckResult r = gradcheck_one(*head, f, upstream, corrupt && t == 0);
    worst.coords_checked += r.coords_checked;
    if (r.max_violation > worst.max_violation) {
      worst.max_violation = r.max_violation;
      worst.worst_param = r.worst_param;
      worst.worst_index = r.worst_index;
    }
  }
  return worst;
}

std::vector<GradCheckResult> gradcheck_all(std::uint64_t seed, std::size_t trials, bool corrupt) {
  std::vector<GradCheckResult> out;
  for (const char* kind : {"kac", "bspline", "bspline_residual", "mlp", "linear"})
    out.push_back(gradcheck_head(kind, seed, trials, corrupt));
  return out;
}

}  // namespace kac
