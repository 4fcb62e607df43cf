#include "kac/peaks.hpp"

#include <algorithm>
#include <cmath>

#include "kac/error.hpp"
#include "kac/rng.hpp"

namespace kac {
namespace {

double gauss(double x, double mu, double w) {
  const double d = x - mu;
  return std::exp(-d * d / (2.0 * w * w));
}

double rbf_unit_eval(const RbfUnit& u, double x) {
  double acc = 0.0;
  std::vector<double> phi(u.grid.count());
  rbf_eval(u.grid, x, phi);
  for (std::size_t i = 0; i < phi.size(); ++i) acc += u.weights[i] * phi[i];
  return acc;
}

double mlp_unit_eval(const MlpUnit& u, double x) {
  double acc = u.b2;
  for (std::size_t k = 0; k < u.w1.size(); ++k) acc += u.w2[k] * silu(u.w1[k] * x + u.b1[k]);
  return acc;
}

double rmse_on(const std::vector<double>& xs, const std::vector<double>& ys, auto&& predict) {
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = predict(xs[i]) - ys[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace

nlohmann::json PeaksConfig::to_json() const {
  return {{"num_peaks", num_peaks},
          {"domain_lo", domain_lo},
          {"domain_hi", domain_hi},
          {"train_points", train_points},
          {"unit_basis", unit_basis},
          {"unit_sigma", unit_sigma},
          {"mlp_hidden", mlp_hidden},
          {"optimizer", optim.kind_name()},
          {"lr", optim.lr},
          {"steps_per_task", steps_per_task}};
}

std::vector<PeakTask> make_peaks(const PeaksConfig& cfg, std::uint64_t seed) {
  (void)seed;  // grids and targets are deterministic; seed kept for manifest parity
  if (cfg.num_peaks == 0) throw ParameterError("make_peaks: num_peaks must be >= 1");
  if (!(cfg.domain_lo < cfg.domain_hi)) throw ParameterError("make_peaks: empty domain");
  if (cfg.train_points < 3) throw ParameterError("make_peaks: needs at least 3 train points");

  const double span = (cfg.domain_hi - cfg.domain_lo) / static_cast<double>(cfg.num_peaks);
  std::vector<PeakTask> tasks(cfg.num_peaks);
  for (std::size_t t = 0; t < cfg.num_peaks; ++t) {
    PeakTask& task = tasks[t];
    task.x_lo = cfg.domain_lo + span * static_cast<double>(t);
    task.x_hi = t + 1 == cfg.num_peaks ? cfg.domain_hi : task.x_lo + span;
    task.mu = 0.5 * (task.x_lo + task.x_hi);
    task.width = span / 6.0;
    task.amplitude = 1.0;
    const std::size_t m = cfg.train_points;
    const double h = (task.x_hi - task.x_lo) / static_cast<double>(m - 1);
    task.train_x.resize(m);
    task.train_y.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      task.train_x[i] = task.x_lo + h * static_cast<double>(i);
      task.train_y[i] = task.amplitude * gauss(task.train_x[i], task.mu, task.width);
    }
    // test grid = train midpoints, disjoint from the train grid
    task.test_x.resize(m - 1);
    task.test_y.resize(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) {
      task.test_x[i] = task.train_x[i] + 0.5 * h;
      task.test_y[i] = task.amplitude * gauss(task.test_x[i], task.mu, task.width);
    }
  }
  return tasks;
}

PeaksReport run_peaks_experiment(const std::string& model, const PeaksConfig& cfg,
                                 std::uint64_t seed) {
  if (model != "rbf-unit" && model != "mlp-unit")
    throw ParameterError("run_peaks_experiment: model must be rbf-unit or mlp-unit");
  const auto tasks = make_peaks(cfg, seed);

  PeaksReport report;
  report.model = model;
  report.seed = seed;
  report.config_echo = cfg.to_json();
  report.config_echo["seed"] = seed;

  const bool is_rbf = model == "rbf-unit";
  RbfUnit rbf;
  MlpUnit mlp;
  if (is_rbf) {
    rbf.grid = RbfGrid(cfg.unit_basis, cfg.domain_lo, cfg.domain_hi, cfg.unit_sigma);
    rbf.weights.assign(cfg.unit_basis, 0.0);
  } else {
    Rng rng(Rng::mix(seed, 7));
    mlp.w1.resize(cfg.mlp_hidden);
    mlp.b1.resize(cfg.mlp_hidden);
    mlp.w2.resize(cfg.mlp_hidden);
    for (auto& v : mlp.w1) v = rng.uniform(-3.0, 3.0);
    for (auto& v : mlp.b1) v = rng.uniform(-3.0, 3.0);
    const double a = 1.0 / std::sqrt(static_cast<double>(cfg.mlp_hidden));
    for (auto& v : mlp.w2) v = rng.uniform(-a, a);
    mlp.b2 = 0.0;
  }

  auto optimizer = make_optimizer(cfg.optim);

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const PeakTask& task = tasks[t];
    const std::size_t m = task.train_x.size();
    const double inv_m = 1.0 / static_cast<double>(m);
    optimizer->reset();

    double max_grad_all = 0.0, max_grad_out = 0.0;

    if (is_rbf) {
      std::vector<ParamRef> params{{"w", rbf.weights.data(), rbf.weights.size(), true, 1.0}};
      HeadGrads grads;
      grads.match(params);
      std::vector<double> phi(rbf.grid.count());
      for (std::size_t step = 0; step < cfg.steps_per_task; ++step) {
        grads.zero();
        auto& gw = grads.slots[0];
        for (std::size_t s = 0; s < m; ++s) {
          rbf_eval(rbf.grid, task.train_x[s], phi);
          double pred = 0.0;
          for (std::size_t i = 0; i < phi.size(); ++i) pred += rbf.weights[i] * phi[i];
          const double up = 2.0 * (pred - task.train_y[s]) * inv_m;  // d(mse)/d(pred)
          for (std::size_t i = 0; i < phi.size(); ++i) gw[i] += up * phi[i];
        }
        for (std::size_t i = 0; i < gw.size(); ++i) {
          const double g = std::abs(gw[i]);
          max_grad_all = std::max(max_grad_all, g);
          const double c = rbf.grid.centers[i];
          const bool inside = c >= task.x_lo - 1e-9 && c <= task.x_hi + 1e-9;
          if (!inside) max_grad_out = std::max(max_grad_out, g);
        }
        optimizer->step(params, grads);
      }
      report.out_of_interval_grad_ratio.push_back(
          max_grad_all > 0.0 ? max_grad_out / max_grad_all : 0.0);
    } else {
      std::vector<ParamRef> params{{"w1", mlp.w1.data(), mlp.w1.size(), true, 1.0},
                                   {"b1", mlp.b1.data(), mlp.b1.size(), true, 1.0},
                                   {"w2", mlp.w2.data(), mlp.w2.size(), true, 1.0},
                                   {"b2", &mlp.b2, 1, true, 1.0}};
      HeadGrads grads;
      grads.match(params);
      const std::size_t hidden = cfg.mlp_hidden;
      for (std::size_t step = 0; step < cfg.steps_per_task; ++step) {
        grads.zero();
        for (std::size_t s = 0; s < m; ++s) {
          const double x = task.train_x[s];
          double pred = mlp.b2;
          std::vector<double> pre(hidden);
          for (std::size_t k = 0; k < hidden; ++k) {
            pre[k] = mlp.w1[k] * x + mlp.b1[k];
            pred += mlp.w2[k] * silu(pre[k]);
          }
          const double up = 2.0 * (pred - task.train_y[s]) * inv_m;
          grads.slots[3][0] += up;
          for (std::size_t k = 0; k < hidden; ++k) {
            grads.slots[2][k] += up * silu(pre[k]);
            const double dh = up * mlp.w2[k] * silu_grad(pre[k]);
            grads.slots[0][k] += dh * x;
            grads.slots[1][k] += dh;
          }
        }
        optimizer->step(params, grads);
      }
    }

    report.rmse.emplace_back();
    for (std::size_t k = 0; k <= t; ++k) {
      const PeakTask& past = tasks[k];
      const double err =
          is_rbf ? rmse_on(past.test_x, past.test_y, [&](double x) { return rbf_unit_eval(rbf, x); })
                 : rmse_on(past.test_x, past.test_y, [&](double x) { return mlp_unit_eval(mlp, x); });
      report.rmse.back().push_back(err);
    }
  }
  return report;
}

nlohmann::json PeaksReport::to_json() const {
  return {{"model", model},
          {"seed", seed},
          {"config", config_echo},
          {"rmse", rmse},
          {"out_of_interval_grad_ratio", out_of_interval_grad_ratio}};
}

}  // namespace kac
