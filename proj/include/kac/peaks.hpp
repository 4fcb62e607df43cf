#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kac/basis.hpp"
#include "kac/optim.hpp"

namespace kac {

/// One segment of the sequential 1D regression toy: a Gaussian bump target
/// on a sub-interval of the domain, with disjoint train/test grids.
struct PeakTask {
  double x_lo = 0.0, x_hi = 0.0;
  double mu = 0.0;        // bump center, mid-interval
  double width = 0.0;     // interval span / 6
  double amplitude = 1.0;
  std::vector<double> train_x, train_y;
  std::vector<double> test_x, test_y;
};

struct PeaksConfig {
  std::size_t num_peaks = 5;
  double domain_lo = -1.0;
  double domain_hi = 1.0;
  std::size_t train_points = 121;  // per task; test grid = train midpoints

  // single-unit regressors
  std::size_t unit_basis = 51;       // bump count spanning the whole domain
  double unit_sigma = 1.0 / 60.0;    // bump width
  std::size_t mlp_hidden = 17;       // 3*hidden+1 params, ~matches unit_basis

  OptimConfig optim{OptimConfig::Kind::Adam, 0.01, 0.9, 0.9, 0.999, 1e-8};
  std::size_t steps_per_task = 1500;

  nlohmann::json to_json() const;
};

/// Splits the domain into equal intervals, one centered bump each.
std::vector<PeakTask> make_peaks(const PeaksConfig& cfg, std::uint64_t seed);

/// y(x) = sum_i w_i exp(-(x - c_i)^2 / (2 sigma^2)); only w trains.
struct RbfUnit {
  RbfGrid grid;
  std::vector<double> weights;
};

/// y(x) = w2 . silu(w1 x + b1) + b2, one scalar in and out.
struct MlpUnit {
  std::vector<double> w1, b1, w2;
  double b2 = 0.0;
};

struct PeaksReport {
  std::string model;  // "rbf-unit" | "mlp-unit"
  std::uint64_t seed = 0;
  nlohmann::json config_echo;
  /// rmse[t][k]: error on peak k's test grid after training task t (k <= t).
  std::vector<std::vector<double>> rmse;
  /// Per task: max gradient magnitude hitting weights of bumps centered
  /// outside the task interval, relative to the overall max (rbf only).
  std::vector<double> out_of_interval_grad_ratio;

  nlohmann::json to_json() const;
};

/// Trains the chosen single-unit regressor on each peak in sequence
/// (full-batch squared error) and records the error matrix; the RBF run
/// also instruments per-step weight gradients for the locality check.
PeaksReport run_peaks_experiment(const std::string& model, const PeaksConfig& cfg,
                                 std::uint64_t seed);

}  // namespace kac
