#include "kac/continual.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "kac/batch.hpp"
#include "kac/error.hpp"
#include "kac/io_util.hpp"

namespace kac {

std::string stream_mode_name(StreamMode m) { return m == StreamMode::Cil ? "cil" : "dil"; }

void TaskStream::validate() const {
  if (tasks.empty()) throw ParameterError("TaskStream: needs at least one task");
  std::set<int> all_ids;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const TaskData& task = tasks[t];
    if (task.train_x.cols() != n_feature || task.test_x.cols() != n_feature)
      throw DimensionError("TaskStream: feature width mismatch in task " + std::to_string(t));
    if (task.train_x.rows() != task.train_y.size() || task.test_x.rows() != task.test_y.size())
      throw DimensionError("TaskStream: label count mismatch in task " + std::to_string(t));
    std::set<int> ids(task.class_ids.begin(), task.class_ids.end());
    if (ids.size() != task.class_ids.size())
      throw ParameterError("TaskStream: duplicate class ids within task " + std::to_string(t));
    for (int y : task.train_y)
      if (!ids.count(y)) throw ProtocolError("TaskStream: train label outside task class set");
    for (int y : task.test_y)
      if (!ids.count(y)) throw ProtocolError("TaskStream: test label outside task class set");
    if (mode == StreamMode::Cil) {
      for (int id : ids)
        if (!all_ids.insert(id).second)
          throw ProtocolError("TaskStream: CIL class id " + std::to_string(id) +
                              " repeats across tasks");
    } else if (t > 0 && ids != std::set<int>(tasks[0].class_ids.begin(),
                                             tasks[0].class_ids.end())) {
      throw ProtocolError("TaskStream: DIL class sets must be identical across tasks");
    }
  }
}

void ClassMap::extend(std::span<const int> class_ids) {
  for (int id : class_ids) {
    if (row_of(id) >= 0)
      throw ProtocolError("ClassMap: class id " + std::to_string(id) + " already mapped");
    row_to_class.push_back(id);
  }
}

int ClassMap::row_of(int class_id) const {
  for (std::size_t r = 0; r < row_to_class.size(); ++r)
    if (row_to_class[r] == class_id) return static_cast<int>(r);
  return -1;
}

void TrainConfig::validate() const {
  optim.validate();
  if (epochs == 0) throw ParameterError("TrainConfig: epochs must be >= 1");
  if (batch_size == 0) throw ParameterError("TrainConfig: batch_size must be >= 1");
  if (backbone_lr < 0.0) throw ParameterError("TrainConfig: backbone_lr must be >= 0");
}

std::vector<double> forgetting(const AccuracyMatrix& m) {
  const std::size_t steps = m.a.size();
  if (steps < 2) throw ParameterError("forgetting: needs at least two steps");
  std::vector<double> f(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    double best = 0.0;
    for (std::size_t t = k; t < steps; ++t) best = std::max(best, m.a[t][k]);
    f[k] = best - m.a[steps - 1][k];
  }
  return f;
}

ContinualMetrics compute_metrics(const AccuracyMatrix& m) {
  if (m.seen.empty()) throw ParameterError("compute_metrics: empty accuracy record");
  ContinualMetrics out;
  double sum = 0.0;
  for (double v : m.seen) sum += v;
  out.average_incremental = sum / static_cast<double>(m.seen.size());
  out.last = m.seen.back();
  if (m.a.size() >= 2) out.forgetting = forgetting(m);
  return out;
}

nlohmann::json ContinualReport::to_json() const {
  nlohmann::json doc{{"config", config_echo},
                     {"seed", seed},
                     {"seen_accuracy", accuracy.seen},
                     {"accuracy_matrix", accuracy.a},
                     {"average_incremental_accuracy", metrics.average_incremental},
                     {"last_accuracy", metrics.last},
                     {"forgetting", metrics.forgetting}};
  if (activation_map) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t c = 0; c < activation_map->rows(); ++c) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t p = 0; p < activation_map->cols(); ++p)
        row.push_back((*activation_map)(c, p));
      rows.push_back(std::move(row));
    }
    doc["activation_map"] = std::move(rows);
  }
  return doc;
}

std::string ContinualReport::accuracy_csv() const {
  std::ostringstream os;
  os << "# config: " << config_echo.dump() << "\n";
  os << "step";
  for (std::size_t k = 0; k < accuracy.a.size(); ++k) os << ",task" << k + 1;
  os << ",seen\n";
  for (std::size_t t = 0; t < accuracy.a.size(); ++t) {
    os << t + 1;
    for (std::size_t k = 0; k < accuracy.a.size(); ++k) {
      os << ",";
      if (k < accuracy.a[t].size()) os << format_sig6(accuracy.a[t][k]);
    }
    os << "," << format_sig6(accuracy.seen[t]) << "\n";
  }
  return os.str();
}

void train_task(Head& head, Backbone& backbone, Optimizer& optimizer, const TaskData& task,
                const ClassMap& classes, const TrainConfig& cfg, Rng& rng,
                std::size_t current_block_lo, std::size_t current_block_hi, TrainStats* stats) {
  cfg.validate();
  const std::size_t m = task.train_x.rows();
  if (m == 0) throw ParameterError("train_task: empty training set");

  std::vector<int> y_rows(m);
  for (std::size_t s = 0; s < m; ++s) {
    const int row = classes.row_of(task.train_y[s]);
    if (row < 0)
      throw ProtocolError("train_task: label " + std::to_string(task.train_y[s]) +
                          " outside the expanded class range");
    y_rows[s] = row;
  }

  std::size_t mask_lo = 0, mask_hi = head.num_classes();
  if (cfg.mask_to_current_task) {
    mask_lo = current_block_lo;
    mask_hi = current_block_hi;
  }

  auto params = head.params();
  Matrix backbone_grad;
  const bool train_backbone = cfg.trainable_backbone && backbone.trainable && !backbone.identity;
  if (train_backbone) {
    backbone_grad = Matrix(backbone.weights.rows(), backbone.weights.cols());
    const double scale = cfg.backbone_lr > 0.0 ? cfg.backbone_lr / cfg.optim.lr : 1.0;
    params.push_back(
        {"backbone.W", backbone.weights.data(), backbone.weights.size(), true, scale});
  }
  HeadGrads grads;
  grads.match(params);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the task RNG; identical seeds give identical runs.
    for (std::size_t i = m; i > 1; --i) {
      const std::size_t j = rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }
    std::vector<double>* losses = nullptr;
    if (stats) {
      stats->epoch_batch_losses.emplace_back();
      losses = &stats->epoch_batch_losses.back();
    }
    for (std::size_t begin = 0; begin < m; begin += cfg.batch_size) {
      const std::size_t end = std::min(m, begin + cfg.batch_size);
      grads.zero();
      if (train_backbone) {
        auto& bg = grads.slots.back();
        std::fill(bg.begin(), bg.end(), 0.0);
        backbone_grad = Matrix(backbone.weights.rows(), backbone.weights.cols());
      }
      const double loss = accumulate_ce_grads(
          head, backbone, task.train_x, std::span<const std::size_t>(order).subspan(begin, end - begin),
          y_rows, mask_lo, mask_hi, grads, train_backbone ? &backbone_grad : nullptr);
      if (train_backbone)
        std::copy(backbone_grad.flat().begin(), backbone_grad.flat().end(),
                  grads.slots.back().begin());
      optimizer.step(params, grads);
      if (losses) losses->push_back(loss);
    }
  }
}

double evaluate(const Head& head, const Backbone& backbone,
                std::span<const TaskData* const> test_tasks, const ClassMap& classes) {
  std::size_t total = 0, correct = 0;
  for (const TaskData* task : test_tasks) {
    const std::size_t m = task->test_x.rows();
    if (m == 0) continue;
    std::vector<int> y_rows(m);
    for (std::size_t s = 0; s < m; ++s) {
      const int row = classes.row_of(task->test_y[s]);
      if (row < 0) throw ProtocolError("evaluate: label outside the expanded class range");
      y_rows[s] = row;
    }
    correct += count_correct(head, backbone, task->test_x, y_rows);
    total += m;
  }
  if (total == 0) throw ParameterError("evaluate: empty test set");
  return static_cast<double>(correct) / static_cast<double>(total);
}

ContinualReport run_continual(const TaskStream& stream, const TrainConfig& cfg,
                              const HeadConfig& head_cfg, std::unique_ptr<Head>* final_head) {
  const auto t0 = std::chrono::steady_clock::now();
  stream.validate();
  cfg.validate();

  Rng rng_model(Rng::mix(cfg.seed, 1));
  Rng rng_train(Rng::mix(cfg.seed, 2));

  auto head = make_head(head_cfg, stream.n_feature, rng_model);
  Backbone backbone = cfg.trainable_backbone
                          ? Backbone::make_linear(stream.n_feature, true)
                          : Backbone::make_identity();
  auto optimizer = make_optimizer(cfg.optim);

  ClassMap classes;
  AccuracyMatrix acc;
  const std::size_t steps = stream.tasks.size();

  for (std::size_t t = 0; t < steps; ++t) {
    const TaskData& task = stream.tasks[t];
    std::size_t block_lo = 0, block_hi = 0;
    if (stream.mode == StreamMode::Cil) {
      block_lo = head->num_classes();
      head->expand(task.class_ids.size(), rng_model);
      block_hi = head->num_classes();
      classes.extend(task.class_ids);
    } else {
      if (t == 0) {
        head->expand(task.class_ids.size(), rng_model);
        classes.extend(task.class_ids);
      }
      block_lo = 0;
      block_hi = head->num_classes();
    }

    optimizer->reset();
    train_task(*head, backbone, *optimizer, task, classes, cfg, rng_train, block_lo, block_hi);

    acc.a.emplace_back();
    for (std::size_t k = 0; k <= t; ++k) {
      const TaskData* one[] = {&stream.tasks[k]};
      acc.a.back().push_back(evaluate(*head, backbone, one, classes));
    }
    std::vector<const TaskData*> seen;
    for (std::size_t k = 0; k <= t; ++k) seen.push_back(&stream.tasks[k]);
    acc.seen.push_back(evaluate(*head, backbone, seen, classes));
  }

  ContinualReport report;
  report.seed = cfg.seed;
  report.accuracy = std::move(acc);
  report.metrics = compute_metrics(report.accuracy);
  if (auto* kh = dynamic_cast<const KacHead*>(head.get())) {
    report.activation_map = kh->activation_map();
  }
  report.config_echo = {{"mode", stream_mode_name(stream.mode)},
                        {"stream", stream.gen_config},
                        {"head", head_cfg.resolved_label()},
                        {"optimizer", cfg.optim.kind_name()},
                        {"lr", cfg.optim.lr},
                        {"momentum", cfg.optim.momentum},
                        {"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"mask_to_current_task", cfg.mask_to_current_task},
                        {"trainable_backbone", cfg.trainable_backbone},
                        {"backbone_lr", cfg.backbone_lr},
                        {"seed", cfg.seed}};
  const auto t1 = std::chrono::steady_clock::now();
  report.wall_clock_seconds = std::chrono::duration<double>(t1 - t0).count();
  if (final_head) *final_head = std::move(head);
  return report;
}

}  // namespace kac
