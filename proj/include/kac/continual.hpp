#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kac/backbone.hpp"
#include "kac/heads.hpp"
#include "kac/matrix.hpp"
#include "kac/optim.hpp"

namespace kac {

enum class StreamMode { Cil, Dil };

std::string stream_mode_name(StreamMode m);

/// One task: train/test features (rows = samples) with integer class labels.
struct TaskData {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
  std::vector<int> class_ids;  // classes this task introduces (CIL) or covers (DIL)
};

/// Ordered task sequence. CIL: class_ids disjoint across tasks. DIL: the
/// same class_ids in every task, with the input distribution shifting.
struct TaskStream {
  StreamMode mode = StreamMode::Cil;
  std::size_t n_feature = 0;
  std::uint64_t seed = 0;
  std::vector<TaskData> tasks;
  nlohmann::json gen_config;  // generator parameters, echoed into manifests

  void validate() const;
};

/// Global class id <-> head row bookkeeping, grown as tasks arrive.
struct ClassMap {
  std::vector<int> row_to_class;

  void extend(std::span<const int> class_ids);
  int row_of(int class_id) const;  // -1 when unseen
  std::size_t size() const { return row_to_class.size(); }
};

struct TrainConfig {
  OptimConfig optim;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  bool mask_to_current_task = false;
  bool trainable_backbone = false;
  double backbone_lr = 0.0;  // 0 -> optim.lr
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainStats {
  std::vector<std::vector<double>> epoch_batch_losses;  // [epoch][batch]
};

/// Per-step accuracies: a[t][k] = accuracy on task k's test set after step
/// t (k <= t), seen[t] = pooled accuracy over all test sets seen by step t.
struct AccuracyMatrix {
  std::vector<std::vector<double>> a;
  std::vector<double> seen;
};

struct ContinualMetrics {
  double average_incremental = 0.0;  // mean over steps of seen[t]
  double last = 0.0;                 // seen.back()
  std::vector<double> forgetting;    // empty when fewer than 2 steps
};

/// f[k] = max_{t >= k} a[t][k] - a[T-1][k]; requires at least two steps.
std::vector<double> forgetting(const AccuracyMatrix& m);

ContinualMetrics compute_metrics(const AccuracyMatrix& m);

struct ContinualReport {
  nlohmann::json config_echo;
  std::uint64_t seed = 0;
  AccuracyMatrix accuracy;
  ContinualMetrics metrics;
  std::optional<Matrix> activation_map;  // bump head only
  double wall_clock_seconds = 0.0;       // volatile; kept out of report files

  /// Deterministic JSON document (excludes wall-clock).
  nlohmann::json to_json() const;
  /// rows = step, cols = task, empty cells for k > t.
  std::string accuracy_csv() const;
};

/// One task's worth of mini-batch training. The head must already cover
/// every label in the task; labels are mapped to head rows through
/// `classes`. Gradients flow into the backbone only when cfg enables it.
void train_task(Head& head, Backbone& backbone, Optimizer& optimizer, const TaskData& task,
                const ClassMap& classes, const TrainConfig& cfg, Rng& rng,
                std::size_t current_block_lo, std::size_t current_block_hi,
                TrainStats* stats = nullptr);

/// Pooled accuracy over the given test sets (sample-weighted).
double evaluate(const Head& head, const Backbone& backbone,
                std::span<const TaskData* const> test_tasks, const ClassMap& classes);

/// Full incremental protocol: expand -> train -> evaluate per step;
/// deterministic for a fixed (stream, cfg, head_cfg). When `final_head`
/// is nonnull it receives the trained head (for checkpointing).
ContinualReport run_continual(const TaskStream& stream, const TrainConfig& cfg,
                              const HeadConfig& head_cfg,
                              std::unique_ptr<Head>* final_head = nullptr);

}  // namespace kac
