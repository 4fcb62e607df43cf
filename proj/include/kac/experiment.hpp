#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kac/continual.hpp"
#include "kac/datagen.hpp"
#include "kac/peaks.hpp"

namespace kac {

/// Exit-code contract shared by every subcommand: 0 success, 1 runtime or
/// assertion failure, 2 usage/config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// A full sweep description: scenario, stream/train parameters, the head
/// list, and the seed list. Parsed from JSON with explicit defaults; the
/// resolved form is echoed into every output artifact.
struct ExperimentConfig {
  std::string scenario = "cil";  // cil | dil | peaks
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir = "results";
  CilStreamConfig cil;
  DilStreamConfig dil;
  PeaksConfig peaks;
  TrainConfig train;
  std::vector<HeadConfig> heads;

  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;  // resolved config with defaults applied
};

struct SummaryRow {
  std::string scenario;
  std::string head;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  double avg = 0.0;
  double last = 0.0;
};

struct RunResult {
  std::vector<SummaryRow> rows;
  std::vector<std::string> report_files;
};

/// Executes the sweep, writing per-cell reports, checkpoints and the
/// summary CSV under cfg.out_dir. Deterministic: identical configs produce
/// byte-identical report files (wall-clock timings go to a separate
/// sidecar). Returns the summary rows in sweep order.
RunResult run_experiment(const ExperimentConfig& cfg);

// Subcommand entry points used by the CLI binary; all return exit codes
// and report problems on stderr.
int cmd_run(const std::string& config_path);
int cmd_gradcheck(std::uint64_t seed, std::size_t trials, bool corrupt);
int cmd_export_activations(const std::string& checkpoint_path, const std::string& out_csv);
int cmd_params(std::size_t n, std::size_t rbf_count, std::size_t classes);

}  // namespace kac
