#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kac/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Kolmogorov-Arnold classifier experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "execute a sweep described by a JSON config");
  run->add_option("config", config_path, "path to config.json")->required();

  std::uint64_t gc_seed = 0;
  std::size_t gc_trials = 10;
  bool gc_corrupt = false;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference verification of every head kind");
  gradcheck->add_option("--seed", gc_seed, "base seed (default 0)");
  gradcheck->add_option("--trials", gc_trials, "random configs per head kind (default 10)");
  gradcheck->add_flag("--corrupt", gc_corrupt,
                      "inject a deliberate gradient error (negative control)");

  std::string ckpt_path, out_csv;
  auto* exporter = app.add_subcommand("export-activations",
                                      "write per-class per-channel interest scores as CSV");
  exporter->add_option("checkpoint", ckpt_path, "head checkpoint JSON")->required();
  exporter->add_option("out", out_csv, "output CSV path")->required();

  std::size_t pc_n = 768, pc_rbf = 4, pc_classes = 100;
  auto* params = app.add_subcommand("params", "weight-count report for the bump head");
  params->add_option("--n", pc_n, "embedding dimension (default 768)");
  params->add_option("--rbf", pc_rbf, "basis functions per channel (default 4)");
  params->add_option("--classes", pc_classes, "number of classes (default 100)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kac::kExitUsage;
  }

  if (run->parsed()) return kac::cmd_run(config_path);
  if (gradcheck->parsed()) return kac::cmd_gradcheck(gc_seed, gc_trials, gc_corrupt);
  if (exporter->parsed()) return kac::cmd_export_activations(ckpt_path, out_csv);
  if (params->parsed()) return kac::cmd_params(pc_n, pc_rbf, pc_classes);
  std::cerr << "no subcommand\n";
  return kac::kExitUsage;
}
