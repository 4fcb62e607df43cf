#pragma once

#include <cstdint>
#include <string>

#include "kac/continual.hpp"

namespace kac {

/// Synthetic class-incremental stream: labeled Gaussian clusters in a
/// latent space, pushed through a frozen random projection that stands in
/// for a pre-trained backbone.
struct CilStreamConfig {
  std::size_t num_tasks = 5;
  std::size_t classes_per_task = 4;
  std::size_t d_latent = 8;
  std::size_t n_feature = 32;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;
  double cluster_sigma = 1.0;
  double mean_radius = 6.0;
  double separation_factor = 3.0;  // min pairwise mean distance, in cluster sigmas
  std::size_t max_resample = 100;

  nlohmann::json to_json() const;
};

TaskStream make_cil_stream(const CilStreamConfig& cfg, std::uint64_t seed);

/// Domain-incremental variant: one latent sample set shared by all
/// domains, each domain adding its own seeded latent shift before the
/// same frozen projection. A zero shift scale makes every domain
/// identical by construction.
struct DilStreamConfig {
  std::size_t num_domains = 6;
  std::size_t num_classes = 10;
  std::size_t d_latent = 8;
  std::size_t n_feature = 32;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;
  double cluster_sigma = 1.0;
  double mean_radius = 6.0;
  double separation_factor = 3.0;
  double domain_shift = 2.0;  // latent-space norm of each domain's shift
  std::size_t max_resample = 100;

  nlohmann::json to_json() const;
};

TaskStream make_dil_stream(const DilStreamConfig& cfg, std::uint64_t seed);

/// Directory layout: manifest.json + task<k>_train.csv / task<k>_test.csv,
/// one row per sample (n_feature values then the label), doubles printed
/// with round-trip precision. Re-export of an imported stream reproduces
/// the files byte for byte.
void export_stream(const TaskStream& stream, const std::string& dir);
TaskStream import_stream(const std::string& dir);

}  // namespace kac
