#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enl/config.hpp"
#include "enl/hyperparams.hpp"

namespace enl {

// Resolved, validated experiment description.  Everything optional in the
// config file is filled in with its default here, so serializing the
// resolved form and parsing it back is lossless.
struct ExperimentConfig {
  std::string kind;  // theory-table | fig1-autocorr | fig2-variances |
                     // appendix-f-pca | appendix-h-replacement |
                     // appendix-i-sweep | appendix-n-noncommuting |
                     // oracle-check | loss-fluct
  Hyperparams hp = Hyperparams::from_batches(0.1, 0.0, 2);
  // Spectrum spec for commuting ensembles: count eigenvalues log-spaced in
  // [lambda_min, lambda_max], noise variances sigma^2 = noise_scale * lambda.
  long num_directions = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double noise_scale = 1.0;
  long steps = 0;     // 0: per-kind default
  long burn_in = -1;  // -1: use default_burn_in
  long replicas = 1;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  long memory_budget_mb = 512;  // trajectory storage budget; large runs are
                                // simulated in direction blocks under it

  static ExperimentConfig from_config(const Config& cfg);
  Config to_config() const;
  void validate() const;
};

struct RunManifest {
  Config resolved;
  double wall_seconds = 0.0;
  std::vector<std::string> rng_streams;  // "label seed" per derived stream
  std::vector<std::pair<std::string, std::uint64_t>> outputs;  // file, hash

  std::string serialize() const;
  void write(const std::string& path) const;
};

// FNV-1a over the bytes of a CSV body; used for the determinism manifest.
std::uint64_t fnv1a(const std::string& bytes);
std::uint64_t hash_file(const std::string& path);

RunManifest run_experiment(const ExperimentConfig& cfg);

}  // namespace enl
