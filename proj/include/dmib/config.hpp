#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmib/data.hpp"
#include "dmib/trainer.hpp"

namespace dmib {

// One experiment = one declarative JSON document. Parsing is strict — any
// unknown key anywhere fails before computation starts — and the fully
// resolved document (defaults materialized, overrides recorded) is what the
// commands echo into their output directory.
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::vector<std::string> overrides;  // key=value expressions, in apply order

  // Data source: real tables, or a synthetic spec (exactly one).
  std::vector<std::string> modality_paths;
  std::string labels_path;
  bool use_synthetic = false;
  SyntheticSpec synthetic;
  bool has_noise = false;
  NoiseSpec noise;
  std::uint64_t noise_seed = 0;  // defaults to the run seed
  bool write_cache = false;

  TrainConfig train;  // carries model architecture + protocol; seed mirrors the top level

  // Reads the file (empty path = all defaults), applies key=value overrides
  // (values parsed as JSON when possible, strings otherwise), then parses
  // strictly.
  static ExperimentConfig load(const std::string& path,
                               const std::vector<std::string>& override_exprs);
  static ExperimentConfig from_json(const nlohmann::json& root);

  nlohmann::json to_json() const;  // fully resolved, re-parseable
  void validate() const;

  // Builds the dataset this config describes: loads or generates, then
  // applies the configured noise injection.
  MultimodalDataset build_dataset() const;
};

}  // namespace dmib
