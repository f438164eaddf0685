#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ngsplat/dataset.hpp"
#include "ngsplat/field.hpp"
#include "ngsplat/physics.hpp"
#include "ngsplat/train.hpp"

namespace ngs {

/// Everything one reproducible run needs. Defaults mirror the standard
/// hyperparameter set (learning rate 1e-2, full batch, λ=1, densify/merge
/// every 100 epochs, thresholds 2.0 / 2e-4 / 0.9, z-threshold 1e-4).
struct RunConfig {
  std::string dataset_path;
  std::optional<DatasetLayout> layout;
  std::optional<std::vector<double>> mask;  // overrides the dataset mask
  PdeSpec pde = PdeSpec::none();
  TrainConfig train;
  GridInit init;
  double z_threshold = GaussianField::kDefaultZThreshold;
  std::string output_dir = "run";

  void validate() const;
};

/// Parses the JSON config file; schema errors carry the offending key and
/// parse errors the line number. See README for the documented schema.
RunConfig load_run_config(const std::filesystem::path& path);

/// Serializes the effective (defaulted + overridden) config; echoed into
/// the output directory for provenance.
std::string run_config_to_json(const RunConfig& config);

}  // namespace ngs
