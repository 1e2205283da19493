#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segan/data.hpp"
#include "segan/losses.hpp"
#include "segan/models.hpp"
#include "segan/train.hpp"

namespace segan {

struct DataConfig {
  std::string manifest;
  bool all_modalities = false;
  std::vector<Modality> modalities;  // resolved channel order; size 4 for ALL, else 1
  std::optional<std::array<int, 3>> volume_crop;
};

// One JSON document describing an experiment arm: architecture, training
// hyperparameters, dataset selection, loss flags, output directory.
struct ExperimentConfig {
  ArchConfig arch;  // in_channels derived from the modality selection
  TrainConfig train;
  DataConfig data;
  ObjectiveOptions loss;
  std::string out_dir;
};

// Strict parse: unknown keys and malformed values raise ConfigError naming the key.
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

// Loads the manifest named by the config and prepares its subjects.
PreparedDataset prepare_from_config(const ExperimentConfig& cfg,
                                    const std::filesystem::path& config_dir);

}  // namespace segan
