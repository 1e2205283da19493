#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segan/models.hpp"

namespace segan {

struct HistoryRow {
  int epoch = 0;
  double mae = 0.0;
  double dice = 0.0;
  double total = 0.0;
  double val_dice = -1.0;  // -1 means not evaluated this epoch
};

// Training-side state embedded in a checkpoint so a run can resume bit-exactly.
struct TrainSnapshot {
  int epoch = 0;
  uint64_t seed = 0;
  std::pair<uint64_t, uint64_t> rng_state{0, 0};
  double best_val_dice = -1.0;
  int best_epoch = -1;
  std::map<std::string, std::vector<float>> acc;  // RMSprop accumulators by parameter path
  std::vector<HistoryRow> history;
};

// Container layout: 8-byte magic, u64 little-endian header length, JSON header with the
// architecture, a parameter table (name -> shape/dtype/offset/length), an optimizer state
// table, and training metadata, followed by raw little-endian float32 blobs.
void save_checkpoint(const std::filesystem::path& file, const ModelPair<float>& pair,
                     const TrainSnapshot* snapshot = nullptr);

struct LoadedCheckpoint {
  ArchConfig arch;
  std::map<std::string, std::vector<float>> params;
  std::optional<TrainSnapshot> snapshot;
};

LoadedCheckpoint read_checkpoint(const std::filesystem::path& file);

// Constructs a pair from the stored arch and fills every parameter from the table.
ModelPair<float> build_from_checkpoint(const LoadedCheckpoint& ck);

// Copies stored values into an existing pair; name set and shapes must match exactly.
void apply_checkpoint(ModelPair<float>& pair, const LoadedCheckpoint& ck);

}  // namespace segan
