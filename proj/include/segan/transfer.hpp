#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "segan/metrics.hpp"
#include "segan/train.hpp"

namespace segan {

// SD adapts every weight of both networks; SDin additionally freezes the whole
// discriminator except its input block.
enum class TransferRegime { SD, SDin };

std::string to_string(TransferRegime r);
TransferRegime parse_regime(const std::string& s);

struct FreezeMask {
  TransferRegime regime = TransferRegime::SD;
  std::set<std::string> frozen;  // parameter paths, including batch-norm stats
};

// SD -> empty; SDin -> every D/enc* parameter. S is never frozen.
FreezeMask build_freeze_mask(const ModelPair<float>& pair, TransferRegime regime);

// Sets Parameter::frozen per the mask (and clears it elsewhere).
void apply_freeze_mask(ModelPair<float>& pair, const FreezeMask& mask);

struct TransferOptions {
  // The source optimizer state is discarded by default; set false to carry it over.
  bool reset_optimizer = true;
};

struct TransferResult {
  FitResult fit;
  MetricsReport target_metrics;  // on the target validation split, best checkpoint
  FreezeMask mask;
};

// Loads the source pair, applies the regime's freeze mask, fine-tunes on the target
// dataset, and evaluates the best checkpoint on the target validation split.
TransferResult fine_tune(const std::filesystem::path& source_checkpoint,
                         const PreparedDataset& target, TransferRegime regime,
                         const TrainConfig& cfg, const ObjectiveOptions& loss_opts,
                         const std::filesystem::path& out_dir,
                         const TransferOptions& topts = {});

}  // namespace segan
