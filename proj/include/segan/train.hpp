#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segan/checkpoint.hpp"
#include "segan/data.hpp"
#include "segan/losses.hpp"
#include "segan/models.hpp"

namespace segan {

struct TrainConfig {
  double lr = 2e-5;
  int batch_size = 64;
  int crop = 160;
  int patience = 300;  // epochs without validation dice improvement
  int max_epochs = 100;
  uint64_t seed = 0;
  double rmsprop_rho = 0.9;
  double rmsprop_eps = 1e-8;
  int eval_every = 1;

  void validate() const;
};

struct TrainState {
  int epoch = 0;
  std::map<std::string, std::vector<float>> acc;  // RMSprop accumulators by parameter path
  double best_val_dice = -1.0;
  int best_epoch = -1;
  Rng sampler{0, 2};
  std::vector<HistoryRow> history;
};

// acc <- rho*acc + (1-rho)*g^2; p <- p - lr*g/sqrt(acc+eps). Skips non-trainable and
// frozen parameters entirely (no accumulator touch) and parameters without gradients.
void rmsprop_step(const std::vector<Parameter<float>*>& params, TrainState& state, double lr,
                  double rho, double eps);

struct EpochLosses {
  double mae = 0.0;
  double dice = 0.0;
  double total = 0.0;
};

// Called after each batch's D and S steps with the step breakdowns.
using BatchObserver =
    std::function<void(int batch_index, const LossBreakdown<float>& d_step,
                       const LossBreakdown<float>& s_step)>;

// One pass of ceil(n_slices/batch) batches; per batch a discriminator step (ascend the
// adversarial term, then clip), then a segmentator step on the same forward output.
// Returns the mean segmentator-step losses.
EpochLosses train_epoch(ModelPair<float>& pair, const PreparedDataset& data,
                        const TrainConfig& cfg, TrainState& state,
                        const ObjectiveOptions& opts = {},
                        const BatchObserver* observer = nullptr);

struct FitResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  double best_val_dice = -1.0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::vector<HistoryRow> history;
};

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& file);

// Trains with early stopping on mean per-volume validation dice; keeps best.ckpt (highest
// dice) and last.ckpt plus history.csv under out_dir. Resuming restores parameters,
// optimizer state, sampler state, and history from a snapshot checkpoint.
FitResult fit(ModelPair<float>& pair, const PreparedDataset& data, const TrainConfig& cfg,
              const std::filesystem::path& out_dir, const ObjectiveOptions& opts = {},
              const std::optional<std::filesystem::path>& resume_from = std::nullopt,
              const BatchObserver* observer = nullptr);

}  // namespace segan
