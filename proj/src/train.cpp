#include "segan/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "segan/error.hpp"
#include "segan/metrics.hpp"

namespace segan {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be nonnegative");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (crop < 1) throw ConfigError("train: crop must be >= 1");
}

void rmsprop_step(const std::vector<Parameter<float>*>& params, TrainState& state, double lr,
                  double rho, double eps) {
  for (auto* p : params) {
    if (!p->trainable || p->frozen) continue;
    if (!p->tensor.has_grad()) continue;
    auto& acc = state.acc[p->name];
    if (acc.empty()) acc.assign(p->tensor.size(), 0.0f);
    if (acc.size() != size_t(p->tensor.size()))
      throw ShapeError("rmsprop: accumulator for " + p->name + " has wrong size");
    const auto g = p->tensor.grad();
    const auto v = p->tensor.value_mut();
    for (size_t i = 0; i < v.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi))
        throw NumericError("rmsprop: non-finite gradient in " + p->name);
      const double a = rho * double(acc[i]) + (1.0 - rho) * gi * gi;
      acc[i] = float(a);
      v[i] = float(double(v[i]) - lr * gi / std::sqrt(a + eps));
    }
  }
}

EpochLosses train_epoch(ModelPair<float>& pair, const PreparedDataset& data,
                        const TrainConfig& cfg, TrainState& state, const ObjectiveOptions& opts,
                        const BatchObserver* observer) {
  if (data.train.empty()) throw DataError("train_epoch: empty training split");
  int n_slices = 0;
  for (const auto& s : data.train) n_slices += s.channels[0].nz;
  const int batches = batches_per_epoch(n_slices, cfg.batch_size);
  double mae_sum = 0, dice_sum = 0, total_sum = 0;
  for (int b = 0; b < batches; ++b) {
    try {
      auto batch =
          sample_training_batch(data.train, cfg.batch_size, cfg.crop, state.sampler);
      // one live forward per batch: detached for the D step, reused for the S step
      auto pred = pair.seg.forward(batch.images, Mode::Train);

      pair.zero_grad();
      auto d_bd = objective(pair, batch.images, batch.labels, GradFor::Discriminator, opts,
                            &pred);
      rmsprop_step(pair.disc_parameters(), state, cfg.lr, cfg.rmsprop_rho, cfg.rmsprop_eps);
      clip_discriminator(pair);

      pair.zero_grad();
      auto s_bd = objective(pair, batch.images, batch.labels, GradFor::Segmentator, opts,
                            &pred);
      rmsprop_step(pair.seg_parameters(), state, cfg.lr, cfg.rmsprop_rho, cfg.rmsprop_eps);

      mae_sum += s_bd.mae;
      dice_sum += s_bd.dice;
      total_sum += s_bd.total;
      if (observer) (*observer)(b, d_bd, s_bd);
    } catch (const NumericError& e) {
      throw NumericError("batch " + std::to_string(b) + " of " + std::to_string(batches) +
                         ": " + e.what());
    }
  }
  return {mae_sum / batches, dice_sum / batches, total_sum / batches};
}

void write_history_csv(const std::vector<HistoryRow>& history,
                       const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write history " + file.string());
  out << "epoch,mae,dice_loss,total,val_dice\n";
  char buf[160];
  for (const auto& r : history) {
    if (r.val_dice >= 0.0)
      std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.mae, r.dice,
                    r.total, r.val_dice);
    else
      std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,\n", r.epoch, r.mae, r.dice, r.total);
    out << buf;
  }
}

FitResult fit(ModelPair<float>& pair, const PreparedDataset& data, const TrainConfig& cfg,
              const std::filesystem::path& out_dir, const ObjectiveOptions& opts,
              const std::optional<std::filesystem::path>& resume_from,
              const BatchObserver* observer) {
  cfg.validate();
  if (data.train.empty()) throw DataError("fit: empty training split");
  if (data.val.empty()) throw DataError("fit: empty validation split");
  std::filesystem::create_directories(out_dir / "checkpoints");

  TrainState state;
  state.sampler = Rng(cfg.seed, 2);
  if (resume_from) {
    auto ck = read_checkpoint(*resume_from);
    if (!ck.snapshot) throw DataError("resume checkpoint has no training state");
    apply_checkpoint(pair, ck);
    state.epoch = ck.snapshot->epoch;
    state.acc = std::move(ck.snapshot->acc);
    state.best_val_dice = ck.snapshot->best_val_dice;
    state.best_epoch = ck.snapshot->best_epoch;
    state.sampler.set_state(ck.snapshot->rng_state);
    state.history = std::move(ck.snapshot->history);
  }

  const auto best_path = out_dir / "checkpoints" / "best.ckpt";
  const auto last_path = out_dir / "checkpoints" / "last.ckpt";

  auto snapshot_now = [&](int epoch) {
    TrainSnapshot snap;
    snap.epoch = epoch;
    snap.seed = cfg.seed;
    snap.rng_state = state.sampler.state();
    snap.best_val_dice = state.best_val_dice;
    snap.best_epoch = state.best_epoch;
    snap.acc = state.acc;
    snap.history = state.history;
    return snap;
  };

  FitResult res;
  for (int epoch = state.epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
    auto losses = train_epoch(pair, data, cfg, state, opts, observer);
    state.epoch = epoch;
    res.epochs_run += 1;

    HistoryRow row;
    row.epoch = epoch;
    row.mae = losses.mae;
    row.dice = losses.dice;
    row.total = losses.total;
    if (epoch % cfg.eval_every == 0)
      row.val_dice = evaluate_subjects(pair, data.val, cfg.crop).aggregate.dice;
    state.history.push_back(row);

    if (row.val_dice >= 0.0 && row.val_dice > state.best_val_dice) {
      state.best_val_dice = row.val_dice;
      state.best_epoch = epoch;
      auto snap = snapshot_now(epoch);
      save_checkpoint(best_path, pair, &snap);
    }
    auto snap = snapshot_now(epoch);
    save_checkpoint(last_path, pair, &snap);
    write_history_csv(state.history, out_dir / "history.csv");

    if (state.best_epoch >= 0 && epoch - state.best_epoch >= cfg.patience) break;
  }

  // degenerate schedule where no evaluation ever ran: fall back to the final weights
  if (state.best_epoch < 0) {
    auto snap = snapshot_now(state.epoch);
    save_checkpoint(best_path, pair, &snap);
  }

  res.best_checkpoint = best_path;
  res.last_checkpoint = last_path;
  res.best_val_dice = state.best_val_dice;
  res.best_epoch = state.best_epoch;
  res.history = state.history;
  return res;
}

}  // namespace segan
