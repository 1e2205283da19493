#include "segan/transfer.hpp"

#include "segan/error.hpp"

namespace segan {

std::string to_string(TransferRegime r) { return r == TransferRegime::SD ? "SD" : "SDin"; }

TransferRegime parse_regime(const std::string& s) {
  if (s == "SD") return TransferRegime::SD;
  if (s == "SDin") return TransferRegime::SDin;
  throw ConfigError("unknown transfer regime '" + s + "'");
}

FreezeMask build_freeze_mask(const ModelPair<float>& pair, TransferRegime regime) {
  FreezeMask mask;
  mask.regime = regime;
  if (regime == TransferRegime::SD) return mask;
  auto& mut = const_cast<ModelPair<float>&>(pair);
  for (auto* p : mut.disc_parameters())
    if (p->name.rfind("D/enc", 0) == 0) mask.frozen.insert(p->name);
  return mask;
}

void apply_freeze_mask(ModelPair<float>& pair, const FreezeMask& mask) {
  for (auto* p : pair.parameters()) p->frozen = mask.frozen.count(p->name) > 0;
}

TransferResult fine_tune(const std::filesystem::path& source_checkpoint,
                         const PreparedDataset& target, TransferRegime regime,
                         const TrainConfig& cfg, const ObjectiveOptions& loss_opts,
                         const std::filesystem::path& out_dir, const TransferOptions& topts) {
  auto ck = read_checkpoint(source_checkpoint);
  if (ck.arch.in_channels != int(target.modalities.size()))
    throw ConfigError("fine_tune: checkpoint expects " +
                      std::to_string(ck.arch.in_channels) + " input channels but target has " +
                      std::to_string(target.modalities.size()));
  auto pair = build_from_checkpoint(ck);
  TransferResult res;
  res.mask = build_freeze_mask(pair, regime);
  apply_freeze_mask(pair, res.mask);

  std::optional<std::filesystem::path> resume;
  if (!topts.reset_optimizer && ck.snapshot) {
    // reuse the resume path to seed the optimizer: a snapshot at epoch 0 with the source
    // accumulators and a fresh sampler
    TrainSnapshot snap;
    snap.epoch = 0;
    snap.seed = cfg.seed;
    snap.rng_state = Rng(cfg.seed, 2).state();
    snap.acc = ck.snapshot->acc;
    std::filesystem::create_directories(out_dir / "checkpoints");
    const auto warm = out_dir / "checkpoints" / "warmstart.ckpt";
    save_checkpoint(warm, pair, &snap);
    resume = warm;
  }

  res.fit = fit(pair, target, cfg, out_dir, loss_opts, resume);

  auto best = build_from_checkpoint(read_checkpoint(res.fit.best_checkpoint));
  res.target_metrics = evaluate_subjects(best, target.val, cfg.crop);
  res.target_metrics.checkpoint_id = res.fit.best_checkpoint.string();
  res.target_metrics.modalities = target.modalities;
  return res;
}

}  // namespace segan
