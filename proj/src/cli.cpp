#include "segan/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "segan/checkpoint.hpp"
#include "segan/error.hpp"
#include "segan/experiment.hpp"
#include "segan/gradsuite.hpp"
#include "segan/metrics.hpp"
#include "segan/train.hpp"
#include "segan/transfer.hpp"

namespace segan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* c = cmd->add_option("--config", args.config, "experiment config JSON");
  if (config_required) c->required();
  cmd->add_option("--seed", args.seed, "override the config's seed");
  cmd->add_option("--out", args.out, "output directory (overrides config)");
}

// Loads the config, applies flag overrides, and mirrors the config file verbatim into
// the output directory for reproducibility.
ExperimentConfig setup_run(const CommonArgs& args, fs::path& out_dir) {
  auto cfg = load_experiment_config(args.config);
  if (args.seed) cfg.train.seed = *args.seed;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (cfg.out_dir.empty())
    throw ConfigError("no output directory: set out_dir in the config or pass --out");
  out_dir = cfg.out_dir;
  fs::create_directories(out_dir);
  fs::copy_file(args.config, out_dir / "config.json", fs::copy_options::overwrite_existing);
  return cfg;
}

int cmd_synth(int subjects, const std::string& size_str, uint64_t seed,
              const std::string& out) {
  int sx, sy, sz;
  if (std::sscanf(size_str.c_str(), "%dx%dx%d", &sx, &sy, &sz) != 3)
    throw ConfigError("--size must look like 96x96x32");
  auto manifest = generate_phantom_dataset(subjects, {sx, sy, sz}, seed, out);
  std::printf("synth: %d subjects of %dx%dx%d (seed %llu) -> %s\n", subjects, sx, sy, sz,
              (unsigned long long)seed, (fs::path(out) / "manifest.json").c_str());
  return 0;
}

int cmd_split(const std::string& manifest_path, double frac, uint64_t seed,
              bool by_institution) {
  auto manifest = load_manifest(manifest_path);
  stratified_split(manifest, frac, seed, by_institution);
  save_manifest(manifest, manifest_path);
  int tr = 0, va = 0;
  for (const auto& r : manifest.records) (r.split == Split::Train ? tr : va) += 1;
  std::printf("split: %d train / %d val (frac %.2f, seed %llu%s) -> %s\n", tr, va, frac,
              (unsigned long long)seed, by_institution ? ", by institution" : "",
              manifest_path.c_str());
  return 0;
}

int cmd_train(const CommonArgs& args) {
  fs::path out_dir;
  auto cfg = setup_run(args, out_dir);
  auto data = prepare_from_config(cfg, fs::path(args.config).parent_path());
  Rng init(cfg.train.seed, 1);
  auto pair = ModelPair<float>::build(cfg.arch, init);
  auto res = fit(pair, data, cfg.train, out_dir, cfg.loss);
  std::printf("train: best val dice %.4f at epoch %d (%d epochs run) -> %s\n",
              res.best_val_dice, res.best_epoch, res.epochs_run,
              res.best_checkpoint.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint, bool on_train) {
  fs::path out_dir;
  auto cfg = setup_run(args, out_dir);
  auto data = prepare_from_config(cfg, fs::path(args.config).parent_path());
  auto pair = build_from_checkpoint(read_checkpoint(checkpoint));
  if (pair.arch.in_channels != int(cfg.data.modalities.size()))
    throw ConfigError("eval: checkpoint expects " + std::to_string(pair.arch.in_channels) +
                      " channels, config selects " +
                      std::to_string(cfg.data.modalities.size()));
  const auto& subjects = on_train ? data.train : data.val;
  auto rep = evaluate_subjects(pair, subjects, cfg.train.crop);
  rep.checkpoint_id = checkpoint;
  rep.dataset_id = cfg.data.manifest;
  rep.modalities = cfg.data.modalities;
  fs::create_directories(out_dir / "reports");
  write_metrics_json(rep, out_dir / "reports" / "metrics.json");
  write_metrics_csv(rep, out_dir / "reports" / "metrics.csv");
  std::printf("eval: %zu volumes, mean dice %.4f precision %.4f sensitivity %.4f -> %s\n",
              rep.per_volume.size(), rep.aggregate.dice, rep.aggregate.precision,
              rep.aggregate.sensitivity, (out_dir / "reports" / "metrics.json").c_str());
  return 0;
}

int cmd_crosseval(const CommonArgs& args, const std::vector<std::string>& model_flags) {
  fs::path out_dir;
  auto cfg = setup_run(args, out_dir);
  std::map<Modality, fs::path> models;
  for (const auto& flag : model_flags) {
    const auto eq = flag.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--model expects MODALITY=CHECKPOINT, got '" + flag + "'");
    models[parse_modality(flag.substr(0, eq))] = flag.substr(eq + 1);
  }
  if (models.empty()) throw ConfigError("crosseval: at least one --model required");

  fs::path mpath = cfg.data.manifest;
  if (mpath.is_relative()) mpath = fs::path(args.config).parent_path() / mpath;
  auto manifest = load_manifest(mpath);
  std::map<Modality, std::vector<PreparedSubject>> datasets;
  for (const auto& [mod, ck] : models) {
    (void)ck;
    datasets[mod] = prepare_dataset(manifest, {mod}, cfg.data.volume_crop).val;
  }
  auto grid = cross_modality_matrix(models, datasets, cfg.train.crop);
  fs::create_directories(out_dir / "reports");
  write_grid_csv(grid, out_dir / "reports" / "cross_modality.csv");
  write_grid_plot_json(grid, out_dir / "reports" / "cross_modality_plot.json");
  std::printf("crosseval: %zux%zu grid -> %s\n", grid.dice.size(),
              grid.dice.empty() ? 0 : grid.dice[0].size(),
              (out_dir / "reports" / "cross_modality.csv").c_str());
  return 0;
}

int cmd_transfer(const CommonArgs& args, const std::string& source, const std::string& regime,
                 const std::string& source_modality, std::optional<double> scratch_dice,
                 bool keep_optimizer) {
  fs::path out_dir;
  auto cfg = setup_run(args, out_dir);
  auto data = prepare_from_config(cfg, fs::path(args.config).parent_path());
  TransferOptions topts;
  topts.reset_optimizer = !keep_optimizer;
  auto res = fine_tune(source, data, parse_regime(regime), cfg.train, cfg.loss, out_dir,
                       topts);
  json rep;
  rep["source_modality"] = source_modality;
  rep["target_modality"] =
      cfg.data.all_modalities ? "ALL" : to_string(cfg.data.modalities[0]);
  rep["regime"] = regime;
  rep["epochs_run"] = res.fit.epochs_run;
  rep["best_val_dice"] = res.fit.best_val_dice;
  rep["best_epoch"] = res.fit.best_epoch;
  if (scratch_dice) {
    rep["comparison_to_scratch"] = {{"scratch_dice", *scratch_dice},
                                    {"delta", res.fit.best_val_dice - *scratch_dice}};
  }
  fs::create_directories(out_dir / "reports");
  std::ofstream rf(out_dir / "reports" / "transfer_report.json");
  rf << rep.dump(2) << "\n";
  std::printf("transfer: %s %s->%s best val dice %.4f at epoch %d -> %s\n", regime.c_str(),
              source_modality.c_str(), rep["target_modality"].get<std::string>().c_str(),
              res.fit.best_val_dice, res.fit.best_epoch,
              (out_dir / "reports" / "transfer_report.json").c_str());
  return 0;
}

int cmd_gradcheck(uint64_t seed) {
  auto res = run_gradient_suite(seed);
  for (const auto& c : res.cases)
    std::printf("  %-20s err32 %.3e  err64 %.3e  %s\n", c.op.c_str(), c.err32, c.err64,
                c.pass ? "ok" : "FAIL");
  std::printf("gradcheck: %zu ops, %d shape cases, %.2fs -> %s\n", res.cases.size(),
              res.total_shapes, res.seconds, res.pass ? "pass" : "FAIL");
  return res.pass ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"SegAN-CAT adversarial segmentation pipeline"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a phantom dataset");
  int subjects = 16;
  std::string size_str = "64x64x24";
  uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--subjects", subjects, "number of subjects");
  synth->add_option("--size", size_str, "volume size XxYxZ");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* split = app.add_subcommand("split", "assign stratified train/val splits");
  std::string manifest_path;
  double frac = 0.8;
  uint64_t split_seed = 0;
  bool by_institution = false;
  split->add_option("--manifest", manifest_path, "manifest to update in place")->required();
  split->add_option("--frac", frac, "training fraction");
  split->add_option("--seed", split_seed, "shuffle seed");
  split->add_flag("--by-institution", by_institution, "stratify by grade and institution");

  CommonArgs train_args;
  auto* train = app.add_subcommand("train", "train a model pair");
  add_common(train, train_args);

  CommonArgs eval_args;
  std::string eval_ckpt;
  bool eval_on_train = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_flag("--on-train", eval_on_train, "evaluate the training split instead of val");

  CommonArgs cross_args;
  std::vector<std::string> model_flags;
  auto* cross = app.add_subcommand("crosseval", "cross-modality evaluation grid");
  add_common(cross, cross_args);
  cross->add_option("--model", model_flags, "MODALITY=CHECKPOINT (repeatable)")->required();

  CommonArgs transfer_args;
  std::string source_ckpt, regime = "SDin", source_modality;
  std::optional<double> scratch_dice;
  bool keep_optimizer = false;
  auto* transfer = app.add_subcommand("transfer", "fine-tune on a target modality");
  add_common(transfer, transfer_args);
  transfer->add_option("--source", source_ckpt, "source checkpoint")->required();
  transfer->add_option("--regime", regime, "SD or SDin");
  transfer->add_option("--source-modality", source_modality, "label for the report")
      ->required();
  transfer->add_option("--scratch-dice", scratch_dice,
                       "from-scratch baseline dice for the report");
  transfer->add_flag("--keep-optimizer", keep_optimizer,
                     "carry source RMSprop accumulators into fine-tuning");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  uint64_t gc_seed = 7;
  gradcheck->add_option("--seed", gc_seed, "suite seed");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(subjects, size_str, synth_seed, synth_out);
    if (split->parsed()) return cmd_split(manifest_path, frac, split_seed, by_institution);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args, eval_ckpt, eval_on_train);
    if (cross->parsed()) return cmd_crosseval(cross_args, model_flags);
    if (transfer->parsed())
      return cmd_transfer(transfer_args, source_ckpt, regime, source_modality, scratch_dice,
                          keep_optimizer);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

}  // namespace segan
