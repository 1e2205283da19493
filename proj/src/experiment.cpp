#include "segan/experiment.hpp"

#include <fstream>

#include "segan/error.hpp"
#include "json.hpp"

namespace segan {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& section,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* k : known)
      if (key == k) { ok = true; break; }
    if (!ok) throw ConfigError("config: unknown key " + section + key);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for key " + section + key);
  }
}

template <typename T>
T get_required(const json& j, const char* key, const std::string& section) {
  if (!j.contains(key)) throw ConfigError("config: missing key " + section + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for key " + section + key);
  }
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  reject_unknown(j, "", {"arch", "train", "data", "loss", "combine_mode", "out_dir"});

  ExperimentConfig cfg;
  if (j.contains("arch")) {
    const auto& a = j.at("arch");
    reject_unknown(a, "arch.", {"input_size", "depth", "base_filters", "skip_connections"});
    cfg.arch.input_size = get_or(a, "input_size", cfg.arch.input_size, "arch.");
    cfg.arch.depth = get_or(a, "depth", cfg.arch.depth, "arch.");
    cfg.arch.base_filters = get_or(a, "base_filters", cfg.arch.base_filters, "arch.");
    cfg.arch.skip_connections =
        get_or(a, "skip_connections", cfg.arch.skip_connections, "arch.");
  }
  cfg.arch.combine_mode = parse_combine_mode(get_or<std::string>(
      j, "combine_mode", to_string(cfg.arch.combine_mode), ""));

  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t, "train.",
                   {"lr", "batch_size", "crop", "patience", "max_epochs", "seed",
                    "rmsprop_rho", "rmsprop_eps", "eval_every"});
    cfg.train.lr = get_or(t, "lr", cfg.train.lr, "train.");
    cfg.train.batch_size = get_or(t, "batch_size", cfg.train.batch_size, "train.");
    cfg.train.crop = get_or(t, "crop", cfg.train.crop, "train.");
    cfg.train.patience = get_or(t, "patience", cfg.train.patience, "train.");
    cfg.train.max_epochs = get_or(t, "max_epochs", cfg.train.max_epochs, "train.");
    cfg.train.seed = get_or(t, "seed", cfg.train.seed, "train.");
    cfg.train.rmsprop_rho = get_or(t, "rmsprop_rho", cfg.train.rmsprop_rho, "train.");
    cfg.train.rmsprop_eps = get_or(t, "rmsprop_eps", cfg.train.rmsprop_eps, "train.");
    cfg.train.eval_every = get_or(t, "eval_every", cfg.train.eval_every, "train.");
  }

  if (!j.contains("data")) throw ConfigError("config: missing key data");
  const auto& d = j.at("data");
  reject_unknown(d, "data.", {"manifest", "modalities", "volume_crop"});
  cfg.data.manifest = get_required<std::string>(d, "manifest", "data.");
  const auto sel = get_required<std::string>(d, "modalities", "data.");
  if (sel == "ALL") {
    cfg.data.all_modalities = true;
    cfg.data.modalities.assign(kAllModalities.begin(), kAllModalities.end());
  } else {
    cfg.data.modalities = {parse_modality(sel)};
  }
  cfg.arch.in_channels = int(cfg.data.modalities.size());
  if (d.contains("volume_crop")) {
    const auto vc = get_required<std::vector<int>>(d, "volume_crop", "data.");
    if (vc.size() != 3) throw ConfigError("config: data.volume_crop must have 3 entries");
    cfg.data.volume_crop = std::array<int, 3>{vc[0], vc[1], vc[2]};
  }

  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    reject_unknown(l, "loss.", {"dice_term"});
    cfg.loss.dice_term = get_or(l, "dice_term", cfg.loss.dice_term, "loss.");
  }

  cfg.out_dir = get_or<std::string>(j, "out_dir", "", "");
  cfg.arch.validate();
  cfg.train.validate();
  return cfg;
}

PreparedDataset prepare_from_config(const ExperimentConfig& cfg,
                                    const std::filesystem::path& config_dir) {
  std::filesystem::path mpath = cfg.data.manifest;
  if (mpath.is_relative()) mpath = config_dir / mpath;
  auto manifest = load_manifest(mpath);
  return prepare_dataset(manifest, cfg.data.modalities, cfg.data.volume_crop);
}

}  // namespace segan
