#include "segan/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "segan/error.hpp"
#include "json.hpp"

namespace segan {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'E', 'G', 'A', 'N', 'C', 'K', 'P'};
constexpr int kFormatVersion = 1;

json arch_to_json(const ArchConfig& a) {
  json j;
  j["input_size"] = a.input_size;
  j["in_channels"] = a.in_channels;
  j["depth"] = a.depth;
  j["base_filters"] = a.base_filters;
  j["skip_connections"] = a.skip_connections;
  j["combine_mode"] = to_string(a.combine_mode);
  return j;
}

ArchConfig arch_from_json(const json& j, const std::string& where) {
  ArchConfig a;
  try {
    a.input_size = j.at("input_size").get<int>();
    a.in_channels = j.at("in_channels").get<int>();
    a.depth = j.at("depth").get<int>();
    a.base_filters = j.at("base_filters").get<int>();
    a.skip_connections = j.at("skip_connections").get<bool>();
    a.combine_mode = parse_combine_mode(j.at("combine_mode").get<std::string>());
  } catch (const json::exception& e) {
    throw DataError(where + ": bad arch header: " + e.what());
  }
  return a;
}

json history_to_json(const std::vector<HistoryRow>& h) {
  json arr = json::array();
  for (const auto& r : h) arr.push_back({r.epoch, r.mae, r.dice, r.total, r.val_dice});
  return arr;
}

std::vector<HistoryRow> history_from_json(const json& arr) {
  std::vector<HistoryRow> h;
  for (const auto& r : arr) {
    HistoryRow row;
    row.epoch = r.at(0).get<int>();
    row.mae = r.at(1).get<double>();
    row.dice = r.at(2).get<double>();
    row.total = r.at(3).get<double>();
    row.val_dice = r.at(4).get<double>();
    h.push_back(row);
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const ModelPair<float>& pair,
                     const TrainSnapshot* snapshot) {
  auto& mut = const_cast<ModelPair<float>&>(pair);
  std::vector<const Parameter<float>*> params;
  for (auto* p : mut.parameters()) params.push_back(p);

  json header;
  header["format_version"] = kFormatVersion;
  header["arch"] = arch_to_json(pair.arch);

  uint64_t offset = 0;
  json table = json::object();
  for (const auto* p : params) {
    const uint64_t bytes = uint64_t(p->tensor.size()) * sizeof(float);
    json e;
    e["shape"] = p->tensor.shape();
    e["dtype"] = "float32";
    e["offset"] = offset;
    e["length"] = bytes;
    table[p->name] = e;
    offset += bytes;
  }
  header["params"] = table;

  json opt = json::object();
  if (snapshot) {
    for (const auto& [name, values] : snapshot->acc) {
      const uint64_t bytes = uint64_t(values.size()) * sizeof(float);
      json e;
      e["dtype"] = "float32";
      e["offset"] = offset;
      e["length"] = bytes;
      opt[name] = e;
      offset += bytes;
    }
    header["epoch"] = snapshot->epoch;
    header["seed"] = snapshot->seed;
    header["rng_state"] = {std::to_string(snapshot->rng_state.first),
                           std::to_string(snapshot->rng_state.second)};
    header["best_val_dice"] = snapshot->best_val_dice;
    header["best_epoch"] = snapshot->best_epoch;
    header["history"] = history_to_json(snapshot->history);
  }
  header["opt_state"] = opt;

  const std::string htext = header.dump();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + file.string());
  out.write(kMagic, sizeof kMagic);
  const uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  out.write(htext.data(), std::streamsize(htext.size()));
  for (const auto* p : params)
    out.write(reinterpret_cast<const char*>(p->tensor.value().data()),
              std::streamsize(p->tensor.size() * sizeof(float)));
  if (snapshot)
    for (const auto& [name, values] : snapshot->acc)
      out.write(reinterpret_cast<const char*>(values.data()),
                std::streamsize(values.size() * sizeof(float)));
  if (!out) throw DataError("short write to checkpoint " + file.string());
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError("checkpoint " + file.string() + ": bad magic");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  if (!in || hlen == 0 || hlen > (64u << 20))
    throw DataError("checkpoint " + file.string() + ": bad header length");
  std::string htext(hlen, '\0');
  in.read(htext.data(), std::streamsize(hlen));
  if (!in) throw DataError("checkpoint " + file.string() + ": truncated header");
  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + file.string() + ": header parse: " + e.what());
  }
  const std::string where = "checkpoint " + file.string();
  if (header.at("format_version").get<int>() != kFormatVersion)
    throw DataError(where + ": unsupported format_version");

  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto read_block = [&](const json& e, const std::string& name) {
    const uint64_t off = e.at("offset").get<uint64_t>();
    const uint64_t len = e.at("length").get<uint64_t>();
    if (e.at("dtype").get<std::string>() != "float32")
      throw DataError(where + ": parameter " + name + ": unsupported dtype");
    if (off + len > blob.size() || len % sizeof(float) != 0)
      throw DataError(where + ": parameter " + name + ": blob out of range");
    std::vector<float> values(len / sizeof(float));
    std::memcpy(values.data(), blob.data() + off, len);
    return values;
  };

  LoadedCheckpoint ck;
  ck.arch = arch_from_json(header.at("arch"), where);
  for (const auto& [name, e] : header.at("params").items()) {
    auto values = read_block(e, name);
    const auto shape = e.at("shape").get<Shape>();
    if (size_t(numel(shape)) != values.size())
      throw DataError(where + ": parameter " + name + ": shape/length mismatch");
    ck.params[name] = std::move(values);
  }
  if (header.contains("epoch")) {
    TrainSnapshot snap;
    snap.epoch = header.at("epoch").get<int>();
    snap.seed = header.at("seed").get<uint64_t>();
    const auto& rs = header.at("rng_state");
    snap.rng_state = {std::stoull(rs.at(0).get<std::string>()),
                      std::stoull(rs.at(1).get<std::string>())};
    snap.best_val_dice = header.at("best_val_dice").get<double>();
    snap.best_epoch = header.at("best_epoch").get<int>();
    snap.history = history_from_json(header.at("history"));
    for (const auto& [name, e] : header.at("opt_state").items())
      snap.acc[name] = read_block(e, name);
    ck.snapshot = std::move(snap);
  }
  return ck;
}

ModelPair<float> build_from_checkpoint(const LoadedCheckpoint& ck) {
  Rng rng(0);
  auto pair = ModelPair<float>::build(ck.arch, rng);
  apply_checkpoint(pair, ck);
  return pair;
}

void apply_checkpoint(ModelPair<float>& pair, const LoadedCheckpoint& ck) {
  auto params = pair.parameters();
  if (params.size() != ck.params.size())
    throw DataError("checkpoint has " + std::to_string(ck.params.size()) +
                    " parameters, model has " + std::to_string(params.size()));
  for (auto* p : params) {
    auto it = ck.params.find(p->name);
    if (it == ck.params.end()) throw DataError("checkpoint missing parameter " + p->name);
    if (it->second.size() != size_t(p->tensor.size()))
      throw ShapeError("checkpoint parameter " + p->name + " has " +
                       std::to_string(it->second.size()) + " values, model expects " +
                       std::to_string(p->tensor.size()));
    std::copy(it->second.begin(), it->second.end(), p->tensor.value_mut().begin());
  }
}

}  // namespace segan
