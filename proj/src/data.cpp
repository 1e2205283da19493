#include "segan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "segan/error.hpp"
#include "json.hpp"

namespace segan {

using nlohmann::json;

std::string to_string(Modality m) {
  switch (m) {
    case Modality::T1: return "T1";
    case Modality::T1c: return "T1c";
    case Modality::T2: return "T2";
    case Modality::FLAIR: return "FLAIR";
  }
  return "?";
}

std::string to_string(Grade g) { return g == Grade::HGG ? "HGG" : "LGG"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::None: return "none";
    case Split::Train: return "train";
    case Split::Val: return "val";
  }
  return "?";
}

Modality parse_modality(const std::string& s) {
  for (Modality m : kAllModalities)
    if (s == to_string(m)) return m;
  throw ConfigError("unknown modality '" + s + "'");
}

Grade parse_grade(const std::string& s) {
  if (s == "HGG") return Grade::HGG;
  if (s == "LGG") return Grade::LGG;
  throw ConfigError("unknown grade '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "none") return Split::None;
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  throw ConfigError("unknown split '" + s + "'");
}

namespace {

// Returns a reference into j; j must outlive the result.
const json& require_key(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw DataError(where + ": missing key '" + key + "'");
  return j.at(key);
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest " + file.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.base_dir = file.parent_path();
  const std::string where = "manifest " + file.string();
  const int version = require_key(j, "format_version", where).get<int>();
  if (version != 1) throw DataError(where + ": unsupported format_version " + std::to_string(version));
  for (const auto& rj : require_key(j, "records", where)) {
    ManifestRecord rec;
    rec.subject_id = require_key(rj, "subject_id", where).get<std::string>();
    const std::string rwhere = where + " subject " + rec.subject_id;
    rec.grade = parse_grade(require_key(rj, "grade", rwhere).get<std::string>());
    rec.institution = require_key(rj, "institution", rwhere).get<std::string>();
    for (const auto& [name, path] : require_key(rj, "modalities", rwhere).items())
      rec.modality_paths[parse_modality(name)] = path.get<std::string>();
    rec.label_path = require_key(rj, "label", rwhere).get<std::string>();
    auto shape = require_key(rj, "shape", rwhere);
    if (!shape.is_array() || shape.size() != 3) throw DataError(rwhere + ": shape must have 3 entries");
    for (int a = 0; a < 3; ++a) rec.shape[a] = shape[a].get<int>();
    const auto dtype = require_key(rj, "dtype", rwhere).get<std::string>();
    if (dtype != "float32") throw DataError(rwhere + ": unsupported dtype '" + dtype + "'");
    if (rj.contains("split")) rec.split = parse_split(rj.at("split").get<std::string>());
    m.records.push_back(std::move(rec));
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& file) {
  json j;
  j["format_version"] = 1;
  j["records"] = json::array();
  for (const auto& rec : m.records) {
    json rj;
    rj["subject_id"] = rec.subject_id;
    rj["grade"] = to_string(rec.grade);
    rj["institution"] = rec.institution;
    json mods;
    for (const auto& [mod, path] : rec.modality_paths) mods[to_string(mod)] = path;
    rj["modalities"] = mods;
    rj["label"] = rec.label_path;
    rj["shape"] = {rec.shape[0], rec.shape[1], rec.shape[2]};
    rj["dtype"] = "float32";
    if (rec.split != Split::None) rj["split"] = to_string(rec.split);
    j["records"].push_back(std::move(rj));
  }
  std::ofstream out(file);
  if (!out) throw DataError("cannot write manifest " + file.string());
  out << j.dump(2) << "\n";
}

Volume load_raw_volume(const std::filesystem::path& file, int nx, int ny, int nz) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open volume " + file.string());
  Volume vol(nx, ny, nz);
  const std::streamsize want = std::streamsize(vol.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(vol.v.data()), want);
  if (in.gcount() != want)
    throw DataError("volume " + file.string() + ": expected " + std::to_string(want) +
                    " bytes, got " + std::to_string(in.gcount()));
  char extra;
  if (in.read(&extra, 1))
    throw DataError("volume " + file.string() + ": file larger than declared shape");
  for (float x : vol.v)
    if (!std::isfinite(x)) throw DataError("volume " + file.string() + ": non-finite voxel");
  return vol;
}

void save_raw_volume(const Volume& vol, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write volume " + file.string());
  out.write(reinterpret_cast<const char*>(vol.v.data()),
            std::streamsize(vol.size() * sizeof(float)));
}

VolumeRecord load_volume_record(const DatasetManifest& m, const ManifestRecord& rec) {
  VolumeRecord out;
  out.subject_id = rec.subject_id;
  out.grade = rec.grade;
  out.institution = rec.institution;
  for (const auto& [mod, rel] : rec.modality_paths)
    out.modalities[mod] = load_raw_volume(m.base_dir / rel, rec.shape[0], rec.shape[1], rec.shape[2]);
  out.label = load_raw_volume(m.base_dir / rec.label_path, rec.shape[0], rec.shape[1], rec.shape[2]);
  return out;
}

Volume center_crop_volume(const Volume& vol, int tx, int ty, int tz) {
  if (tx > vol.nx || ty > vol.ny || tz > vol.nz)
    throw ShapeError("crop " + std::to_string(tx) + "x" + std::to_string(ty) + "x" +
                     std::to_string(tz) + " exceeds volume " + std::to_string(vol.nx) + "x" +
                     std::to_string(vol.ny) + "x" + std::to_string(vol.nz));
  if (tx <= 0 || ty <= 0 || tz <= 0) throw ShapeError("crop size must be positive");
  const int x0 = (vol.nx - tx) / 2, y0 = (vol.ny - ty) / 2, z0 = (vol.nz - tz) / 2;
  Volume out(tx, ty, tz);
  for (int x = 0; x < tx; ++x)
    for (int y = 0; y < ty; ++y) {
      const float* src = &vol.v[vol.idx(x0 + x, y0 + y, z0)];
      std::copy(src, src + tz, &out.v[out.idx(x, y, 0)]);
    }
  return out;
}

namespace {

double percentile_sorted(const std::vector<float>& sorted, double pct) {
  const size_t n = sorted.size();
  const double rank = pct / 100.0 * double(n - 1);
  const size_t lo = size_t(std::floor(rank));
  const size_t hi = std::min(lo + 1, n - 1);
  const double frac = rank - double(lo);
  return double(sorted[lo]) * (1.0 - frac) + double(sorted[hi]) * frac;
}

}  // namespace

Volume percentile_clip(Volume vol, double lo_pct, double hi_pct) {
  if (vol.v.empty()) throw ShapeError("percentile_clip on empty volume");
  std::vector<float> sorted = vol.v;
  std::sort(sorted.begin(), sorted.end());
  const float lo = float(percentile_sorted(sorted, lo_pct));
  const float hi = float(percentile_sorted(sorted, hi_pct));
  for (float& x : vol.v) x = std::clamp(x, lo, hi);
  return vol;
}

Volume feature_scale(Volume vol) {
  if (vol.v.empty()) throw ShapeError("feature_scale on empty volume");
  auto [mn_it, mx_it] = std::minmax_element(vol.v.begin(), vol.v.end());
  const float mn = *mn_it, mx = *mx_it;
  if (mx == mn) {
    std::fill(vol.v.begin(), vol.v.end(), 0.0f);
    return vol;
  }
  // per-voxel division keeps results in [0,1] exactly (monotone rounding)
  const float den = mx - mn;
  for (float& x : vol.v) x = (x - mn) / den;
  return vol;
}

Volume relabel_binary(const Volume& vol) {
  Volume out(vol.nx, vol.ny, vol.nz);
  for (size_t i = 0; i < vol.v.size(); ++i) {
    const float x = vol.v[i];
    if (x == 0.0f) {
      out.v[i] = 0.0f;
    } else if (x == 1.0f || x == 2.0f || x == 3.0f || x == 4.0f) {
      out.v[i] = 1.0f;
    } else {
      throw DataError("label voxel " + std::to_string(i) + " has unknown code " +
                      std::to_string(x));
    }
  }
  return out;
}

void stratified_split(DatasetManifest& m, double train_frac, uint64_t seed, bool by_institution) {
  if (train_frac < 0.0 || train_frac > 1.0) throw ConfigError("train_frac must be in [0, 1]");
  if (m.records.empty()) throw DataError("stratified_split: manifest has no subjects");
  // strata keyed by grade (and institution when requested), visited in sorted key order
  std::map<std::string, std::vector<int>> strata;
  for (int i = 0; i < int(m.records.size()); ++i) {
    std::string key = to_string(m.records[i].grade);
    if (by_institution) key += "/" + m.records[i].institution;
    strata[key].push_back(i);
  }
  Rng rng(seed, 17);
  for (auto& [key, members] : strata) {
    for (int i = int(members.size()) - 1; i > 0; --i)
      std::swap(members[i], members[rng.below(i + 1)]);
    const int n_train = int(std::lround(train_frac * double(members.size())));
    for (int i = 0; i < int(members.size()); ++i)
      m.records[members[i]].split = i < n_train ? Split::Train : Split::Val;
  }
}

PreparedDataset prepare_dataset(const DatasetManifest& m, const std::vector<Modality>& modalities,
                                const std::optional<std::array<int, 3>>& volume_crop) {
  if (modalities.empty()) throw ConfigError("prepare_dataset needs at least one modality");
  PreparedDataset out;
  out.modalities = modalities;
  for (const auto& rec : m.records) {
    if (rec.split == Split::None)
      throw DataError("subject " + rec.subject_id + " has no split assignment");
    auto raw = load_volume_record(m, rec);
    PreparedSubject subj;
    subj.subject_id = rec.subject_id;
    subj.grade = rec.grade;
    subj.modalities = modalities;
    for (Modality mod : modalities) {
      auto it = raw.modalities.find(mod);
      if (it == raw.modalities.end())
        throw DataError("subject " + rec.subject_id + " lacks modality " + to_string(mod));
      Volume vol = std::move(it->second);
      if (volume_crop)
        vol = center_crop_volume(vol, (*volume_crop)[0], (*volume_crop)[1], (*volume_crop)[2]);
      vol = feature_scale(percentile_clip(std::move(vol)));
      subj.channels.push_back(std::move(vol));
    }
    Volume lbl = std::move(raw.label);
    if (volume_crop)
      lbl = center_crop_volume(lbl, (*volume_crop)[0], (*volume_crop)[1], (*volume_crop)[2]);
    subj.label = relabel_binary(lbl);
    (rec.split == Split::Train ? out.train : out.val).push_back(std::move(subj));
  }
  return out;
}

namespace {

void copy_patch(const Volume& vol, int z, int x0, int y0, int crop, float* dst, int stride_px) {
  // dst walks row-major over the crop window with stride_px floats between pixels
  for (int i = 0; i < crop; ++i)
    for (int j = 0; j < crop; ++j)
      dst[(size_t(i) * crop + j) * stride_px] = vol.at(x0 + i, y0 + j, z);
}

}  // namespace

SliceBatch sample_training_batch(const std::vector<PreparedSubject>& subjects, int batch,
                                 int crop, Rng& rng) {
  if (subjects.empty()) throw DataError("sample_training_batch: no subjects");
  if (batch <= 0) throw ConfigError("batch size must be positive");
  const int M = int(subjects[0].modalities.size());
  // uniform over (subject, z) pairs: one draw against the slice total, then crop origin
  std::vector<int> z_prefix(subjects.size() + 1, 0);
  for (size_t s = 0; s < subjects.size(); ++s)
    z_prefix[s + 1] = z_prefix[s] + subjects[s].channels[0].nz;
  const int total_slices = z_prefix.back();
  SliceBatch out;
  out.images = Tensor<float>::zeros({batch, crop, crop, M});
  out.labels = Tensor<float>::zeros({batch, crop, crop, 1});
  float* img = out.images.value_mut().data();
  float* lab = out.labels.value_mut().data();
  const size_t img_stride = size_t(crop) * crop * M;
  const size_t lab_stride = size_t(crop) * crop;
  for (int n = 0; n < batch; ++n) {
    const int flat = rng.below(total_slices);
    BatchDraw d;
    d.subject = int(std::upper_bound(z_prefix.begin(), z_prefix.end(), flat) -
                    z_prefix.begin()) - 1;
    d.z = flat - z_prefix[d.subject];
    const auto& s = subjects[d.subject];
    const Volume& v0 = s.channels[0];
    if (crop > v0.nx || crop > v0.ny)
      throw ShapeError("crop " + std::to_string(crop) + " exceeds slice " +
                       std::to_string(v0.nx) + "x" + std::to_string(v0.ny));
    d.x0 = rng.below(v0.nx - crop + 1);
    d.y0 = rng.below(v0.ny - crop + 1);
    for (int m = 0; m < M; ++m)
      copy_patch(s.channels[m], d.z, d.x0, d.y0, crop, img + size_t(n) * img_stride + m, M);
    copy_patch(s.label, d.z, d.x0, d.y0, crop, lab + size_t(n) * lab_stride, 1);
    out.draws.push_back(d);
  }
  return out;
}

EvalSlices eval_slices(const PreparedSubject& subject, int crop) {
  const Volume& v0 = subject.channels[0];
  if (crop > v0.nx || crop > v0.ny)
    throw ShapeError("crop " + std::to_string(crop) + " exceeds slice " + std::to_string(v0.nx) +
                     "x" + std::to_string(v0.ny));
  const int M = int(subject.modalities.size());
  const int x0 = (v0.nx - crop) / 2, y0 = (v0.ny - crop) / 2;
  EvalSlices out;
  out.images = Tensor<float>::zeros({v0.nz, crop, crop, M});
  out.labels = Tensor<float>::zeros({v0.nz, crop, crop, 1});
  float* img = out.images.value_mut().data();
  float* lab = out.labels.value_mut().data();
  const size_t img_stride = size_t(crop) * crop * M;
  const size_t lab_stride = size_t(crop) * crop;
  for (int z = 0; z < v0.nz; ++z) {
    for (int m = 0; m < M; ++m)
      copy_patch(subject.channels[m], z, x0, y0, crop, img + size_t(z) * img_stride + m, M);
    copy_patch(subject.label, z, x0, y0, crop, lab + size_t(z) * lab_stride, 1);
  }
  return out;
}

}  // namespace segan
