#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segan/rng.hpp"
#include "segan/tensor.hpp"

namespace segan {

enum class Modality { T1, T1c, T2, FLAIR };
enum class Grade { HGG, LGG };
enum class Split { None, Train, Val };

std::string to_string(Modality m);
std::string to_string(Grade g);
std::string to_string(Split s);
Modality parse_modality(const std::string& s);
Grade parse_grade(const std::string& s);
Split parse_split(const std::string& s);

inline const std::array<Modality, 4> kAllModalities = {Modality::T1, Modality::T1c, Modality::T2,
                                                       Modality::FLAIR};

// Dense float volume, x-major layout: index (x, y, z) -> (x*ny + y)*nz + z.
struct Volume {
  int nx = 0, ny = 0, nz = 0;
  std::vector<float> v;

  Volume() = default;
  Volume(int x, int y, int z) : nx(x), ny(y), nz(z), v(size_t(x) * y * z, 0.0f) {}

  size_t idx(int x, int y, int z) const { return (size_t(x) * ny + y) * nz + z; }
  float at(int x, int y, int z) const { return v[idx(x, y, z)]; }
  float& at(int x, int y, int z) { return v[idx(x, y, z)]; }
  size_t size() const { return v.size(); }
};

struct ManifestRecord {
  std::string subject_id;
  Grade grade = Grade::HGG;
  std::string institution;
  std::map<Modality, std::string> modality_paths;  // relative to manifest directory
  std::string label_path;
  std::array<int, 3> shape = {0, 0, 0};
  Split split = Split::None;
};

struct DatasetManifest {
  std::filesystem::path base_dir;  // directory the manifest file lives in
  std::vector<ManifestRecord> records;
};

DatasetManifest load_manifest(const std::filesystem::path& file);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& file);

struct VolumeRecord {
  std::string subject_id;
  Grade grade = Grade::HGG;
  std::string institution;
  std::map<Modality, Volume> modalities;
  Volume label;
};

// Reads raw little-endian float32 volumes; size mismatch or missing file -> DataError.
VolumeRecord load_volume_record(const DatasetManifest& m, const ManifestRecord& rec);
Volume load_raw_volume(const std::filesystem::path& file, int nx, int ny, int nz);
void save_raw_volume(const Volume& vol, const std::filesystem::path& file);

// Center crop; when a margin is odd the extra voxel is dropped from the high-index side.
Volume center_crop_volume(const Volume& vol, int tx, int ty, int tz);

// Clamps intensities to [P_lo, P_hi] percentiles (linear interpolation at rank pct/100*(n-1)).
Volume percentile_clip(Volume vol, double lo_pct = 2.0, double hi_pct = 98.0);

// Min-max rescale to [0, 1]; a constant volume maps to all zeros.
Volume feature_scale(Volume vol);

// Label codes 1..4 -> 1, 0 -> 0; any other value -> DataError.
Volume relabel_binary(const Volume& vol);

// Assigns Train/Val per (grade[, institution]) stratum: n_train = round(frac * n) within
// each cell, shuffled by a seeded Fisher-Yates over subjects in manifest order.
void stratified_split(DatasetManifest& m, double train_frac, uint64_t seed,
                      bool by_institution = false);

struct PreparedSubject {
  std::string subject_id;
  Grade grade = Grade::HGG;
  std::vector<Modality> modalities;       // channel order
  std::vector<Volume> channels;           // preprocessed, one per modality
  Volume label;                           // binary
};

struct PreparedDataset {
  std::vector<Modality> modalities;
  std::vector<PreparedSubject> train;
  std::vector<PreparedSubject> val;
};

// Loads every record, applies center crop (optional) then percentile clip then feature
// scaling per modality, relabels the ground truth, and buckets by split assignment.
PreparedDataset prepare_dataset(const DatasetManifest& m, const std::vector<Modality>& modalities,
                                const std::optional<std::array<int, 3>>& volume_crop);

struct BatchDraw {
  int subject = 0;
  int z = 0;
  int x0 = 0;
  int y0 = 0;
};

struct SliceBatch {
  Tensor<float> images;  // N x crop x crop x M
  Tensor<float> labels;  // N x crop x crop x 1
  std::vector<BatchDraw> draws;
};

// Uniform with replacement over (subject, z) slice pairs; per sample the draw order is
// flat slice index, then crop origin x0, y0.
SliceBatch sample_training_batch(const std::vector<PreparedSubject>& subjects, int batch,
                                 int crop, Rng& rng);

struct EvalSlices {
  Tensor<float> images;  // nz x crop x crop x M, ascending z, center-cropped in plane
  Tensor<float> labels;  // nz x crop x crop x 1
};

EvalSlices eval_slices(const PreparedSubject& subject, int crop);

inline int batches_per_epoch(int n_slices, int batch) { return (n_slices + batch - 1) / batch; }

// Writes a synthetic multi-modality dataset (raw volumes + manifest.json) under out_dir
// and returns the manifest. Byte-identical for a given (n_subjects, size, seed).
DatasetManifest generate_phantom_dataset(int n_subjects, std::array<int, 3> size, uint64_t seed,
                                         const std::filesystem::path& out_dir);

}  // namespace segan
