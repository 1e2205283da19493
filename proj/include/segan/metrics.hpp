#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "segan/data.hpp"
#include "segan/models.hpp"

namespace segan {

struct ConfusionCounts {
  uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp; fp += o.fp; tn += o.tn; fn += o.fn;
    return *this;
  }
};

// Binarizes predictions at threshold (>= counts as positive) and accumulates counts over
// every voxel; labels must already be binary.
ConfusionCounts volume_confusion(const Tensor<float>& pred, const Tensor<float>& label,
                                 float threshold = 0.5f);

struct VolumeScores {
  double dice = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
};

// dice = 2tp/(2tp+fp+fn), precision = tp/(tp+fp), sensitivity = tp/(tp+fn).
// Zero denominators score 1 (empty truth and empty prediction agree perfectly); the one
// asymmetric case, empty truth with nonempty prediction, gives dice 0, precision 0,
// sensitivity 1.
VolumeScores scores(const ConfusionCounts& c);

struct SubjectRow {
  std::string subject_id;
  ConfusionCounts counts;
  VolumeScores s;
};

struct MetricsReport {
  std::vector<SubjectRow> per_volume;
  VolumeScores aggregate;  // unweighted mean over volumes
  // identifies the run behind the numbers
  std::string checkpoint_id;
  std::string dataset_id;
  std::vector<Modality> modalities;
  double threshold = 0.5;
};

// Runs the segmentator over each subject's center-cropped slices (inference mode, no
// gradients, slice chunks of at most `chunk`) and scores each volume.
MetricsReport evaluate_subjects(ModelPair<float>& pair,
                                const std::vector<PreparedSubject>& subjects, int crop,
                                float threshold = 0.5f, int chunk = 32);

void write_metrics_json(const MetricsReport& r, const std::filesystem::path& file);
void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& file);

struct CrossModalityGrid {
  std::vector<std::string> model_labels;    // training modality per row
  std::vector<std::string> dataset_labels;  // evaluation modality per column
  std::vector<std::vector<double>> dice;    // row-major mean per-volume dice
};

// grid[i][j] = mean per-volume dice of the model trained on modality i evaluated on the
// val subjects of modality j. All checkpoints must share the architecture.
CrossModalityGrid cross_modality_matrix(
    const std::map<Modality, std::filesystem::path>& models,
    const std::map<Modality, std::vector<PreparedSubject>>& datasets, int crop,
    float threshold = 0.5f);

void write_grid_csv(const CrossModalityGrid& g, const std::filesystem::path& file);
// Plot-data file: modality labels plus the value matrix, for external plotting.
void write_grid_plot_json(const CrossModalityGrid& g, const std::filesystem::path& file);

}  // namespace segan
