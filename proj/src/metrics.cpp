#include "segan/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "segan/checkpoint.hpp"
#include "segan/error.hpp"
#include "segan/losses.hpp"
#include "json.hpp"

namespace segan {

using nlohmann::json;

ConfusionCounts volume_confusion(const Tensor<float>& pred, const Tensor<float>& label,
                                 float threshold) {
  if (pred.shape() != label.shape())
    throw ShapeError("volume_confusion: pred " + shape_str(pred.shape()) + " vs label " +
                     shape_str(label.shape()));
  ConfusionCounts c;
  const auto& p = pred.value();
  const auto& g = label.value();
  for (size_t i = 0; i < p.size(); ++i) {
    if (g[i] != 0.0f && g[i] != 1.0f)
      throw DataError("volume_confusion: label voxel " + std::to_string(i) + " is not binary");
    const bool pos = p[i] >= threshold;
    const bool truth = g[i] != 0.0f;
    if (pos && truth) ++c.tp;
    else if (pos && !truth) ++c.fp;
    else if (!pos && truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

VolumeScores scores(const ConfusionCounts& c) {
  VolumeScores s;
  const uint64_t dice_den = 2 * c.tp + c.fp + c.fn;
  const uint64_t prec_den = c.tp + c.fp;
  const uint64_t sens_den = c.tp + c.fn;
  s.dice = dice_den == 0 ? 1.0 : double(2 * c.tp) / double(dice_den);
  s.precision = prec_den == 0 ? 1.0 : double(c.tp) / double(prec_den);
  s.sensitivity = sens_den == 0 ? 1.0 : double(c.tp) / double(sens_den);
  return s;
}

MetricsReport evaluate_subjects(ModelPair<float>& pair,
                                const std::vector<PreparedSubject>& subjects, int crop,
                                float threshold, int chunk) {
  if (chunk < 1) throw ConfigError("evaluate_subjects: chunk must be >= 1");
  NoGradGuard ng;
  MetricsReport rep;
  rep.threshold = threshold;
  double dsum = 0, psum = 0, ssum = 0;
  for (const auto& subj : subjects) {
    auto ev = eval_slices(subj, crop);
    const int nz = ev.images.shape()[0];
    ConfusionCounts counts;
    for (int z0 = 0; z0 < nz; z0 += chunk) {
      const int n = std::min(chunk, nz - z0);
      // pack the chunk's slices into one batch
      Shape bshape = ev.images.shape();
      bshape[0] = n;
      const size_t img_stride = size_t(numel(bshape)) / n;
      std::vector<float> img(ev.images.value().begin() + z0 * img_stride,
                             ev.images.value().begin() + (z0 + n) * img_stride);
      Shape lshape = ev.labels.shape();
      lshape[0] = n;
      const size_t lab_stride = size_t(numel(lshape)) / n;
      std::vector<float> lab(ev.labels.value().begin() + z0 * lab_stride,
                             ev.labels.value().begin() + (z0 + n) * lab_stride);
      auto pred = pair.seg.forward(Tensor<float>::from(bshape, std::move(img)), Mode::Infer);
      counts += volume_confusion(pred, Tensor<float>::from(lshape, std::move(lab)), threshold);
    }
    SubjectRow row;
    row.subject_id = subj.subject_id;
    row.counts = counts;
    row.s = scores(counts);
    dsum += row.s.dice;
    psum += row.s.precision;
    ssum += row.s.sensitivity;
    rep.per_volume.push_back(std::move(row));
  }
  const double n = double(rep.per_volume.size());
  if (n > 0) {
    rep.aggregate.dice = dsum / n;
    rep.aggregate.precision = psum / n;
    rep.aggregate.sensitivity = ssum / n;
  }
  return rep;
}

namespace {

json scores_json(const VolumeScores& s) {
  return {{"dice", s.dice}, {"precision", s.precision}, {"sensitivity", s.sensitivity}};
}

}  // namespace

void write_metrics_json(const MetricsReport& r, const std::filesystem::path& file) {
  json j;
  j["checkpoint"] = r.checkpoint_id;
  j["dataset"] = r.dataset_id;
  json mods = json::array();
  for (Modality m : r.modalities) mods.push_back(to_string(m));
  j["modalities"] = mods;
  j["threshold"] = r.threshold;
  j["aggregate"] = scores_json(r.aggregate);
  json vols = json::array();
  for (const auto& row : r.per_volume) {
    json v;
    v["subject_id"] = row.subject_id;
    v["tp"] = row.counts.tp;
    v["fp"] = row.counts.fp;
    v["tn"] = row.counts.tn;
    v["fn"] = row.counts.fn;
    v["dice"] = row.s.dice;
    v["precision"] = row.s.precision;
    v["sensitivity"] = row.s.sensitivity;
    vols.push_back(std::move(v));
  }
  j["volumes"] = vols;
  std::ofstream out(file);
  if (!out) throw DataError("cannot write metrics report " + file.string());
  out << j.dump(2) << "\n";
}

void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write metrics report " + file.string());
  out << "subject_id,tp,fp,tn,fn,dice,precision,sensitivity\n";
  char buf[256];
  for (const auto& row : r.per_volume) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%llu,%llu,%.9g,%.9g,%.9g\n",
                  row.subject_id.c_str(), (unsigned long long)row.counts.tp,
                  (unsigned long long)row.counts.fp, (unsigned long long)row.counts.tn,
                  (unsigned long long)row.counts.fn, row.s.dice, row.s.precision,
                  row.s.sensitivity);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "mean,,,,,%.9g,%.9g,%.9g\n", r.aggregate.dice,
                r.aggregate.precision, r.aggregate.sensitivity);
  out << buf;
}

CrossModalityGrid cross_modality_matrix(
    const std::map<Modality, std::filesystem::path>& models,
    const std::map<Modality, std::vector<PreparedSubject>>& datasets, int crop,
    float threshold) {
  CrossModalityGrid grid;
  std::vector<ModelPair<float>> pairs;
  for (const auto& [mod, path] : models) {
    auto ck = read_checkpoint(path);
    if (!pairs.empty() && !(ck.arch == pairs.front().arch))
      throw ConfigError("cross_modality_matrix: checkpoint " + path.string() +
                        " architecture differs from the first model's");
    pairs.push_back(build_from_checkpoint(ck));
    grid.model_labels.push_back(to_string(mod));
  }
  for (const auto& [mod, subjects] : datasets) {
    (void)subjects;
    grid.dataset_labels.push_back(to_string(mod));
  }
  for (auto& pair : pairs) {
    std::vector<double> row;
    for (const auto& [mod, subjects] : datasets) {
      (void)mod;
      row.push_back(evaluate_subjects(pair, subjects, crop, threshold).aggregate.dice);
    }
    grid.dice.push_back(std::move(row));
  }
  return grid;
}

void write_grid_csv(const CrossModalityGrid& g, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write grid " + file.string());
  out << "model";
  for (const auto& c : g.dataset_labels) out << "," << c;
  out << "\n";
  char buf[64];
  for (size_t i = 0; i < g.dice.size(); ++i) {
    out << g.model_labels[i];
    for (double v : g.dice[i]) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      out << buf;
    }
    out << "\n";
  }
}

void write_grid_plot_json(const CrossModalityGrid& g, const std::filesystem::path& file) {
  json j;
  j["rows"] = g.model_labels;
  j["cols"] = g.dataset_labels;
  j["values"] = g.dice;
  std::ofstream out(file);
  if (!out) throw DataError("cannot write grid plot data " + file.string());
  out << j.dump(2) << "\n";
}

}  // namespace segan
