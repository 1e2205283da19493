#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "segan/data.hpp"
#include "segan/error.hpp"

namespace segan {

// The four pseudo-modalities share anatomy (background field + lesions) and differ in
// lesion amplitude. Amplitudes are keyed per modality so that a model fit on one modality
// responds to the wrong structures on another: each channel also carries small distractor
// blobs at the OTHER modalities' amplitudes. T1 lesions are darker than background, the
// rest brighter, with |amp| ordered FLAIR > T2 > T1c > T1.
namespace {

constexpr double kBgBase = 0.30;
constexpr double kFieldAmp = 0.07;       // total smooth-field amplitude budget
constexpr double kNoiseSigma = 0.045;
constexpr double kEdgeWidth = 0.08;      // sigmoid width in normalized ellipsoid distance
constexpr std::array<double, 4> kLesionAmp = {-0.065, 0.10, 0.15, 0.21};  // T1, T1c, T2, FLAIR
constexpr std::array<double, 4> kModalityBase = {0.00, 0.01, 0.02, 0.03};  // small channel offset

struct Ellipsoid {
  double cx, cy, cz;  // voxel coordinates
  double rx, ry, rz;  // voxel radii
};

double edge_bump(double d) { return 1.0 / (1.0 + std::exp((d - 1.0) / kEdgeWidth)); }

double norm_dist(const Ellipsoid& e, int x, int y, int z) {
  const double dx = (x - e.cx) / e.rx, dy = (y - e.cy) / e.ry, dz = (z - e.cz) / e.rz;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Adds amp * soft bump over the ellipsoid's bounding box (cut at d = 1.6 where the
// profile is below 6e-4); cnt limits the box to the volume.
void splat(Volume& vol, const Ellipsoid& e, double amp) {
  const int x0 = std::max(0, int(std::floor(e.cx - 1.6 * e.rx)));
  const int x1 = std::min(vol.nx - 1, int(std::ceil(e.cx + 1.6 * e.rx)));
  const int y0 = std::max(0, int(std::floor(e.cy - 1.6 * e.ry)));
  const int y1 = std::min(vol.ny - 1, int(std::ceil(e.cy + 1.6 * e.ry)));
  const int z0 = std::max(0, int(std::floor(e.cz - 1.6 * e.rz)));
  const int z1 = std::min(vol.nz - 1, int(std::ceil(e.cz + 1.6 * e.rz)));
  for (int x = x0; x <= x1; ++x)
    for (int y = y0; y <= y1; ++y)
      for (int z = z0; z <= z1; ++z) {
        const double d = norm_dist(e, x, y, z);
        if (d < 1.6) vol.at(x, y, z) += float(amp * edge_bump(d));
      }
}

Ellipsoid draw_ellipsoid(Rng& rng, int nx, int ny, int nz, double c_lo, double c_hi,
                         double r_lo, double r_hi) {
  Ellipsoid e;
  e.cx = rng.uniform(c_lo, c_hi) * (nx - 1);
  e.cy = rng.uniform(c_lo, c_hi) * (ny - 1);
  e.cz = rng.uniform(c_lo, c_hi) * (nz - 1);
  e.rx = rng.uniform(r_lo, r_hi) * nx;
  e.ry = rng.uniform(r_lo, r_hi) * ny;
  e.rz = rng.uniform(r_lo, r_hi) * nz;
  return e;
}

bool far_apart(const Ellipsoid& a, const Ellipsoid& b) {
  // conservative center separation against the soft tails of both blobs
  const double dx = (a.cx - b.cx) / (1.6 * (a.rx + b.rx));
  const double dy = (a.cy - b.cy) / (1.6 * (a.ry + b.ry));
  const double dz = (a.cz - b.cz) / (1.6 * (a.rz + b.rz));
  return dx * dx + dy * dy + dz * dz > 1.0;
}

}  // namespace

DatasetManifest generate_phantom_dataset(int n_subjects, std::array<int, 3> size, uint64_t seed,
                                         const std::filesystem::path& out_dir) {
  if (n_subjects <= 0) throw ConfigError("n_subjects must be positive");
  if (size[0] < 32 || size[1] < 32 || size[2] < 8)
    throw ConfigError("phantom volume must be at least 32x32x8");
  std::filesystem::create_directories(out_dir);
  const int nx = size[0], ny = size[1], nz = size[2];
  const std::array<std::string, 2> grades = {"HGG", "LGG"};
  const std::array<std::string, 3> institutions = {"inst_a", "inst_b", "inst_c"};

  DatasetManifest manifest;
  manifest.base_dir = out_dir;

  for (int si = 0; si < n_subjects; ++si) {
    Rng rng(seed, 1000 + uint64_t(si));

    // smooth background field: three low-frequency cosine modes
    struct Mode { double fx, fy, fz, phase, amp; };
    std::array<Mode, 3> modes;
    for (auto& mo : modes) {
      mo.fx = 1 + rng.below(2);
      mo.fy = 1 + rng.below(2);
      mo.fz = 1 + rng.below(2);
      mo.phase = rng.uniform(0.0, 2.0 * M_PI);
      mo.amp = kFieldAmp / 3.0 * rng.uniform(0.4, 1.0);
    }
    Volume base(nx, ny, nz);
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y)
        for (int z = 0; z < nz; ++z) {
          double v = kBgBase;
          for (const auto& mo : modes)
            v += mo.amp * std::cos(2.0 * M_PI * (mo.fx * x / double(nx) + mo.fy * y / double(ny) +
                                                 mo.fz * z / double(nz)) + mo.phase);
          base.at(x, y, z) = float(v);
        }

    // lesions: shared soft intensity profile, hard d <= 1 label with codes 1..4 round-robin
    const int n_lesions = 1 + rng.below(3);
    std::vector<Ellipsoid> lesions;
    for (int li = 0; li < n_lesions; ++li)
      lesions.push_back(draw_ellipsoid(rng, nx, ny, nz, 0.32, 0.68, 0.10, 0.14));

    Volume bump(nx, ny, nz);
    for (const auto& e : lesions) splat(bump, e, 1.0);
    for (float& b : bump.v) b = std::min(b, 1.0f);

    Volume label(nx, ny, nz);
    for (int li = 0; li < n_lesions; ++li)
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y)
          for (int z = 0; z < nz; ++z)
            if (label.at(x, y, z) == 0.0f && norm_dist(lesions[li], x, y, z) <= 1.0)
              label.at(x, y, z) = float(1 + li % 4);

    // per-modality distractors: one blob at each OTHER modality's amplitude, kept clear
    // of the lesions so the label stays unambiguous
    std::array<std::vector<std::pair<Ellipsoid, double>>, 4> distractors;
    for (int m = 0; m < 4; ++m)
      for (int j = 0; j < 4; ++j) {
        if (j == m) continue;
        Ellipsoid e;
        bool ok = false;
        for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
          e = draw_ellipsoid(rng, nx, ny, nz, 0.15, 0.85, 0.05, 0.08);
          ok = true;
          for (const auto& l : lesions)
            if (!far_apart(e, l)) { ok = false; break; }
        }
        if (ok) distractors[m].push_back({e, kLesionAmp[j]});
      }

    // assemble channels: base + offset + keyed lesions + distractors + noise, clamped >= 0
    const std::string sid = [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "s%03d", si);
      return std::string(buf);
    }();

    ManifestRecord rec;
    rec.subject_id = sid;
    rec.grade = parse_grade(grades[si % 2]);
    rec.institution = institutions[si % 3];
    rec.shape = size;
    rec.label_path = sid + "_label.raw";

    for (int m = 0; m < 4; ++m) {
      Volume vol = base;
      for (float& v : vol.v) v += float(kModalityBase[m]);
      // lesions blend toward a flat plateau at base + amp so the smooth field cannot
      // shift the lesion mean and disturb the per-subject contrast ordering
      const double plateau = kBgBase + kModalityBase[m] + kLesionAmp[m];
      for (size_t i = 0; i < vol.v.size(); ++i) {
        const double b = bump.v[i];
        vol.v[i] = float((1.0 - b) * vol.v[i] + b * plateau);
      }
      for (const auto& [e, amp] : distractors[m]) splat(vol, e, amp);
      for (float& v : vol.v) v += float(kNoiseSigma * rng.normal());
      for (float& v : vol.v) v = std::max(v, 0.0f);
      const Modality mod = kAllModalities[m];
      const std::string fname = sid + "_" + to_string(mod) + ".raw";
      save_raw_volume(vol, out_dir / fname);
      rec.modality_paths[mod] = fname;
    }
    save_raw_volume(label, out_dir / rec.label_path);
    manifest.records.push_back(std::move(rec));
  }

  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace segan
