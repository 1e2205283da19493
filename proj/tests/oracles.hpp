#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is written as plain scalar loops with none of the library's
// kernels, so agreement between the two is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

// Plain seven-loop convolution, channel-last NHWC with HWIO weights.
// pad_before_* = 0 gives valid padding.
inline std::vector<double> conv2d(const std::vector<double>& x, int n, int h, int w, int ci,
                                  const std::vector<double>& wt, int kh, int kw, int co,
                                  const std::vector<double>& b, int stride, int pad_top,
                                  int pad_left, int ho, int wo) {
  std::vector<double> out(size_t(n) * ho * wo * co, 0.0);
  for (int bn = 0; bn < n; ++bn)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int oc = 0; oc < co; ++oc) {
          double acc = b[oc];
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
              for (int ic = 0; ic < ci; ++ic) {
                int iy = oy * stride + ky - pad_top;
                int ix = ox * stride + kx - pad_left;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += x[((size_t(bn) * h + iy) * w + ix) * ci + ic] *
                       wt[((size_t(ky) * kw + kx) * ci + ic) * co + oc];
              }
          out[((size_t(bn) * ho + oy) * wo + ox) * co + oc] = acc;
        }
  return out;
}

// Scalar bilinear 2x upsample, half-pixel centers (align-corners false):
// output i samples input at (i + 0.5) / 2 - 0.5, clamped to the edge.
inline std::vector<double> upsample2x(const std::vector<double>& x, int n, int h, int w, int c) {
  const int ho = h * 2, wo = w * 2;
  std::vector<double> out(size_t(n) * ho * wo * c);
  auto src = [&](int bn, int y, int xx, int ch) {
    return x[((size_t(bn) * h + y) * w + xx) * c + ch];
  };
  for (int bn = 0; bn < n; ++bn)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double fy = (oy + 0.5) / 2.0 - 0.5;
        double fx = (ox + 0.5) / 2.0 - 0.5;
        int y0 = int(std::floor(fy)), x0 = int(std::floor(fx));
        double wy = fy - y0, wx = fx - x0;
        int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
        int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
        for (int ch = 0; ch < c; ++ch) {
          double v = (1 - wy) * ((1 - wx) * src(bn, y0c, x0c, ch) + wx * src(bn, y0c, x1c, ch)) +
                     wy * ((1 - wx) * src(bn, y1c, x0c, ch) + wx * src(bn, y1c, x1c, ch));
          out[((size_t(bn) * ho + oy) * wo + ox) * c + ch] = v;
        }
      }
  return out;
}

// Percentile by full sort and linear interpolation at rank pct/100 * (n-1).
inline double percentile(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  double rank = pct / 100.0 * double(v.size() - 1);
  size_t lo = size_t(rank);
  if (lo + 1 >= v.size()) return v.back();
  double frac = rank - double(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

// Soft dice loss as one scalar pass: 1 - 2*sum(pg) / (sum(p^2) + sum(g^2)),
// smoothing only when the denominator vanishes.
inline double dice_loss(const std::vector<double>& g, const std::vector<double>& p) {
  double num = 0, den = 0;
  for (size_t i = 0; i < g.size(); ++i) {
    num += 2.0 * p[i] * g[i];
    den += p[i] * p[i] + g[i] * g[i];
  }
  if (den == 0.0) {
    num += 1e-6;
    den += 1e-6;
  }
  return 1.0 - num / den;
}

// Layer-mean absolute differences averaged over layers.
inline double multiscale_mae(const std::vector<std::vector<double>>& a,
                             const std::vector<std::vector<double>>& b) {
  double acc = 0;
  for (size_t l = 0; l < a.size(); ++l) {
    double s = 0;
    for (size_t i = 0; i < a[l].size(); ++i) s += std::fabs(a[l][i] - b[l][i]);
    acc += s / double(a[l].size());
  }
  return acc / double(a.size());
}

struct Counts {
  uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Voxel-by-voxel confusion counting with the >= threshold rule.
inline Counts confusion(const std::vector<float>& pred, const std::vector<float>& label,
                        float threshold) {
  Counts c;
  for (size_t i = 0; i < pred.size(); ++i) {
    bool p = pred[i] >= threshold;
    bool g = label[i] != 0.0f;
    if (p && g) ++c.tp;
    else if (p && !g) ++c.fp;
    else if (!p && g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

}  // namespace oracle
