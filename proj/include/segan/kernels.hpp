#pragma once

// Raw array math behind the tensor ops. Kernels take pointers plus a dims
// struct and know nothing about the tape. Batch-parallel loops hand one
// sample to one worker; cross-sample reductions sum per-sample partials in
// fixed sample order, so results are identical for any worker count.

#include <cmath>
#include <cstring>
#include <vector>

#include "segan/threading.hpp"

namespace segan::kernels {

struct ConvDims {
  int n, h, w, ci;      // input
  int kh, kw, co;       // filter
  int stride;
  int pad_top, pad_left;
  int ho, wo;           // output
};

template <typename T>
void conv2d_forward(const ConvDims& d, const T* x, const T* wgt, const T* bias, T* out) {
  threads::parallel_for(d.n, [&](int n) {
    std::vector<T> acc(static_cast<size_t>(d.co));
    const T* xn = x + static_cast<size_t>(n) * d.h * d.w * d.ci;
    T* on = out + static_cast<size_t>(n) * d.ho * d.wo * d.co;
    for (int oy = 0; oy < d.ho; ++oy) {
      for (int ox = 0; ox < d.wo; ++ox) {
        for (int c = 0; c < d.co; ++c) acc[c] = bias ? bias[c] : T(0);
        for (int ky = 0; ky < d.kh; ++ky) {
          int iy = oy * d.stride - d.pad_top + ky;
          if (iy < 0 || iy >= d.h) continue;
          for (int kx = 0; kx < d.kw; ++kx) {
            int ix = ox * d.stride - d.pad_left + kx;
            if (ix < 0 || ix >= d.w) continue;
            const T* xp = xn + (static_cast<size_t>(iy) * d.w + ix) * d.ci;
            const T* wp = wgt + (static_cast<size_t>(ky) * d.kw + kx) * d.ci * d.co;
            for (int c = 0; c < d.ci; ++c) {
              T xv = xp[c];
              const T* wrow = wp + static_cast<size_t>(c) * d.co;
              for (int o = 0; o < d.co; ++o) acc[o] += xv * wrow[o];
            }
          }
        }
        T* op = on + (static_cast<size_t>(oy) * d.wo + ox) * d.co;
        for (int o = 0; o < d.co; ++o) op[o] = acc[o];
      }
    }
  });
}

// Gradient w.r.t. the input, gather form: each input pixel sums the output
// gradients whose receptive field covered it.
template <typename T>
void conv2d_backward_input(const ConvDims& d, const T* wgt, const T* gout, T* gx) {
  threads::parallel_for(d.n, [&](int n) {
    const T* gn = gout + static_cast<size_t>(n) * d.ho * d.wo * d.co;
    T* gxn = gx + static_cast<size_t>(n) * d.h * d.w * d.ci;
    std::vector<T> acc(static_cast<size_t>(d.ci));
    for (int iy = 0; iy < d.h; ++iy) {
      for (int ix = 0; ix < d.w; ++ix) {
        for (int c = 0; c < d.ci; ++c) acc[c] = T(0);
        for (int ky = 0; ky < d.kh; ++ky) {
          int ty = iy + d.pad_top - ky;
          if (ty < 0 || ty % d.stride != 0) continue;
          int oy = ty / d.stride;
          if (oy >= d.ho) continue;
          for (int kx = 0; kx < d.kw; ++kx) {
            int tx = ix + d.pad_left - kx;
            if (tx < 0 || tx % d.stride != 0) continue;
            int ox = tx / d.stride;
            if (ox >= d.wo) continue;
            const T* gp = gn + (static_cast<size_t>(oy) * d.wo + ox) * d.co;
            const T* wp = wgt + (static_cast<size_t>(ky) * d.kw + kx) * d.ci * d.co;
            for (int c = 0; c < d.ci; ++c) {
              const T* wrow = wp + static_cast<size_t>(c) * d.co;
              T s = T(0);
              for (int o = 0; o < d.co; ++o) s += wrow[o] * gp[o];
              acc[c] += s;
            }
          }
        }
        T* gxp = gxn + (static_cast<size_t>(iy) * d.w + ix) * d.ci;
        for (int c = 0; c < d.ci; ++c) gxp[c] += acc[c];
      }
    }
  });
}

// Gradient w.r.t. weights and bias. Per-sample partials are reduced in
// sample order; bias sums accumulate in double.
template <typename T>
void conv2d_backward_filter(const ConvDims& d, const T* x, const T* gout, T* gw, T* gb) {
  size_t wsize = static_cast<size_t>(d.kh) * d.kw * d.ci * d.co;
  std::vector<T> partial(static_cast<size_t>(d.n) * wsize, T(0));
  threads::parallel_for(d.n, [&](int n) {
    const T* xn = x + static_cast<size_t>(n) * d.h * d.w * d.ci;
    const T* gn = gout + static_cast<size_t>(n) * d.ho * d.wo * d.co;
    T* pw = partial.data() + static_cast<size_t>(n) * wsize;
    for (int oy = 0; oy < d.ho; ++oy) {
      for (int ox = 0; ox < d.wo; ++ox) {
        const T* gp = gn + (static_cast<size_t>(oy) * d.wo + ox) * d.co;
        for (int ky = 0; ky < d.kh; ++ky) {
          int iy = oy * d.stride - d.pad_top + ky;
          if (iy < 0 || iy >= d.h) continue;
          for (int kx = 0; kx < d.kw; ++kx) {
            int ix = ox * d.stride - d.pad_left + kx;
            if (ix < 0 || ix >= d.w) continue;
            const T* xp = xn + (static_cast<size_t>(iy) * d.w + ix) * d.ci;
            T* wp = pw + (static_cast<size_t>(ky) * d.kw + kx) * d.ci * d.co;
            for (int c = 0; c < d.ci; ++c) {
              T xv = xp[c];
              T* wrow = wp + static_cast<size_t>(c) * d.co;
              for (int o = 0; o < d.co; ++o) wrow[o] += xv * gp[o];
            }
          }
        }
      }
    }
  });
  for (size_t i = 0; i < wsize; ++i) {
    double s = 0.0;
    for (int n = 0; n < d.n; ++n) s += static_cast<double>(partial[static_cast<size_t>(n) * wsize + i]);
    gw[i] += static_cast<T>(s);
  }
  if (gb) {
    for (int o = 0; o < d.co; ++o) {
      double s = 0.0;
      const T* g = gout + o;
      size_t total = static_cast<size_t>(d.n) * d.ho * d.wo;
      for (size_t i = 0; i < total; ++i) s += static_cast<double>(g[i * d.co]);
      gb[o] += static_cast<T>(s);
    }
  }
}

// Axis tables for 2x bilinear upsampling, half-pixel convention:
// src = (dst + 0.5) / 2 - 0.5, clamped to the valid range.
template <typename T>
struct UpsampleAxis {
  std::vector<int> i0, i1;
  std::vector<T> w0, w1;
};

template <typename T>
UpsampleAxis<T> upsample2x_axis(int in) {
  UpsampleAxis<T> a;
  int out = in * 2;
  a.i0.resize(out);
  a.i1.resize(out);
  a.w0.resize(out);
  a.w1.resize(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    if (src > in - 1) src = in - 1;
    int lo = static_cast<int>(src);
    if (lo > in - 1) lo = in - 1;
    double frac = src - lo;
    int hi = lo + 1 < in ? lo + 1 : in - 1;
    a.i0[o] = lo;
    a.i1[o] = hi;
    a.w0[o] = static_cast<T>(1.0 - frac);
    a.w1[o] = static_cast<T>(frac);
  }
  return a;
}

template <typename T>
void upsample2x_forward(int n, int h, int w, int c, const UpsampleAxis<T>& ay,
                        const UpsampleAxis<T>& ax, const T* x, T* out) {
  int ho = h * 2, wo = w * 2;
  threads::parallel_for(n, [&](int ni) {
    const T* xn = x + static_cast<size_t>(ni) * h * w * c;
    T* on = out + static_cast<size_t>(ni) * ho * wo * c;
    for (int oy = 0; oy < ho; ++oy) {
      const T* r0 = xn + static_cast<size_t>(ay.i0[oy]) * w * c;
      const T* r1 = xn + static_cast<size_t>(ay.i1[oy]) * w * c;
      T wy0 = ay.w0[oy], wy1 = ay.w1[oy];
      for (int ox = 0; ox < wo; ++ox) {
        const T* p00 = r0 + static_cast<size_t>(ax.i0[ox]) * c;
        const T* p01 = r0 + static_cast<size_t>(ax.i1[ox]) * c;
        const T* p10 = r1 + static_cast<size_t>(ax.i0[ox]) * c;
        const T* p11 = r1 + static_cast<size_t>(ax.i1[ox]) * c;
        T wx0 = ax.w0[ox], wx1 = ax.w1[ox];
        T* op = on + (static_cast<size_t>(oy) * wo + ox) * c;
        for (int ch = 0; ch < c; ++ch) {
          op[ch] = wy0 * (wx0 * p00[ch] + wx1 * p01[ch]) + wy1 * (wx0 * p10[ch] + wx1 * p11[ch]);
        }
      }
    }
  });
}

template <typename T>
void upsample2x_backward(int n, int h, int w, int c, const UpsampleAxis<T>& ay,
                         const UpsampleAxis<T>& ax, const T* gout, T* gx) {
  int ho = h * 2, wo = w * 2;
  threads::parallel_for(n, [&](int ni) {
    const T* gn = gout + static_cast<size_t>(ni) * ho * wo * c;
    T* gxn = gx + static_cast<size_t>(ni) * h * w * c;
    for (int oy = 0; oy < ho; ++oy) {
      T* r0 = gxn + static_cast<size_t>(ay.i0[oy]) * w * c;
      T* r1 = gxn + static_cast<size_t>(ay.i1[oy]) * w * c;
      T wy0 = ay.w0[oy], wy1 = ay.w1[oy];
      for (int ox = 0; ox < wo; ++ox) {
        const T* gp = gn + (static_cast<size_t>(oy) * wo + ox) * c;
        T* p00 = r0 + static_cast<size_t>(ax.i0[ox]) * c;
        T* p01 = r0 + static_cast<size_t>(ax.i1[ox]) * c;
        T* p10 = r1 + static_cast<size_t>(ax.i0[ox]) * c;
        T* p11 = r1 + static_cast<size_t>(ax.i1[ox]) * c;
        T wx0 = ax.w0[ox], wx1 = ax.w1[ox];
        for (int ch = 0; ch < c; ++ch) {
          T g = gp[ch];
          p00[ch] += wy0 * wx0 * g;
          p01[ch] += wy0 * wx1 * g;
          p10[ch] += wy1 * wx0 * g;
          p11[ch] += wy1 * wx1 * g;
        }
      }
    }
  });
}

// Per-channel mean and biased variance over (N, H, W); accumulation in
// double via per-sample partials reduced in sample order.
template <typename T>
void batch_stats(int n, int spatial, int c, const T* x, std::vector<double>& mean,
                 std::vector<double>& var) {
  std::vector<double> psum(static_cast<size_t>(n) * c, 0.0);
  std::vector<double> psq(static_cast<size_t>(n) * c, 0.0);
  threads::parallel_for(n, [&](int ni) {
    const T* xn = x + static_cast<size_t>(ni) * spatial * c;
    double* ps = psum.data() + static_cast<size_t>(ni) * c;
    double* pq = psq.data() + static_cast<size_t>(ni) * c;
    for (int i = 0; i < spatial; ++i) {
      const T* p = xn + static_cast<size_t>(i) * c;
      for (int ch = 0; ch < c; ++ch) {
        double v = static_cast<double>(p[ch]);
        ps[ch] += v;
        pq[ch] += v * v;
      }
    }
  });
  mean.assign(c, 0.0);
  var.assign(c, 0.0);
  double count = static_cast<double>(n) * spatial;
  for (int ni = 0; ni < n; ++ni)
    for (int ch = 0; ch < c; ++ch) mean[ch] += psum[static_cast<size_t>(ni) * c + ch];
  for (int ch = 0; ch < c; ++ch) mean[ch] /= count;
  for (int ni = 0; ni < n; ++ni)
    for (int ch = 0; ch < c; ++ch) var[ch] += psq[static_cast<size_t>(ni) * c + ch];
  for (int ch = 0; ch < c; ++ch) {
    var[ch] = var[ch] / count - mean[ch] * mean[ch];
    if (var[ch] < 0) var[ch] = 0;  // guard tiny negative from cancellation
  }
}

// Per-channel sums of g and g * xhat, double accumulation in sample order.
template <typename T>
void bn_grad_sums(int n, int spatial, int c, const T* g, const T* x, const double* mean,
                  const double* inv_std, std::vector<double>& sum_g,
                  std::vector<double>& sum_g_xhat) {
  std::vector<double> pg(static_cast<size_t>(n) * c, 0.0);
  std::vector<double> pgx(static_cast<size_t>(n) * c, 0.0);
  threads::parallel_for(n, [&](int ni) {
    const T* gn = g + static_cast<size_t>(ni) * spatial * c;
    const T* xn = x + static_cast<size_t>(ni) * spatial * c;
    double* a = pg.data() + static_cast<size_t>(ni) * c;
    double* b = pgx.data() + static_cast<size_t>(ni) * c;
    for (int i = 0; i < spatial; ++i) {
      const T* gp = gn + static_cast<size_t>(i) * c;
      const T* xp = xn + static_cast<size_t>(i) * c;
      for (int ch = 0; ch < c; ++ch) {
        double gv = static_cast<double>(gp[ch]);
        double xhat = (static_cast<double>(xp[ch]) - mean[ch]) * inv_std[ch];
        a[ch] += gv;
        b[ch] += gv * xhat;
      }
    }
  });
  sum_g.assign(c, 0.0);
  sum_g_xhat.assign(c, 0.0);
  for (int ni = 0; ni < n; ++ni)
    for (int ch = 0; ch < c; ++ch) {
      sum_g[ch] += pg[static_cast<size_t>(ni) * c + ch];
      sum_g_xhat[ch] += pgx[static_cast<size_t>(ni) * c + ch];
    }
}

}  // namespace segan::kernels
