#pragma once

// Differentiable tensor ops. Each op computes its value through the kernels
// and records a closure that routes output gradients to whichever inputs
// require them. Image tensors may be H x W x C or N x H x W x C; rank-3
// inputs are treated as a batch of one and keep their rank on output.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "segan/kernels.hpp"
#include "segan/tensor.hpp"

namespace segan {

enum class Padding { Same, Valid };
enum class Mode { Train, Infer };

namespace detail {

struct ImageDims {
  int n, h, w, c;
  bool batched;  // rank 4 on the way in
};

template <typename T>
ImageDims image_dims(const Tensor<T>& x, const char* who) {
  const Shape& s = x.shape();
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  throw ShapeError(std::string(who) + ": expected HxWxC or NxHxWxC, got " + shape_str(s));
}

inline Shape image_shape(const ImageDims& d, int h, int w, int c) {
  return d.batched ? Shape{d.n, h, w, c} : Shape{h, w, c};
}

inline int same_pad_before(int in, int k, int s) {
  int out = (in + s - 1) / s;
  int total = (out - 1) * s + k - in;
  if (total < 0) total = 0;
  return total / 2;
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

}  // namespace detail

// Cross-correlation of x with filters w (kh x kw x ci x co) plus bias b {co}.
// Same padding keeps ceil(in/stride) output cells; valid requires the kernel
// to fit.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                 Padding padding) {
  auto dims = detail::image_dims(x, "conv2d");
  if (w.rank() != 4)
    throw ShapeError("conv2d: filters must be kh x kw x ci x co, got " + shape_str(w.shape()));
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  kernels::ConvDims d;
  d.n = dims.n;
  d.h = dims.h;
  d.w = dims.w;
  d.ci = dims.c;
  d.kh = w.shape()[0];
  d.kw = w.shape()[1];
  d.co = w.shape()[3];
  d.stride = stride;
  if (w.shape()[2] != d.ci)
    throw ShapeError("conv2d: filter expects " + std::to_string(w.shape()[2]) +
                     " input channels, input has " + std::to_string(d.ci));
  if (!b.defined() || b.rank() != 1 || b.shape()[0] != d.co)
    throw ShapeError("conv2d: bias must have shape {co}");
  if (padding == Padding::Same) {
    d.pad_top = detail::same_pad_before(d.h, d.kh, stride);
    d.pad_left = detail::same_pad_before(d.w, d.kw, stride);
    d.ho = (d.h + stride - 1) / stride;
    d.wo = (d.w + stride - 1) / stride;
  } else {
    if (d.h < d.kh || d.w < d.kw)
      throw ShapeError("conv2d: valid padding needs input at least kernel-sized");
    d.pad_top = d.pad_left = 0;
    d.ho = (d.h - d.kh) / stride + 1;
    d.wo = (d.w - d.kw) / stride + 1;
  }
  std::vector<T> out(static_cast<size_t>(d.n) * d.ho * d.wo * d.co);
  kernels::conv2d_forward(d, x.value().data(), w.value().data(), b.value().data(), out.data());
  return detail::make_op_output<T>(
      detail::image_shape(dims, d.ho, d.wo, d.co), std::move(out), {x, w, b},
      [d](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        if (xn.requires_grad) {
          xn.ensure_grad();
          kernels::conv2d_backward_input(d, wn.value.data(), self.grad.data(), xn.grad.data());
        }
        if (wn.requires_grad || bn.requires_grad) {
          wn.ensure_grad();
          bn.ensure_grad();
          kernels::conv2d_backward_filter(d, xn.value.data(), self.grad.data(), wn.grad.data(),
                                          bn.requires_grad ? bn.grad.data() : nullptr);
        }
      });
}

// Doubles height and width by bilinear interpolation, half-pixel convention
// (src = (dst + 0.5) / 2 - 0.5), edges clamped.
template <typename T>
Tensor<T> upsample_bilinear2x(const Tensor<T>& x) {
  auto dims = detail::image_dims(x, "upsample_bilinear2x");
  auto ay = kernels::upsample2x_axis<T>(dims.h);
  auto ax = kernels::upsample2x_axis<T>(dims.w);
  std::vector<T> out(static_cast<size_t>(dims.n) * dims.h * 2 * dims.w * 2 * dims.c);
  kernels::upsample2x_forward(dims.n, dims.h, dims.w, dims.c, ay, ax, x.value().data(),
                              out.data());
  return detail::make_op_output<T>(
      detail::image_shape(dims, dims.h * 2, dims.w * 2, dims.c), std::move(out), {x},
      [dims, ay, ax](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        xn.ensure_grad();
        kernels::upsample2x_backward(dims.n, dims.h, dims.w, dims.c, ay, ax, self.grad.data(),
                                     xn.grad.data());
      });
}

// Batch normalization over (N, H, W) per channel. Train mode normalizes by
// batch statistics (biased variance) and, unless update_stats is false,
// folds them into the running stats: r <- (1 - momentum) * r + momentum * b.
// Infer mode normalizes by the running stats. Running stats live outside the
// tape and are mutated in place.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode, T eps,
                     T momentum, bool update_stats = true) {
  auto dims = detail::image_dims(x, "batch_norm");
  int c = dims.c;
  auto check_c = [&](const Tensor<T>& t, const char* name) {
    if (t.rank() != 1 || t.shape()[0] != c)
      throw ShapeError(std::string("batch_norm: ") + name + " must have shape {" +
                       std::to_string(c) + "}, got " + shape_str(t.shape()));
  };
  check_c(gamma, "gamma");
  check_c(beta, "beta");
  check_c(running_mean, "running mean");
  check_c(running_var, "running var");
  int spatial = dims.h * dims.w;
  size_t total = static_cast<size_t>(dims.n) * spatial * c;
  std::vector<double> mean(c), var(c), inv_std(c);
  if (mode == Mode::Train) {
    kernels::batch_stats(dims.n, spatial, c, x.value().data(), mean, var);
    if (update_stats) {
      auto rm = running_mean.value_mut();
      auto rv = running_var.value_mut();
      for (int ch = 0; ch < c; ++ch) {
        rm[ch] = static_cast<T>((T(1) - momentum) * rm[ch] + momentum * static_cast<T>(mean[ch]));
        rv[ch] = static_cast<T>((T(1) - momentum) * rv[ch] + momentum * static_cast<T>(var[ch]));
      }
    }
  } else {
    auto rm = running_mean.value();
    auto rv = running_var.value();
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = static_cast<double>(rm[ch]);
      var[ch] = static_cast<double>(rv[ch]);
    }
  }
  for (int ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + static_cast<double>(eps));
  std::vector<T> out(total);
  {
    const T* xp = x.value().data();
    const T* gp = gamma.value().data();
    const T* bp = beta.value().data();
    std::vector<T> scale(c), shift(c);
    for (int ch = 0; ch < c; ++ch) {
      scale[ch] = static_cast<T>(static_cast<double>(gp[ch]) * inv_std[ch]);
      shift[ch] = static_cast<T>(static_cast<double>(bp[ch]) -
                                 static_cast<double>(gp[ch]) * inv_std[ch] * mean[ch]);
    }
    threads::parallel_for(dims.n, [&](int ni) {
      size_t base = static_cast<size_t>(ni) * spatial * c;
      for (int i = 0; i < spatial; ++i) {
        const T* px = xp + base + static_cast<size_t>(i) * c;
        T* po = out.data() + base + static_cast<size_t>(i) * c;
        for (int ch = 0; ch < c; ++ch) po[ch] = scale[ch] * px[ch] + shift[ch];
      }
    });
  }
  bool train = mode == Mode::Train;
  int n = dims.n;
  return detail::make_op_output<T>(
      x.shape(), std::move(out), {x, gamma, beta},
      [n, spatial, c, train, mean, inv_std](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& gn = *self.parents[1];
        auto& bn = *self.parents[2];
        const T* xp = xn.value.data();
        const T* g = self.grad.data();
        std::vector<double> sum_g, sum_gx;
        kernels::bn_grad_sums(n, spatial, c, g, xp, mean.data(), inv_std.data(), sum_g, sum_gx);
        if (gn.requires_grad) {
          gn.ensure_grad();
          for (int ch = 0; ch < c; ++ch) gn.grad[ch] += static_cast<T>(sum_gx[ch]);
        }
        if (bn.requires_grad) {
          bn.ensure_grad();
          for (int ch = 0; ch < c; ++ch) bn.grad[ch] += static_cast<T>(sum_g[ch]);
        }
        if (!xn.requires_grad) return;
        xn.ensure_grad();
        const T* gamma_v = gn.value.data();
        double count = static_cast<double>(n) * spatial;
        if (train) {
          std::vector<double> mg(c), mgx(c), sc(c);
          for (int ch = 0; ch < c; ++ch) {
            mg[ch] = sum_g[ch] / count;
            mgx[ch] = sum_gx[ch] / count;
            sc[ch] = static_cast<double>(gamma_v[ch]) * inv_std[ch];
          }
          threads::parallel_for(n, [&](int ni) {
            size_t base = static_cast<size_t>(ni) * spatial * c;
            for (int i = 0; i < spatial; ++i) {
              size_t off = base + static_cast<size_t>(i) * c;
              for (int ch = 0; ch < c; ++ch) {
                double xhat = (static_cast<double>(xp[off + ch]) - mean[ch]) * inv_std[ch];
                xn.grad[off + ch] += static_cast<T>(
                    sc[ch] * (static_cast<double>(g[off + ch]) - mg[ch] - xhat * mgx[ch]));
              }
            }
          });
        } else {
          std::vector<double> sc(c);
          for (int ch = 0; ch < c; ++ch) sc[ch] = static_cast<double>(gamma_v[ch]) * inv_std[ch];
          threads::parallel_for(n, [&](int ni) {
            size_t base = static_cast<size_t>(ni) * spatial * c;
            for (int i = 0; i < spatial; ++i) {
              size_t off = base + static_cast<size_t>(i) * c;
              for (int ch = 0; ch < c; ++ch)
                xn.grad[off + ch] += static_cast<T>(sc[ch] * static_cast<double>(g[off + ch]));
            }
          });
        }
      });
}

// LeakyReLU with the subgradient at 0 taken on the leaky branch.
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.3)) {
  std::vector<T> out(x.value().begin(), x.value().end());
  for (auto& v : out)
    if (v < T(0)) v *= slope;
  return detail::make_op_output<T>(x.shape(), std::move(out), {x}, [slope](detail::Node<T>& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    const T* xv = xn.value.data();
    for (size_t i = 0; i < self.grad.size(); ++i)
      xn.grad[i] += xv[i] > T(0) ? self.grad[i] : slope * self.grad[i];
  });
}

// ReLU with derivative 0 at the origin.
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.value().begin(), x.value().end());
  for (auto& v : out)
    if (v < T(0)) v = T(0);
  return detail::make_op_output<T>(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    const T* xv = xn.value.data();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (xv[i] > T(0)) xn.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.value().size());
  const T* xv = x.value().data();
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(xv[i]))));
  return detail::make_op_output<T>(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    const T* y = self.value.data();
    for (size_t i = 0; i < self.grad.size(); ++i)
      xn.grad[i] += self.grad[i] * y[i] * (T(1) - y[i]);
  });
}

// Concatenation along the channel (last) axis.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  Shape lead = xs[0].shape();
  lead.pop_back();
  int c_total = 0;
  std::vector<int> channels;
  for (const auto& t : xs) {
    Shape l = t.shape();
    if (l.empty()) throw ShapeError("concat_channels: scalar input");
    int c = l.back();
    l.pop_back();
    if (l != lead)
      throw ShapeError("concat_channels: leading dims mismatch " + shape_str(xs[0].shape()) +
                       " vs " + shape_str(t.shape()));
    channels.push_back(c);
    c_total += c;
  }
  int rows = numel(lead);
  Shape out_shape = lead;
  out_shape.push_back(c_total);
  std::vector<T> out(static_cast<size_t>(rows) * c_total);
  int off = 0;
  for (size_t k = 0; k < xs.size(); ++k) {
    const T* src = xs[k].value().data();
    int c = channels[k];
    for (int r = 0; r < rows; ++r)
      std::copy(src + static_cast<size_t>(r) * c, src + static_cast<size_t>(r + 1) * c,
                out.data() + static_cast<size_t>(r) * c_total + off);
    off += c;
  }
  return detail::make_op_output<T>(
      std::move(out_shape), std::move(out), xs,
      [rows, c_total, channels](detail::Node<T>& self) {
        int off = 0;
        for (size_t k = 0; k < self.parents.size(); ++k) {
          auto& p = *self.parents[k];
          int c = channels[k];
          if (p.requires_grad) {
            p.ensure_grad();
            for (int r = 0; r < rows; ++r) {
              const T* g = self.grad.data() + static_cast<size_t>(r) * c_total + off;
              T* dst = p.grad.data() + static_cast<size_t>(r) * c;
              for (int i = 0; i < c; ++i) dst[i] += g[i];
            }
          }
          off += c;
        }
      });
}

// Elementwise product. Either both shapes match, or b has channel dim 1 with
// matching leading dims and broadcasts across a's channel axis.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  bool broadcast = false;
  if (a.shape() != b.shape()) {
    Shape la = a.shape(), lb = b.shape();
    if (la.empty() || lb.empty() || lb.back() != 1 ||
        Shape(la.begin(), la.end() - 1) != Shape(lb.begin(), lb.end() - 1))
      throw ShapeError("mul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                       " are neither equal nor channel-broadcastable");
    broadcast = true;
  }
  int c = a.shape().empty() ? 1 : a.shape().back();
  int rows = a.size() / c;
  std::vector<T> out(static_cast<size_t>(a.size()));
  const T* av = a.value().data();
  const T* bv = b.value().data();
  if (!broadcast) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  } else {
    for (int r = 0; r < rows; ++r) {
      T bvr = bv[r];
      const T* ap = av + static_cast<size_t>(r) * c;
      T* op = out.data() + static_cast<size_t>(r) * c;
      for (int ch = 0; ch < c; ++ch) op[ch] = ap[ch] * bvr;
    }
  }
  return detail::make_op_output<T>(
      a.shape(), std::move(out), {a, b}, [broadcast, rows, c](detail::Node<T>& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        const T* g = self.grad.data();
        if (!broadcast) {
          if (an.requires_grad) {
            an.ensure_grad();
            const T* bv = bn.value.data();
            for (size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += g[i] * bv[i];
          }
          if (bn.requires_grad) {
            bn.ensure_grad();
            const T* av = an.value.data();
            for (size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] += g[i] * av[i];
          }
        } else {
          if (an.requires_grad) {
            an.ensure_grad();
            const T* bv = bn.value.data();
            for (int r = 0; r < rows; ++r) {
              T bvr = bv[r];
              size_t base = static_cast<size_t>(r) * c;
              for (int ch = 0; ch < c; ++ch) an.grad[base + ch] += g[base + ch] * bvr;
            }
          }
          if (bn.requires_grad) {
            bn.ensure_grad();
            const T* av = an.value.data();
            for (int r = 0; r < rows; ++r) {
              size_t base = static_cast<size_t>(r) * c;
              double s = 0.0;
              for (int ch = 0; ch < c; ++ch)
                s += static_cast<double>(g[base + ch]) * static_cast<double>(av[base + ch]);
              bn.grad[r] += static_cast<T>(s);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<T> out(a.value().size());
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return detail::make_op_output<T>(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *self.parents[k];
      if (p.requires_grad) detail::accumulate(p, self.grad.data(), self.grad.size());
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<T> out(a.value().size());
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return detail::make_op_output<T>(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    auto& an = *self.parents[0];
    auto& bn = *self.parents[1];
    if (an.requires_grad) detail::accumulate(an, self.grad.data(), self.grad.size());
    if (bn.requires_grad) {
      bn.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.value().size());
  const T* av = a.value().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return detail::make_op_output<T>(a.shape(), std::move(out), {a}, [s](detail::Node<T>& self) {
    auto& an = *self.parents[0];
    if (!an.requires_grad) return;
    an.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i] * s;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.value().size());
  const T* av = a.value().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + s;
  return detail::make_op_output<T>(a.shape(), std::move(out), {a}, [](detail::Node<T>& self) {
    auto& an = *self.parents[0];
    if (an.requires_grad) detail::accumulate(an, self.grad.data(), self.grad.size());
  });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return mul_scalar(a, T(-1));
}

// Scalar division a / b for {1}-shaped tensors.
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != 1 || b.size() != 1) throw ShapeError("div: scalar tensors only");
  T out = a.value()[0] / b.value()[0];
  return detail::make_op_output<T>(Shape{1}, std::vector<T>{out}, {a, b},
                                   [](detail::Node<T>& self) {
                                     auto& an = *self.parents[0];
                                     auto& bn = *self.parents[1];
                                     T av = an.value[0], bv = bn.value[0];
                                     T g = self.grad[0];
                                     if (an.requires_grad) {
                                       an.ensure_grad();
                                       an.grad[0] += g / bv;
                                     }
                                     if (bn.requires_grad) {
                                       bn.ensure_grad();
                                       bn.grad[0] -= g * av / (bv * bv);
                                     }
                                   });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  std::vector<T> out(a.value().size());
  const T* av = a.value().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] < T(0) ? -av[i] : av[i];
  return detail::make_op_output<T>(a.shape(), std::move(out), {a}, [](detail::Node<T>& self) {
    auto& an = *self.parents[0];
    if (!an.requires_grad) return;
    an.ensure_grad();
    const T* av = an.value.data();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      if (av[i] > T(0))
        an.grad[i] += self.grad[i];
      else if (av[i] < T(0))
        an.grad[i] -= self.grad[i];
    }
  });
}

// Full reduction to a {1} scalar; accumulates in double.
template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double s = 0.0;
  for (T v : a.value()) s += static_cast<double>(v);
  return detail::make_op_output<T>(Shape{1}, std::vector<T>{static_cast<T>(s)}, {a},
                                   [](detail::Node<T>& self) {
                                     auto& an = *self.parents[0];
                                     if (!an.requires_grad) return;
                                     an.ensure_grad();
                                     T g = self.grad[0];
                                     for (auto& gv : an.grad) gv += g;
                                   });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  double s = 0.0;
  for (T v : a.value()) s += static_cast<double>(v);
  size_t n = a.value().size();
  return detail::make_op_output<T>(Shape{1},
                                   std::vector<T>{static_cast<T>(s / static_cast<double>(n))}, {a},
                                   [n](detail::Node<T>& self) {
                                     auto& an = *self.parents[0];
                                     if (!an.requires_grad) return;
                                     an.ensure_grad();
                                     T g = static_cast<T>(static_cast<double>(self.grad[0]) /
                                                          static_cast<double>(n));
                                     for (auto& gv : an.grad) gv += g;
                                   });
}

// Selects one entry along the leading axis; gradients scatter back into the
// matching slot.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, int index) {
  if (x.rank() < 2) throw ShapeError("slice_batch: rank >= 2 required");
  int n = x.shape()[0];
  if (index < 0 || index >= n) throw ShapeError("slice_batch: index out of range");
  Shape out_shape(x.shape().begin() + 1, x.shape().end());
  size_t stride = static_cast<size_t>(numel(out_shape));
  const T* src = x.value().data() + static_cast<size_t>(index) * stride;
  std::vector<T> out(src, src + stride);
  return detail::make_op_output<T>(std::move(out_shape), std::move(out), {x},
                                   [index, stride](detail::Node<T>& self) {
                                     auto& xn = *self.parents[0];
                                     if (!xn.requires_grad) return;
                                     xn.ensure_grad();
                                     T* dst = xn.grad.data() + static_cast<size_t>(index) * stride;
                                     for (size_t i = 0; i < stride; ++i) dst[i] += self.grad[i];
                                   });
}

}  // namespace segan
