#include "segan/gradsuite.hpp"

#include <chrono>
#include <cmath>

#include "segan/gradcheck.hpp"
#include "segan/losses.hpp"
#include "segan/ops.hpp"
#include "segan/rng.hpp"

namespace segan {

namespace {

constexpr double kTol32 = 1e-4;
constexpr double kTol64 = 1e-6;

std::vector<double> draw(Rng& rng, const Shape& shape, double lo, double hi) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// values bounded away from zero for ops with a kink at the origin
std::vector<double> draw_off_zero(Rng& rng, const Shape& shape) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) {
    const double mag = rng.uniform(0.1, 1.2);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return v;
}

// a fixed pseudo-random linear functional of the op output makes per-element gradient
// errors visible instead of averaging out
template <typename T>
Tensor<T> weighted(const Tensor<T>& t, const std::vector<double>& w) {
  std::vector<T> wv(w.size());
  for (size_t i = 0; i < w.size(); ++i) wv[i] = T(w[i]);
  return sum(mul(t, Tensor<T>::from(t.shape(), std::move(wv))));
}

struct Suite {
  Rng rng;
  GradSuiteResult result;

  explicit Suite(uint64_t seed) : rng(seed, 9) {}

  template <typename F>
  void run_case(const std::string& op, const std::vector<GradCheckInput>& inputs, F&& f) {
    auto rep64 = grad_check<double>(f, inputs, 1e-5, kTol64);
    auto rep32 = grad_check<float>(f, inputs, 1e-3, kTol32);
    GradSuiteCase* c = nullptr;
    for (auto& existing : result.cases)
      if (existing.op == op) c = &existing;
    if (!c) {
      result.cases.push_back({op, 0.0, 0.0, true});
      c = &result.cases.back();
    }
    c->err64 = std::max(c->err64, rep64.max_rel_err);
    c->err32 = std::max(c->err32, rep32.max_rel_err);
    result.total_shapes += 1;
  }
};

}  // namespace

GradSuiteResult run_gradient_suite(uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Suite s(seed);
  Rng& rng = s.rng;

  for (int rep = 0; rep < 2; ++rep) {
    // convolution: both strides, both paddings, batched and unbatched
    for (int stride : {1, 2}) {
      for (Padding pad : {Padding::Same, Padding::Valid}) {
        const int n = 1 + rng.below(2), h = 5 + rng.below(3), w = 5 + rng.below(3);
        const int ci = 1 + rng.below(2), co = 1 + rng.below(3), k = 3;
        Shape xs = n == 1 ? Shape{h, w, ci} : Shape{n, h, w, ci};
        std::vector<GradCheckInput> ins = {
            {"x", xs, draw(rng, xs, -1.5, 1.5)},
            {"w", {k, k, ci, co}, draw(rng, {k, k, ci, co}, -1.0, 1.0)},
            {"b", {co}, draw(rng, {co}, -0.5, 0.5)}};
        // a forward probe fixes the output shape for the weighting functional
        Tensor<double> probe = conv2d(Tensor<double>::zeros(xs),
                                      Tensor<double>::zeros({k, k, ci, co}),
                                      Tensor<double>::zeros({co}), stride, pad);
        auto wts = draw(rng, probe.shape(), -1.0, 1.0);
        const std::string name =
            std::string("conv2d_s") + std::to_string(stride) +
            (pad == Padding::Same ? "_same" : "_valid");
        s.run_case(name, ins, [stride, pad, wts](const auto& t) {
          return weighted(conv2d(t[0], t[1], t[2], stride, pad), wts);
        });
      }
    }

    // bilinear upsampling
    {
      const int n = 1 + rng.below(3), h = 3 + rng.below(4), w = 3 + rng.below(4);
      const int c = 1 + rng.below(3);
      Shape xs = {n, h, w, c};
      std::vector<GradCheckInput> ins = {{"x", xs, draw(rng, xs, -1.5, 1.5)}};
      auto wts = draw(rng, {n, 2 * h, 2 * w, c}, -1.0, 1.0);
      s.run_case("upsample_bilinear2x", ins, [wts](const auto& t) {
        return weighted(upsample_bilinear2x(t[0]), wts);
      });
    }

    // batch norm, training statistics
    {
      const int n = 2 + rng.below(2), h = 3 + rng.below(3), w = 3 + rng.below(3);
      const int c = 1 + rng.below(3);
      Shape xs = {n, h, w, c};
      std::vector<GradCheckInput> ins = {{"x", xs, draw(rng, xs, -1.5, 1.5)},
                                         {"gamma", {c}, draw(rng, {c}, 0.5, 1.5)},
                                         {"beta", {c}, draw(rng, {c}, -0.5, 0.5)}};
      auto wts = draw(rng, xs, -1.0, 1.0);
      s.run_case("batch_norm_train", ins, [wts](const auto& t) {
        using T = typename std::decay_t<decltype(t[0])>::Scalar;
        auto rm = Tensor<T>::zeros({t[1].shape()[0]});
        auto rv = Tensor<T>::full({t[1].shape()[0]}, T(1));
        return weighted(
            batch_norm(t[0], t[1], t[2], rm, rv, Mode::Train, T(1e-5), T(0.1)), wts);
      });
    }

    // batch norm, inference statistics
    {
      const int n = 1 + rng.below(2), h = 3 + rng.below(3), w = 3 + rng.below(3);
      const int c = 1 + rng.below(3);
      Shape xs = {n, h, w, c};
      std::vector<GradCheckInput> ins = {{"x", xs, draw(rng, xs, -1.5, 1.5)},
                                         {"gamma", {c}, draw(rng, {c}, 0.5, 1.5)},
                                         {"beta", {c}, draw(rng, {c}, -0.5, 0.5)}};
      auto rm = draw(rng, {c}, -0.5, 0.5);
      auto rv = draw(rng, {c}, 0.5, 2.0);
      auto wts = draw(rng, xs, -1.0, 1.0);
      s.run_case("batch_norm_infer", ins, [rm, rv, wts](const auto& t) {
        using T = typename std::decay_t<decltype(t[0])>::Scalar;
        const int c = t[1].shape()[0];
        std::vector<T> rmv(rm.size()), rvv(rv.size());
        for (size_t i = 0; i < rm.size(); ++i) rmv[i] = T(rm[i]);
        for (size_t i = 0; i < rv.size(); ++i) rvv[i] = T(rv[i]);
        auto rmt = Tensor<T>::from({c}, std::move(rmv));
        auto rvt = Tensor<T>::from({c}, std::move(rvv));
        return weighted(
            batch_norm(t[0], t[1], t[2], rmt, rvt, Mode::Infer, T(1e-5), T(0.1)), wts);
      });
    }

    // activations (kinked inputs kept away from the origin)
    {
      Shape xs = {2 + rng.below(2), 3 + rng.below(4), 4, 2};
      auto wts = draw(rng, xs, -1.0, 1.0);
      std::vector<GradCheckInput> ins = {{"x", xs, draw_off_zero(rng, xs)}};
      s.run_case("leaky_relu", ins,
                 [wts](const auto& t) { return weighted(leaky_relu(t[0]), wts); });
      ins[0].values = draw_off_zero(rng, xs);
      s.run_case("relu", ins, [wts](const auto& t) { return weighted(relu(t[0]), wts); });
      ins[0].values = draw_off_zero(rng, xs);
      s.run_case("abs", ins, [wts](const auto& t) { return weighted(abs(t[0]), wts); });
      ins[0].values = draw(rng, xs, -2.0, 2.0);
      s.run_case("sigmoid", ins,
                 [wts](const auto& t) { return weighted(sigmoid(t[0]), wts); });
    }

    // channel concatenation
    {
      const int n = 1 + rng.below(2), h = 3 + rng.below(3), w = 3;
      const int c1 = 1 + rng.below(2), c2 = 1 + rng.below(3), c3 = 1;
      Shape s1 = {n, h, w, c1}, s2 = {n, h, w, c2}, s3 = {n, h, w, c3};
      std::vector<GradCheckInput> ins = {{"a", s1, draw(rng, s1, -1.0, 1.0)},
                                         {"b", s2, draw(rng, s2, -1.0, 1.0)},
                                         {"c", s3, draw(rng, s3, -1.0, 1.0)}};
      auto wts = draw(rng, {n, h, w, c1 + c2 + c3}, -1.0, 1.0);
      s.run_case("concat_channels", ins, [wts](const auto& t) {
        using Tt = std::decay_t<decltype(t[0])>;
        return weighted(concat_channels(std::vector<Tt>{t[0], t[1], t[2]}), wts);
      });
    }

    // arithmetic
    {
      Shape xs = {2, 3 + rng.below(3), 3, 2};
      auto wts = draw(rng, xs, -1.0, 1.0);
      std::vector<GradCheckInput> two = {{"a", xs, draw(rng, xs, -1.5, 1.5)},
                                         {"b", xs, draw(rng, xs, -1.5, 1.5)}};
      s.run_case("add", two, [wts](const auto& t) { return weighted(add(t[0], t[1]), wts); });
      s.run_case("sub", two, [wts](const auto& t) { return weighted(sub(t[0], t[1]), wts); });
      s.run_case("mul", two, [wts](const auto& t) { return weighted(mul(t[0], t[1]), wts); });

      Shape bs = xs;
      bs.back() = 1;
      std::vector<GradCheckInput> bc = {{"a", xs, draw(rng, xs, -1.5, 1.5)},
                                        {"m", bs, draw(rng, bs, -1.5, 1.5)}};
      s.run_case("mul_broadcast", bc,
                 [wts](const auto& t) { return weighted(mul(t[0], t[1]), wts); });

      std::vector<GradCheckInput> one = {{"a", xs, draw(rng, xs, -1.5, 1.5)}};
      const double sc = rng.uniform(-2.0, 2.0);
      s.run_case("mul_scalar", one, [wts, sc](const auto& t) {
        using T = typename std::decay_t<decltype(t[0])>::Scalar;
        return weighted(mul_scalar(t[0], T(sc)), wts);
      });
      s.run_case("add_scalar", one, [wts, sc](const auto& t) {
        using T = typename std::decay_t<decltype(t[0])>::Scalar;
        return weighted(add_scalar(t[0], T(sc)), wts);
      });
      s.run_case("neg", one, [wts](const auto& t) { return weighted(neg(t[0]), wts); });
      s.run_case("sum", one, [](const auto& t) { return sum(t[0]); });
      s.run_case("mean", one, [](const auto& t) { return mean(t[0]); });

      std::vector<GradCheckInput> scalars = {{"a", {1}, draw(rng, {1}, -2.0, 2.0)},
                                             {"b", {1}, draw_off_zero(rng, {1})}};
      scalars[1].values[0] = scalars[1].values[0] < 0 ? scalars[1].values[0] - 0.3
                                                      : scalars[1].values[0] + 0.3;
      s.run_case("div", scalars, [](const auto& t) { return div(t[0], t[1]); });

      const int idx = rng.below(xs[0]);
      Shape slice_shape(xs.begin() + 1, xs.end());
      auto swts = draw(rng, slice_shape, -1.0, 1.0);
      s.run_case("slice_batch", one, [swts, idx](const auto& t) {
        return weighted(slice_batch(t[0], idx), swts);
      });
    }

    // losses
    {
      // multiscale feature-matching mean absolute error over a two-level list
      Shape f1 = {2, 4, 4, 2}, f2 = {2, 2, 2, 3};
      std::vector<GradCheckInput> ins = {{"a1", f1, draw(rng, f1, -1.0, 1.0)},
                                         {"a2", f2, draw(rng, f2, -1.0, 1.0)},
                                         {"b1", f1, draw(rng, f1, -1.0, 1.0)},
                                         {"b2", f2, draw(rng, f2, -1.0, 1.0)}};
      // keep |a-b| away from zero where the absolute value kinks
      for (size_t i = 0; i < ins[0].values.size(); ++i)
        if (std::fabs(ins[0].values[i] - ins[2].values[i]) < 0.05) ins[0].values[i] += 0.1;
      for (size_t i = 0; i < ins[1].values.size(); ++i)
        if (std::fabs(ins[1].values[i] - ins[3].values[i]) < 0.05) ins[1].values[i] += 0.1;
      s.run_case("multiscale_mae", ins, [](const auto& t) {
        using Tt = std::decay_t<decltype(t[0])>;
        return multiscale_mae(std::vector<Tt>{t[0], t[1]}, std::vector<Tt>{t[2], t[3]});
      });

      // dice against a fixed binary mask, prediction strictly inside (0,1)
      const int h = 4 + rng.below(3), w = 4 + rng.below(3);
      Shape ps = {h, w, 1};
      std::vector<GradCheckInput> pin = {{"p", ps, draw(rng, ps, 0.1, 0.9)}};
      std::vector<double> gv(numel(ps));
      for (auto& g : gv) g = rng.uniform() < 0.4 ? 1.0 : 0.0;
      gv[0] = 1.0;  // nonempty truth
      s.run_case("dice_loss", pin, [gv](const auto& t) {
        using T = typename std::decay_t<decltype(t[0])>::Scalar;
        std::vector<T> gt(gv.size());
        for (size_t i = 0; i < gv.size(); ++i) gt[i] = T(gv[i]);
        return dice_loss(Tensor<T>::from(t[0].shape(), std::move(gt)), t[0]);
      });

      Shape bs = {2, h, w, 1};
      std::vector<GradCheckInput> bin = {{"p", bs, draw(rng, bs, 0.1, 0.9)}};
      std::vector<double> bgv(numel(bs));
      for (auto& g : bgv) g = rng.uniform() < 0.4 ? 1.0 : 0.0;
      bgv[0] = 1.0;
      bgv[size_t(numel(bs)) / 2] = 1.0;  // both samples have truth
      s.run_case("batch_dice_loss", bin, [bgv](const auto& t) {
        using T = typename std::decay_t<decltype(t[0])>::Scalar;
        std::vector<T> gt(bgv.size());
        for (size_t i = 0; i < bgv.size(); ++i) gt[i] = T(bgv[i]);
        return batch_dice_loss(Tensor<T>::from(t[0].shape(), std::move(gt)), t[0]);
      });
    }

    // composite: one encoder-style step, conv -> batch norm -> leaky relu
    {
      Shape xs = {2, 6, 6, 2};
      std::vector<GradCheckInput> ins = {
          {"x", xs, draw(rng, xs, -1.5, 1.5)},
          {"w", {4, 4, 2, 3}, draw(rng, {4, 4, 2, 3}, -0.8, 0.8)},
          {"b", {3}, draw(rng, {3}, -0.3, 0.3)},
          {"gamma", {3}, draw(rng, {3}, 0.5, 1.5)},
          {"beta", {3}, draw(rng, {3}, -0.5, 0.5)}};
      auto wts = draw(rng, {2, 3, 3, 3}, -1.0, 1.0);
      s.run_case("encoder_block", ins, [wts](const auto& t) {
        using T = typename std::decay_t<decltype(t[0])>::Scalar;
        auto rm = Tensor<T>::zeros({3});
        auto rv = Tensor<T>::full({3}, T(1));
        auto y = conv2d(t[0], t[1], t[2], 2, Padding::Same);
        return weighted(
            leaky_relu(batch_norm(y, t[3], t[4], rm, rv, Mode::Train, T(1e-5), T(0.1))),
            wts);
      });
    }
  }

  bool all = true;
  for (auto& c : s.result.cases) {
    c.pass = c.err32 < kTol32 && c.err64 < kTol64;
    all = all && c.pass;
  }
  s.result.pass = all;
  s.result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s.result;
}

}  // namespace segan
