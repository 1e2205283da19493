#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "segan/gradcheck.hpp"
#include "segan/ops.hpp"
#include "segan/rng.hpp"

using namespace segan;

namespace {

Tensor<double> rand_tensor(Rng& rng, Shape s, double lo, double hi, bool grad = false) {
  std::vector<double> v(size_t(numel(s)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>::from(std::move(s), std::move(v), grad);
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("conv2d reproduces a hand-computed ramp") {
  // 4x4 ramp 0..15 under a 3x3 all-ones kernel, valid padding: each output is
  // the 3x3 window sum.
  std::vector<double> xv(16);
  for (int i = 0; i < 16; ++i) xv[size_t(i)] = i;
  auto x = Tensor<double>::from({4, 4, 1}, std::move(xv));
  auto w = Tensor<double>::full({3, 3, 1, 1}, 1.0);
  auto b = Tensor<double>::zeros({1});
  auto y = conv2d(x, w, b, 1, Padding::Valid);
  REQUIRE(y.shape() == Shape{2, 2, 1});
  CHECK(y.value()[0] == 45.0);
  CHECK(y.value()[1] == 54.0);
  CHECK(y.value()[2] == 81.0);
  CHECK(y.value()[3] == 90.0);
}

TEST_CASE("conv2d matches the loop oracle on random cases") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 1 + rng.below(2), h = 3 + rng.below(8), w = 3 + rng.below(8);
    const int ci = 1 + rng.below(3), co = 1 + rng.below(3);
    const int k = rng.below(2) ? 3 : 4;
    const int stride = 1 + rng.below(2);
    const bool same = rng.below(2) == 0;
    if (!same && (h < k || w < k)) continue;

    auto x = rand_tensor(rng, {n, h, w, ci}, -1.0, 1.0);
    auto wt = rand_tensor(rng, {k, k, ci, co}, -1.0, 1.0);
    auto b = rand_tensor(rng, {co}, -0.5, 0.5);
    auto y = conv2d(x, wt, b, stride, same ? Padding::Same : Padding::Valid);

    int ho, wo, pt, pl;
    if (same) {
      ho = (h + stride - 1) / stride;
      wo = (w + stride - 1) / stride;
      int th = std::max(0, (ho - 1) * stride + k - h);
      int tw = std::max(0, (wo - 1) * stride + k - w);
      pt = th / 2;
      pl = tw / 2;
    } else {
      ho = (h - k) / stride + 1;
      wo = (w - k) / stride + 1;
      pt = pl = 0;
    }
    auto ref = oracle::conv2d(to_vec(x.value()), n, h, w, ci, to_vec(wt.value()), k, k, co,
                              to_vec(b.value()), stride, pt, pl, ho, wo);
    REQUIRE(y.shape() == Shape{n, ho, wo, co});
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(y.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("same padding yields ceil(extent/stride) outputs across sizes") {
  Rng rng(5);
  for (int h = 1; h <= 256; h += (h < 40 ? 1 : 7)) {
    const int stride = 1 + rng.below(2);
    auto x = rand_tensor(rng, {h, 5, 1}, -1.0, 1.0);
    auto w = rand_tensor(rng, {4, 4, 1, 1}, -0.5, 0.5);
    auto b = Tensor<double>::zeros({1});
    auto y = conv2d(x, w, b, stride, Padding::Same);
    CHECK(y.shape()[0] == (h + stride - 1) / stride);
    CHECK(y.shape()[1] == (5 + stride - 1) / stride);
  }
}

TEST_CASE("upsample matches the scalar bilinear oracle") {
  Rng rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 1 + rng.below(2), h = 1 + rng.below(7), w = 1 + rng.below(7);
    const int c = 1 + rng.below(3);
    auto x = rand_tensor(rng, {n, h, w, c}, -2.0, 2.0);
    auto y = upsample_bilinear2x(x);
    REQUIRE(y.shape() == Shape{n, 2 * h, 2 * w, c});
    auto ref = oracle::upsample2x(to_vec(x.value()), n, h, w, c);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(y.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("upsample preserves a constant field exactly") {
  auto x = Tensor<float>::full({3, 5, 2}, 0.73f);
  auto y = upsample_bilinear2x(x);
  for (float v : y.value()) CHECK(v == 0.73f);
}

TEST_CASE("batch norm normalizes a two-point batch") {
  // Batch {1, 3}: mean 2, biased variance 1, so outputs are +-1/sqrt(1+eps)
  // and the running stats move a 0.1 step toward (2, 1).
  auto x = Tensor<double>::from({2, 1, 1, 1}, {1.0, 3.0});
  auto gamma = Tensor<double>::full({1}, 1.0);
  auto beta = Tensor<double>::zeros({1});
  auto rm = Tensor<double>::zeros({1});
  auto rv = Tensor<double>::full({1}, 1.0);
  auto y = batch_norm(x, gamma, beta, rm, rv, Mode::Train, 1e-5, 0.1);
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(y.value()[0] == doctest::Approx(-expect).epsilon(1e-12));
  CHECK(y.value()[1] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(rm.value()[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(rv.value()[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("batch norm training output is standardized per channel") {
  Rng rng(17);
  auto x = rand_tensor(rng, {4, 3, 3, 2}, -3.0, 5.0);
  auto gamma = Tensor<double>::full({2}, 1.0);
  auto beta = Tensor<double>::zeros({2});
  auto rm = Tensor<double>::zeros({2});
  auto rv = Tensor<double>::full({2}, 1.0);
  auto y = batch_norm(x, gamma, beta, rm, rv, Mode::Train, 1e-5, 0.1);
  for (int c = 0; c < 2; ++c) {
    double sum = 0, sq = 0;
    int count = 0;
    for (int i = c; i < y.size(); i += 2) {
      sum += y.value()[size_t(i)];
      sq += y.value()[size_t(i)] * y.value()[size_t(i)];
      ++count;
    }
    double mean = sum / count;
    double var = sq / count - mean * mean;
    CHECK(std::fabs(mean) < 1e-5);
    CHECK(std::fabs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("batch norm inference uses only the running stats") {
  Rng rng(19);
  auto x = rand_tensor(rng, {2, 2, 2, 1}, -1.0, 1.0);
  auto gamma = Tensor<double>::full({1}, 2.0);
  auto beta = Tensor<double>::full({1}, 0.5);
  auto rm = Tensor<double>::full({1}, 0.25);
  auto rv = Tensor<double>::full({1}, 4.0);
  auto y = batch_norm(x, gamma, beta, rm, rv, Mode::Infer, 1e-5, 0.1);
  for (int i = 0; i < x.size(); ++i) {
    double expect = 2.0 * (x.value()[size_t(i)] - 0.25) / std::sqrt(4.0 + 1e-5) + 0.5;
    CHECK(y.value()[size_t(i)] == doctest::Approx(expect).epsilon(1e-12));
  }
  // stats untouched in inference
  CHECK(rm.value()[0] == 0.25);
  CHECK(rv.value()[0] == 4.0);
}

TEST_CASE("batch norm honors update_stats=false") {
  auto x = Tensor<double>::from({2, 1, 1, 1}, {1.0, 3.0});
  auto gamma = Tensor<double>::full({1}, 1.0);
  auto beta = Tensor<double>::zeros({1});
  auto rm = Tensor<double>::zeros({1});
  auto rv = Tensor<double>::full({1}, 1.0);
  batch_norm(x, gamma, beta, rm, rv, Mode::Train, 1e-5, 0.1, /*update_stats=*/false);
  CHECK(rm.value()[0] == 0.0);
  CHECK(rv.value()[0] == 1.0);
}

TEST_CASE("activation values follow their definitions") {
  auto x = Tensor<double>::from({4}, {-2.0, -0.5, 0.0, 1.5});
  auto l = leaky_relu(x, 0.3);
  CHECK(l.value()[0] == doctest::Approx(-0.6));
  CHECK(l.value()[1] == doctest::Approx(-0.15));
  CHECK(l.value()[2] == 0.0);
  CHECK(l.value()[3] == 1.5);
  auto r = relu(x);
  CHECK(r.value()[0] == 0.0);
  CHECK(r.value()[3] == 1.5);
  auto s = sigmoid(x);
  for (int i = 0; i < 4; ++i)
    CHECK(s.value()[size_t(i)] ==
          doctest::Approx(1.0 / (1.0 + std::exp(-x.value()[size_t(i)]))).epsilon(1e-12));
  auto a = abs(x);
  CHECK(a.value()[0] == 2.0);
  CHECK(a.value()[1] == 0.5);
}

TEST_CASE("multiplying by ones is a bit-exact identity") {
  Rng rng(23);
  auto x = rand_tensor(rng, {3, 4, 2}, -5.0, 5.0);
  auto ones = Tensor<double>::full({3, 4, 2}, 1.0);
  auto y = mul(x, ones);
  for (int i = 0; i < x.size(); ++i) CHECK(y.value()[size_t(i)] == x.value()[size_t(i)]);
}

TEST_CASE("concatenating one tensor is a bit-exact identity") {
  Rng rng(29);
  auto x = rand_tensor(rng, {2, 3, 3, 2}, -5.0, 5.0);
  auto y = concat_channels<double>({x});
  REQUIRE(y.shape() == x.shape());
  for (int i = 0; i < x.size(); ++i) CHECK(y.value()[size_t(i)] == x.value()[size_t(i)]);
}

TEST_CASE("concat interleaves channels in order") {
  auto a = Tensor<double>::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto b = Tensor<double>::from({1, 1, 2, 1}, {9, 8});
  auto y = concat_channels<double>({a, b});
  REQUIRE(y.shape() == Shape{1, 1, 2, 3});
  std::vector<double> expect = {1, 2, 9, 3, 4, 8};
  for (size_t i = 0; i < expect.size(); ++i) CHECK(y.value()[i] == expect[i]);
  CHECK_THROWS_AS(concat_channels<double>({a, Tensor<double>::zeros({1, 2, 2, 1})}), ShapeError);
}

TEST_CASE("broadcast multiply expands the single-channel factor") {
  auto a = Tensor<double>::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto m = Tensor<double>::from({1, 1, 2, 1}, {10, 100});
  auto y = mul(a, m);
  std::vector<double> expect = {10, 20, 300, 400};
  for (size_t i = 0; i < expect.size(); ++i) CHECK(y.value()[i] == expect[i]);
}

TEST_CASE("reductions and slicing") {
  auto x = Tensor<double>::from({2, 1, 1, 2}, {1, 2, 3, 4});
  CHECK(sum(x).item() == 10.0);
  CHECK(mean(x).item() == 2.5);
  auto s0 = slice_batch(x, 0);
  REQUIRE(s0.shape() == Shape{1, 1, 2});
  CHECK(s0.value()[0] == 1.0);
  CHECK(s0.value()[1] == 2.0);
  auto s1 = slice_batch(x, 1);
  CHECK(s1.value()[0] == 3.0);
  CHECK(s1.value()[1] == 4.0);
}

TEST_CASE("finite differences confirm conv and batch norm gradients") {
  Rng rng(31);
  {
    std::vector<GradCheckInput> ins = {{"x", {1, 5, 5, 2}, {}},
                                       {"w", {3, 3, 2, 2}, {}},
                                       {"b", {2}, {}}};
    for (auto& in : ins) {
      in.values.resize(size_t(numel(in.shape)));
      for (auto& v : in.values) v = rng.uniform(-1.0, 1.0);
    }
    auto rep = grad_check<double>(
        [](const auto& t) { return sum(conv2d(t[0], t[1], t[2], 2, Padding::Same)); }, ins,
        1e-5, 1e-6);
    CHECK(rep.pass());
  }
  {
    std::vector<GradCheckInput> ins = {{"x", {3, 2, 2, 1}, {}},
                                       {"gamma", {1}, {1.3}},
                                       {"beta", {1}, {-0.2}}};
    ins[0].values.resize(12);
    for (auto& v : ins[0].values) v = rng.uniform(-1.0, 1.0);
    auto rep = grad_check<double>(
        [](const auto& t) {
          auto rm = Tensor<double>::zeros({1});
          auto rv = Tensor<double>::full({1}, 1.0);
          return sum(mul(batch_norm(t[0], t[1], t[2], rm, rv, Mode::Train, 1e-5, 0.1), t[0]));
        },
        ins, 1e-5, 1e-6);
    CHECK(rep.pass());
  }
}

TEST_CASE("shape errors name the operation") {
  auto x = Tensor<float>::from({2, 2, 1}, {1, 2, 3, 4});
  auto w = Tensor<float>::zeros({3, 3, 2, 1});
  auto b = Tensor<float>::zeros({1});
  CHECK_THROWS_WITH_AS(conv2d(x, w, b, 1, Padding::Same),
                       doctest::Contains("conv2d"), ShapeError);
  CHECK_THROWS_AS(add(x, Tensor<float>::zeros({2, 2, 2})), ShapeError);
}
