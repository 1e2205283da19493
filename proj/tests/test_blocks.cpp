#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "segan/blocks.hpp"

using namespace segan;

namespace {

Tensor<float> rand_image(Rng& rng, Shape s) {
  std::vector<float> v(size_t(numel(s)));
  for (auto& x : v) x = float(rng.uniform(-1.0, 1.0));
  return Tensor<float>::from(std::move(s), std::move(v));
}

}  // namespace

TEST_CASE("encoder blocks halve and decoder blocks double the extent") {
  Rng rng(1);
  auto s_in = Block<float>::make(BlockKind::SegIn, "S/in", 4, 8, rng);
  auto y = s_in.apply(rand_image(rng, {64, 64, 4}), Mode::Train);
  CHECK(y.shape() == Shape{32, 32, 8});

  auto s_enc = Block<float>::make(BlockKind::SegEnc, "S/enc1", 8, 16, rng);
  CHECK(s_enc.apply(y, Mode::Train).shape() == Shape{16, 16, 16});

  auto s_dec = Block<float>::make(BlockKind::SegDec, "S/dec1", 16, 8, rng);
  auto up = s_dec.apply(rand_image(rng, {8, 8, 16}), Mode::Train);
  CHECK(up.shape() == Shape{16, 16, 8});

  auto d_in = Block<float>::make(BlockKind::DiscIn, "D/in", 5, 8, rng);
  CHECK(d_in.apply(rand_image(rng, {64, 64, 5}), Mode::Train).shape() == Shape{32, 32, 8});
}

TEST_CASE("output block squashes into the open unit interval") {
  Rng rng(2);
  auto s_out = Block<float>::make(BlockKind::SegOut, "S/out", 8, 1, rng);
  auto y = s_out.apply(rand_image(rng, {8, 8, 8}), Mode::Infer);
  CHECK(y.shape() == Shape{16, 16, 1});
  for (float v : y.value()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("input blocks use the 0.3 leaky slope") {
  Rng rng(3);
  auto b = Block<float>::make(BlockKind::SegIn, "S/in", 1, 1, rng);
  // force a strongly negative pre-activation with an all-ones kernel on a
  // negative constant input
  for (auto& w : b.conv_w.tensor.value_mut()) w = 1.0f;
  auto x = Tensor<float>::full({8, 8, 1}, -1.0f);
  auto y = b.apply(x, Mode::Infer);
  // output (1,1) of the stride-2 conv sees the full 4x4 window: pre-activation -16
  float interior = y.value()[1 * 4 + 1];
  CHECK(interior == doctest::Approx(-16.0f * 0.3f));
}

TEST_CASE("parameter names are deterministic and kind-specific") {
  auto plain = Block<float>::param_names(BlockKind::SegIn);
  CHECK(plain == std::vector<std::string>{"conv/w", "conv/b"});
  auto bn = Block<float>::param_names(BlockKind::SegEnc);
  CHECK(bn == std::vector<std::string>{"conv/w", "conv/b", "bn/gamma", "bn/beta", "bn/mean",
                                       "bn/var"});
  CHECK(Block<float>::param_names(BlockKind::SegOut) ==
        std::vector<std::string>{"conv/w", "conv/b"});
  CHECK(Block<float>::param_names(BlockKind::DiscEnc) == bn);
  CHECK(Block<float>::param_names(BlockKind::SegEnc) == bn);
}

TEST_CASE("discriminator conv weights carry clip bounds, segmentator none") {
  Rng rng(4);
  auto d = Block<float>::make(BlockKind::DiscEnc, "D/enc1", 4, 8, rng);
  REQUIRE(d.conv_w.clip_bounds.has_value());
  CHECK(d.conv_w.clip_bounds->first == -0.05f);
  CHECK(d.conv_w.clip_bounds->second == 0.05f);
  CHECK_FALSE(d.conv_b.clip_bounds.has_value());
  CHECK_FALSE(d.bn_gamma.clip_bounds.has_value());

  auto s = Block<float>::make(BlockKind::SegEnc, "S/enc1", 4, 8, rng);
  CHECK_FALSE(s.conv_w.clip_bounds.has_value());
}

TEST_CASE("initial weights respect the fan-in bound; biases start at zero") {
  Rng rng(5);
  auto b = Block<float>::make(BlockKind::SegEnc, "S/enc1", 3, 8, rng);
  const double bound = std::sqrt(6.0 / (4.0 * 4.0 * 3.0));
  for (float w : b.conv_w.tensor.value()) {
    CHECK(w >= -bound);
    CHECK(w <= bound);
  }
  for (float v : b.conv_b.tensor.value()) CHECK(v == 0.0f);
  for (float v : b.bn_gamma.tensor.value()) CHECK(v == 1.0f);
  for (float v : b.bn_beta.tensor.value()) CHECK(v == 0.0f);
  for (float v : b.bn_mean.tensor.value()) CHECK(v == 0.0f);
  for (float v : b.bn_var.tensor.value()) CHECK(v == 1.0f);
}

TEST_CASE("running stats update in train mode and freeze stops them") {
  Rng rng(6);
  auto b = Block<float>::make(BlockKind::SegEnc, "S/enc1", 2, 4, rng);
  auto x = rand_image(rng, {2, 8, 8, 2});
  b.apply(x, Mode::Train);
  bool moved = false;
  for (float v : b.bn_mean.tensor.value()) moved = moved || v != 0.0f;
  CHECK(moved);

  auto frozen = Block<float>::make(BlockKind::SegEnc, "S/enc2", 2, 4, rng);
  frozen.bn_mean.frozen = true;
  frozen.bn_var.frozen = true;
  frozen.apply(x, Mode::Train);
  for (float v : frozen.bn_mean.tensor.value()) CHECK(v == 0.0f);
  for (float v : frozen.bn_var.tensor.value()) CHECK(v == 1.0f);
}

TEST_CASE("collection order matches the declared name order") {
  Rng rng(7);
  auto b = Block<float>::make(BlockKind::DiscEnc, "D/enc1", 2, 4, rng);
  std::vector<Parameter<float>*> got;
  b.collect(got);
  auto names = Block<float>::param_names(BlockKind::DiscEnc);
  REQUIRE(got.size() == names.size());
  for (size_t i = 0; i < names.size(); ++i) CHECK(got[i]->name == "D/enc1/" + names[i]);
}

TEST_CASE("skip input is rejected outside decoder blocks") {
  Rng rng(8);
  auto b = Block<float>::make(BlockKind::SegEnc, "S/enc1", 2, 4, rng);
  auto x = rand_image(rng, {8, 8, 2});
  auto skip = rand_image(rng, {8, 8, 2});
  CHECK_THROWS_AS(b.apply(x, Mode::Train, &skip), ShapeError);
}

TEST_CASE("channel mismatch is reported") {
  Rng rng(9);
  auto b = Block<float>::make(BlockKind::SegIn, "S/in", 4, 8, rng);
  CHECK_THROWS_AS(b.apply(rand_image(rng, {16, 16, 3}), Mode::Train), ShapeError);
}
