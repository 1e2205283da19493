#pragma once

// The six convolutional building blocks shared by the two networks.
// Encoder-style blocks halve resolution with 4x4 stride-2 convolutions;
// decoder-style blocks double resolution with bilinear upsampling followed
// by a 3x3 stride-1 convolution. All convolutions use same padding.

#include <string>
#include <vector>

#include "segan/ops.hpp"
#include "segan/rng.hpp"
#include "segan/tensor.hpp"

namespace segan {

inline constexpr double kLeakySlope = 0.3;
inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;
inline constexpr double kDiscWeightClip = 0.05;

enum class BlockKind { SegIn, SegEnc, SegDec, SegOut, DiscIn, DiscEnc };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::SegIn: return "S_in";
    case BlockKind::SegEnc: return "S_enc";
    case BlockKind::SegDec: return "S_dec";
    case BlockKind::SegOut: return "S_out";
    case BlockKind::DiscIn: return "D_in";
    case BlockKind::DiscEnc: return "D_enc";
  }
  return "?";
}

template <typename T>
struct Block {
  BlockKind kind{};
  std::string name;  // e.g. "S/enc1"
  int in_channels = 0;
  int filters = 0;
  Parameter<T> conv_w, conv_b;
  Parameter<T> bn_gamma, bn_beta, bn_mean, bn_var;

  static bool has_batch_norm(BlockKind k) {
    return k == BlockKind::SegEnc || k == BlockKind::SegDec || k == BlockKind::DiscEnc;
  }
  static bool upsamples(BlockKind k) { return k == BlockKind::SegDec || k == BlockKind::SegOut; }
  static int kernel_size(BlockKind k) { return upsamples(k) ? 3 : 4; }
  static int stride(BlockKind k) { return upsamples(k) ? 1 : 2; }
  static bool is_disc(BlockKind k) { return k == BlockKind::DiscIn || k == BlockKind::DiscEnc; }

  // Relative parameter names in collection order.
  static std::vector<std::string> param_names(BlockKind k) {
    std::vector<std::string> names = {"conv/w", "conv/b"};
    if (has_batch_norm(k)) {
      names.push_back("bn/gamma");
      names.push_back("bn/beta");
      names.push_back("bn/mean");
      names.push_back("bn/var");
    }
    return names;
  }

  // Weights draw uniform +-sqrt(6 / fan_in) in memory order; biases start at
  // zero; batch-norm starts at the identity transform with running stats
  // (0, 1). Discriminator conv weights carry the clip bounds.
  static Block make(BlockKind kind, const std::string& name, int in_channels, int filters,
                    Rng& rng) {
    Block b;
    b.kind = kind;
    b.name = name;
    b.in_channels = in_channels;
    b.filters = filters;
    int k = kernel_size(kind);
    double bound = std::sqrt(6.0 / (static_cast<double>(k) * k * in_channels));
    std::vector<T> w(static_cast<size_t>(k) * k * in_channels * filters);
    for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
    b.conv_w = Parameter<T>{name + "/conv/w",
                            Tensor<T>::from({k, k, in_channels, filters}, std::move(w), true),
                            true,
                            false,
                            {}};
    if (is_disc(kind))
      b.conv_w.clip_bounds = std::make_pair(static_cast<T>(-kDiscWeightClip),
                                            static_cast<T>(kDiscWeightClip));
    b.conv_b = Parameter<T>{name + "/conv/b", Tensor<T>::zeros({filters}, true), true, false, {}};
    if (has_batch_norm(kind)) {
      b.bn_gamma = Parameter<T>{name + "/bn/gamma", Tensor<T>::full({filters}, T(1), true), true,
                                false, {}};
      b.bn_beta =
          Parameter<T>{name + "/bn/beta", Tensor<T>::zeros({filters}, true), true, false, {}};
      b.bn_mean =
          Parameter<T>{name + "/bn/mean", Tensor<T>::zeros({filters}, false), false, false, {}};
      b.bn_var = Parameter<T>{name + "/bn/var", Tensor<T>::full({filters}, T(1), false), false,
                              false, {}};
    }
    return b;
  }

  // skip, when given, is concatenated after the upsample and before the
  // convolution (decoder blocks only).
  Tensor<T> apply(const Tensor<T>& x, Mode mode, const Tensor<T>* skip = nullptr) {
    if (skip && kind != BlockKind::SegDec)
      throw ShapeError(std::string("block ") + to_string(kind) + " takes no skip input");
    Tensor<T> h = x;
    if (upsamples(kind)) h = upsample_bilinear2x(h);
    if (skip) h = concat_channels<T>({h, *skip});
    h = conv2d(h, conv_w.tensor, conv_b.tensor, stride(kind), Padding::Same);
    switch (kind) {
      case BlockKind::SegIn:
      case BlockKind::DiscIn:
        return leaky_relu(h, static_cast<T>(kLeakySlope));
      case BlockKind::SegEnc:
      case BlockKind::DiscEnc:
        h = apply_bn(h, mode);
        return leaky_relu(h, static_cast<T>(kLeakySlope));
      case BlockKind::SegDec:
        h = apply_bn(h, mode);
        return relu(h);
      case BlockKind::SegOut:
        return sigmoid(h);
    }
    throw ShapeError("unreachable block kind");
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&conv_w);
    out.push_back(&conv_b);
    if (has_batch_norm(kind)) {
      out.push_back(&bn_gamma);
      out.push_back(&bn_beta);
      out.push_back(&bn_mean);
      out.push_back(&bn_var);
    }
  }

 private:
  Tensor<T> apply_bn(const Tensor<T>& h, Mode mode) {
    // Frozen running stats also disable the forward-pass stat update.
    return batch_norm(h, bn_gamma.tensor, bn_beta.tensor, bn_mean.tensor, bn_var.tensor, mode,
                      static_cast<T>(kBnEps), static_cast<T>(kBnMomentum),
                      /*update_stats=*/!bn_mean.frozen);
  }
};

}  // namespace segan
