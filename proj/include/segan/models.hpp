#pragma once

// Segmentator / discriminator pair. The segmentator is an encoder-decoder
// with optional skip connections producing a per-pixel probability map; the
// discriminator is an encoder whose output is the list of its feature maps,
// not a scalar verdict.

#include <string>
#include <vector>

#include "segan/blocks.hpp"

namespace segan {

enum class CombineMode { Concat, Mask };

inline const char* to_string(CombineMode m) {
  return m == CombineMode::Concat ? "concat" : "mask";
}

inline CombineMode parse_combine_mode(const std::string& s) {
  if (s == "concat") return CombineMode::Concat;
  if (s == "mask") return CombineMode::Mask;
  throw ConfigError("unknown combine_mode '" + s + "'");
}

struct ArchConfig {
  int input_size = 64;      // square input edge
  int in_channels = 4;      // M
  int depth = 4;            // E: number of stride-2 stages
  int base_filters = 8;     // k0
  bool skip_connections = true;
  CombineMode combine_mode = CombineMode::Concat;

  // Channel count the discriminator sees.
  int disc_in_channels() const {
    return combine_mode == CombineMode::Concat ? in_channels + 1 : in_channels;
  }

  void validate() const {
    if (depth < 2) throw ConfigError("arch: depth must be >= 2");
    if (base_filters < 1) throw ConfigError("arch: base_filters must be >= 1");
    if (in_channels < 1) throw ConfigError("arch: in_channels must be >= 1");
    int s = input_size;
    for (int i = 0; i < depth; ++i) {
      if (s % 2 != 0)
        throw ConfigError("arch: input_size " + std::to_string(input_size) +
                          " is not divisible by 2^depth");
      s /= 2;
    }
    if (s < 1) throw ConfigError("arch: input_size too small for depth");
  }

  bool operator==(const ArchConfig&) const = default;
};

template <typename T>
struct Segmentator {
  Block<T> in;
  std::vector<Block<T>> enc;  // depth - 1 blocks, doubling filters
  std::vector<Block<T>> dec;  // depth - 1 blocks, halving filters
  Block<T> out;
  bool skips = true;

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    std::vector<Tensor<T>> acts;
    acts.reserve(enc.size() + 1);
    acts.push_back(in.apply(x, mode));
    for (auto& b : enc) acts.push_back(b.apply(acts.back(), mode));
    Tensor<T> cur = acts.back();
    for (size_t j = 0; j < dec.size(); ++j) {
      const Tensor<T>* skip = skips ? &acts[acts.size() - 2 - j] : nullptr;
      cur = dec[j].apply(cur, mode, skip);
    }
    return out.apply(cur, mode);
  }

  void collect(std::vector<Parameter<T>*>& params) {
    in.collect(params);
    for (auto& b : enc) b.collect(params);
    for (auto& b : dec) b.collect(params);
    out.collect(params);
  }
};

template <typename T>
struct Discriminator {
  Block<T> in;
  std::vector<Block<T>> enc;  // depth - 1 blocks

  // Feature list: the raw input followed by every block activation
  // (depth + 1 tensors in total).
  std::vector<Tensor<T>> features(const Tensor<T>& d_in, Mode mode) {
    std::vector<Tensor<T>> feats;
    feats.reserve(enc.size() + 2);
    feats.push_back(d_in);
    feats.push_back(in.apply(d_in, mode));
    for (auto& b : enc) feats.push_back(b.apply(feats.back(), mode));
    return feats;
  }

  void collect(std::vector<Parameter<T>*>& params) {
    in.collect(params);
    for (auto& b : enc) b.collect(params);
  }
};

template <typename T>
struct ModelPair {
  ArchConfig arch;
  Segmentator<T> seg;
  Discriminator<T> disc;

  // Blocks are created segmentator-first in forward order, which fixes the
  // initialization draw order for a given seed.
  static ModelPair build(const ArchConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelPair p;
    p.arch = cfg;
    int e = cfg.depth;
    int k0 = cfg.base_filters;
    p.seg.skips = cfg.skip_connections;
    p.seg.in = Block<T>::make(BlockKind::SegIn, "S/in", cfg.in_channels, k0, rng);
    for (int i = 1; i < e; ++i) {
      p.seg.enc.push_back(Block<T>::make(BlockKind::SegEnc, "S/enc" + std::to_string(i),
                                         k0 << (i - 1), k0 << i, rng));
    }
    for (int j = 1; j < e; ++j) {
      int prev = k0 << (e - j);       // channels arriving from below
      int filters = k0 << (e - 1 - j);
      int in_ch = prev + (cfg.skip_connections ? filters : 0);  // skip matches filter count
      p.seg.dec.push_back(
          Block<T>::make(BlockKind::SegDec, "S/dec" + std::to_string(j), in_ch, filters, rng));
    }
    p.seg.out = Block<T>::make(BlockKind::SegOut, "S/out", k0, 1, rng);
    p.disc.in = Block<T>::make(BlockKind::DiscIn, "D/in", cfg.disc_in_channels(), k0, rng);
    for (int i = 1; i < e; ++i) {
      p.disc.enc.push_back(Block<T>::make(BlockKind::DiscEnc, "D/enc" + std::to_string(i),
                                          k0 << (i - 1), k0 << i, rng));
    }
    return p;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    seg.collect(out);
    disc.collect(out);
    return out;
  }

  std::vector<Parameter<T>*> seg_parameters() {
    std::vector<Parameter<T>*> out;
    seg.collect(out);
    return out;
  }

  std::vector<Parameter<T>*> disc_parameters() {
    std::vector<Parameter<T>*> out;
    disc.collect(out);
    return out;
  }

  Parameter<T>* find(const std::string& name) {
    for (auto* p : parameters())
      if (p->name == name) return p;
    return nullptr;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->tensor.zero_grad();
  }
};

template <typename T>
Tensor<T> segment(ModelPair<T>& pair, const Tensor<T>& x, Mode mode) {
  return pair.seg.forward(x, mode);
}

// The composition the discriminator consumes: image with the map either
// appended as an extra channel or multiplied in as a mask.
template <typename T>
Tensor<T> combine_input(const Tensor<T>& x, const Tensor<T>& map, CombineMode mode) {
  if (mode == CombineMode::Concat) return concat_channels<T>({x, map});
  return mul(x, map);
}

template <typename T>
std::vector<Tensor<T>> discriminator_features(ModelPair<T>& pair, const Tensor<T>& d_in,
                                              Mode mode) {
  return pair.disc.features(d_in, mode);
}

// Clamp every parameter that declares clip bounds (discriminator conv
// weights). Call after each discriminator optimizer step.
template <typename T>
void clip_discriminator(ModelPair<T>& pair) {
  for (auto* p : pair.disc_parameters()) {
    if (!p->clip_bounds || p->frozen) continue;
    auto [lo, hi] = *p->clip_bounds;
    for (auto& v : p->tensor.value_mut()) v = std::clamp(v, lo, hi);
  }
}

}  // namespace segan
