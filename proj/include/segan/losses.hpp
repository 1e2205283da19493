#pragma once

// Training objective: a multiscale L1 match of discriminator features plus a
// soft dice term, averaged over the batch. The segmentator minimizes the
// total; the discriminator maximizes the feature term only (implemented as
// descent on its negation).

#include <vector>

#include "segan/models.hpp"

namespace segan {

inline constexpr double kDiceSmooth = 1e-6;

template <typename T>
struct LossBreakdown {
  T mae = T(0);
  T dice = T(0);
  T total = T(0);
};

// Mean absolute difference between corresponding feature tensors, averaged
// over the L layers.
template <typename T>
Tensor<T> multiscale_mae(const std::vector<Tensor<T>>& a, const std::vector<Tensor<T>>& b) {
  if (a.empty() || a.size() != b.size())
    throw ShapeError("multiscale_mae: feature lists must be equal-length and nonempty");
  Tensor<T> acc;
  for (size_t i = 0; i < a.size(); ++i) {
    Tensor<T> layer = mean(abs(sub(a[i], b[i])));
    acc = acc.defined() ? add(acc, layer) : layer;
  }
  return mul_scalar(acc, static_cast<T>(1.0 / static_cast<double>(a.size())));
}

// Soft dice loss 1 - 2*sum(p*g) / (sum(p^2) + sum(g^2)). When both inputs
// are identically zero the smoothing constant takes over and the loss is
// exactly 0 (a correct empty prediction); elsewhere the ratio is unsmoothed
// so that on binary inputs it matches the confusion-count dice bit for bit.
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& g, const Tensor<T>& p) {
  detail::check_same_shape(g, p, "dice_loss");
  Tensor<T> num = mul_scalar(sum(mul(p, g)), T(2));
  Tensor<T> den = add(sum(mul(p, p)), sum(mul(g, g)));
  if (den.item() == T(0)) {
    num = add_scalar(num, static_cast<T>(kDiceSmooth));
    den = add_scalar(den, static_cast<T>(kDiceSmooth));
  }
  return add_scalar(neg(div(num, den)), T(1));
}

// Mean of per-sample dice losses over the leading axis. Labels are constants
// here; gradients flow through p only.
template <typename T>
Tensor<T> batch_dice_loss(const Tensor<T>& y, const Tensor<T>& p) {
  detail::check_same_shape(y, p, "batch_dice_loss");
  if (p.rank() < 4) return dice_loss(y, p);
  int n = p.shape()[0];
  Shape sample_shape(y.shape().begin() + 1, y.shape().end());
  size_t stride = static_cast<size_t>(numel(sample_shape));
  Tensor<T> acc;
  for (int i = 0; i < n; ++i) {
    const T* src = y.value().data() + static_cast<size_t>(i) * stride;
    Tensor<T> yi = Tensor<T>::from(sample_shape, std::vector<T>(src, src + stride));
    Tensor<T> di = dice_loss(yi, slice_batch(p, i));
    acc = acc.defined() ? add(acc, di) : di;
  }
  return mul_scalar(acc, static_cast<T>(1.0 / static_cast<double>(n)));
}

enum class GradFor { Segmentator, Discriminator };

struct ObjectiveOptions {
  bool dice_term = true;
};

namespace detail {

template <typename T>
void throw_if_not_finite(ModelPair<T>& pair, T value, const char* where) {
  if (std::isfinite(static_cast<double>(value))) return;
  for (auto* p : pair.parameters())
    for (T v : p->tensor.value())
      if (!std::isfinite(static_cast<double>(v)))
        throw NumericError(std::string(where) + ": non-finite value in parameter " + p->name);
  throw NumericError(std::string(where) + ": non-finite activation");
}

}  // namespace detail

// Builds the batch objective, runs the backward sweep for the requested
// player, and reports the loss components. For the segmentator the sweep
// descends on mae + dice (dice may be disabled); for the discriminator the
// map is detached (no segmentator gradients) and the sweep descends on -mae,
// i.e. ascends the feature term. The dice term never contributes
// discriminator gradients. Pass precomputed_map to reuse a segmentator
// forward built earlier in the same step.
template <typename T>
LossBreakdown<T> objective(ModelPair<T>& pair, const Tensor<T>& x, const Tensor<T>& y,
                           GradFor mode, const ObjectiveOptions& opts = {},
                           const Tensor<T>* precomputed_map = nullptr) {
  Tensor<T> p = precomputed_map ? *precomputed_map : pair.seg.forward(x, Mode::Train);
  Tensor<T> map = mode == GradFor::Discriminator ? p.detach() : p;
  Tensor<T> d_pred = combine_input(x, map, pair.arch.combine_mode);
  Tensor<T> d_true = combine_input(x, y, pair.arch.combine_mode);
  auto f_pred = pair.disc.features(d_pred, Mode::Train);
  auto f_true = pair.disc.features(d_true, Mode::Train);
  Tensor<T> mae_t = multiscale_mae(f_pred, f_true);

  LossBreakdown<T> out;
  out.mae = mae_t.item();
  Tensor<T> total_t = mae_t;
  if (opts.dice_term) {
    Tensor<T> dice_t = batch_dice_loss(y, map);
    out.dice = dice_t.item();
    total_t = add(mae_t, dice_t);
  }
  out.total = total_t.item();
  detail::throw_if_not_finite(pair, out.total, "objective");

  if (mode == GradFor::Discriminator) {
    neg(mae_t).backward();
  } else {
    total_t.backward();
  }
  return out;
}

}  // namespace segan
