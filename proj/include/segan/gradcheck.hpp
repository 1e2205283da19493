#pragma once

// Central finite-difference gradient checking. The function under test is
// evaluated analytically in the requested precision and numerically in
// double, so the 32-bit check measures the float implementation against a
// 64-bit difference oracle. The callable must accept tensors of either
// scalar type and must be pure: any internal state (e.g. batch-norm running
// stats) has to be constructed fresh inside the call.

#include <functional>
#include <string>
#include <vector>

#include "segan/ops.hpp"
#include "segan/tensor.hpp"

namespace segan {

struct GradCheckInput {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckRow> per_input;
  double max_rel_err = 0.0;
  double h = 0.0;
  double tol = 0.0;
  bool pass() const { return max_rel_err < tol; }
};

namespace detail {

// Relative error with an absolute floor of 1: gradients below unit magnitude
// are compared absolutely, larger ones relatively.
inline double rel_err(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1.0});
  return std::abs(a - b) / denom;
}

}  // namespace detail

template <typename T, typename F>
GradCheckReport grad_check(F&& f, const std::vector<GradCheckInput>& inputs, double h = 1e-4,
                           double tol = 1e-4) {
  GradCheckReport report;
  report.h = h;
  report.tol = tol;

  // Analytic gradients in precision T.
  std::vector<Tensor<T>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& in : inputs) {
    std::vector<T> v(in.values.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(in.values[i]);
    leaves.push_back(Tensor<T>::from(in.shape, std::move(v), /*requires_grad=*/true));
  }
  Tensor<T> y = f(leaves);
  if (y.size() != 1) throw NumericError("grad_check: function output must be scalar");
  y.backward();
  std::vector<std::vector<double>> analytic(inputs.size());
  for (size_t k = 0; k < inputs.size(); ++k) {
    analytic[k].assign(inputs[k].values.size(), 0.0);
    if (leaves[k].has_grad()) {
      auto g = leaves[k].grad();
      for (size_t i = 0; i < g.size(); ++i) analytic[k][i] = static_cast<double>(g[i]);
    }
  }

  // Central differences in double.
  std::vector<Tensor<double>> probe;
  probe.reserve(inputs.size());
  for (const auto& in : inputs) probe.push_back(Tensor<double>::from(in.shape, in.values));
  NoGradGuard no_grad;
  auto eval = [&]() -> double { return static_cast<double>(f(probe).item()); };
  for (size_t k = 0; k < inputs.size(); ++k) {
    GradCheckRow row;
    row.name = inputs[k].name;
    auto vals = probe[k].value_mut();
    for (size_t i = 0; i < vals.size(); ++i) {
      double orig = vals[i];
      vals[i] = orig + h;
      double fp = eval();
      vals[i] = orig - h;
      double fm = eval();
      vals[i] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      row.max_rel_err = std::max(row.max_rel_err, detail::rel_err(analytic[k][i], numeric));
    }
    report.max_rel_err = std::max(report.max_rel_err, row.max_rel_err);
    report.per_input.push_back(std::move(row));
  }
  return report;
}

}  // namespace segan
