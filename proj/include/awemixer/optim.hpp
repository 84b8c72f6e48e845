#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "awemixer/tensor.hpp"

namespace awemixer {

/// Adam moments for an ordered list of parameters.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  AdamState() = default;
  AdamState(std::span<Tensor* const> params, double learning_rate);
};

/// One bias-corrected Adam update using each parameter's gradient slot.
/// Throws ContractError if a parameter has no gradient or the state was built for other shapes.
void adam_step(std::span<Tensor* const> params, AdamState& state);

/// Max over all parameter entries of |analytic - central difference| / max(1, |analytic|).
/// Analytic gradients are read from each tensor's grad slot; `loss` must not touch them.
double finite_diff_check(const std::function<double()>& loss, std::span<Tensor* const> params, double h = 1e-5);

}  // namespace awemixer
