#include "awemixer/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "awemixer/error.hpp"

namespace awemixer {

AdamState::AdamState(std::span<Tensor* const> params, double learning_rate) : lr(learning_rate) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor* p : params) {
    m.emplace_back(p->numel(), 0.0);
    v.emplace_back(p->numel(), 0.0);
  }
}

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                        std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    if (state.m[i].size() != params[i]->numel()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " changed extent");
    }
  }

  ++state.step_count;
  const auto t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i]->data();
    auto grad = std::as_const(*params[i]).grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      value[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double finite_diff_check(const std::function<double()>& loss, std::span<Tensor* const> params, double h) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& tensor = *params[p];
    if (!tensor.has_grad()) throw ContractError("finite_diff_check: parameter " + std::to_string(p) + " has no gradient");
    auto value = tensor.data();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double saved = value[k];
      value[k] = saved + h;
      const double up = loss();
      value[k] = saved - h;
      const double down = loss();
      value[k] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite loss at parameter " + std::to_string(p) + " entry " +
                           std::to_string(k));
      }
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = std::as_const(tensor).grad()[k];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
    }
  }
  return worst;
}

}  // namespace awemixer
