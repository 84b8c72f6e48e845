#pragma once

#include <random>
#include <vector>

#include "awemixer/model.hpp"
#include "oracles.hpp"

namespace awemixer::testing {

/// L=16, T=4, D=8, S=2, J=2, N=1, heads=2.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.lookback = 16;
  c.horizon = 4;
  c.d_model = 8;
  c.num_scales = 2;
  c.dwt_levels = 2;
  c.fusion_layers = 1;
  c.num_heads = 2;
  c.seed = 17;
  return c;
}

/// Randomizes every tensor (biases and LayerNorm affine included) so no gradient path is trivially zero.
inline void randomize(ModelParams& params, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Tensor* t : params.tensors()) {
    for (double& v : t->data()) v = dist(rng);
  }
}

struct Batch {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
};

inline Batch random_batch(const ModelConfig& c, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Batch b;
  for (std::size_t i = 0; i < size; ++i) {
    auto x = oracle::random_vector(static_cast<std::size_t>(c.lookback), rng);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] += std::sin(0.7 * static_cast<double>(t)) * 2.0;
    b.inputs.push_back(std::move(x));
    b.targets.push_back(oracle::random_vector(static_cast<std::size_t>(c.horizon), rng));
  }
  return b;
}

/// Batch-mean MSE; fills gradients when `accumulate` is set.
inline double batch_loss(const ModelConfig& c, ModelParams& params, const Batch& batch, bool accumulate) {
  const auto basis = make_basis(c.basis);
  double total = 0.0;
  const double norm = static_cast<double>(batch.inputs.size() * static_cast<std::size_t>(c.horizon));
  for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
    const auto trace = forward_trace(batch.inputs[i], c, params, basis);
    std::vector<double> dy(trace.y.size());
    for (std::size_t t = 0; t < dy.size(); ++t) {
      const double diff = trace.y[t] - batch.targets[i][t];
      total += diff * diff;
      dy[t] = 2.0 * diff / norm;
    }
    if (accumulate) backward(trace, dy, c, params);
  }
  return total / norm;
}

}  // namespace awemixer::testing
