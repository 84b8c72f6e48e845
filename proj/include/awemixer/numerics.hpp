#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "awemixer/tensor.hpp"

namespace awemixer {

inline constexpr double kLayerNormEps = 1e-5;

/// Affine map y = x W^T + b with W stored [out x in].
struct LinearLayer {
  Tensor weight;
  Tensor bias;

  LinearLayer() = default;
  /// Zero-filled layer.
  LinearLayer(std::size_t in_dim, std::size_t out_dim);
  LinearLayer(Tensor weight, Tensor bias);

  std::size_t in_dim() const { return weight.extent(1); }
  std::size_t out_dim() const { return weight.extent(0); }

  /// Fan-in uniform init: weights ~ U(-1/sqrt(in), 1/sqrt(in)), biases zero.
  void init_uniform(std::mt19937_64& rng);
};

// Tensor-level operators. Leading extents are broadcast.

Tensor linear_apply(const LinearLayer& layer, const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);
Tensor softmax(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Vector kernels used by the model's explicit forward/backward passes.

double gelu(double x);
double gelu_grad(double x);
double sigmoid(double x);

/// y = W x + b for a single vector.
void linear_forward(const LinearLayer& layer, std::span<const double> x, std::span<double> y);

/// Accumulates dL/dW and dL/db into the layer's gradient slots and adds W^T dy into dx.
/// Pass an empty dx to skip the input gradient.
void linear_backward(LinearLayer& layer, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dx);

/// Numerically stable softmax, in place.
void softmax_inplace(std::span<double> x);
/// dx += J_softmax(y)^T dy, where y is the softmax output.
void softmax_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx);

/// Per-row layer normalization state kept for the backward pass.
struct LayerNormCache {
  double inv_std = 0.0;
};

/// Writes the pre-affine normalized row into x_hat and the affine output into y.
LayerNormCache layer_norm_forward(std::span<const double> x, std::span<const double> gamma,
                                  std::span<const double> beta, std::span<double> x_hat, std::span<double> y);

/// Accumulates dgamma/dbeta and adds the input gradient into dx.
void layer_norm_backward(std::span<const double> x_hat, const LayerNormCache& cache, std::span<const double> gamma,
                         std::span<const double> dy, std::span<double> dx, std::span<double> dgamma,
                         std::span<double> dbeta);

}  // namespace awemixer
