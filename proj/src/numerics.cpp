#include "awemixer/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "awemixer/error.hpp"

namespace awemixer {

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim) : weight({out_dim, in_dim}), bias({out_dim}) {}

LinearLayer::LinearLayer(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.extent(0) != weight.extent(0)) {
    throw DimensionError("linear layer weight " + weight.shape_string() + " incompatible with bias " +
                         bias.shape_string());
  }
}

void LinearLayer::init_uniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : weight.data()) w = dist(rng);
  bias.fill(0.0);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void linear_forward(const LinearLayer& layer, std::span<const double> x, std::span<double> y) {
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  const double* w = layer.weight.data().data();
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = w + o * in;
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void linear_backward(LinearLayer& layer, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dx) {
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  double* gw = layer.weight.grad().data();
  double* gb = layer.bias.grad().data();
  const double* w = layer.weight.data().data();
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    gb[o] += g;
    double* grow = gw + o * in;
    for (std::size_t i = 0; i < in; ++i) grow[i] += g * x[i];
    if (!dx.empty()) {
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) dx[i] += g * row[i];
    }
  }
}

void softmax_inplace(std::span<double> x) {
  const double peak = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double& v : x) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : x) v /= total;
}

void softmax_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (dy[i] - dot);
}

LayerNormCache layer_norm_forward(std::span<const double> x, std::span<const double> gamma,
                                  std::span<const double> beta, std::span<double> x_hat, std::span<double> y) {
  const auto n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x_hat[i] = (x[i] - mean) * inv_std;
    y[i] = gamma[i] * x_hat[i] + beta[i];
  }
  return {inv_std};
}

void layer_norm_backward(std::span<const double> x_hat, const LayerNormCache& cache, std::span<const double> gamma,
                         std::span<const double> dy, std::span<double> dx, std::span<double> dgamma,
                         std::span<double> dbeta) {
  const std::size_t n = x_hat.size();
  double sum_g = 0.0;
  double sum_gx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = dy[i] * gamma[i];
    sum_g += g;
    sum_gx += g * x_hat[i];
    dgamma[i] += dy[i] * x_hat[i];
    dbeta[i] += dy[i];
  }
  const double scale = cache.inv_std / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = dy[i] * gamma[i];
    dx[i] += scale * (static_cast<double>(n) * g - sum_g - x_hat[i] * sum_gx);
  }
}

// ---------------------------------------------------------------------------
// Tensor-level wrappers

namespace {

std::vector<std::size_t> replace_last(const std::vector<std::size_t>& shape, std::size_t extent) {
  auto out = shape;
  out.back() = extent;
  return out;
}

template <typename RowFn>
Tensor map_rows(const Tensor& x, std::size_t out_extent, RowFn fn) {
  if (x.rank() == 0) throw DimensionError("row-wise operator requires rank >= 1");
  const std::size_t in_extent = x.last_extent();
  Tensor y(replace_last(x.shape(), out_extent));
  const std::size_t rows = in_extent == 0 ? 0 : x.numel() / in_extent;
  for (std::size_t r = 0; r < rows; ++r) {
    fn(x.data().subspan(r * in_extent, in_extent), y.data().subspan(r * out_extent, out_extent));
  }
  return y;
}

template <typename F>
Tensor map_elements(const Tensor& x, F f) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = f(x[i]);
  return y;
}

}  // namespace

Tensor linear_apply(const LinearLayer& layer, const Tensor& x) {
  if (x.rank() == 0 || x.last_extent() != layer.in_dim()) {
    throw DimensionError("linear_apply: input " + x.shape_string() + " incompatible with weight " +
                         layer.weight.shape_string());
  }
  return map_rows(x, layer.out_dim(), [&](auto in, auto out) { linear_forward(layer, in, out); });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const std::size_t d = x.rank() == 0 ? 0 : x.last_extent();
  if (d == 0 || gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: input " + x.shape_string() + " with gamma " + gamma.shape_string() +
                         " and beta " + beta.shape_string());
  }
  std::vector<double> scratch(d);
  return map_rows(x, d, [&](auto in, auto out) { layer_norm_forward(in, gamma.data(), beta.data(), scratch, out); });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0 || x.last_extent() == 0) throw DimensionError("softmax: empty last axis " + x.shape_string());
  return map_rows(x, x.last_extent(), [](auto in, auto out) {
    std::copy(in.begin(), in.end(), out.begin());
    softmax_inplace(out);
  });
}

Tensor gelu(const Tensor& x) { return map_elements(x, [](double v) { return gelu(v); }); }

Tensor sigmoid(const Tensor& x) { return map_elements(x, [](double v) { return sigmoid(v); }); }

}  // namespace awemixer
