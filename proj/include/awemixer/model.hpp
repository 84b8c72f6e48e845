#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "awemixer/numerics.hpp"
#include "awemixer/signal.hpp"
#include "awemixer/tensor.hpp"

namespace awemixer {

inline constexpr double kRevinEps = 1e-5;

struct AblationFlags {
  bool no_router = false;   // uniform band weights
  bool no_wavelet = false;  // skip fusion, temporal features pass straight to the mixer
  bool no_gating = false;   // fused output is the layer-normed residual
  bool no_mixer = false;    // scale mixing replaced by pass-through

  bool any() const { return no_router || no_wavelet || no_gating || no_mixer; }
};

struct ModelConfig {
  int lookback = 96;
  int horizon = 96;
  int d_model = 128;
  int num_scales = 4;
  int dwt_levels = 3;
  std::string basis = "db4";
  int num_heads = 8;
  int fusion_layers = 3;
  int router_hidden = 0;  // 0 selects N_bands
  int mixer_expansion = 2;
  double revin_eps = kRevinEps;
  AblationFlags ablation;
  std::uint64_t seed = 2021;

  int bands() const { return dwt_levels + 1; }
  int spectrum_len() const { return lookback / 2 + 1; }
  int router_width() const { return router_hidden > 0 ? router_hidden : bands(); }
  int head_dim() const { return d_model / num_heads; }

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

struct FusionLayer {
  LinearLayer q_proj;
  LinearLayer k_proj;
  LinearLayer v_proj;
  LinearLayer o_proj;
  Tensor ln_gamma;
  Tensor ln_beta;
  LinearLayer gate;  // [z_t ; z_enh] (2D) -> D
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct ModelParams {
  std::vector<LinearLayer> temporal_embeds;  // L / 2^s -> D
  std::vector<LinearLayer> band_embeds;      // L -> D, one per band
  LinearLayer router_in;                     // L/2+1 -> router width
  LinearLayer router_out;                    // router width -> N_bands
  std::vector<FusionLayer> fusion;
  LinearLayer mixer_in;   // S -> expansion * S
  LinearLayer mixer_out;  // expansion * S -> S
  LinearLayer head_in;    // D -> D
  LinearLayer head_out;   // D -> T

  /// Shapes from the config; weights fan-in uniform from config.seed, biases zero, LayerNorm (1, 0).
  static ModelParams init(const ModelConfig& config);
  /// Shapes from the config, every entry zero (LayerNorm gamma included).
  static ModelParams zeros(const ModelConfig& config);

  /// Every learnable tensor exactly once, in a fixed order.
  std::vector<NamedTensor> named();
  std::vector<Tensor*> tensors();
  std::size_t count() const;
  void zero_grad();
};

std::size_t parameter_count(const ModelConfig& config);

struct RevinStats {
  double mu = 0.0;
  double sigma = 0.0;
  double eps = kRevinEps;
};

// Pipeline stages. Each is usable standalone; forward() composes them.

std::pair<std::vector<double>, RevinStats> revin_normalize(std::span<const double> x, double eps = kRevinEps);
std::vector<double> revin_denormalize(std::span<const double> y_norm, const RevinStats& stats);

std::vector<std::vector<double>> multiscale_pool(std::span<const double> x_norm, int num_scales);
std::vector<std::vector<double>> embed_temporal(const std::vector<std::vector<double>>& pooled,
                                                const ModelParams& params);
Tensor embed_wavelet(std::span<const double> x_norm, const WaveletBasis& basis, int levels, const ModelParams& params);
std::vector<double> route_frequencies(std::span<const double> x_norm, const ModelParams& params);
Tensor weight_bands(const Tensor& bands, std::span<const double> weights);

std::vector<double> cross_attend(std::span<const double> query, const Tensor& bands, const FusionLayer& layer,
                                 int num_heads);
std::vector<double> gated_fuse(std::span<const double> z_t, const Tensor& bands, const FusionLayer& layer,
                               int num_heads, bool gating = true);
Tensor fusion_stack(const std::vector<std::vector<double>>& z_t, const Tensor& bands, const ModelParams& params,
                    int num_heads, bool gating = true);
Tensor cross_scale_mix(const Tensor& fused, const ModelParams& params);
std::vector<double> aggregate_predict(const Tensor& mixed, const ModelParams& params);

// Full pass with intermediates kept for the backward pass.

struct AttentionTrace {
  std::vector<double> query;    // D
  std::vector<double> weights;  // heads x N_bands, row-major
  std::vector<double> context;  // D, concatenated heads
};

struct FuseTrace {
  std::vector<double> z_in;
  AttentionTrace attention;
  std::vector<double> ln_hat;
  LayerNormCache ln;
  std::vector<double> z_enh;
  std::vector<double> gate_in;  // [z_in ; z_enh]
  std::vector<double> gate;     // sigmoid output
  std::vector<double> z_out;
};

struct ForwardTrace {
  std::vector<double> x_norm;
  RevinStats stats;
  std::vector<std::vector<double>> pooled;
  std::vector<std::vector<double>> z_t;
  std::vector<std::vector<double>> band_inputs;  // interpolated coefficient series, N_bands x L
  Tensor bands;                                  // H_w
  std::vector<double> spectrum;
  std::vector<double> router_pre;
  std::vector<double> router_act;
  std::vector<double> band_weights;  // w
  Tensor weighted;                   // H'_w
  std::vector<Tensor> keys;          // per fusion layer
  std::vector<Tensor> values;
  std::vector<std::vector<FuseTrace>> fuse;  // [layer][scale]
  Tensor fused;                              // S x D
  std::vector<double> mixer_pre;             // D x (expansion*S), per channel rows
  std::vector<double> mixer_act;
  Tensor mixed;  // S x D
  std::vector<double> z_final;
  std::vector<double> head_pre;
  std::vector<double> head_act;
  std::vector<double> y_norm;
  std::vector<double> y;
};

ForwardTrace forward_trace(std::span<const double> x, const ModelConfig& config, const ModelParams& params,
                           const WaveletBasis& basis);

/// Accumulates dLoss/dparams into the parameters' gradient slots given dLoss/dy.
void backward(const ForwardTrace& trace, std::span<const double> dy, const ModelConfig& config, ModelParams& params);

std::vector<double> forward(std::span<const double> x, const ModelConfig& config, const ModelParams& params);

}  // namespace awemixer
