#include "awemixer/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>
#include <utility>

#include "awemixer/error.hpp"

namespace awemixer {

namespace {

bool divisible(int value, int block) { return block > 0 && value % block == 0; }

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::span<const double> row(const Tensor& t, std::size_t r) { return t.data().subspan(r * t.last_extent(), t.last_extent()); }
std::span<double> row(Tensor& t, std::size_t r) { return t.data().subspan(r * t.last_extent(), t.last_extent()); }

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor project_rows(const LinearLayer& layer, const Tensor& rows) {
  Tensor out({rows.extent(0), layer.out_dim()});
  for (std::size_t r = 0; r < rows.extent(0); ++r) linear_forward(layer, row(rows, r), row(out, r));
  return out;
}

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": got extent " + std::to_string(got) + ", expected " +
                         std::to_string(want));
  }
}

// Multi-head attention of one query vector over projected keys/values.
std::vector<double> attend(std::span<const double> z, const Tensor& keys, const Tensor& values,
                           const FusionLayer& layer, int num_heads, AttentionTrace& trace) {
  const std::size_t d = layer.q_proj.out_dim();
  const std::size_t bands = keys.extent(0);
  const auto heads = static_cast<std::size_t>(num_heads);
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  trace.query.assign(d, 0.0);
  linear_forward(layer.q_proj, z, trace.query);
  trace.weights.assign(heads * bands, 0.0);
  trace.context.assign(d, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    std::span<double> alpha(trace.weights.data() + h * bands, bands);
    const double* q = trace.query.data() + h * dk;
    for (std::size_t j = 0; j < bands; ++j) {
      const double* k = keys.data().data() + j * d + h * dk;
      double dot = 0.0;
      for (std::size_t i = 0; i < dk; ++i) dot += q[i] * k[i];
      alpha[j] = dot * scale;
    }
    softmax_inplace(alpha);
    double* ctx = trace.context.data() + h * dk;
    for (std::size_t j = 0; j < bands; ++j) {
      const double* v = values.data().data() + j * d + h * dk;
      for (std::size_t i = 0; i < dk; ++i) ctx[i] += alpha[j] * v[i];
    }
  }
  std::vector<double> con(d);
  linear_forward(layer.o_proj, trace.context, con);
  return con;
}

FuseTrace fuse_forward(std::span<const double> z, const Tensor& keys, const Tensor& values, const FusionLayer& layer,
                       int num_heads, bool gating) {
  const std::size_t d = z.size();
  FuseTrace t;
  t.z_in.assign(z.begin(), z.end());
  const auto con = attend(z, keys, values, layer, num_heads, t.attention);
  std::vector<double> residual(d);
  for (std::size_t i = 0; i < d; ++i) residual[i] = z[i] + con[i];
  t.ln_hat.assign(d, 0.0);
  t.z_enh.assign(d, 0.0);
  t.ln = layer_norm_forward(residual, layer.ln_gamma.data(), layer.ln_beta.data(), t.ln_hat, t.z_enh);
  if (!gating) {
    t.z_out = t.z_enh;
    return t;
  }
  t.gate_in.resize(2 * d);
  std::copy(z.begin(), z.end(), t.gate_in.begin());
  std::copy(t.z_enh.begin(), t.z_enh.end(), t.gate_in.begin() + static_cast<std::ptrdiff_t>(d));
  t.gate.assign(d, 0.0);
  linear_forward(layer.gate, t.gate_in, t.gate);
  t.z_out.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    t.gate[i] = sigmoid(t.gate[i]);
    t.z_out[i] = t.gate[i] * t.z_enh[i] + (1.0 - t.gate[i]) * z[i];
  }
  return t;
}

// Returns dL/dz_in; accumulates key/value gradients and layer parameter gradients.
std::vector<double> fuse_backward(const FuseTrace& t, std::span<const double> d_out, const Tensor& keys,
                                  const Tensor& values, FusionLayer& layer, int num_heads, bool gating,
                                  Tensor& d_keys, Tensor& d_values) {
  const std::size_t d = t.z_in.size();
  std::vector<double> dz(d, 0.0);
  std::vector<double> d_enh(d, 0.0);
  if (gating) {
    std::vector<double> d_gate_pre(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double g = t.gate[i];
      d_enh[i] = g * d_out[i];
      dz[i] = (1.0 - g) * d_out[i];
      d_gate_pre[i] = d_out[i] * (t.z_enh[i] - t.z_in[i]) * g * (1.0 - g);
    }
    std::vector<double> d_gate_in(2 * d, 0.0);
    linear_backward(layer.gate, t.gate_in, d_gate_pre, d_gate_in);
    for (std::size_t i = 0; i < d; ++i) {
      dz[i] += d_gate_in[i];
      d_enh[i] += d_gate_in[d + i];
    }
  } else {
    std::copy(d_out.begin(), d_out.end(), d_enh.begin());
  }

  std::vector<double> d_residual(d, 0.0);
  layer_norm_backward(t.ln_hat, t.ln, layer.ln_gamma.data(), d_enh, d_residual, layer.ln_gamma.grad(),
                      layer.ln_beta.grad());
  add_into(dz, d_residual);

  std::vector<double> d_context(d, 0.0);
  linear_backward(layer.o_proj, t.attention.context, d_residual, d_context);

  const std::size_t bands = keys.extent(0);
  const auto heads = static_cast<std::size_t>(num_heads);
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<double> d_query(d, 0.0);
  std::vector<double> d_alpha(bands);
  std::vector<double> d_logits(bands);
  for (std::size_t h = 0; h < heads; ++h) {
    std::span<const double> alpha(t.attention.weights.data() + h * bands, bands);
    const double* dctx = d_context.data() + h * dk;
    for (std::size_t j = 0; j < bands; ++j) {
      const double* v = values.data().data() + j * d + h * dk;
      double* dv = d_values.data().data() + j * d + h * dk;
      double acc = 0.0;
      for (std::size_t i = 0; i < dk; ++i) {
        acc += dctx[i] * v[i];
        dv[i] += alpha[j] * dctx[i];
      }
      d_alpha[j] = acc;
    }
    std::fill(d_logits.begin(), d_logits.end(), 0.0);
    softmax_backward(alpha, d_alpha, d_logits);
    const double* q = t.attention.query.data() + h * dk;
    double* dq = d_query.data() + h * dk;
    for (std::size_t j = 0; j < bands; ++j) {
      const double g = d_logits[j] * scale;
      const double* k = keys.data().data() + j * d + h * dk;
      double* dkey = d_keys.data().data() + j * d + h * dk;
      for (std::size_t i = 0; i < dk; ++i) {
        dq[i] += g * k[i];
        dkey[i] += g * q[i];
      }
    }
  }
  linear_backward(layer.q_proj, t.z_in, d_query, dz);
  return dz;
}

void check_ledger(const ForwardTrace& t, const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto s = static_cast<std::size_t>(c.num_scales);
  const auto nb = static_cast<std::size_t>(c.bands());
  check_dim(t.z_t.size(), s, "temporal features");
  for (const auto& z : t.z_t) check_dim(z.size(), d, "temporal feature width");
  if (!c.ablation.no_wavelet) {
    check_dim(t.bands.extent(0), nb, "H_w rows");
    check_dim(t.bands.extent(1), d, "H_w width");
    check_dim(t.weighted.extent(0), nb, "H'_w rows");
    check_dim(t.band_weights.size(), nb, "band weights");
  }
  check_dim(t.fused.extent(0), s, "Z_fused rows");
  check_dim(t.fused.extent(1), d, "Z_fused width");
  check_dim(t.mixed.extent(0), s, "Z_mixed rows");
  check_dim(t.mixed.extent(1), d, "Z_mixed width");
  check_dim(t.y.size(), static_cast<std::size_t>(c.horizon), "forecast");
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and parameters

void ModelConfig::validate() const {
  require(lookback >= 2, "lookback must be >= 2");
  require(horizon >= 1, "horizon must be >= 1");
  require(d_model >= 1, "d_model must be >= 1");
  require(num_heads >= 1 && divisible(d_model, num_heads),
          "d_model " + std::to_string(d_model) + " must be divisible by num_heads " + std::to_string(num_heads));
  require(num_scales >= 1 && num_scales <= 30, "num_scales must be in [1, 30]");
  const int pool = 1 << (num_scales - 1);
  require(pool <= lookback && divisible(lookback, pool), "lookback " + std::to_string(lookback) +
                                                             " must be divisible by 2^(S-1) = " + std::to_string(pool));
  require(dwt_levels >= 1 && dwt_levels <= 30, "dwt_levels must be in [1, 30]");
  const int block = 1 << dwt_levels;
  require(divisible(lookback, block), "lookback " + std::to_string(lookback) + " must be divisible by 2^J = " +
                                          std::to_string(block));
  const auto basis_filter = make_basis(basis);
  require(static_cast<std::size_t>(lookback / (block / 2)) >= basis_filter.taps(),
          "lookback / 2^(J-1) = " + std::to_string(lookback / (block / 2)) + " is shorter than the " + basis +
              " filter");
  require(fusion_layers >= 1, "fusion_layers must be >= 1");
  require(router_hidden >= 0, "router_hidden must be >= 0 (0 selects N_bands)");
  require(mixer_expansion >= 1, "mixer_expansion must be >= 1");
  require(revin_eps >= 0.0, "revin_eps must be >= 0");
}

namespace {

ModelParams shaped(const ModelConfig& c) {
  const auto L = static_cast<std::size_t>(c.lookback);
  const auto T = static_cast<std::size_t>(c.horizon);
  const auto D = static_cast<std::size_t>(c.d_model);
  const auto S = static_cast<std::size_t>(c.num_scales);
  const auto NB = static_cast<std::size_t>(c.bands());
  ModelParams p;
  for (std::size_t s = 0; s < S; ++s) p.temporal_embeds.emplace_back(L >> s, D);
  for (std::size_t j = 0; j < NB; ++j) p.band_embeds.emplace_back(L, D);
  p.router_in = LinearLayer(static_cast<std::size_t>(c.spectrum_len()), static_cast<std::size_t>(c.router_width()));
  p.router_out = LinearLayer(static_cast<std::size_t>(c.router_width()), NB);
  for (int l = 0; l < c.fusion_layers; ++l) {
    FusionLayer f{LinearLayer(D, D), LinearLayer(D, D), LinearLayer(D, D), LinearLayer(D, D),
                  Tensor({D}),       Tensor({D}),       LinearLayer(2 * D, D)};
    p.fusion.push_back(std::move(f));
  }
  const auto hidden = static_cast<std::size_t>(c.mixer_expansion) * S;
  p.mixer_in = LinearLayer(S, hidden);
  p.mixer_out = LinearLayer(hidden, S);
  p.head_in = LinearLayer(D, D);
  p.head_out = LinearLayer(D, T);
  return p;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  return shaped(config);
}

ModelParams ModelParams::init(const ModelConfig& config) {
  ModelParams p = zeros(config);
  std::mt19937_64 rng(config.seed);
  for (auto& l : p.temporal_embeds) l.init_uniform(rng);
  for (auto& l : p.band_embeds) l.init_uniform(rng);
  p.router_in.init_uniform(rng);
  p.router_out.init_uniform(rng);
  for (auto& f : p.fusion) {
    f.q_proj.init_uniform(rng);
    f.k_proj.init_uniform(rng);
    f.v_proj.init_uniform(rng);
    f.o_proj.init_uniform(rng);
    f.ln_gamma.fill(1.0);
    f.ln_beta.fill(0.0);
    f.gate.init_uniform(rng);
  }
  p.mixer_in.init_uniform(rng);
  p.mixer_out.init_uniform(rng);
  p.head_in.init_uniform(rng);
  p.head_out.init_uniform(rng);
  return p;
}

std::vector<NamedTensor> ModelParams::named() {
  std::vector<NamedTensor> out;
  auto linear = [&](const std::string& name, LinearLayer& l) {
    out.push_back({name + ".weight", &l.weight});
    out.push_back({name + ".bias", &l.bias});
  };
  for (std::size_t s = 0; s < temporal_embeds.size(); ++s) linear("temporal_embed." + std::to_string(s), temporal_embeds[s]);
  for (std::size_t j = 0; j < band_embeds.size(); ++j) linear("band_embed." + std::to_string(j), band_embeds[j]);
  linear("router.in", router_in);
  linear("router.out", router_out);
  for (std::size_t l = 0; l < fusion.size(); ++l) {
    const std::string prefix = "fusion." + std::to_string(l) + ".";
    linear(prefix + "q_proj", fusion[l].q_proj);
    linear(prefix + "k_proj", fusion[l].k_proj);
    linear(prefix + "v_proj", fusion[l].v_proj);
    linear(prefix + "o_proj", fusion[l].o_proj);
    out.push_back({prefix + "ln.gamma", &fusion[l].ln_gamma});
    out.push_back({prefix + "ln.beta", &fusion[l].ln_beta});
    linear(prefix + "gate", fusion[l].gate);
  }
  linear("mixer.in", mixer_in);
  linear("mixer.out", mixer_out);
  linear("head.in", head_in);
  linear("head.out", head_out);
  return out;
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

std::size_t ModelParams::count() const {
  auto linear = [](const LinearLayer& l) { return l.weight.numel() + l.bias.numel(); };
  std::size_t total = linear(router_in) + linear(router_out) + linear(mixer_in) + linear(mixer_out) +
                      linear(head_in) + linear(head_out);
  for (const auto& l : temporal_embeds) total += linear(l);
  for (const auto& l : band_embeds) total += linear(l);
  for (const auto& f : fusion) {
    total += linear(f.q_proj) + linear(f.k_proj) + linear(f.v_proj) + linear(f.o_proj) + linear(f.gate);
    total += f.ln_gamma.numel() + f.ln_beta.numel();
  }
  return total;
}

void ModelParams::zero_grad() {
  for (Tensor* t : tensors()) t->zero_grad();
}

std::size_t parameter_count(const ModelConfig& config) {
  const auto L = static_cast<std::size_t>(config.lookback);
  const auto T = static_cast<std::size_t>(config.horizon);
  const auto D = static_cast<std::size_t>(config.d_model);
  const auto S = static_cast<std::size_t>(config.num_scales);
  const auto NB = static_cast<std::size_t>(config.bands());
  const auto R = static_cast<std::size_t>(config.router_width());
  const auto F = static_cast<std::size_t>(config.spectrum_len());
  const auto E = static_cast<std::size_t>(config.mixer_expansion) * S;
  auto linear = [](std::size_t in, std::size_t out) { return in * out + out; };
  std::size_t total = 0;
  for (std::size_t s = 0; s < S; ++s) total += linear(L >> s, D);
  total += NB * linear(L, D);
  total += linear(F, R) + linear(R, NB);
  total += static_cast<std::size_t>(config.fusion_layers) * (4 * linear(D, D) + 2 * D + linear(2 * D, D));
  total += linear(S, E) + linear(E, S);
  total += linear(D, D) + linear(D, T);
  return total;
}

// ---------------------------------------------------------------------------
// Pipeline stages

std::pair<std::vector<double>, RevinStats> revin_normalize(std::span<const double> x, double eps) {
  if (x.empty()) throw InputError("revin_normalize: empty series");
  const auto n = static_cast<double>(x.size());
  RevinStats stats;
  stats.eps = eps;
  for (double v : x) stats.mu += v;
  stats.mu /= n;
  double var = 0.0;
  for (double v : x) var += (v - stats.mu) * (v - stats.mu);
  stats.sigma = std::sqrt(var / n);
  std::vector<double> out(x.size());
  const double denom = stats.sigma + stats.eps;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - stats.mu) / denom;
  return {std::move(out), stats};
}

std::vector<double> revin_denormalize(std::span<const double> y_norm, const RevinStats& stats) {
  std::vector<double> out(y_norm.size());
  const double scale = stats.sigma + stats.eps;
  for (std::size_t i = 0; i < y_norm.size(); ++i) out[i] = y_norm[i] * scale + stats.mu;
  return out;
}

std::vector<std::vector<double>> multiscale_pool(std::span<const double> x_norm, int num_scales) {
  if (num_scales < 1) throw ConfigError("multiscale_pool: need at least one scale");
  const std::size_t widest = std::size_t{1} << (num_scales - 1);
  if (x_norm.size() < widest || x_norm.size() % widest != 0) {
    throw ConfigError("multiscale_pool: length " + std::to_string(x_norm.size()) + " must be divisible by 2^(S-1) = " +
                      std::to_string(widest));
  }
  std::vector<std::vector<double>> out;
  out.emplace_back(x_norm.begin(), x_norm.end());
  for (int s = 1; s < num_scales; ++s) {
    const std::size_t k = std::size_t{1} << s;
    std::vector<double> pooled(x_norm.size() / k);
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      double acc = 0.0;
      for (std::size_t m = 0; m < k; ++m) acc += x_norm[i * k + m];
      pooled[i] = acc / static_cast<double>(k);
    }
    out.push_back(std::move(pooled));
  }
  return out;
}

std::vector<std::vector<double>> embed_temporal(const std::vector<std::vector<double>>& pooled,
                                                const ModelParams& params) {
  check_dim(pooled.size(), params.temporal_embeds.size(), "embed_temporal scales");
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < pooled.size(); ++s) {
    const auto& layer = params.temporal_embeds[s];
    check_dim(pooled[s].size(), layer.in_dim(), "embed_temporal input");
    std::vector<double> z(layer.out_dim());
    linear_forward(layer, pooled[s], z);
    out.push_back(std::move(z));
  }
  return out;
}

namespace {

std::vector<std::vector<double>> interpolated_bands(std::span<const double> x_norm, const WaveletBasis& basis,
                                                    int levels) {
  const auto pyramid = wavedec(x_norm, basis, levels);
  std::vector<std::vector<double>> out;
  for (const auto& band : pyramid.coeffs) out.push_back(interp_linear(band, x_norm.size()));
  return out;
}

Tensor embed_bands(const std::vector<std::vector<double>>& inputs, const ModelParams& params) {
  check_dim(inputs.size(), params.band_embeds.size(), "embed_wavelet bands");
  const std::size_t d = params.band_embeds.front().out_dim();
  Tensor out({inputs.size(), d});
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    check_dim(inputs[j].size(), params.band_embeds[j].in_dim(), "embed_wavelet input");
    linear_forward(params.band_embeds[j], inputs[j], row(out, j));
  }
  return out;
}

void router_forward(std::span<const double> spectrum, const ModelParams& params, std::vector<double>& pre,
                    std::vector<double>& act, std::vector<double>& weights) {
  check_dim(spectrum.size(), params.router_in.in_dim(), "router spectrum");
  pre.assign(params.router_in.out_dim(), 0.0);
  linear_forward(params.router_in, spectrum, pre);
  act.resize(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) act[i] = gelu(pre[i]);
  weights.assign(params.router_out.out_dim(), 0.0);
  linear_forward(params.router_out, act, weights);
  softmax_inplace(weights);
}

}  // namespace

Tensor embed_wavelet(std::span<const double> x_norm, const WaveletBasis& basis, int levels, const ModelParams& params) {
  return embed_bands(interpolated_bands(x_norm, basis, levels), params);
}

std::vector<double> route_frequencies(std::span<const double> x_norm, const ModelParams& params) {
  const auto spectrum = rfft_amplitude(x_norm);
  std::vector<double> pre, act, weights;
  router_forward(spectrum.amps, params, pre, act, weights);
  return weights;
}

Tensor weight_bands(const Tensor& bands, std::span<const double> weights) {
  if (bands.rank() != 2) throw DimensionError("weight_bands: expected [N_bands x D], got " + bands.shape_string());
  check_dim(weights.size(), bands.extent(0), "weight_bands weights");
  Tensor out = bands;
  out.drop_grad();
  for (std::size_t j = 0; j < weights.size(); ++j) {
    for (double& v : row(out, j)) v *= weights[j];
  }
  return out;
}

namespace {

void check_attention_shapes(std::size_t query_dim, const Tensor& bands, const FusionLayer& layer, int num_heads) {
  if (bands.rank() != 2) throw DimensionError("attention: bands must be [N_bands x D], got " + bands.shape_string());
  check_dim(query_dim, layer.q_proj.in_dim(), "attention query");
  check_dim(bands.extent(1), layer.k_proj.in_dim(), "attention key rows");
  if (num_heads < 1 || layer.q_proj.out_dim() % static_cast<std::size_t>(num_heads) != 0) {
    throw DimensionError("attention: width " + std::to_string(layer.q_proj.out_dim()) + " not divisible by " +
                         std::to_string(num_heads) + " heads");
  }
}

}  // namespace

std::vector<double> cross_attend(std::span<const double> query, const Tensor& bands, const FusionLayer& layer,
                                 int num_heads) {
  check_attention_shapes(query.size(), bands, layer, num_heads);
  AttentionTrace trace;
  return attend(query, project_rows(layer.k_proj, bands), project_rows(layer.v_proj, bands), layer, num_heads, trace);
}

std::vector<double> gated_fuse(std::span<const double> z_t, const Tensor& bands, const FusionLayer& layer,
                               int num_heads, bool gating) {
  check_attention_shapes(z_t.size(), bands, layer, num_heads);
  return fuse_forward(z_t, project_rows(layer.k_proj, bands), project_rows(layer.v_proj, bands), layer, num_heads,
                      gating)
      .z_out;
}

Tensor fusion_stack(const std::vector<std::vector<double>>& z_t, const Tensor& bands, const ModelParams& params,
                    int num_heads, bool gating) {
  if (params.fusion.empty()) throw ConfigError("fusion_stack: need at least one fusion layer");
  const std::size_t d = params.fusion.front().q_proj.out_dim();
  Tensor out({z_t.size(), d});
  std::vector<std::vector<double>> current = z_t;
  for (const auto& layer : params.fusion) {
    check_attention_shapes(d, bands, layer, num_heads);
    const Tensor keys = project_rows(layer.k_proj, bands);
    const Tensor values = project_rows(layer.v_proj, bands);
    for (auto& z : current) z = fuse_forward(z, keys, values, layer, num_heads, gating).z_out;
  }
  for (std::size_t s = 0; s < current.size(); ++s) std::copy(current[s].begin(), current[s].end(), row(out, s).begin());
  return out;
}

namespace {

void mix_forward(const Tensor& fused, const ModelParams& params, Tensor& mixed, std::vector<double>& pre,
                 std::vector<double>& act) {
  const std::size_t scales = fused.extent(0);
  const std::size_t d = fused.extent(1);
  check_dim(scales, params.mixer_in.in_dim(), "cross_scale_mix scales");
  const std::size_t hidden = params.mixer_in.out_dim();
  mixed = fused;
  mixed.drop_grad();
  pre.assign(d * hidden, 0.0);
  act.assign(d * hidden, 0.0);
  std::vector<double> column(scales);
  std::vector<double> out(scales);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t s = 0; s < scales; ++s) column[s] = fused.at(s, c);
    std::span<double> h_pre(pre.data() + c * hidden, hidden);
    std::span<double> h_act(act.data() + c * hidden, hidden);
    linear_forward(params.mixer_in, column, h_pre);
    for (std::size_t i = 0; i < hidden; ++i) h_act[i] = gelu(h_pre[i]);
    linear_forward(params.mixer_out, h_act, out);
    for (std::size_t s = 0; s < scales; ++s) mixed.at(s, c) += out[s];
  }
}

void head_forward(const Tensor& mixed, const ModelParams& params, std::vector<double>& z_final,
                  std::vector<double>& pre, std::vector<double>& act, std::vector<double>& y) {
  const std::size_t scales = mixed.extent(0);
  const std::size_t d = mixed.extent(1);
  check_dim(d, params.head_in.in_dim(), "aggregate_predict width");
  z_final.assign(d, 0.0);
  for (std::size_t s = 0; s < scales; ++s) add_into(z_final, row(mixed, s));
  for (double& v : z_final) v /= static_cast<double>(scales);
  pre.assign(params.head_in.out_dim(), 0.0);
  linear_forward(params.head_in, z_final, pre);
  act.resize(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) act[i] = gelu(pre[i]);
  y.assign(params.head_out.out_dim(), 0.0);
  linear_forward(params.head_out, act, y);
}

}  // namespace

Tensor cross_scale_mix(const Tensor& fused, const ModelParams& params) {
  if (fused.rank() != 2) throw DimensionError("cross_scale_mix: expected [S x D], got " + fused.shape_string());
  Tensor mixed;
  std::vector<double> pre, act;
  mix_forward(fused, params, mixed, pre, act);
  return mixed;
}

std::vector<double> aggregate_predict(const Tensor& mixed, const ModelParams& params) {
  if (mixed.rank() != 2) throw DimensionError("aggregate_predict: expected [S x D], got " + mixed.shape_string());
  std::vector<double> z_final, pre, act, y;
  head_forward(mixed, params, z_final, pre, act, y);
  return y;
}

// ---------------------------------------------------------------------------
// Full model

ForwardTrace forward_trace(std::span<const double> x, const ModelConfig& config, const ModelParams& params,
                           const WaveletBasis& basis) {
  check_dim(x.size(), static_cast<std::size_t>(config.lookback), "forward input");
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto scales = static_cast<std::size_t>(config.num_scales);
  ForwardTrace t;
  std::tie(t.x_norm, t.stats) = revin_normalize(x, config.revin_eps);
  t.pooled = multiscale_pool(t.x_norm, config.num_scales);
  t.z_t = embed_temporal(t.pooled, params);

  t.fused = Tensor({scales, d});
  if (config.ablation.no_wavelet) {
    for (std::size_t s = 0; s < scales; ++s) std::copy(t.z_t[s].begin(), t.z_t[s].end(), row(t.fused, s).begin());
  } else {
    t.band_inputs = interpolated_bands(t.x_norm, basis, config.dwt_levels);
    t.bands = embed_bands(t.band_inputs, params);
    const auto nb = static_cast<std::size_t>(config.bands());
    if (config.ablation.no_router) {
      t.band_weights.assign(nb, 1.0 / static_cast<double>(nb));
    } else {
      t.spectrum = rfft_amplitude(t.x_norm).amps;
      router_forward(t.spectrum, params, t.router_pre, t.router_act, t.band_weights);
    }
    t.weighted = weight_bands(t.bands, t.band_weights);

    const bool gating = !config.ablation.no_gating;
    std::vector<std::vector<double>> current = t.z_t;
    for (const auto& layer : params.fusion) {
      t.keys.push_back(project_rows(layer.k_proj, t.weighted));
      t.values.push_back(project_rows(layer.v_proj, t.weighted));
      auto& traces = t.fuse.emplace_back();
      for (auto& z : current) {
        traces.push_back(fuse_forward(z, t.keys.back(), t.values.back(), layer, config.num_heads, gating));
        z = traces.back().z_out;
      }
    }
    for (std::size_t s = 0; s < scales; ++s) std::copy(current[s].begin(), current[s].end(), row(t.fused, s).begin());
  }

  if (config.ablation.no_mixer) {
    t.mixed = t.fused;
  } else {
    mix_forward(t.fused, params, t.mixed, t.mixer_pre, t.mixer_act);
  }
  head_forward(t.mixed, params, t.z_final, t.head_pre, t.head_act, t.y_norm);
  t.y = revin_denormalize(t.y_norm, t.stats);
  check_ledger(t, config);
  return t;
}

std::vector<double> forward(std::span<const double> x, const ModelConfig& config, const ModelParams& params) {
  return forward_trace(x, config, params, make_basis(config.basis)).y;
}

void backward(const ForwardTrace& t, std::span<const double> dy, const ModelConfig& config, ModelParams& params) {
  check_dim(dy.size(), t.y.size(), "backward seed");
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto scales = static_cast<std::size_t>(config.num_scales);

  // RevIN denormalization: y = y_norm * (sigma + eps) + mu, statistics are input-only.
  const double scale = t.stats.sigma + t.stats.eps;
  std::vector<double> d_y_norm(dy.size());
  for (std::size_t i = 0; i < dy.size(); ++i) d_y_norm[i] = dy[i] * scale;

  std::vector<double> d_act(params.head_out.in_dim(), 0.0);
  linear_backward(params.head_out, t.head_act, d_y_norm, d_act);
  for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] *= gelu_grad(t.head_pre[i]);
  std::vector<double> d_final(d, 0.0);
  linear_backward(params.head_in, t.z_final, d_act, d_final);

  // Mean over scales, then the residual mixer.
  Tensor d_fused({scales, d});
  for (std::size_t s = 0; s < scales; ++s) {
    for (std::size_t c = 0; c < d; ++c) d_fused.at(s, c) = d_final[c] / static_cast<double>(scales);
  }
  if (!config.ablation.no_mixer) {
    const Tensor d_mixed = d_fused;
    const std::size_t hidden = params.mixer_in.out_dim();
    std::vector<double> column(scales), d_out(scales), d_column(scales), d_hidden(hidden);
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t s = 0; s < scales; ++s) {
        column[s] = t.fused.at(s, c);
        d_out[s] = d_mixed.at(s, c);
      }
      std::span<const double> h_pre(t.mixer_pre.data() + c * hidden, hidden);
      std::span<const double> h_act(t.mixer_act.data() + c * hidden, hidden);
      std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
      linear_backward(params.mixer_out, h_act, d_out, d_hidden);
      for (std::size_t i = 0; i < hidden; ++i) d_hidden[i] *= gelu_grad(h_pre[i]);
      std::fill(d_column.begin(), d_column.end(), 0.0);
      linear_backward(params.mixer_in, column, d_hidden, d_column);
      for (std::size_t s = 0; s < scales; ++s) d_fused.at(s, c) += d_column[s];
    }
  }

  std::vector<std::vector<double>> d_z(scales);
  for (std::size_t s = 0; s < scales; ++s) {
    auto r = row(std::as_const(d_fused), s);
    d_z[s].assign(r.begin(), r.end());
  }

  if (!config.ablation.no_wavelet) {
    const bool gating = !config.ablation.no_gating;
    const std::size_t nb = t.weighted.extent(0);
    Tensor d_weighted({nb, d});
    for (std::size_t l = params.fusion.size(); l-- > 0;) {
      FusionLayer& layer = params.fusion[l];
      Tensor d_keys({nb, d});
      Tensor d_values({nb, d});
      for (std::size_t s = 0; s < scales; ++s) {
        d_z[s] = fuse_backward(t.fuse[l][s], d_z[s], t.keys[l], t.values[l], layer, config.num_heads, gating, d_keys,
                               d_values);
      }
      for (std::size_t j = 0; j < nb; ++j) {
        linear_backward(layer.k_proj, row(t.weighted, j), row(std::as_const(d_keys), j), row(d_weighted, j));
        linear_backward(layer.v_proj, row(t.weighted, j), row(std::as_const(d_values), j), row(d_weighted, j));
      }
    }

    // H'_w = w (.) H_w
    std::vector<double> d_weights(nb, 0.0);
    for (std::size_t j = 0; j < nb; ++j) {
      auto dw_row = row(std::as_const(d_weighted), j);
      auto h_row = row(t.bands, j);
      std::vector<double> d_band(d);
      for (std::size_t c = 0; c < d; ++c) {
        d_weights[j] += dw_row[c] * h_row[c];
        d_band[c] = dw_row[c] * t.band_weights[j];
      }
      linear_backward(params.band_embeds[j], t.band_inputs[j], d_band, {});
    }

    if (!config.ablation.no_router) {
      std::vector<double> d_logits(nb, 0.0);
      softmax_backward(t.band_weights, d_weights, d_logits);
      std::vector<double> d_hidden(params.router_out.in_dim(), 0.0);
      linear_backward(params.router_out, t.router_act, d_logits, d_hidden);
      for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] *= gelu_grad(t.router_pre[i]);
      linear_backward(params.router_in, t.spectrum, d_hidden, {});
    }
  }

  for (std::size_t s = 0; s < scales; ++s) linear_backward(params.temporal_embeds[s], t.pooled[s], d_z[s], {});
}

}  // namespace awemixer
