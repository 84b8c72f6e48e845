#include "awemixer/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "awemixer/error.hpp"

namespace awemixer {

namespace {

constexpr char kMagic[5] = {'A', 'W', 'E', 'M', '1'};

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown " + where + " key '" + key + "'");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

Checkpoint read_tensors(std::istream& in, const nlohmann::json& header);

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"lookback", c.lookback},
          {"horizon", c.horizon},
          {"d_model", c.d_model},
          {"num_scales", c.num_scales},
          {"dwt_levels", c.dwt_levels},
          {"basis", c.basis},
          {"num_heads", c.num_heads},
          {"fusion_layers", c.fusion_layers},
          {"router_hidden", c.router_hidden},
          {"mixer_expansion", c.mixer_expansion},
          {"revin_eps", c.revin_eps},
          {"seed", c.seed},
          {"ablation",
           {{"no_router", c.ablation.no_router},
            {"no_wavelet", c.ablation.no_wavelet},
            {"no_gating", c.ablation.no_gating},
            {"no_mixer", c.ablation.no_mixer}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"lookback", "horizon", "d_model", "num_scales", "dwt_levels", "basis", "num_heads", "fusion_layers",
                  "router_hidden", "mixer_expansion", "revin_eps", "seed", "ablation"},
                 "model config");
  ModelConfig c;
  read_field(j, "lookback", c.lookback);
  read_field(j, "horizon", c.horizon);
  read_field(j, "d_model", c.d_model);
  read_field(j, "num_scales", c.num_scales);
  read_field(j, "dwt_levels", c.dwt_levels);
  read_field(j, "basis", c.basis);
  read_field(j, "num_heads", c.num_heads);
  read_field(j, "fusion_layers", c.fusion_layers);
  read_field(j, "router_hidden", c.router_hidden);
  read_field(j, "mixer_expansion", c.mixer_expansion);
  read_field(j, "revin_eps", c.revin_eps);
  read_field(j, "seed", c.seed);
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    reject_unknown(a, {"no_router", "no_wavelet", "no_gating", "no_mixer"}, "ablation");
    read_field(a, "no_router", c.ablation.no_router);
    read_field(a, "no_wavelet", c.ablation.no_wavelet);
    read_field(a, "no_gating", c.ablation.no_gating);
    read_field(a, "no_mixer", c.ablation.no_mixer);
  }
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"grad_clip", c.grad_clip},
          {"max_steps", c.max_steps}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"lr", "batch_size", "max_epochs", "patience", "seed", "grad_clip", "max_steps"}, "train config");
  TrainConfig c;
  read_field(j, "lr", c.lr);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "max_epochs", c.max_epochs);
  read_field(j, "patience", c.patience);
  read_field(j, "seed", c.seed);
  read_field(j, "grad_clip", c.grad_clip);
  read_field(j, "max_steps", c.max_steps);
  return c;
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, ModelParams& params) {
  nlohmann::json header;
  header["config"] = to_json(config);
  header["tensors"] = nlohmann::json::array();
  const auto named = params.named();
  for (const auto& nt : named) header["tensors"].push_back({{"name", nt.name}, {"shape", nt.tensor->shape()}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& nt : named) {
    for (double v : nt.tensor->data()) write_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError("'" + path.string() + "' is not an AWEM1 checkpoint");
  }
  const std::uint64_t len = read_u64(in);
  if (len > (1ULL << 30)) throw ParseError("checkpoint header length " + std::to_string(len) + " is implausible");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw ParseError("checkpoint truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  try {
    return read_tensors(in, header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header is malformed: ") + e.what());
  }
}

namespace {

Checkpoint read_tensors(std::istream& in, const nlohmann::json& header) {
  Checkpoint ck{model_config_from_json(header.at("config")), {}};
  ck.config.validate();
  ck.params = ModelParams::zeros(ck.config);
  const auto named = ck.params.named();
  const auto& entries = header.at("tensors");
  if (entries.size() != named.size()) {
    throw ParseError("checkpoint lists " + std::to_string(entries.size()) + " tensors, config implies " +
                     std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto name = entries[i].at("name").get<std::string>();
    const auto shape = entries[i].at("shape").get<std::vector<std::size_t>>();
    if (name != named[i].name || shape != named[i].tensor->shape()) {
      throw ParseError("checkpoint tensor " + std::to_string(i) + " is '" + name + "' " + shape_to_string(shape) +
                       ", expected '" + named[i].name + "' " + named[i].tensor->shape_string());
    }
    for (double& v : named[i].tensor->data()) v = std::bit_cast<double>(read_u64(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("checkpoint has trailing bytes");
  return ck;
}

}  // namespace

}  // namespace awemixer
