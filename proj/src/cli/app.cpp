#include <algorithm>
#include <cstdlib>
#include <memory>
#include <iostream>
#include <string_view>

#include "CLI11.hpp"
#include "awemixer/cli.hpp"
#include "awemixer/error.hpp"

namespace awemixer::cli {

namespace {

bool flag_given(int argc, const char* const* argv, std::string_view flag) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view arg = argv[i];
    if (arg == flag || (arg.size() > flag.size() && arg.substr(0, flag.size()) == flag && arg[flag.size()] == '=')) {
      return true;
    }
  }
  return false;
}

// Accepts snake_case keys (d_model) as well as the flag spelling (d-model).
class SnakeCaseToml : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    for (auto& item : items) std::replace(item.name.begin(), item.name.end(), '_', '-');
    return items;
  }
};

int report_error(const char* kind, const std::exception& e, int code) {
  std::cerr << "error (" << kind << "): " << e.what() << '\n';
  return code;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Wavelet-enhanced mixer for long-term time series forecasting", "awemixer"};
  app.set_config("--config", "", "TOML config file; flags override its values");
  app.config_formatter(std::make_shared<SnakeCaseToml>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig rc;
  std::uint64_t seed = rc.model.seed;
  double train_frac = -1.0;
  double val_frac = -1.0;
  std::string out = rc.out.string();

  app.add_option("--data", rc.data, "Dataset CSV (first column `date`)");
  app.add_option("--dataset", rc.dataset, "Dataset name; ETT* selects 0.6/0.2/0.2 splits (default: file stem)");
  app.add_option("--out", out, "Output directory; AWEMIXER_OUT overrides the config file")->capture_default_str();
  app.add_option("--lookback", rc.model.lookback, "Lookback window L")->capture_default_str();
  app.add_option("--horizon", rc.model.horizon, "Forecast horizon T")->capture_default_str();
  app.add_option("--horizons", rc.horizons, "Comma-separated horizons, one model each (overrides --horizon)")
      ->delimiter(',');
  app.add_option("--d-model", rc.model.d_model, "Embedding width D")->capture_default_str();
  app.add_option("--num-scales", rc.model.num_scales, "Temporal scales S")->capture_default_str();
  app.add_option("--dwt-levels", rc.model.dwt_levels, "Wavelet decomposition levels J")->capture_default_str();
  app.add_option("--basis", rc.model.basis, "Wavelet basis (haar, db4)")->capture_default_str();
  app.add_option("--num-heads", rc.model.num_heads, "Attention heads")->capture_default_str();
  app.add_option("--fusion-layers", rc.model.fusion_layers, "Gated fusion layers N")->capture_default_str();
  app.add_option("--router-hidden", rc.model.router_hidden, "Router hidden width (0: number of bands)")
      ->capture_default_str();
  app.add_option("--mixer-expansion", rc.model.mixer_expansion, "Scale-mixer expansion factor")->capture_default_str();
  app.add_option("--revin-eps", rc.model.revin_eps, "RevIN epsilon")->capture_default_str();
  app.add_flag("--no-router", rc.model.ablation.no_router, "Uniform band weights");
  app.add_flag("--no-wavelet", rc.model.ablation.no_wavelet, "Drop the wavelet branch and fusion");
  app.add_flag("--no-gating", rc.model.ablation.no_gating, "Use the layer-normed residual without the gate");
  app.add_flag("--no-mixer", rc.model.ablation.no_mixer, "Skip cross-scale mixing");
  app.add_option("--seed", seed, "Seed for initialization and batch order")->capture_default_str();
  app.add_option("--lr", rc.train.lr, "Adam learning rate")->capture_default_str();
  app.add_option("--batch-size", rc.train.batch_size, "Windows per batch")->capture_default_str();
  app.add_option("--max-epochs", rc.train.max_epochs, "Epoch limit")->capture_default_str();
  app.add_option("--patience", rc.train.patience, "Epochs without validation improvement before stopping")
      ->capture_default_str();
  app.add_option("--grad-clip", rc.train.grad_clip, "Global gradient norm bound (0: off)")->capture_default_str();
  app.add_option("--max-steps", rc.train.max_steps, "Optimizer step budget (0: unlimited)")->capture_default_str();
  app.add_option("--train-frac", train_frac, "Training fraction of rows");
  app.add_option("--val-frac", val_frac, "Validation fraction of rows");

  auto* train = app.add_subcommand("train", "Train one model per horizon and report val/test metrics")->fallthrough();

  EvaluateOptions eval;
  std::string eval_split = "test";
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a dataset split")->fallthrough();
  evaluate->add_option("--checkpoint", eval.checkpoint, "Checkpoint written by train")->required();
  evaluate->add_option("--split", eval_split, "Split to score")
      ->check(CLI::IsMember({"val", "test"}))
      ->capture_default_str();
  evaluate->add_flag("--predictions", eval.predictions, "Also write predictions.csv");

  auto* ablate = app.add_subcommand("ablate", "Train the full model and its four ablations")->fallthrough();

  std::string axis;
  std::vector<int> values;
  auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep over fusion_layers or dwt_levels")->fallthrough();
  sweep->add_option("--axis", axis, "fusion_layers or dwt_levels")
      ->required()
      ->check(CLI::IsMember({"fusion_layers", "dwt_levels"}));
  sweep->add_option("--values", values, "Comma-separated axis values")->required()->delimiter(',');

  DecomposeOptions dec;
  std::string dec_out_csv;
  auto* decompose = app.add_subcommand("decompose", "Write wavelet bands of one channel as CSV")->fallthrough();
  decompose->add_option("--input", dec.input, "CSV to decompose (default: --data)");
  decompose->add_option("--channel", dec.channel, "Channel name or index (default: first)");
  decompose->add_option("--start", dec.start, "First row of the segment")->capture_default_str();
  decompose->add_option("--length", dec.length, "Segment length (0: rest of series, trimmed to 2^J)")
      ->capture_default_str();
  decompose->add_option("--out-csv", dec_out_csv, "Band CSV path (default: <out>/<run-id>/bands.csv)");

  SynthSpec synth_spec;
  std::string synth_out_csv;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset CSV")->fallthrough();
  synth->add_option("--kind", synth_spec.kind, "Series kind")
      ->check(CLI::IsMember({"sine", "sine_plus_transient", "trend_sine"}))
      ->capture_default_str();
  synth->add_option("--length", synth_spec.length, "Rows")->capture_default_str();
  synth->add_option("--channels", synth_spec.channels, "Channels")->capture_default_str();
  synth->add_option("--periods", synth_spec.periods, "Comma-separated sinusoid periods")->delimiter(',');
  synth->add_option("--amplitudes", synth_spec.amplitudes, "Comma-separated amplitudes (one or one per period)")
      ->delimiter(',');
  synth->add_option("--noise", synth_spec.noise, "Gaussian noise sigma")->capture_default_str();
  synth->add_option("--bursts", synth_spec.bursts, "Transient bursts (sine_plus_transient)")->capture_default_str();
  synth->add_option("--burst-width", synth_spec.burst_width, "Burst length in rows")->capture_default_str();
  synth->add_option("--burst-period", synth_spec.burst_period, "Burst oscillation period")->capture_default_str();
  synth->add_option("--burst-amplitude", synth_spec.burst_amplitude, "Burst peak amplitude")->capture_default_str();
  synth->add_option("--trend-slope", synth_spec.trend_slope, "Trend per row (trend_sine)")->capture_default_str();
  synth->add_option("--out-csv", synth_out_csv, "Output CSV (default: <out>/<run-id>/synth.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (!flag_given(argc, argv, "--out")) {
    if (const char* env = std::getenv("AWEMIXER_OUT"); env && *env) out = env;
  }
  rc.out = out;
  rc.model.seed = seed;
  rc.train.seed = seed;
  if (train_frac >= 0.0) rc.train_frac = train_frac;
  if (val_frac >= 0.0) rc.val_frac = val_frac;
  eval.split = eval_split == "val" ? Split::val : Split::test;

  try {
    const bool needs_data = !synth->parsed() && !(decompose->parsed() && !dec.input.empty());
    if (needs_data && rc.data.empty()) throw ConfigError("--data is required");
    if (train->parsed()) {
      cmd_train(rc);
    } else if (evaluate->parsed()) {
      cmd_evaluate(rc, eval);
    } else if (ablate->parsed()) {
      cmd_ablate(rc);
    } else if (sweep->parsed()) {
      cmd_sweep(rc, axis, values);
    } else if (decompose->parsed()) {
      if (dec.input.empty()) dec.input = rc.data;
      dec.basis = rc.model.basis;
      dec.levels = rc.model.dwt_levels;
      if (dec_out_csv.empty()) {
        nlohmann::json resolved{{"command", "decompose"},
                                {"input", dec.input.string()},
                                {"channel", dec.channel},
                                {"basis", dec.basis},
                                {"levels", dec.levels},
                                {"start", dec.start},
                                {"length", dec.length}};
        dec.out_csv = run_directory(rc.out, resolved) / "bands.csv";
      } else {
        dec.out_csv = dec_out_csv;
      }
      cmd_decompose(dec);
    } else if (synth->parsed()) {
      synth_spec.seed = seed;
      std::filesystem::path target = synth_out_csv;
      if (target.empty()) {
        nlohmann::json resolved{{"command", "synth"},
                                {"kind", synth_spec.kind},
                                {"length", synth_spec.length},
                                {"channels", synth_spec.channels},
                                {"seed", synth_spec.seed},
                                {"periods", synth_spec.periods},
                                {"amplitudes", synth_spec.amplitudes},
                                {"noise", synth_spec.noise},
                                {"bursts", synth_spec.bursts},
                                {"burst_width", synth_spec.burst_width},
                                {"burst_period", synth_spec.burst_period},
                                {"burst_amplitude", synth_spec.burst_amplitude},
                                {"trend_slope", synth_spec.trend_slope}};
        target = run_directory(rc.out, resolved) / "synth.csv";
      }
      cmd_synth(synth_spec, target);
      std::cout << "wrote " << target.string() << '\n';
    }
  } catch (const ConfigError& e) {
    return report_error("config", e, kConfigError);
  } catch (const InputError& e) {
    return report_error("config", e, kConfigError);
  } catch (const DimensionError& e) {
    return report_error("config", e, kConfigError);
  } catch (const DataError& e) {
    return report_error("data", e, kDataError);
  } catch (const ParseError& e) {
    return report_error("data", e, kDataError);
  } catch (const NumericError& e) {
    return report_error("numeric", e, kNumericAbort);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io", e, kDataError);
  } catch (const std::exception& e) {
    return report_error("internal", e, 1);
  }
  return kOk;
}

}  // namespace awemixer::cli
