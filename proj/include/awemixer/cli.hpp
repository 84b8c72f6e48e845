#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "awemixer/data.hpp"
#include "awemixer/model.hpp"
#include "awemixer/train.hpp"
#include "json.hpp"

namespace awemixer::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericAbort = 4 };

/// Everything a run needs, after merging the config file, environment and flags.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data;                // CSV path
  std::string dataset;             // defaults to the CSV file stem
  std::vector<int> horizons;       // empty means {model.horizon}
  std::optional<double> train_frac;
  std::optional<double> val_frac;
  std::filesystem::path out = "runs";

  std::vector<int> resolved_horizons() const;
  std::optional<SplitFractions> fractions() const;
  std::string dataset_name() const;
};

/// Resolved config echoed into output JSON; the output directory is excluded so runs can be compared.
nlohmann::json to_json(const RunConfig& run);

/// `<out>/<run-id>` where run-id is the hash of `resolved`; created on demand.
std::filesystem::path run_directory(const std::filesystem::path& out, const nlohmann::json& resolved);

struct TrainOutcome {
  std::vector<ForecastReport> val;
  std::vector<ForecastReport> test;
  std::filesystem::path directory;
};

/// Trains one model per horizon; writes checkpoint_h<T>.awem, report_{val,test}_h<T>.json and train.json.
TrainOutcome cmd_train(const RunConfig& run);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  Split split = Split::test;
  bool predictions = false;
};

/// Scores a checkpoint on `run.data`; writes eval.json (with naive baselines) and optionally predictions.csv.
ForecastReport cmd_evaluate(const RunConfig& run, const EvaluateOptions& options);

struct AblationRow {
  std::string variant;
  std::vector<ForecastReport> reports;  // one per horizon, test split
  double mse_degradation_pct = 0.0;
  double mae_degradation_pct = 0.0;
};

/// Trains full, no_router, no_wavelet, no_gating and no_mixer with identical seed and data.
/// Writes ablation.json and ablation.txt.
std::vector<AblationRow> cmd_ablate(const RunConfig& run);
std::string ablation_table(const std::vector<AblationRow>& rows);

struct SweepRow {
  int axis_value = 0;
  int horizon = 0;
  double mse = 0.0;
  double mae = 0.0;
};

/// One run per axis value (fusion_layers or dwt_levels); invalid values are reported and skipped.
/// Writes sweep.csv (axis_value,horizon,mse,mae) and sweep.json. Throws ConfigError if nothing ran.
std::vector<SweepRow> cmd_sweep(const RunConfig& run, const std::string& axis, const std::vector<int>& values);

struct DecomposeOptions {
  std::filesystem::path input;
  std::string channel;  // name or zero-based index; empty selects the first channel
  std::string basis = "db4";
  int levels = 3;
  std::size_t start = 0;
  std::size_t length = 0;  // 0 uses the rest of the series, trimmed to a multiple of 2^levels
  std::filesystem::path out_csv;  // band CSV; the interpolated CSV gets an `_interp` suffix
};

struct Decomposition {
  WaveletPyramid pyramid;
  std::vector<std::vector<double>> interpolated;  // every band resampled to the segment length
};

Decomposition cmd_decompose(const DecomposeOptions& options);

struct SynthSpec {
  std::string kind = "sine";  // sine, sine_plus_transient, trend_sine
  std::size_t length = 4000;
  std::size_t channels = 1;
  std::uint64_t seed = 0;
  std::vector<double> periods{24.0};
  std::vector<double> amplitudes{1.0};
  double noise = 0.1;
  int bursts = 1;
  int burst_width = 48;
  double burst_period = 3.0;
  double burst_amplitude = 1.5;
  double trend_slope = 1e-3;
};

/// Hourly timestamps from 2016-07-01 00:00:00; channel c is phase-shifted by 2*pi*c/channels.
RawSeries synthesize(const SynthSpec& spec);
/// Burst start rows chosen for `spec` (sine_plus_transient only).
std::vector<std::size_t> burst_starts(const SynthSpec& spec);
void write_csv(std::ostream& out, const RawSeries& series);
void cmd_synth(const SynthSpec& spec, const std::filesystem::path& out_csv);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace awemixer::cli
