#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "awemixer/data.hpp"
#include "awemixer/model.hpp"
#include "json.hpp"

namespace awemixer {

inline constexpr const char* kVersion = "1.0.0";

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  int max_epochs = 10;
  int patience = 3;
  std::uint64_t seed = 2021;  // batch shuffling
  double grad_clip = 0.0;     // global L2 norm bound; 0 disables
  std::size_t max_steps = 0;  // optimizer step budget; 0 means unlimited

  void validate() const;
};

/// (1/T) sum (pred - truth)^2
double loss_mse(std::span<const double> pred, std::span<const double> truth);
/// (1/T) sum |pred - truth|
double metric_mae(std::span<const double> pred, std::span<const double> truth);

/// Running sums of squared and absolute errors over many windows.
struct ErrorAccumulator {
  double sum_sq = 0.0;
  double sum_abs = 0.0;
  std::size_t points = 0;
  std::size_t windows = 0;

  void add(std::span<const double> pred, std::span<const double> truth);
};

struct ForecastReport {
  std::string model = "awemixer";
  std::string dataset;
  std::string split;
  int horizon = 0;
  double mse = 0.0;
  double mae = 0.0;
  std::size_t windows = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double wall_time_s = 0.0;
  nlohmann::json config;
  std::string version = kVersion;
};

/// Fills mse/mae/windows from `acc`; throws ContractError if mae^2 > mse.
void finalize_report(ForecastReport& report, const ErrorAccumulator& acc);

/// Attaches `config` and its hash to the report.
void set_report_config(ForecastReport& report, const nlohmann::json& config);

nlohmann::json to_json(const ForecastReport& report);
/// Report JSON without wall_time_s, for reproducibility comparisons.
nlohmann::json comparable_json(const ForecastReport& report);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  std::size_t steps = 0;
  bool improved = false;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  ForecastReport val;
  std::vector<EpochLog> history;
  int epochs_run = 0;
  std::size_t steps = 0;
};

/// Adam on batch-mean MSE with per-epoch validation and early stopping.
/// Parameters are initialized from config.seed; batches are shuffled from train.seed.
/// Throws NumericError naming the batch if the loss becomes non-finite.
TrainResult train_model(const ModelConfig& config, const TrainConfig& train, const WindowedDataset& dataset,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

/// Scores every window of `split` on the standardized scale.
/// With `predictions`, writes CSV rows window_id,channel,step,y_true,y_pred.
ForecastReport evaluate_model(const ModelParams& params, const ModelConfig& config, const WindowedDataset& dataset,
                              Split split, std::ostream* predictions = nullptr);

struct Baselines {
  ForecastReport persistence;  // repeat the last observed value
  ForecastReport mean;         // predict the lookback mean
};

Baselines naive_baselines(const WindowedDataset& dataset, Split split);

/// L2 norm over every gradient entry.
double gradient_norm(std::span<Tensor* const> params);

}  // namespace awemixer
