#include "awemixer/train.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "awemixer/error.hpp"
#include "awemixer/optim.hpp"
#include "awemixer/serialize.hpp"

namespace awemixer {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> truth, const char* what) {
  if (pred.size() != truth.size()) {
    throw DimensionError(std::string(what) + ": prediction length " + std::to_string(pred.size()) +
                         " != target length " + std::to_string(truth.size()));
  }
  if (pred.empty()) throw DimensionError(std::string(what) + ": empty input");
}

ForecastReport blank_report(const WindowedDataset& dataset, Split split) {
  ForecastReport r;
  r.dataset = dataset.name();
  r.split = std::string(split_name(split));
  r.horizon = dataset.horizon();
  return r;
}

void clip_gradients(std::span<Tensor* const> params, double bound) {
  const double norm = gradient_norm(params);
  if (norm <= bound || norm == 0.0) return;
  const double scale = bound / norm;
  for (Tensor* t : params) {
    for (double& g : t->grad()) g *= scale;
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 0 || patience > max_epochs) throw ConfigError("patience must be in [0, max_epochs]");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0 (0 disables clipping)");
}

double loss_mse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, "loss_mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

double metric_mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, "metric_mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

void ErrorAccumulator::add(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, "ErrorAccumulator");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    sum_sq += e * e;
    sum_abs += std::abs(e);
  }
  points += pred.size();
  ++windows;
}

void finalize_report(ForecastReport& report, const ErrorAccumulator& acc) {
  if (acc.points == 0) throw ContractError("report built from zero windows");
  const auto n = static_cast<double>(acc.points);
  report.mse = acc.sum_sq / n;
  report.mae = acc.sum_abs / n;
  report.windows = acc.windows;
  if (!std::isfinite(report.mse) || !std::isfinite(report.mae)) {
    throw NumericError("non-finite metrics on " + report.dataset + "/" + report.split);
  }
  if (report.mae * report.mae > report.mse * (1.0 + 1e-12)) {
    throw ContractError("report violates mae^2 <= mse: mae=" + std::to_string(report.mae) +
                        " mse=" + std::to_string(report.mse));
  }
}

void set_report_config(ForecastReport& report, const nlohmann::json& config) {
  report.config = config;
  report.config_hash = config_hash(config);
}

nlohmann::json to_json(const ForecastReport& r) {
  nlohmann::json j = comparable_json(r);
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

nlohmann::json comparable_json(const ForecastReport& r) {
  return {{"model", r.model},
          {"dataset", r.dataset},
          {"split", r.split},
          {"horizon", r.horizon},
          {"mse", r.mse},
          {"mae", r.mae},
          {"windows", r.windows},
          {"config_hash", r.config_hash},
          {"seed", r.seed},
          {"epochs_run", r.epochs_run},
          {"config", r.config},
          {"version", r.version}};
}

double gradient_norm(std::span<Tensor* const> params) {
  double sq = 0.0;
  for (const Tensor* t : params) {
    if (!t->has_grad()) continue;
    for (double g : t->grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

TrainResult train_model(const ModelConfig& config, const TrainConfig& train, const WindowedDataset& dataset,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  train.validate();
  if (dataset.lookback() != config.lookback || dataset.horizon() != config.horizon) {
    throw ConfigError("dataset windows (" + std::to_string(dataset.lookback()) + ", " +
                      std::to_string(dataset.horizon()) + ") do not match model (" + std::to_string(config.lookback) +
                      ", " + std::to_string(config.horizon) + ")");
  }
  const auto start_time = std::chrono::steady_clock::now();
  const auto basis = make_basis(config.basis);

  TrainResult result{ModelParams::init(config), {}, {}, 0, 0};
  ModelParams params = result.params;
  const auto tensors = params.tensors();
  AdamState adam(tensors, train.lr);
  double best_val = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  std::vector<double> dy(static_cast<std::size_t>(config.horizon));

  for (int epoch = 0; epoch < train.max_epochs; ++epoch) {
    const auto batches = dataset.batches(Split::train, train.batch_size, train.seed + static_cast<std::uint64_t>(epoch));
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      if (train.max_steps > 0 && result.steps >= train.max_steps) break;
      const auto& batch = batches[b];
      params.zero_grad();
      const double norm = static_cast<double>(batch.size() * dy.size());
      double loss = 0.0;
      for (const auto& w : batch) {
        const auto trace = forward_trace(dataset.input(w), config, params, basis);
        const auto target = dataset.target(w);
        for (std::size_t t = 0; t < dy.size(); ++t) {
          const double diff = trace.y[t] - target[t];
          loss += diff * diff;
          dy[t] = 2.0 * diff / norm;
        }
        backward(trace, dy, config, params);
      }
      loss /= norm;
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss " << loss << " at epoch " << epoch + 1 << ", batch " << b;
        throw NumericError(msg.str());
      }
      if (train.grad_clip > 0.0) clip_gradients(tensors, train.grad_clip);
      adam_step(tensors, adam);
      ++result.steps;
      epoch_loss += loss;
      ++epoch_batches;
    }
    if (epoch_batches == 0) break;

    ++result.epochs_run;
    auto val = evaluate_model(params, config, dataset, Split::val);
    EpochLog log{epoch + 1, epoch_loss / static_cast<double>(epoch_batches), val.mse, result.steps, false};
    if (val.mse < best_val) {
      best_val = val.mse;
      result.params = params;
      result.val = std::move(val);
      stale_epochs = 0;
      log.improved = true;
    } else {
      ++stale_epochs;
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (stale_epochs >= train.patience) break;
    if (train.max_steps > 0 && result.steps >= train.max_steps) break;
  }

  for (Tensor* t : result.params.tensors()) t->drop_grad();
  result.val.epochs_run = result.epochs_run;
  result.val.seed = config.seed;
  result.val.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

ForecastReport evaluate_model(const ModelParams& params, const ModelConfig& config, const WindowedDataset& dataset,
                              Split split, std::ostream* predictions) {
  const auto start_time = std::chrono::steady_clock::now();
  const auto basis = make_basis(config.basis);
  ForecastReport report = blank_report(dataset, split);
  report.seed = config.seed;
  set_report_config(report, to_json(config));
  ErrorAccumulator acc;
  if (predictions) {
    *predictions << "window_id,channel,step,y_true,y_pred\n" << std::setprecision(17);
  }
  const auto windows = dataset.windows(split);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto trace = forward_trace(dataset.input(windows[i]), config, params, basis);
    const auto target = dataset.target(windows[i]);
    acc.add(trace.y, target);
    if (predictions) {
      for (std::size_t t = 0; t < target.size(); ++t) {
        *predictions << i << ',' << windows[i].channel << ',' << t << ',' << target[t] << ',' << trace.y[t] << '\n';
      }
    }
  }
  finalize_report(report, acc);
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

Baselines naive_baselines(const WindowedDataset& dataset, Split split) {
  Baselines out{blank_report(dataset, split), blank_report(dataset, split)};
  out.persistence.model = "persistence";
  out.mean.model = "mean";
  ErrorAccumulator persistence;
  ErrorAccumulator mean;
  std::vector<double> pred(static_cast<std::size_t>(dataset.horizon()));
  for (const auto& w : dataset.windows(split)) {
    const auto x = dataset.input(w);
    const auto y = dataset.target(w);
    std::fill(pred.begin(), pred.end(), x.back());
    persistence.add(pred, y);
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    std::fill(pred.begin(), pred.end(), mu);
    mean.add(pred, y);
  }
  finalize_report(out.persistence, persistence);
  finalize_report(out.mean, mean);
  return out;
}

}  // namespace awemixer
