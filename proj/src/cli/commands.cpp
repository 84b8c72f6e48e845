#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "awemixer/cli.hpp"
#include "awemixer/error.hpp"
#include "awemixer/serialize.hpp"

namespace awemixer::cli {

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

std::string suffix(int horizon) { return "_h" + std::to_string(horizon); }

/// Resolved config for one horizon of a multi-horizon run.
nlohmann::json horizon_config(const nlohmann::json& resolved, int horizon) {
  nlohmann::json j = resolved;
  j["model"]["horizon"] = horizon;
  return j;
}

void log_epoch(const std::string& tag, const EpochLog& e) {
  std::cerr << "[" << tag << "] epoch " << e.epoch << "  train_loss " << std::setprecision(6) << e.train_loss
            << "  val_mse " << e.val_mse << "  steps " << e.steps << (e.improved ? "  *" : "") << '\n';
}

struct HorizonRun {
  TrainResult trained;
  ForecastReport test;
  Baselines baselines;
};

HorizonRun train_and_test(const RunConfig& run, const ModelConfig& model, const RawSeries& raw,
                          const nlohmann::json& config, const std::string& tag) {
  model.validate();
  const WindowedDataset ds(raw, run.dataset_name(), dataset_kind_for(run.dataset_name()), model.lookback,
                           model.horizon, run.fractions());
  auto trained = train_model(model, run.train, ds, [&](const EpochLog& e) { log_epoch(tag, e); });
  set_report_config(trained.val, config);
  auto test = evaluate_model(trained.params, model, ds, Split::test);
  set_report_config(test, config);
  test.epochs_run = trained.epochs_run;
  auto baselines = naive_baselines(ds, Split::test);
  set_report_config(baselines.persistence, config);
  set_report_config(baselines.mean, config);
  return {std::move(trained), std::move(test), std::move(baselines)};
}

nlohmann::json history_json(const std::vector<EpochLog>& history) {
  auto out = nlohmann::json::array();
  for (const auto& e : history) {
    out.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_mse", e.val_mse},
                   {"steps", e.steps},
                   {"improved", e.improved}});
  }
  return out;
}

const char* const kVariants[] = {"full", "no_router", "no_wavelet", "no_gating", "no_mixer"};

ModelConfig variant_config(ModelConfig base, const std::string& variant) {
  base.ablation = {};
  if (variant == "no_router") base.ablation.no_router = true;
  if (variant == "no_wavelet") base.ablation.no_wavelet = true;
  if (variant == "no_gating") base.ablation.no_gating = true;
  if (variant == "no_mixer") base.ablation.no_mixer = true;
  return base;
}

std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& tag) {
  return p.parent_path() / (p.stem().string() + tag + p.extension().string());
}

}  // namespace

std::vector<int> RunConfig::resolved_horizons() const {
  return horizons.empty() ? std::vector<int>{model.horizon} : horizons;
}

std::optional<SplitFractions> RunConfig::fractions() const {
  if (!train_frac && !val_frac) return std::nullopt;
  auto f = default_fractions(dataset_kind_for(dataset_name()));
  if (train_frac) f.train = *train_frac;
  if (val_frac) f.val = *val_frac;
  return f;
}

std::string RunConfig::dataset_name() const {
  if (!dataset.empty()) return dataset;
  return std::filesystem::path(data).stem().string();
}

nlohmann::json to_json(const RunConfig& run) {
  const auto f = run.fractions().value_or(default_fractions(dataset_kind_for(run.dataset_name())));
  return {{"model", to_json(run.model)},
          {"train", to_json(run.train)},
          {"data",
           {{"path", run.data},
            {"dataset", run.dataset_name()},
            {"train_frac", f.train},
            {"val_frac", f.val},
            {"horizons", run.resolved_horizons()}}}};
}

std::filesystem::path run_directory(const std::filesystem::path& out, const nlohmann::json& resolved) {
  const auto dir = out / config_hash(resolved);
  std::filesystem::create_directories(dir);
  return dir;
}

TrainOutcome cmd_train(const RunConfig& run) {
  run.train.validate();
  const auto raw = load_csv(run.data);
  auto resolved = to_json(run);
  resolved["command"] = "train";
  TrainOutcome outcome;
  outcome.directory = run_directory(run.out, resolved);
  nlohmann::json summary{{"command", "train"}, {"config", resolved}, {"version", kVersion}};
  summary["runs"] = nlohmann::json::array();

  for (int horizon : run.resolved_horizons()) {
    ModelConfig model = run.model;
    model.horizon = horizon;
    const auto config = horizon_config(resolved, horizon);
    auto h = train_and_test(run, model, raw, config, "train h=" + std::to_string(horizon));
    save_checkpoint(outcome.directory / ("checkpoint" + suffix(horizon) + ".awem"), model, h.trained.params);
    write_json(outcome.directory / ("report_val" + suffix(horizon) + ".json"), to_json(h.trained.val));
    write_json(outcome.directory / ("report_test" + suffix(horizon) + ".json"), to_json(h.test));
    summary["runs"].push_back({{"horizon", horizon},
                               {"val", to_json(h.trained.val)},
                               {"test", to_json(h.test)},
                               {"baselines", {{"persistence", to_json(h.baselines.persistence)},
                                              {"mean", to_json(h.baselines.mean)}}},
                               {"history", history_json(h.trained.history)}});
    std::cout << "horizon " << horizon << ": test mse " << h.test.mse << " mae " << h.test.mae
              << " (persistence " << h.baselines.persistence.mse << ", mean " << h.baselines.mean.mse << ")\n";
    outcome.val.push_back(std::move(h.trained.val));
    outcome.test.push_back(std::move(h.test));
  }
  write_json(outcome.directory / "train.json", summary);
  std::cout << "outputs: " << outcome.directory.string() << '\n';
  return outcome;
}

ForecastReport cmd_evaluate(const RunConfig& run, const EvaluateOptions& options) {
  auto ck = load_checkpoint(options.checkpoint);
  const auto raw = load_csv(run.data);
  auto resolved = to_json(run);
  resolved["model"] = to_json(ck.config);
  resolved["data"]["horizons"] = std::vector<int>{ck.config.horizon};
  resolved["command"] = "evaluate";
  resolved["checkpoint"] = options.checkpoint.string();
  resolved["split"] = std::string(split_name(options.split));
  const auto dir = run_directory(run.out, resolved);

  const WindowedDataset ds(raw, run.dataset_name(), dataset_kind_for(run.dataset_name()), ck.config.lookback,
                           ck.config.horizon, run.fractions());
  std::ofstream predictions;
  if (options.predictions) {
    predictions.open(dir / "predictions.csv", std::ios::binary);
    if (!predictions) throw DataError("cannot write predictions.csv");
  }
  auto report = evaluate_model(ck.params, ck.config, ds, options.split, options.predictions ? &predictions : nullptr);
  set_report_config(report, resolved);
  auto baselines = naive_baselines(ds, options.split);
  set_report_config(baselines.persistence, resolved);
  set_report_config(baselines.mean, resolved);
  write_json(dir / "eval.json", {{"command", "evaluate"},
                                 {"config", resolved},
                                 {"version", kVersion},
                                 {"report", to_json(report)},
                                 {"baselines",
                                  {{"persistence", to_json(baselines.persistence)},
                                   {"mean", to_json(baselines.mean)}}}});
  std::cout << split_name(options.split) << " mse " << report.mse << " mae " << report.mae << '\n'
            << "outputs: " << dir.string() << '\n';
  return report;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& run) {
  run.train.validate();
  const auto raw = load_csv(run.data);
  auto resolved = to_json(run);
  resolved["command"] = "ablate";
  const auto dir = run_directory(run.out, resolved);

  std::vector<AblationRow> rows;
  for (const char* variant : kVariants) {
    AblationRow row{variant, {}, 0.0, 0.0};
    const auto model_base = variant_config(run.model, variant);
    for (int horizon : run.resolved_horizons()) {
      ModelConfig model = model_base;
      model.horizon = horizon;
      auto config = horizon_config(resolved, horizon);
      config["model"] = to_json(model);
      auto h = train_and_test(run, model, raw, config, std::string(variant) + " h=" + std::to_string(horizon));
      row.reports.push_back(std::move(h.test));
    }
    rows.push_back(std::move(row));
  }
  const auto& full = rows.front().reports;
  for (auto& row : rows) {
    double dm = 0.0;
    double da = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) {
      dm += (row.reports[i].mse - full[i].mse) / full[i].mse;
      da += (row.reports[i].mae - full[i].mae) / full[i].mae;
    }
    row.mse_degradation_pct = 100.0 * dm / static_cast<double>(full.size());
    row.mae_degradation_pct = 100.0 * da / static_cast<double>(full.size());
  }

  nlohmann::json out{{"command", "ablate"}, {"config", resolved}, {"version", kVersion}};
  out["variants"] = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& r : row.reports) reports.push_back(to_json(r));
    out["variants"].push_back({{"variant", row.variant},
                               {"mse_degradation_pct", row.mse_degradation_pct},
                               {"mae_degradation_pct", row.mae_degradation_pct},
                               {"reports", reports}});
  }
  write_json(dir / "ablation.json", out);
  const auto table = ablation_table(rows);
  write_text(dir / "ablation.txt", table);
  std::cout << table << "outputs: " << dir.string() << '\n';
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "variant" << std::right << std::setw(12) << "mse" << std::setw(12) << "mae"
      << std::setw(12) << "d_mse_%" << std::setw(12) << "d_mae_%" << '\n';
  out << std::fixed;
  for (const auto& row : rows) {
    double mse = 0.0;
    double mae = 0.0;
    for (const auto& r : row.reports) {
      mse += r.mse;
      mae += r.mae;
    }
    const auto n = static_cast<double>(std::max<std::size_t>(row.reports.size(), 1));
    out << std::left << std::setw(12) << row.variant << std::right << std::setprecision(6) << std::setw(12)
        << mse / n << std::setw(12) << mae / n << std::setprecision(2) << std::setw(12) << row.mse_degradation_pct
        << std::setw(12) << row.mae_degradation_pct << '\n';
  }
  return out.str();
}

std::vector<SweepRow> cmd_sweep(const RunConfig& run, const std::string& axis, const std::vector<int>& values) {
  if (axis != "fusion_layers" && axis != "dwt_levels") {
    throw ConfigError("unknown sweep axis '" + axis + "' (supported: fusion_layers, dwt_levels)");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  run.train.validate();
  const auto raw = load_csv(run.data);
  auto resolved = to_json(run);
  resolved["command"] = "sweep";
  resolved["sweep"] = {{"axis", axis}, {"values", values}};
  const auto dir = run_directory(run.out, resolved);

  std::vector<SweepRow> rows;
  nlohmann::json skipped = nlohmann::json::array();
  nlohmann::json reports = nlohmann::json::array();
  for (int value : values) {
    ModelConfig model = run.model;
    (axis == "fusion_layers" ? model.fusion_layers : model.dwt_levels) = value;
    try {
      model.validate();
    } catch (const ConfigError& e) {
      std::cerr << "warning: skipping " << axis << "=" << value << ": " << e.what() << '\n';
      skipped.push_back({{"value", value}, {"reason", e.what()}});
      continue;
    }
    for (int horizon : run.resolved_horizons()) {
      model.horizon = horizon;
      auto config = horizon_config(resolved, horizon);
      config["model"] = to_json(model);
      auto h = train_and_test(run, model, raw, config, axis + "=" + std::to_string(value) + " h=" + std::to_string(horizon));
      rows.push_back({value, horizon, h.test.mse, h.test.mae});
      reports.push_back(to_json(h.test));
    }
  }
  if (rows.empty()) throw ConfigError("no valid " + axis + " value to sweep");

  std::ostringstream csv;
  csv << "axis_value,horizon,mse,mae\n" << std::setprecision(17);
  for (const auto& r : rows) csv << r.axis_value << ',' << r.horizon << ',' << r.mse << ',' << r.mae << '\n';
  write_text(dir / "sweep.csv", csv.str());
  write_json(dir / "sweep.json", {{"command", "sweep"},
                                  {"config", resolved},
                                  {"version", kVersion},
                                  {"axis", axis},
                                  {"skipped", skipped},
                                  {"reports", reports}});
  std::cout << csv.str() << "outputs: " << dir.string() << '\n';
  return rows;
}

Decomposition cmd_decompose(const DecomposeOptions& options) {
  const auto raw = load_csv(options.input);
  std::size_t channel = 0;
  if (!options.channel.empty()) {
    const auto it = std::find(raw.channel_names.begin(), raw.channel_names.end(), options.channel);
    if (it != raw.channel_names.end()) {
      channel = static_cast<std::size_t>(it - raw.channel_names.begin());
    } else {
      std::size_t index = 0;
      const auto [ptr, ec] =
          std::from_chars(options.channel.data(), options.channel.data() + options.channel.size(), index);
      if (ec != std::errc() || ptr != options.channel.data() + options.channel.size() || index >= raw.channels()) {
        throw ConfigError("no channel '" + options.channel + "' in " + options.input.string());
      }
      channel = index;
    }
  }
  const auto basis = make_basis(options.basis);
  if (options.levels < 1 || options.levels > 30) throw ConfigError("levels must be in [1, 30]");
  if (options.start >= raw.rows()) throw ConfigError("start row is past the end of the series");
  const std::size_t block = std::size_t{1} << options.levels;
  std::size_t length = options.length;
  if (length == 0) {
    length = (raw.rows() - options.start) / block * block;
    if (length != raw.rows() - options.start) {
      std::cerr << "warning: trimming segment to " << length << " samples (multiple of 2^" << options.levels << ")\n";
    }
  }
  if (options.start + length > raw.rows()) throw ConfigError("segment runs past the end of the series");
  const auto series = raw.channel(channel);
  const std::span<const double> segment(series.data() + options.start, length);

  Decomposition result{wavedec(segment, basis, options.levels), {}};
  std::ostringstream bands;
  std::ostringstream interp;
  bands << "band_name,index,value\n" << std::setprecision(17);
  interp << "band_name,index,value\n" << std::setprecision(17);
  for (std::size_t b = 0; b < result.pyramid.bands(); ++b) {
    const auto name = result.pyramid.band_name(b);
    const auto& coeffs = result.pyramid.coeffs[b];
    for (std::size_t i = 0; i < coeffs.size(); ++i) bands << name << ',' << i << ',' << coeffs[i] << '\n';
    result.interpolated.push_back(interp_linear(coeffs, length));
    for (std::size_t i = 0; i < length; ++i) interp << name << ',' << i << ',' << result.interpolated.back()[i] << '\n';
  }
  if (options.out_csv.has_parent_path()) std::filesystem::create_directories(options.out_csv.parent_path());
  write_text(options.out_csv, bands.str());
  write_text(with_suffix(options.out_csv, "_interp"), interp.str());
  std::cout << "bands: " << options.out_csv.string() << '\n';
  return result;
}

}  // namespace awemixer::cli
