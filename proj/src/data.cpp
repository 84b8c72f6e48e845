#include "awemixer/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "awemixer/error.hpp"

namespace awemixer {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::vector<double> RawSeries::channel(std::size_t c) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
  return out;
}

RawSeries parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file, expected a header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  auto header = split_line(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 2 || lower(header[0]) != "date") {
    throw DataError(source + ": missing header; first column must be 'date' followed by at least one channel");
  }

  RawSeries series;
  series.channel_names.assign(header.begin() + 1, header.end());
  const std::size_t channels = series.channel_names.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != channels + 1) {
      throw ParseError(source + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                       " columns, expected " + std::to_string(channels + 1));
    }
    series.timestamps.push_back(trim(cells[0]));
    for (std::size_t c = 0; c < channels; ++c) {
      const std::string cell = trim(cells[c + 1]);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        throw ParseError(source + ": row " + std::to_string(line_no) + ", column '" + series.channel_names[c] +
                         "': non-numeric value '" + cell + "'");
      }
      series.values.push_back(value);
    }
  }
  return series;
}

RawSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_csv(in, path.string());
}

DatasetKind dataset_kind_for(std::string_view name) {
  return lower(name).rfind("ett", 0) == 0 ? DatasetKind::ett : DatasetKind::other;
}

SplitFractions default_fractions(DatasetKind kind) {
  return kind == DatasetKind::ett ? SplitFractions{0.6, 0.2} : SplitFractions{0.7, 0.1};
}

SplitSpec make_splits(std::size_t rows, DatasetKind kind, int lookback, int horizon,
                      std::optional<SplitFractions> fractions) {
  const auto f = fractions.value_or(default_fractions(kind));
  if (f.train <= 0.0 || f.val <= 0.0 || f.train + f.val >= 1.0) {
    throw ConfigError("split fractions must satisfy 0 < train, 0 < val, train + val < 1");
  }
  auto boundary = [rows](double frac) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(rows) * frac + 1e-9));
  };
  SplitSpec s{boundary(f.train), boundary(f.train + f.val), rows};
  const auto L = static_cast<std::size_t>(lookback);
  const auto T = static_cast<std::size_t>(horizon);
  if (s.train_end < L + T || s.val_end < s.train_end + T || s.test_end < s.val_end + T) {
    throw ConfigError("dataset with " + std::to_string(rows) + " rows is too small for lookback " +
                      std::to_string(lookback) + " + horizon " + std::to_string(horizon) + " (splits at " +
                      std::to_string(s.train_end) + "/" + std::to_string(s.val_end) + "/" +
                      std::to_string(s.test_end) + ")");
  }
  return s;
}

Scaler fit_scaler(const RawSeries& series, std::size_t train_end) {
  if (train_end == 0 || train_end > series.rows()) throw InputError("fit_scaler: invalid training boundary");
  const std::size_t channels = series.channels();
  Scaler scaler{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
  const auto n = static_cast<double>(train_end);
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < train_end; ++r) mean += series.at(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < train_end; ++r) var += (series.at(r, c) - mean) * (series.at(r, c) - mean);
    scaler.mean[c] = mean;
    scaler.std[c] = std::max(std::sqrt(var / n), kScalerStdFloor);
  }
  return scaler;
}

RawSeries apply_scaler(const RawSeries& series, const Scaler& scaler) {
  RawSeries out = series;
  const std::size_t channels = series.channels();
  for (std::size_t r = 0; r < series.rows(); ++r) {
    for (std::size_t c = 0; c < channels; ++c) {
      out.values[r * channels + c] = (series.at(r, c) - scaler.mean[c]) / scaler.std[c];
    }
  }
  return out;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

WindowedDataset::WindowedDataset(const RawSeries& raw, std::string name, DatasetKind kind, int lookback, int horizon,
                                 std::optional<SplitFractions> fractions)
    : name_(std::move(name)), lookback_(lookback), horizon_(horizon) {
  if (raw.channels() == 0) throw DataError(name_ + ": no channels");
  if (lookback < 1 || horizon < 1) throw ConfigError("lookback and horizon must be >= 1");
  splits_ = make_splits(raw.rows(), kind, lookback, horizon, fractions);
  scaler_ = fit_scaler(raw, splits_.train_end);
  const RawSeries scaled = apply_scaler(raw, scaler_);
  for (std::size_t c = 0; c < raw.channels(); ++c) scaled_.push_back(scaled.channel(c));
}

// Window starts for which all targets fall inside the split; lookbacks may reach into the previous split.
std::pair<std::size_t, std::size_t> WindowedDataset::start_range(Split split) const {
  const auto L = static_cast<std::size_t>(lookback_);
  const auto T = static_cast<std::size_t>(horizon_);
  std::size_t begin_target = 0;
  std::size_t end_row = 0;
  switch (split) {
    case Split::train:
      begin_target = L;
      end_row = splits_.train_end;
      break;
    case Split::val:
      begin_target = splits_.train_end;
      end_row = splits_.val_end;
      break;
    case Split::test:
      begin_target = splits_.val_end;
      end_row = splits_.test_end;
      break;
  }
  return {begin_target - L, end_row - L - T + 1};
}

std::size_t WindowedDataset::count(Split split) const {
  const auto [first, last] = start_range(split);
  return (last - first) * channels();
}

std::vector<WindowRef> WindowedDataset::windows(Split split) const {
  const auto [first, last] = start_range(split);
  std::vector<WindowRef> out;
  out.reserve((last - first) * channels());
  for (std::size_t c = 0; c < channels(); ++c) {
    for (std::size_t s = first; s < last; ++s) out.push_back({c, s});
  }
  return out;
}

std::vector<std::vector<WindowRef>> WindowedDataset::batches(Split split, std::size_t batch_size,
                                                             std::uint64_t seed) const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  auto all = windows(split);
  if (split == Split::train) {
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
  }
  std::vector<std::vector<WindowRef>> out;
  for (std::size_t i = 0; i < all.size(); i += batch_size) {
    out.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(i),
                     all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), i + batch_size)));
  }
  return out;
}

std::span<const double> WindowedDataset::input(const WindowRef& w) const {
  return std::span<const double>(scaled_.at(w.channel)).subspan(w.start, static_cast<std::size_t>(lookback_));
}

std::span<const double> WindowedDataset::target(const WindowRef& w) const {
  return std::span<const double>(scaled_.at(w.channel))
      .subspan(w.start + static_cast<std::size_t>(lookback_), static_cast<std::size_t>(horizon_));
}

}  // namespace awemixer
