#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace awemixer {

/// Multivariate series as loaded from CSV; `values` is row-major [rows x C].
struct RawSeries {
  std::vector<std::string> timestamps;
  std::vector<std::string> channel_names;
  std::vector<double> values;

  std::size_t rows() const { return timestamps.size(); }
  std::size_t channels() const { return channel_names.size(); }
  double at(std::size_t row, std::size_t channel) const { return values[row * channels() + channel]; }
  std::vector<double> channel(std::size_t c) const;
};

/// Expects a header whose first column is `date`; every other cell must be a finite number.
RawSeries parse_csv(std::istream& in, const std::string& source = "<stream>");
RawSeries load_csv(const std::filesystem::path& path);

enum class DatasetKind { ett, other };

/// ETT-family names (ETTh1, ETTm2, ...) map to DatasetKind::ett.
DatasetKind dataset_kind_for(std::string_view name);

struct SplitFractions {
  double train;
  double val;
};

SplitFractions default_fractions(DatasetKind kind);

/// Row boundaries; the test split ends at test_end.
struct SplitSpec {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t test_end = 0;
};

/// Chronological split; throws ConfigError if any split cannot hold a lookback+horizon window.
SplitSpec make_splits(std::size_t rows, DatasetKind kind, int lookback, int horizon,
                      std::optional<SplitFractions> fractions = std::nullopt);

struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;
};

inline constexpr double kScalerStdFloor = 1e-8;

/// Per-channel mean and population std of rows [0, train_end).
Scaler fit_scaler(const RawSeries& series, std::size_t train_end);
RawSeries apply_scaler(const RawSeries& series, const Scaler& scaler);

enum class Split { train, val, test };
std::string_view split_name(Split split);

/// One univariate window: inputs [start, start+L), targets [start+L, start+L+T) of `channel`.
struct WindowRef {
  std::size_t channel = 0;
  std::size_t start = 0;
};

/// Z-scored series with split boundaries and stride-1 window indexing under channel independence.
class WindowedDataset {
 public:
  WindowedDataset(const RawSeries& raw, std::string name, DatasetKind kind, int lookback, int horizon,
                  std::optional<SplitFractions> fractions = std::nullopt);

  const std::string& name() const { return name_; }
  const SplitSpec& splits() const { return splits_; }
  const Scaler& scaler() const { return scaler_; }
  int lookback() const { return lookback_; }
  int horizon() const { return horizon_; }
  std::size_t channels() const { return scaled_.size(); }
  std::size_t rows() const { return splits_.test_end; }

  std::size_t count(Split split) const;
  /// Channel-major, chronological within a channel.
  std::vector<WindowRef> windows(Split split) const;
  /// Training order is shuffled by `seed`; val/test stay chronological. The last batch may be short.
  std::vector<std::vector<WindowRef>> batches(Split split, std::size_t batch_size, std::uint64_t seed) const;

  std::span<const double> input(const WindowRef& w) const;
  std::span<const double> target(const WindowRef& w) const;
  /// Scaled values of one channel over all rows.
  std::span<const double> series(std::size_t channel) const { return scaled_[channel]; }

 private:
  std::pair<std::size_t, std::size_t> start_range(Split split) const;

  std::string name_;
  int lookback_;
  int horizon_;
  SplitSpec splits_;
  Scaler scaler_;
  std::vector<std::vector<double>> scaled_;  // per channel
};

}  // namespace awemixer
