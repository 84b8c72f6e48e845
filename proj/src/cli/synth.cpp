#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

#include "awemixer/cli.hpp"
#include "awemixer/error.hpp"

namespace awemixer::cli {

namespace {

void validate(const SynthSpec& s) {
  if (s.kind != "sine" && s.kind != "sine_plus_transient" && s.kind != "trend_sine") {
    throw ConfigError("unknown synth kind '" + s.kind + "' (supported: sine, sine_plus_transient, trend_sine)");
  }
  if (s.length < 2) throw ConfigError("synth length must be >= 2");
  if (s.channels < 1) throw ConfigError("synth channels must be >= 1");
  if (s.periods.empty()) throw ConfigError("at least one period is required");
  for (double p : s.periods) {
    if (!(p > 0.0)) throw ConfigError("periods must be > 0");
  }
  if (s.amplitudes.size() != 1 && s.amplitudes.size() != s.periods.size()) {
    throw ConfigError("amplitudes must have one entry or one per period");
  }
  if (s.noise < 0.0) throw ConfigError("noise must be >= 0");
  if (s.bursts < 0 || s.burst_width < 2 || !(s.burst_period > 0.0)) {
    throw ConfigError("bursts >= 0, burst width >= 2 and burst period > 0 are required");
  }
}

std::string hourly_timestamp(std::size_t hours) {
  using namespace std::chrono;
  const sys_days base = year{2016} / July / 1;
  const auto t = sys_time<std::chrono::hours>(base) + std::chrono::hours(static_cast<long long>(hours));
  const auto day = floor<days>(t);
  const year_month_day ymd(day);
  const hh_mm_ss hms(t - day);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:00:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(hms.hours().count()));
  return buf;
}

void append_number(std::string& line, double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  line.append(buf, end);
}

}  // namespace

std::vector<std::size_t> burst_starts(const SynthSpec& spec) {
  std::vector<std::size_t> starts;
  if (spec.kind != "sine_plus_transient") return starts;
  std::seed_seq seq{spec.seed, std::uint64_t{0xB0257}};
  std::mt19937_64 rng(seq);
  const auto width = static_cast<std::size_t>(spec.burst_width);
  const std::size_t last = spec.length > width ? spec.length - width : 0;
  std::uniform_int_distribution<std::size_t> pick(0, last);
  for (int b = 0; b < spec.bursts; ++b) starts.push_back(pick(rng));
  return starts;
}

RawSeries synthesize(const SynthSpec& spec) {
  validate(spec);
  const std::size_t C = spec.channels;
  RawSeries s;
  for (std::size_t c = 0; c < C; ++c) s.channel_names.push_back("ch" + std::to_string(c));
  s.values.assign(spec.length * C, 0.0);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  for (std::size_t r = 0; r < spec.length; ++r) {
    s.timestamps.push_back(hourly_timestamp(r));
    const auto t = static_cast<double>(r);
    for (std::size_t c = 0; c < C; ++c) {
      const double phase = two_pi * static_cast<double>(c) / static_cast<double>(C);
      double v = 0.0;
      for (std::size_t k = 0; k < spec.periods.size(); ++k) {
        const double a = spec.amplitudes.size() == 1 ? spec.amplitudes[0] : spec.amplitudes[k];
        v += a * std::sin(two_pi * t / spec.periods[k] + phase);
      }
      if (spec.kind == "trend_sine") v += spec.trend_slope * t;
      if (spec.noise > 0.0) v += spec.noise * gauss(rng);
      s.values[r * C + c] = v;
    }
  }

  const auto width = static_cast<std::size_t>(spec.burst_width);
  for (std::size_t start : burst_starts(spec)) {
    for (std::size_t k = 0; k < width && start + k < spec.length; ++k) {
      const double hann = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(k) / static_cast<double>(width - 1));
      const double burst =
          spec.burst_amplitude * hann * std::sin(two_pi * static_cast<double>(k) / spec.burst_period);
      for (std::size_t c = 0; c < C; ++c) s.values[(start + k) * C + c] += burst;
    }
  }
  return s;
}

void write_csv(std::ostream& out, const RawSeries& series) {
  std::string line = "date";
  for (const auto& name : series.channel_names) line += "," + name;
  out << line << '\n';
  for (std::size_t r = 0; r < series.rows(); ++r) {
    line = series.timestamps[r];
    for (std::size_t c = 0; c < series.channels(); ++c) {
      line += ',';
      append_number(line, series.at(r, c));
    }
    out << line << '\n';
  }
}

void cmd_synth(const SynthSpec& spec, const std::filesystem::path& out_csv) {
  const auto series = synthesize(spec);
  if (out_csv.has_parent_path()) std::filesystem::create_directories(out_csv.parent_path());
  std::ofstream out(out_csv, std::ios::binary);
  if (!out) throw DataError("cannot write '" + out_csv.string() + "'");
  write_csv(out, series);
}

}  // namespace awemixer::cli
