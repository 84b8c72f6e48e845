#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "awemixer/cli.hpp"
#include "awemixer/error.hpp"
#include "awemixer/signal.hpp"
#include "doctest.h"

using namespace awemixer;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "awemixer_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "awemixer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

const std::vector<std::string> kTinyModel = {"--lookback", "32", "--horizon", "8", "--d-model", "8", "--num-heads", "2",
                                             "--fusion-layers", "1", "--num-scales", "2", "--dwt-levels", "2",
                                             "--max-epochs", "1", "--patience", "1", "--lr", "1e-3"};

// Appends the tiny-model flags that `args` does not already set.
std::vector<std::string> with_tiny(std::vector<std::string> args) {
  const auto given = args;
  for (std::size_t i = 0; i < kTinyModel.size(); i += 2) {
    if (std::find(given.begin(), given.end(), kTinyModel[i]) == given.end()) {
      args.push_back(kTinyModel[i]);
      args.push_back(kTinyModel[i + 1]);
    }
  }
  return args;
}

fs::path small_sine(const fs::path& dir) {
  cli::SynthSpec spec;
  spec.length = 400;
  spec.seed = 1;
  const auto path = dir / "sine.csv";
  cli::cmd_synth(spec, path);
  return path;
}

fs::path only_subdir(const fs::path& dir) {
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) subdirs.push_back(e.path());
  }
  REQUIRE(subdirs.size() == 1);
  return subdirs.front();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("synth sine peaks at the configured frequency bins") {
  cli::SynthSpec spec;
  spec.length = 96;
  spec.noise = 0.0;
  spec.periods = {24.0, 8.0};
  spec.amplitudes = {1.0, 0.5};
  const auto s = cli::synthesize(spec);
  const auto spectrum = rfft_amplitude(s.channel(0));
  std::vector<std::size_t> order(spectrum.amps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return spectrum.amps[a] > spectrum.amps[b]; });
  CHECK(order[0] == 4);   // 96 / 24
  CHECK(order[1] == 12);  // 96 / 8
  CHECK(spectrum.amps[4] == doctest::Approx(48.0).epsilon(1e-9));
  CHECK(spectrum.amps[12] == doctest::Approx(24.0).epsilon(1e-9));
  for (std::size_t k = 0; k < spectrum.amps.size(); ++k) {
    if (k != 4 && k != 12) CHECK(spectrum.amps[k] < 1e-9);
  }
}

TEST_CASE("synth output is deterministic per seed") {
  const auto dir = scratch_dir("synth");
  for (const char* kind : {"sine", "sine_plus_transient", "trend_sine"}) {
    cli::SynthSpec spec;
    spec.kind = kind;
    spec.length = 300;
    spec.channels = 2;
    spec.seed = 9;
    cli::cmd_synth(spec, dir / "a.csv");
    cli::cmd_synth(spec, dir / "b.csv");
    spec.seed = 10;
    cli::cmd_synth(spec, dir / "c.csv");
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
    const auto parsed = load_csv(dir / "a.csv");
    CHECK(parsed.rows() == 300);
    CHECK(parsed.channels() == 2);
    CHECK(parsed.timestamps[25] == "2016-07-02 01:00:00");
  }
  CHECK(invoke({"synth", "--length", "50", "--seed", "4", "--out-csv", (dir / "x.csv").string()}) == 0);
  CHECK(invoke({"synth", "--length", "50", "--seed", "4", "--out-csv", (dir / "y.csv").string()}) == 0);
  CHECK(slurp(dir / "x.csv") == slurp(dir / "y.csv"));
  CHECK(invoke({"synth", "--kind", "square"}) == cli::kConfigError);

  cli::SynthSpec trend;
  trend.kind = "trend_sine";
  trend.noise = 0.0;
  trend.length = 48;
  trend.trend_slope = 0.5;
  const auto t = cli::synthesize(trend);
  CHECK(t.at(24, 0) - t.at(0, 0) == doctest::Approx(12.0).epsilon(1e-9));
}

TEST_CASE("decompose bands") {
  const auto dir = scratch_dir("decompose");
  const auto csv = dir / "series.csv";

  SUBCASE("constant channel has zero details and bands follow L / 2^j") {
    std::ofstream(csv) << [] {
      std::string s = "date,a,b\n";
      for (int r = 0; r < 64; ++r) s += std::to_string(r) + ",3.5," + std::to_string(r) + "\n";
      return s;
    }();
    cli::DecomposeOptions opt;
    opt.input = csv;
    opt.channel = "a";
    opt.levels = 3;
    opt.out_csv = dir / "bands.csv";
    const auto d = cli::cmd_decompose(opt);
    REQUIRE(d.pyramid.bands() == 4);
    CHECK(d.pyramid.coeffs[0].size() == 8);
    CHECK(d.pyramid.coeffs[1].size() == 8);
    CHECK(d.pyramid.coeffs[2].size() == 16);
    CHECK(d.pyramid.coeffs[3].size() == 32);
    for (std::size_t b = 1; b < 4; ++b) {
      for (double v : d.pyramid.coeffs[b]) CHECK(std::abs(v) < 1e-12);
    }
    for (const auto& band : d.interpolated) CHECK(band.size() == 64);
    const auto text = slurp(dir / "bands.csv");
    CHECK(text.rfind("band_name,index,value\ncA3,0,", 0) == 0);
    CHECK(fs::exists(dir / "bands_interp.csv"));

    opt.channel = "1";
    CHECK_NOTHROW(cli::cmd_decompose(opt));
    opt.channel = "zz";
    CHECK_THROWS_AS(cli::cmd_decompose(opt), ConfigError);
  }

  SUBCASE("impulse is localized in cD1") {
    for (std::size_t k : {10u, 31u, 50u}) {
      std::string s = "date,x\n";
      for (std::size_t r = 0; r < 64; ++r) s += std::to_string(r) + "," + (r == k ? "1" : "0") + "\n";
      std::ofstream(csv) << s;
      cli::DecomposeOptions opt;
      opt.input = csv;
      opt.levels = 2;
      opt.out_csv = dir / "imp.csv";
      const auto d = cli::cmd_decompose(opt);
      const auto& cd1 = d.pyramid.coeffs.back();
      std::size_t arg = 0;
      for (std::size_t i = 1; i < cd1.size(); ++i) {
        if (std::abs(cd1[i]) > std::abs(cd1[arg])) arg = i;
      }
      const double support = static_cast<double>(make_basis("db4").taps()) / 2.0;
      CHECK(std::abs(static_cast<double>(arg) - static_cast<double>(k) / 2.0) <= support);
    }
  }

  SUBCASE("transient burst energy sits in the fine detail bands near the burst") {
    cli::SynthSpec spec;
    spec.kind = "sine_plus_transient";
    spec.length = 512;
    spec.noise = 0.0;
    spec.seed = 3;
    spec.bursts = 1;
    spec.burst_width = 32;
    cli::cmd_synth(spec, csv);
    const auto start = cli::burst_starts(spec).front();
    cli::DecomposeOptions opt;
    opt.input = csv;
    opt.levels = 3;
    opt.out_csv = dir / "tr.csv";
    const auto d = cli::cmd_decompose(opt);
    const auto centre = static_cast<double>(start) + 16.0;
    double near_total = 0.0;
    double all_total = 0.0;
    for (std::size_t j : {1u, 2u}) {
      const auto& band = d.pyramid.coeffs[d.pyramid.bands() - j];
      const double stride = static_cast<double>(1u << j);
      double near = 0.0;
      double far = 0.0;
      std::size_t near_n = 0;
      for (std::size_t i = 0; i < band.size(); ++i) {
        const double e = band[i] * band[i];
        if (std::abs(static_cast<double>(i) * stride - centre) <= 32.0) {
          near += e;
          ++near_n;
        } else {
          far += e;
        }
      }
      near_total += near;
      all_total += near + far;
      const double near_density = near / static_cast<double>(near_n);
      const double far_density = far / static_cast<double>(band.size() - near_n);
      CHECK(near_density > 10.0 * far_density);
    }
    CHECK(near_total / all_total > 0.9);
  }
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch_dir("exit");
  const auto data = small_sine(dir);
  const auto out = (dir / "runs").string();
  CHECK(invoke({"--help"}) == 0);
  CHECK(invoke({"train", "--help"}) == 0);
  CHECK(invoke({"train", "--no-such-flag"}) == cli::kConfigError);
  CHECK(invoke({}) == cli::kConfigError);
  CHECK(invoke({"train", "--data", (dir / "missing.csv").string(), "--out", out}) == cli::kDataError);
  CHECK(invoke(with_tiny({"train", "--data", data.string(), "--out", out, "--num-heads", "3"})) == cli::kConfigError);
  CHECK(invoke(with_tiny({"train", "--data", data.string(), "--out", out, "--lr", "1e300", "--max-epochs", "2",
                          "--patience", "2"})) == cli::kNumericAbort);
  std::ofstream(dir / "bad.csv") << "date,x\n0,1\n1,oops\n";
  CHECK(invoke(with_tiny({"train", "--data", (dir / "bad.csv").string(), "--out", out})) == cli::kDataError);
  CHECK(invoke({"--config", (dir / "missing.toml").string(), "train"}) == cli::kConfigError);
}

TEST_CASE("train writes reports that echo the resolved config") {
  const auto dir = scratch_dir("train");
  const auto data = small_sine(dir);
  const auto out = dir / "runs";
  REQUIRE(invoke(with_tiny({"train", "--data", data.string(), "--out", out.string(), "--horizons", "4,8"})) == 0);
  const auto run = only_subdir(out);
  for (int h : {4, 8}) {
    const auto report = read_json(run / ("report_test_h" + std::to_string(h) + ".json"));
    CHECK(report["horizon"] == h);
    CHECK(report["config"]["model"]["horizon"] == h);
    CHECK(report["config"]["model"]["lookback"] == 32);
    CHECK(report["version"] == kVersion);
    CHECK(report["mae"].get<double>() * report["mae"].get<double>() <= report["mse"].get<double>());
    CHECK(fs::exists(run / ("checkpoint_h" + std::to_string(h) + ".awem")));
  }
  const auto summary = read_json(run / "train.json");
  CHECK(summary["runs"].size() == 2);
  CHECK(summary["config"]["data"]["horizons"] == std::vector<int>{4, 8});
  CHECK(read_json(run / "report_test_h4.json")["config_hash"] != read_json(run / "report_test_h8.json")["config_hash"]);

  SUBCASE("evaluate reloads the checkpoint") {
    const auto eval_out = dir / "eval";
    REQUIRE(invoke({"evaluate", "--data", data.string(), "--checkpoint", (run / "checkpoint_h8.awem").string(),
                    "--predictions", "--out", eval_out.string()}) == 0);
    const auto eval_dir = only_subdir(eval_out);
    const auto eval = read_json(eval_dir / "eval.json");
    const auto test = read_json(run / "report_test_h8.json");
    CHECK(eval["report"]["mse"] == test["mse"]);
    CHECK(eval["config"]["model"]["horizon"] == 8);
    CHECK(eval["version"] == kVersion);
    CHECK(eval["baselines"].contains("persistence"));
    CHECK(slurp(eval_dir / "predictions.csv").rfind("window_id,channel,step,y_true,y_pred\n", 0) == 0);
  }
}

TEST_CASE("train is reproducible and honours output precedence") {
  const auto dir = scratch_dir("repro");
  const auto data = small_sine(dir);
  REQUIRE(invoke(with_tiny({"train", "--data", data.string(), "--out", (dir / "a").string()})) == 0);
  REQUIRE(invoke(with_tiny({"train", "--data", data.string(), "--out", (dir / "b").string()})) == 0);
  auto a = read_json(only_subdir(dir / "a") / "report_test_h8.json");
  auto b = read_json(only_subdir(dir / "b") / "report_test_h8.json");
  a.erase("wall_time_s");
  b.erase("wall_time_s");
  CHECK(a.dump() == b.dump());
  CHECK(only_subdir(dir / "a").filename() == only_subdir(dir / "b").filename());

  const auto config = dir / "run.toml";
  std::ofstream(config) << "data = \"" << data.string() << "\"\nout = \"" << (dir / "from_file").string()
                        << "\"\nlookback = 32\nhorizon = 8\nd_model = 8\nnum-heads = 2\nfusion_layers = 1\n"
                           "num_scales = 2\ndwt_levels = 2\nmax_epochs = 1\npatience = 1\n";
  REQUIRE(invoke({"--config", config.string(), "train"}) == 0);
  CHECK(fs::exists(dir / "from_file"));
  ::setenv("AWEMIXER_OUT", (dir / "from_env").c_str(), 1);
  CHECK(invoke({"--config", config.string(), "train"}) == 0);
  CHECK(invoke({"--config", config.string(), "train", "--out", (dir / "from_flag").string(), "--d-model", "4"}) == 0);
  ::unsetenv("AWEMIXER_OUT");
  CHECK(fs::exists(dir / "from_env"));
  CHECK(fs::exists(dir / "from_flag"));
  const auto flagged = read_json(only_subdir(dir / "from_flag") / "report_test_h8.json");
  CHECK(flagged["config"]["model"]["d_model"] == 4);
  CHECK(flagged["config"]["model"]["lookback"] == 32);

  std::ofstream(dir / "typo.toml") << "lookbak = 32\n";
  CHECK(invoke({"--config", (dir / "typo.toml").string(), "train", "--data", data.string()}) == cli::kConfigError);
}

TEST_CASE("ablate emits five variants") {
  const auto dir = scratch_dir("ablate");
  const auto data = small_sine(dir);
  REQUIRE(invoke(with_tiny({"ablate", "--data", data.string(), "--out", (dir / "runs").string()})) == 0);
  const auto run = only_subdir(dir / "runs");
  const auto j = read_json(run / "ablation.json");
  REQUIRE(j["variants"].size() == 5);
  CHECK(j["variants"][0]["variant"] == "full");
  CHECK(j["variants"][0]["mse_degradation_pct"] == 0.0);
  CHECK(j["variants"][0]["mae_degradation_pct"] == 0.0);
  CHECK(j["version"] == kVersion);
  CHECK(j["config"]["command"] == "ablate");
  std::istringstream table(slurp(run / "ablation.txt"));
  std::string line;
  int lines = 0;
  while (std::getline(table, line)) ++lines;
  CHECK(lines == 6);
}

TEST_CASE("sweep skips invalid values") {
  const auto dir = scratch_dir("sweep");
  const auto data = small_sine(dir);
  REQUIRE(invoke(with_tiny({"sweep", "--data", data.string(), "--out", (dir / "runs").string(), "--axis",
                            "dwt_levels", "--values", "1,2,6", "--horizons", "4,8"})) == 0);
  const auto run = only_subdir(dir / "runs");
  std::istringstream csv(slurp(run / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "axis_value,horizon,mse,mae");
  int rows = 0;
  while (std::getline(csv, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
    CHECK(line.rfind("6,", 0) != 0);
    ++rows;
  }
  CHECK(rows == 4);
  const auto j = read_json(run / "sweep.json");
  REQUIRE(j["skipped"].size() == 1);
  CHECK(j["skipped"][0]["value"] == 6);

  CHECK(invoke(with_tiny({"sweep", "--data", data.string(), "--out", (dir / "runs").string(), "--axis", "dwt_levels",
                          "--values", "7"})) == cli::kConfigError);
  CHECK(invoke(with_tiny({"sweep", "--data", data.string(), "--axis", "heads", "--values", "1"})) ==
        cli::kConfigError);
}
