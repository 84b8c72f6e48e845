#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "awemixer/data.hpp"
#include "awemixer/error.hpp"
#include "doctest.h"

using namespace awemixer;

namespace {

RawSeries make_series(std::size_t rows, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  RawSeries s;
  for (std::size_t c = 0; c < channels; ++c) s.channel_names.push_back("c" + std::to_string(c));
  for (std::size_t r = 0; r < rows; ++r) {
    s.timestamps.push_back("t" + std::to_string(r));
    for (std::size_t c = 0; c < channels; ++c) {
      s.values.push_back(3.0 * static_cast<double>(c + 1) + std::sin(0.3 * static_cast<double>(r)) + noise(rng));
    }
  }
  return s;
}

// Every (channel, start) whose inputs are in range and whose targets all land in [lo, hi).
std::vector<WindowRef> brute_force_windows(std::size_t channels, std::size_t L, std::size_t T, std::size_t lo,
                                           std::size_t hi) {
  std::vector<WindowRef> out;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t start = 0; start + L + T <= hi; ++start) {
      if (start + L >= lo) out.push_back({c, start});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("parse_csv reads header, timestamps and values") {
  std::istringstream in("date,a,b\n2020-01-01 00:00:00,1,2\n2020-01-01 01:00:00,3.5,-4\n2020-01-01 02:00:00,5e-1,6\n");
  const auto s = parse_csv(in);
  CHECK(s.rows() == 3);
  CHECK(s.channels() == 2);
  CHECK(s.channel_names == std::vector<std::string>{"a", "b"});
  CHECK(s.at(1, 0) == 3.5);
  CHECK(s.at(1, 1) == -4.0);
  CHECK(s.at(2, 0) == 0.5);
  CHECK(s.channel(1) == std::vector<double>{2.0, -4.0, 6.0});
}

TEST_CASE("parse_csv with ETTh1 layout yields seven channels") {
  std::istringstream in(
      "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n"
      "2016-07-01 00:00:00,5.827,2.009,1.599,0.462,4.203,1.340,30.531\n"
      "2016-07-01 01:00:00,5.693,2.076,1.492,0.426,4.142,1.371,27.787\n");
  const auto s = parse_csv(in);
  CHECK(s.channels() == 7);
  CHECK(s.rows() == 2);
  CHECK(s.channel_names.back() == "OT");
}

TEST_CASE("parse_csv rejects malformed input") {
  SUBCASE("NaN cell names its location") {
    std::istringstream in("date,a,b\nt0,1,2\nt1,NaN,3\n");
    try {
      parse_csv(in, "toy.csv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("row 3") != std::string::npos);
      CHECK(msg.find("'a'") != std::string::npos);
    }
  }
  SUBCASE("non-numeric and empty cells") {
    std::istringstream a("date,a\nt0,abc\n");
    CHECK_THROWS_AS(parse_csv(a), ParseError);
    std::istringstream b("date,a,b\nt0,1,\n");
    CHECK_THROWS_AS(parse_csv(b), ParseError);
    std::istringstream c("date,a\nt0,inf\n");
    CHECK_THROWS_AS(parse_csv(c), ParseError);
  }
  SUBCASE("missing header") {
    std::istringstream a("1,2,3\n4,5,6\n");
    CHECK_THROWS_AS(parse_csv(a), DataError);
    std::istringstream b("");
    CHECK_THROWS_AS(parse_csv(b), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_csv("/nonexistent/none.csv"), DataError); }
}

TEST_CASE("make_splits boundaries") {
  const auto other = make_splits(100, DatasetKind::other, 8, 4);
  CHECK(other.train_end == 70);
  CHECK(other.val_end == 80);
  CHECK(other.test_end == 100);

  const auto ett = make_splits(17420, DatasetKind::ett, 96, 96);
  CHECK(ett.train_end == 10452);
  CHECK(ett.val_end == 13936);
  CHECK(ett.test_end == 17420);

  CHECK_THROWS_AS(make_splits(10, DatasetKind::other, 96, 4), ConfigError);
  CHECK_THROWS_AS(make_splits(100, DatasetKind::other, 8, 4, SplitFractions{0.8, 0.3}), ConfigError);
  const auto custom = make_splits(100, DatasetKind::other, 8, 4, SplitFractions{0.5, 0.25});
  CHECK(custom.train_end == 50);
  CHECK(custom.val_end == 75);

  CHECK(dataset_kind_for("ETTh1") == DatasetKind::ett);
  CHECK(dataset_kind_for("ettm2") == DatasetKind::ett);
  CHECK(dataset_kind_for("weather") == DatasetKind::other);
}

TEST_CASE("scaler fits on training rows only") {
  auto s = make_series(200, 3, 5);
  const auto scaler = fit_scaler(s, 140);
  const auto scaled = apply_scaler(s, scaler);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    double sq = 0.0;
    for (std::size_t r = 0; r < 140; ++r) mean += scaled.at(r, c);
    mean /= 140.0;
    for (std::size_t r = 0; r < 140; ++r) sq += (scaled.at(r, c) - mean) * (scaled.at(r, c) - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(sq / 140.0) - 1.0) < 1e-9);
  }

  SUBCASE("mutating val/test rows leaves the scaler unchanged") {
    auto mutated = s;
    for (std::size_t r = 140; r < 200; ++r) {
      for (std::size_t c = 0; c < 3; ++c) mutated.values[r * 3 + c] = 1e6 * static_cast<double>(r);
    }
    const auto other = fit_scaler(mutated, 140);
    CHECK(other.mean == scaler.mean);
    CHECK(other.std == scaler.std);

    const WindowedDataset a(s, "toy", DatasetKind::other, 8, 4);
    const WindowedDataset b(mutated, "toy", DatasetKind::other, 8, 4);
    CHECK(a.scaler().mean == b.scaler().mean);
    CHECK(a.scaler().std == b.scaler().std);
  }

  SUBCASE("constant training channel scales to zeros") {
    RawSeries flat;
    flat.channel_names = {"x"};
    for (int r = 0; r < 10; ++r) {
      flat.timestamps.push_back(std::to_string(r));
      flat.values.push_back(4.25);
    }
    const auto sc = fit_scaler(flat, 7);
    CHECK(sc.std[0] == kScalerStdFloor);
    for (double v : apply_scaler(flat, sc).values) CHECK(v == 0.0);
  }
}

TEST_CASE("window counts match a brute-force enumerator") {
  for (std::size_t rows : {60u, 97u, 150u}) {
    for (std::size_t channels : {1u, 3u}) {
      for (int L : {4, 8, 16}) {
        for (int T : {1, 4, 9}) {
          const auto raw = make_series(rows, channels, rows + channels);
          SplitSpec spec;
          try {
            spec = make_splits(rows, DatasetKind::other, L, T);
          } catch (const ConfigError&) {
            CHECK_THROWS_AS(WindowedDataset(raw, "toy", DatasetKind::other, L, T), ConfigError);
            continue;
          }
          const WindowedDataset ds(raw, "toy", DatasetKind::other, L, T);
          const std::size_t lo[] = {0, spec.train_end, spec.val_end};
          const std::size_t hi[] = {spec.train_end, spec.val_end, spec.test_end};
          const Split splits[] = {Split::train, Split::val, Split::test};
          for (int k = 0; k < 3; ++k) {
            const auto expected =
                brute_force_windows(channels, static_cast<std::size_t>(L), static_cast<std::size_t>(T), lo[k], hi[k]);
            const auto got = ds.windows(splits[k]);
            REQUIRE(got.size() == expected.size());
            CHECK(ds.count(splits[k]) == expected.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
              CHECK(got[i].channel == expected[i].channel);
              CHECK(got[i].start == expected[i].start);
            }
          }
          const std::size_t univariate = spec.train_end - static_cast<std::size_t>(L + T) + 1;
          CHECK(ds.count(Split::train) == channels * univariate);
        }
      }
    }
  }
}

TEST_CASE("windows respect split boundaries") {
  const auto raw = make_series(300, 2, 9);
  const WindowedDataset ds(raw, "toy", DatasetKind::other, 24, 12);
  const auto& sp = ds.splits();
  for (const auto& w : ds.windows(Split::train)) CHECK(w.start + 24 + 12 <= sp.train_end);
  for (const auto& w : ds.windows(Split::val)) {
    CHECK(w.start + 24 >= sp.train_end);
    CHECK(w.start + 24 + 12 <= sp.val_end);
  }
  for (const auto& w : ds.windows(Split::test)) {
    CHECK(w.start + 24 >= sp.val_end);
    CHECK(w.start + 24 + 12 <= sp.test_end);
    const auto x = ds.input(w);
    const auto y = ds.target(w);
    CHECK(x.size() == 24);
    CHECK(y.size() == 12);
    CHECK(x.data() + x.size() == y.data());
  }
  const auto w = ds.windows(Split::val).front();
  const auto x = ds.input(w);
  const double expect = (raw.at(w.start, w.channel) - ds.scaler().mean[w.channel]) / ds.scaler().std[w.channel];
  CHECK(x[0] == expect);
}

TEST_CASE("batches cover each window once and are seed-deterministic") {
  const auto raw = make_series(200, 2, 3);
  const WindowedDataset ds(raw, "toy", DatasetKind::other, 16, 8);
  const auto a = ds.batches(Split::train, 32, 11);
  const auto b = ds.batches(Split::train, 32, 11);
  const auto c = ds.batches(Split::train, 32, 12);
  REQUIRE(a.size() == b.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].size() == b[i].size());
    if (i + 1 < a.size()) CHECK(a[i].size() == 32);
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      CHECK(a[i][j].channel == b[i][j].channel);
      CHECK(a[i][j].start == b[i][j].start);
      seen.insert({a[i][j].channel, a[i][j].start});
      if (a[i][j].start != c[i][j].start || a[i][j].channel != c[i][j].channel) differs = true;
    }
  }
  CHECK(seen.size() == ds.count(Split::train));
  CHECK(differs);

  const auto test = ds.batches(Split::test, 7, 99);
  const auto ordered = ds.windows(Split::test);
  std::size_t k = 0;
  for (const auto& batch : test) {
    for (const auto& w : batch) {
      CHECK(w.start == ordered[k].start);
      CHECK(w.channel == ordered[k].channel);
      ++k;
    }
  }
  CHECK(k == ordered.size());
  CHECK_THROWS_AS(ds.batches(Split::train, 0, 1), ConfigError);
}
