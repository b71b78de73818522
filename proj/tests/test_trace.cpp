#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "phytosig/rng.hpp"
#include "phytosig/trace.hpp"

using namespace phytosig;
using Catch::Approx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "phytosig_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

} // namespace

TEST_CASE("load_voltage_csv reads samples in file order") {
  auto path = temp_file("basic.csv");
  write_file(path, "0.0\n0.5\n-0.5\n");
  VoltageTrace t = load_voltage_csv(path.string(), 10000.0, "box1");
  REQUIRE(t.samples == std::vector<double>{0.0, 0.5, -0.5});
  REQUIRE(t.sample_rate_hz == 10000.0);
  REQUIRE(t.channel_id == "box1");
}

TEST_CASE("load_voltage_csv skips a single header row") {
  auto path = temp_file("header.csv");
  write_file(path, "v\n1\n2\n");
  VoltageTrace t = load_voltage_csv(path.string(), 100.0, "x");
  REQUIRE(t.samples == std::vector<double>{1.0, 2.0});
}

TEST_CASE("load_voltage_csv reports the row number of a bad value") {
  auto path = temp_file("bad.csv");
  write_file(path, "1\n2\n3\n4\n5\n6\nabc\n");
  REQUIRE_THROWS_WITH(load_voltage_csv(path.string(), 100.0, "x"),
                      Catch::Matchers::ContainsSubstring("row 7"));
}

TEST_CASE("load_voltage_csv error cases") {
  REQUIRE_THROWS_AS(load_voltage_csv("/nonexistent/file.csv", 100.0, "x"),
                    Error);
  auto path = temp_file("empty.csv");
  write_file(path, "");
  REQUIRE_THROWS_AS(load_voltage_csv(path.string(), 100.0, "x"), Error);
  auto inf_path = temp_file("inf.csv");
  write_file(inf_path, "1\ninf\n");
  REQUIRE_THROWS_AS(load_voltage_csv(inf_path.string(), 100.0, "x"), Error);
}

TEST_CASE("series CSV round-trips numeric content to 12 significant digits") {
  Rng rng(42);
  RealSeries s;
  s.grid = TimeGrid{0.25, 0.125, 200};
  s.label = "roundtrip";
  for (std::size_t i = 0; i < 200; ++i)
    s.values.push_back(rng.gaussian(0.0, 3.7));
  auto path = temp_file("series.csv");
  write_series_csv(s, path.string());
  RealSeries back = load_series_csv(path.string(), "roundtrip");
  REQUIRE(back.grid.n == s.grid.n);
  for (std::size_t i = 0; i < s.grid.n; ++i)
    REQUIRE(back.values[i] ==
            Approx(s.values[i]).epsilon(1e-11).margin(1e-14));
}

TEST_CASE("zscore normalizes to mean 0 sd 1") {
  SECTION("two-point case") {
    RealSeries s{TimeGrid{0, 1, 2}, {1.0, 3.0}, "s"};
    RealSeries z = zscore(s);
    REQUIRE(z.values[0] == Approx(-1.0));
    REQUIRE(z.values[1] == Approx(1.0));
  }
  SECTION("constant series is a degenerate-input error") {
    RealSeries s{TimeGrid{0, 1, 3}, {5.0, 5.0, 5.0}, "s"};
    REQUIRE_THROWS_WITH(zscore(s),
                        Catch::Matchers::ContainsSubstring("zero variance"));
  }
  SECTION("1000 random values: recomputed moments are 0 and 1") {
    Rng rng(7);
    RealSeries s;
    s.grid = TimeGrid{0, 0.01, 1000};
    for (int i = 0; i < 1000; ++i) s.values.push_back(rng.uniform(-4.0, 9.0));
    RealSeries z = zscore(s);
    double mean = 0.0;
    for (double v : z.values) mean += v;
    mean /= 1000.0;
    double var = 0.0;
    for (double v : z.values) var += (v - mean) * (v - mean);
    var /= 1000.0;
    REQUIRE(std::abs(mean) < 1e-9);
    REQUIRE(std::sqrt(var) == Approx(1.0).margin(1e-9));
  }
  SECTION("zscore of zscore equals zscore within 1e-9") {
    Rng rng(8);
    RealSeries s;
    s.grid = TimeGrid{0, 1, 50};
    for (int i = 0; i < 50; ++i) s.values.push_back(rng.gaussian(2.0, 0.5));
    RealSeries once = zscore(s);
    RealSeries twice = zscore(once);
    for (std::size_t i = 0; i < once.values.size(); ++i)
      REQUIRE(twice.values[i] == Approx(once.values[i]).margin(1e-9));
  }
}

TEST_CASE("align_to_grid identity and hold semantics") {
  SECTION("identical grids leave values unchanged, both modes") {
    RealSeries s{TimeGrid{0.5, 0.25, 8},
                 {1, 2, 3, 4, 5, 6, 7, 8},
                 "s"};
    for (auto mode : {AlignMode::hold, AlignMode::linear}) {
      RealSeries out = align_to_grid(s, s.grid, mode);
      REQUIRE(out.values == s.values);
    }
  }
  SECTION("binary hold onto doubled density") {
    BinarySeries b{TimeGrid{0.0, 1.0, 2}, {0, 1}, "b"};
    BinarySeries out = align_to_grid(b, TimeGrid{0.0, 0.5, 3}, AlignMode::hold);
    REQUIRE(out.values == std::vector<std::uint8_t>{0, 0, 1});
  }
  SECTION("binary series rejects linear mode") {
    BinarySeries b{TimeGrid{0.0, 1.0, 2}, {0, 1}, "b"};
    REQUIRE_THROWS_AS(
        align_to_grid(b, TimeGrid{0.0, 0.5, 3}, AlignMode::linear), Error);
  }
  SECTION("linear ramp resampled to 3x density: analytic oracle") {
    RealSeries ramp;
    ramp.grid = TimeGrid{0.0, 1.0, 11};
    for (int i = 0; i <= 10; ++i) ramp.values.push_back(double(i));
    TimeGrid target{0.0, 1.0 / 3.0, 31};
    RealSeries out = align_to_grid(ramp, target, AlignMode::linear);
    for (std::size_t k = 0; k < target.n; ++k) {
      double t = target.time_at(k); // true ramp value equals t
      REQUIRE(std::abs(out.values[k] - t) < 1e-9);
    }
  }
  SECTION("target points before the source take the first value") {
    RealSeries s{TimeGrid{10.0, 1.0, 3}, {5, 6, 7}, "s"};
    RealSeries out =
        align_to_grid(s, TimeGrid{8.0, 1.0, 4}, AlignMode::hold);
    REQUIRE(out.values == std::vector<double>{5, 5, 5, 6});
  }
  SECTION("disjoint spans are an error") {
    RealSeries s{TimeGrid{0.0, 1.0, 3}, {1, 2, 3}, "s"};
    REQUIRE_THROWS_WITH(
        align_to_grid(s, TimeGrid{100.0, 1.0, 3}, AlignMode::hold),
        Catch::Matchers::ContainsSubstring("disjoint"));
  }
  SECTION("aligning twice to the same grid equals aligning once, exactly") {
    Rng rng(9);
    RealSeries s;
    s.grid = TimeGrid{0.0, 0.1, 40};
    for (int i = 0; i < 40; ++i) s.values.push_back(rng.uniform01());
    TimeGrid target{0.05, 0.07, 30};
    for (auto mode : {AlignMode::hold, AlignMode::linear}) {
      RealSeries once = align_to_grid(s, target, mode);
      RealSeries twice = align_to_grid(once, target, mode);
      REQUIRE(once.values == twice.values);
    }
  }
}

TEST_CASE("slice_time cuts half-open sample ranges") {
  VoltageTrace t;
  t.channel_id = "c";
  t.sample_rate_hz = 10.0;
  for (int i = 0; i < 100; ++i) t.samples.push_back(double(i));

  SECTION("full-span slice is the identity") {
    VoltageTrace s = slice_time(t, 0.0, 10.0);
    REQUIRE(s.samples == t.samples);
    REQUIRE(s.t0_s == t.t0_s);
  }
  SECTION("[2, 4) of a 10 s trace at 10 Hz keeps 20 samples from t0 = 2") {
    VoltageTrace s = slice_time(t, 2.0, 4.0);
    REQUIRE(s.samples.size() == 20);
    REQUIRE(s.t0_s == Approx(2.0));
    REQUIRE(s.samples.front() == 20.0);
    REQUIRE(s.samples.back() == 39.0);
  }
  SECTION("empty intersection is an error") {
    REQUIRE_THROWS_WITH(slice_time(t, 99.0, 100.0),
                        Catch::Matchers::ContainsSubstring("intersect"));
  }
  SECTION("slicing twice with the same bounds is exact") {
    VoltageTrace once = slice_time(t, 1.5, 7.25);
    VoltageTrace twice = slice_time(once, 1.5, 7.25);
    REQUIRE(once.samples == twice.samples);
    REQUIRE(once.t0_s == twice.t0_s);
  }
}
