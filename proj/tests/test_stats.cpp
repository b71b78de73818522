#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phytosig/rng.hpp"
#include "phytosig/stats.hpp"
#include "phytosig/synth.hpp"

using namespace phytosig;
using Catch::Approx;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0,
                                  double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

RealSeries series_of(std::vector<double> values, double dt = 1.0,
                     double t0 = 0.0) {
  RealSeries s;
  s.grid = TimeGrid{t0, dt, values.size()};
  s.values = std::move(values);
  return s;
}

} // namespace

TEST_CASE("pearson fundamentals") {
  std::vector<double> x{1.0, 2.0, 3.0};
  SECTION("x vs x is 1") {
    REQUIRE(pearson(x, x) == Approx(1.0).epsilon(1e-15));
  }
  SECTION("x vs -x is -1") {
    std::vector<double> nx{-1.0, -2.0, -3.0};
    REQUIRE(pearson(x, nx) == Approx(-1.0).epsilon(1e-15));
  }
  SECTION("pencil-checkable vector: r of [1,2,3] vs [1,2,4]") {
    std::vector<double> y{1.0, 2.0, 4.0};
    double expected = synth::oracle_pearson(x, y);
    REQUIRE(expected == Approx(0.982).margin(5e-4));
    REQUIRE(pearson(x, y) == Approx(expected).margin(1e-14));
  }
  SECTION("errors") {
    REQUIRE_THROWS_AS(pearson(x, std::vector<double>{1.0, 2.0}), Error);
    REQUIRE_THROWS_WITH(pearson(std::vector<double>{1, 1, 1}, x),
                        Catch::Matchers::ContainsSubstring("zero variance"));
    REQUIRE_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{3, 4}),
                      Error);
  }
}

TEST_CASE("pearson properties") {
  Rng rng(101);
  SECTION("bitwise symmetry") {
    for (int trial = 0; trial < 50; ++trial) {
      std::size_t n = 3 + rng.below(97);
      auto x = random_vector(rng, n);
      auto y = random_vector(rng, n);
      REQUIRE(pearson(x, y) == pearson(y, x)); // exact
    }
  }
  SECTION("invariant under positive affine maps; negation flips the sign") {
    for (int trial = 0; trial < 20; ++trial) {
      std::size_t n = 5 + rng.below(60);
      auto x = random_vector(rng, n);
      auto y = random_vector(rng, n);
      double r = pearson(x, y);
      auto scaled = x;
      for (double& v : scaled) v = 3.5 * v + 11.0;
      REQUIRE(pearson(scaled, y) == Approx(r).margin(1e-12));
      auto negated = y;
      for (double& v : negated) v = -v;
      REQUIRE(pearson(x, negated) == Approx(-r).margin(1e-15));
    }
  }
  SECTION("1000 seeded pairs agree with the two-pass oracle within 1e-12") {
    for (int trial = 0; trial < 1000; ++trial) {
      std::size_t n = 3 + rng.below(498);
      auto x = random_vector(rng, n, -5.0, 5.0);
      auto y = random_vector(rng, n, -5.0, 5.0);
      REQUIRE(pearson(x, y) ==
              Approx(synth::oracle_pearson(x, y)).margin(1e-12));
    }
  }
}

TEST_CASE("corr_significance p-values and stars") {
  SECTION("r = 0 gives p = 1 and no stars") {
    CorrResult res = corr_significance(0.0, 30);
    REQUIRE(res.p_value == Approx(1.0).margin(1e-12));
    REQUIRE(res.stars.empty());
  }
  SECTION("r = 0.99, n = 3: matches the quadrature oracle within 1e-6") {
    CorrResult res = corr_significance(0.99, 3);
    double t = 0.99 * std::sqrt(1.0 / (1.0 - 0.99 * 0.99));
    REQUIRE(res.p_value == Approx(synth::oracle_t_two_sided_p(t, 1.0)).margin(1e-6));
  }
  SECTION("r = 0.5, n = 100 is three-star significant") {
    CorrResult res = corr_significance(0.5, 100);
    REQUIRE(res.p_value < 0.001);
    REQUIRE(res.stars == "***");
  }
  SECTION("|r| = 1 is the documented special case, not an error") {
    CorrResult res = corr_significance(1.0, 10);
    REQUIRE(res.p_value == 0.0);
    REQUIRE(res.stars == "***");
    CorrResult neg = corr_significance(-1.0, 10);
    REQUIRE(neg.p_value == 0.0);
  }
  SECTION("p decreases in |r| at fixed n, and in n at fixed r") {
    double prev = 1.1;
    for (double r : {0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
      double p = corr_significance(r, 20).p_value;
      REQUIRE(p < prev);
      prev = p;
    }
    prev = 1.1;
    for (std::size_t n : {5u, 10u, 20u, 50u, 100u, 200u}) {
      double p = corr_significance(0.3, n).p_value;
      REQUIRE(p < prev);
      prev = p;
    }
  }
}

TEST_CASE("point_biserial") {
  SECTION("minimal two-class case needs n >= 3") {
    std::vector<std::uint8_t> b{0, 1, 1};
    std::vector<double> x{0.0, 1.0, 1.0};
    REQUIRE(point_biserial(std::span<const std::uint8_t>(b),
                           std::span<const double>(x)) == Approx(1.0));
  }
  SECTION("single class is a degenerate-input error") {
    std::vector<std::uint8_t> b{1, 1, 1, 1};
    std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    REQUIRE_THROWS_WITH(point_biserial(std::span<const std::uint8_t>(b),
                                       std::span<const double>(x)),
                        Catch::Matchers::ContainsSubstring("single class"));
  }
  SECTION("random 0/1 vs continuous equals pearson within 1e-12") {
    Rng rng(202);
    for (int trial = 0; trial < 30; ++trial) {
      std::size_t n = 200;
      std::vector<std::uint8_t> b(n);
      std::vector<double> as_real(n);
      bool has0 = false, has1 = false;
      for (std::size_t i = 0; i < n; ++i) {
        b[i] = std::uint8_t(rng.below(2));
        as_real[i] = double(b[i]);
        (b[i] ? has1 : has0) = true;
      }
      if (!has0 || !has1) continue;
      auto x = random_vector(rng, n);
      REQUIRE(point_biserial(std::span<const std::uint8_t>(b),
                             std::span<const double>(x)) ==
              Approx(pearson(as_real, x)).margin(1e-12));
    }
  }
}

TEST_CASE("rolling_corr") {
  Rng rng(303);
  SECTION("a = b: every window r is 1, mean 1") {
    auto a = series_of(random_vector(rng, 100));
    RollingCorr rc = rolling_corr(a, a, 10.0, 10.0);
    REQUIRE(rc.n_windows == 10);
    for (double r : rc.window_rs) REQUIRE(r == Approx(1.0).epsilon(1e-12));
    REQUIRE(rc.mean_r == Approx(1.0).epsilon(1e-12));
  }
  SECTION("90 s at 1 Hz, 21 s window, 21 s hop: 4 windows") {
    auto a = series_of(random_vector(rng, 90));
    auto b = series_of(random_vector(rng, 90));
    RollingCorr rc = rolling_corr(a, b, 21.0, 21.0);
    REQUIRE(rc.n_windows + rc.n_skipped == 4);
    REQUIRE(rc.n_skipped == 0);
  }
  SECTION("independent noise: |mean r| < 0.1 over 100 windows") {
    auto a = series_of(random_vector(rng, 1000));
    auto b = series_of(random_vector(rng, 1000));
    RollingCorr rc = rolling_corr(a, b, 10.0, 10.0);
    REQUIRE(rc.n_windows == 100);
    REQUIRE(std::abs(rc.mean_r) < 0.1);
    // brute-force per-window oracle
    for (std::size_t w = 0; w < rc.n_windows; ++w) {
      std::vector<double> wa(a.values.begin() + long(w * 10),
                             a.values.begin() + long(w * 10 + 10));
      std::vector<double> wb(b.values.begin() + long(w * 10),
                             b.values.begin() + long(w * 10 + 10));
      REQUIRE(rc.window_rs[w] ==
              Approx(synth::oracle_pearson(wa, wb)).margin(1e-12));
    }
  }
  SECTION("full-span window reduces to plain pearson") {
    auto a = series_of(random_vector(rng, 50));
    auto b = series_of(random_vector(rng, 50));
    RollingCorr rc = rolling_corr(a, b, 50.0, 50.0);
    REQUIRE(rc.n_windows == 1);
    REQUIRE(rc.mean_r == Approx(pearson(a.values, b.values)).epsilon(1e-15));
  }
  SECTION("constant windows are skipped and counted") {
    std::vector<double> av(30, 0.0), bv;
    for (int i = 0; i < 30; ++i) bv.push_back(double(i % 7));
    for (int i = 10; i < 20; ++i) av[std::size_t(i)] = double(i);
    auto rc = rolling_corr(series_of(av), series_of(bv), 10.0, 10.0);
    // windows 0 and 2 have constant a
    REQUIRE(rc.n_windows == 1);
    REQUIRE(rc.n_skipped == 2);
  }
  SECTION("grid mismatch is an error") {
    auto a = series_of(random_vector(rng, 50), 1.0);
    auto b = series_of(random_vector(rng, 50), 0.5);
    REQUIRE_THROWS_WITH(rolling_corr(a, b, 10.0, 10.0),
                        Catch::Matchers::ContainsSubstring("common grid"));
  }
}

TEST_CASE("window_sweep") {
  Rng rng(404);
  SECTION("a = b: every candidate scores mean |r| = 1, shortest wins") {
    auto a = series_of(random_vector(rng, 420));
    SweepResult sweep = window_sweep(a, a, {7.0, 14.0, 21.0, 42.0});
    for (const auto& row : sweep.rows)
      REQUIRE(row.mean_abs_r == Approx(1.0).epsilon(1e-12));
    REQUIRE(sweep.selected_length_s == 7.0); // max n_windows
  }
  SECTION("single candidate is selected trivially") {
    auto a = series_of(random_vector(rng, 100));
    auto b = series_of(random_vector(rng, 100));
    SweepResult sweep = window_sweep(a, b, {21.0});
    REQUIRE(sweep.selected_length_s == 21.0);
    REQUIRE(sweep.rows.size() == 1);
    REQUIRE(sweep.rows[0].selected);
  }
  SECTION("score table matches an exhaustive recomputation") {
    // shared slow component + independent noise on both sides
    std::size_t n = 840;
    std::vector<double> av(n), bv(n);
    for (std::size_t i = 0; i < n; ++i) {
      double t = double(i);
      double shared = std::sin(2.0 * 3.14159265358979323846 * 0.05 * t);
      av[i] = shared + 0.4 * rng.gaussian();
      bv[i] = shared + 0.4 * rng.gaussian();
    }
    auto a = series_of(av);
    auto b = series_of(bv);
    std::vector<double> lengths{7.0, 14.0, 21.0, 42.0};
    SweepResult sweep = window_sweep(a, b, lengths);

    double best_score = -1.0;
    double best_len = 0.0;
    for (double len : lengths) {
      std::size_t w = std::size_t(len);
      std::size_t count = 0;
      double sum_abs = 0.0;
      for (std::size_t start = 0; start + w <= n; start += w) {
        std::vector<double> wa(av.begin() + long(start),
                               av.begin() + long(start + w));
        std::vector<double> wb(bv.begin() + long(start),
                               bv.begin() + long(start + w));
        sum_abs += std::abs(synth::oracle_pearson(wa, wb));
        ++count;
      }
      double mean_abs = sum_abs / double(count);
      double score = mean_abs * std::sqrt(double(count));
      auto row = std::find_if(sweep.rows.begin(), sweep.rows.end(),
                              [&](const SweepRow& r) { return r.window_s == len; });
      REQUIRE(row != sweep.rows.end());
      REQUIRE(row->mean_abs_r == Approx(mean_abs).margin(1e-12));
      REQUIRE(row->n_windows == count);
      REQUIRE(row->score == Approx(score).margin(1e-12));
      if (score > best_score) {
        best_score = score;
        best_len = len;
      }
    }
    REQUIRE(sweep.selected_length_s == best_len);
  }
  SECTION("selection is invariant under common positive scaling") {
    auto a = series_of(random_vector(rng, 420));
    auto b = series_of(random_vector(rng, 420));
    SweepResult s1 = window_sweep(a, b, {7.0, 14.0, 21.0, 42.0});
    for (double& v : a.values) v *= 37.5;
    for (double& v : b.values) v *= 37.5;
    SweepResult s2 = window_sweep(a, b, {7.0, 14.0, 21.0, 42.0});
    REQUIRE(s1.selected_length_s == s2.selected_length_s);
    for (std::size_t i = 0; i < s1.rows.size(); ++i)
      REQUIRE(s1.rows[i].score == Approx(s2.rows[i].score).margin(1e-12));
  }
}

namespace {

MfccMatrix matrix_from_columns(const std::vector<std::vector<double>>& cols,
                               double hop_s = 0.5) {
  MfccMatrix m;
  m.n_coeffs = cols.size();
  m.n_frames = cols.front().size();
  m.config.hop_s = hop_s;
  m.coeffs.resize(m.n_frames * m.n_coeffs);
  m.frame_times_s.resize(m.n_frames);
  for (std::size_t f = 0; f < m.n_frames; ++f) {
    m.frame_times_s[f] = 0.5 + double(f) * hop_s;
    for (std::size_t c = 0; c < m.n_coeffs; ++c)
      m.coeffs[f * m.n_coeffs + c] = cols[c][f];
  }
  return m;
}

} // namespace

TEST_CASE("mfcc_corr") {
  Rng rng(505);
  std::vector<std::vector<double>> cols;
  for (int c = 0; c < 8; ++c) cols.push_back(random_vector(rng, 200));
  MfccMatrix a = matrix_from_columns(cols);

  CoeffSet set;
  set.indices = {1, 2, 3, 4, 5, 6};

  SECTION("B = A gives average_r = 1") {
    MfccCorrResult res = mfcc_corr(a, a, set, 20.0, 20.0);
    REQUIRE(res.average_r == Approx(1.0).epsilon(1e-12));
    REQUIRE(res.significance.n == 200);
  }
  SECTION("independent shuffle of columns decorrelates") {
    auto shuffled = cols;
    for (auto& col : shuffled) {
      for (std::size_t i = col.size(); i > 1; --i)
        std::swap(col[i - 1], col[rng.below(i)]);
    }
    MfccMatrix b = matrix_from_columns(shuffled);
    MfccCorrResult res = mfcc_corr(a, b, set, 100.0, 100.0);
    REQUIRE(std::abs(res.average_r) < 0.1);
  }
  SECTION("frame grid mismatch is an error") {
    MfccMatrix b = matrix_from_columns(cols, 0.25);
    REQUIRE_THROWS_WITH(mfcc_corr(a, b, set, 20.0, 20.0),
                        Catch::Matchers::ContainsSubstring("align"));
  }
  SECTION("empty coefficient set is an error") {
    CoeffSet empty;
    empty.indices.clear();
    REQUIRE_THROWS_AS(mfcc_corr(a, a, empty, 20.0, 20.0), Error);
  }
}

TEST_CASE("binary_vs_mfcc") {
  Rng rng(606);
  std::size_t n = 1000;
  std::vector<std::vector<double>> cols;
  for (int c = 0; c < 8; ++c) cols.push_back(random_vector(rng, n));
  CoeffSet set;
  set.indices = {1, 2, 3};

  SECTION("binary built by thresholding a column tracks that column") {
    // column 1 drives the binary series
    std::vector<std::uint8_t> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = cols[1][i] > 0.0 ? 1 : 0;
    MfccMatrix a = matrix_from_columns(cols);
    BinarySeries bs{TimeGrid{0.5, 0.5, n}, b, "hand"};
    BinaryMfccResult res = binary_vs_mfcc(bs, a, set);
    double r1 = 0.0;
    for (auto& [i, r] : res.per_coeff)
      if (i == 1) r1 = r;
    REQUIRE(r1 > 0.7); // thresholded column correlates strongly
    REQUIRE(res.average_r == Approx((res.per_coeff[0].second +
                                     res.per_coeff[1].second +
                                     res.per_coeff[2].second) / 3.0));
  }
  SECTION("independent binary decorrelates") {
    std::vector<std::uint8_t> b(n);
    for (auto& v : b) v = std::uint8_t(rng.below(2));
    MfccMatrix a = matrix_from_columns(cols);
    BinarySeries bs{TimeGrid{0.5, 0.5, n}, b, "hand"};
    BinaryMfccResult res = binary_vs_mfcc(bs, a, set);
    REQUIRE(std::abs(res.average_r) < 0.1);
  }
  SECTION("constant binary is a degenerate-input error") {
    std::vector<std::uint8_t> b(n, 1);
    MfccMatrix a = matrix_from_columns(cols);
    BinarySeries bs{TimeGrid{0.5, 0.5, n}, b, "hand"};
    REQUIRE_THROWS_WITH(binary_vs_mfcc(bs, a, set),
                        Catch::Matchers::ContainsSubstring("single-class"));
  }
}
