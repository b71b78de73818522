#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "phytosig/common.hpp"
#include "phytosig/mfcc.hpp"
#include "phytosig/trace.hpp"

namespace phytosig {

/// Correlation with its two-sided significance. The star legend is the
/// conventional one (the source tables never define theirs):
/// p < .05 "*", p < .01 "**", p < .001 "***".
struct CorrResult {
  double r = 0.0;
  std::size_t n = 0;
  double p_value = 1.0;
  std::string stars;
};

struct RollingCorr {
  double window_len_s = 0.0;
  double hop_s = 0.0;
  std::vector<double> window_rs; // computed windows only
  double mean_r = 0.0;
  std::size_t n_windows = 0;     // = window_rs.size()
  std::size_t n_skipped = 0;     // constant-in-window segments, not averaged
};

/// Which MFCC indices enter the averaged correlation. Default {1..6}
/// excludes c0, which carries pure energy.
struct CoeffSet {
  std::vector<std::size_t> indices{1, 2, 3, 4, 5, 6};
};

inline void validate(const CoeffSet& set, std::size_t n_coeffs) {
  require(!set.indices.empty(), "CoeffSet: empty coefficient set");
  for (std::size_t i : set.indices)
    require(i < n_coeffs, "CoeffSet: index ", i, " out of range [0, ",
            n_coeffs, ")");
}

/// Sample Pearson correlation. Two-pass centered products with compensated
/// summation; bitwise symmetric in its arguments.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "pearson: length mismatch (", x.size(),
          " vs ", y.size(), ")");
  std::size_t n = x.size();
  require(n >= 3, "pearson: need at least 3 observations, got ", n);

  auto kahan_mean = [n](std::span<const double> v) {
    double sum = 0.0, comp = 0.0;
    for (double t : v) {
      double yv = t - comp;
      double s = sum + yv;
      comp = (s - sum) - yv;
      sum = s;
    }
    return sum / double(n);
  };
  double mx = kahan_mean(x);
  double my = kahan_mean(y);

  double sxy = 0.0, cxy = 0.0;
  double sxx = 0.0, cxx = 0.0;
  double syy = 0.0, cyy = 0.0;
  auto add = [](double& sum, double& comp, double term) {
    double yv = term - comp;
    double s = sum + yv;
    comp = (s - sum) - yv;
    sum = s;
  };
  for (std::size_t i = 0; i < n; ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    add(sxy, cxy, dx * dy);
    add(sxx, cxx, dx * dx);
    add(syy, cyy, dy * dy);
  }
  require(sxx > 0.0, "pearson: degenerate input, first argument has zero variance");
  require(syy > 0.0, "pearson: degenerate input, second argument has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

inline double pearson(const std::vector<double>& x,
                      const std::vector<double>& y) {
  return pearson(std::span<const double>(x), std::span<const double>(y));
}

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Continued fraction for the regularized incomplete beta, modified Lentz.
inline double incomplete_beta_cf(double x, double a, double b) {
  const double tiny = 1e-300;
  const double eps = 1e-15;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return h;
}

inline double regularized_incomplete_beta(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double front =
      std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * incomplete_beta_cf(x, a, b) / a;
  return 1.0 - front * incomplete_beta_cf(1.0 - x, b, a) / b;
}

} // namespace detail

inline std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

/// Two-sided p-value for r under the null, via t = r sqrt((n-2)/(1-r^2))
/// with n-2 degrees of freedom. |r| = 1 (or a rounding hair above) is the
/// documented special case p = 0.
inline CorrResult corr_significance(double r, std::size_t n) {
  require(n >= 3, "corr_significance: need n >= 3, got ", n);
  require(std::isfinite(r) && std::abs(r) <= 1.0 + 1e-12,
          "corr_significance: |r| must be <= 1, got ", r);
  CorrResult res;
  res.n = n;
  res.r = r;
  if (std::abs(r) >= 1.0) {
    res.r = r > 0 ? 1.0 : -1.0;
    res.p_value = 0.0;
    res.stars = "***";
    return res;
  }
  double dof = double(n - 2);
  double t = r * std::sqrt(dof / (1.0 - r * r));
  res.p_value = detail::regularized_incomplete_beta(dof / (t * t + dof),
                                                    dof / 2.0, 0.5);
  if (res.p_value > 1.0) res.p_value = 1.0;
  res.stars = significance_stars(res.p_value);
  return res;
}

/// Point-biserial correlation via the group-means formula with population
/// sd; numerically equal to pearson on the 0/1-coded values.
inline double point_biserial(std::span<const std::uint8_t> b,
                             std::span<const double> x) {
  require(b.size() == x.size(), "point_biserial: length mismatch (", b.size(),
          " vs ", x.size(), ")");
  std::size_t n = b.size();
  require(n >= 3, "point_biserial: need at least 3 observations, got ", n);
  double sum1 = 0.0, sum0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    require(b[i] <= 1, "point_biserial: binary input has non-0/1 value");
    if (b[i]) {
      sum1 += x[i];
      ++n1;
    } else {
      sum0 += x[i];
      ++n0;
    }
  }
  require(n1 > 0 && n0 > 0,
          "point_biserial: degenerate input, binary series has a single class");
  double mean = (sum1 + sum0) / double(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= double(n);
  require(var > 0.0,
          "point_biserial: degenerate input, continuous series has zero variance");
  double m1 = sum1 / double(n1);
  double m0 = sum0 / double(n0);
  return (m1 - m0) / std::sqrt(var) *
         std::sqrt(double(n1) * double(n0) / (double(n) * double(n)));
}

inline double point_biserial(const BinarySeries& b,
                             const std::vector<double>& x) {
  return point_biserial(std::span<const std::uint8_t>(b.values),
                        std::span<const double>(x));
}

namespace detail {

inline bool is_constant(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] != v[0]) return false;
  return true;
}

inline void check_common_grid(const RealSeries& a, const RealSeries& b,
                              const char* who) {
  require(a.grid.n == b.grid.n &&
              std::abs(a.grid.t0_s - b.grid.t0_s) <= 1e-9 * a.grid.dt_s &&
              std::abs(a.grid.dt_s - b.grid.dt_s) <= 1e-12 * a.grid.dt_s,
          who, ": series are not on a common grid; align first");
}

} // namespace detail

/// Pearson in fixed-length windows stepped across two aligned series.
/// Windows where either side is constant are skipped and counted in
/// n_skipped; the mean covers computed windows only.
inline RollingCorr rolling_corr(const RealSeries& a, const RealSeries& b,
                                double window_len_s, double hop_s) {
  validate(a);
  validate(b);
  detail::check_common_grid(a, b, "rolling_corr");
  require(window_len_s > 0.0 && hop_s > 0.0,
          "rolling_corr: window and hop must be positive");
  double dt = a.grid.dt_s;
  std::size_t wlen = std::size_t(std::llround(window_len_s / dt));
  std::size_t hop = std::size_t(std::llround(hop_s / dt));
  require(wlen >= 3, "rolling_corr: window of ", window_len_s,
          " s holds fewer than 3 points at dt ", dt);
  require(hop >= 1, "rolling_corr: hop shorter than one grid step");
  require(wlen <= a.grid.n, "rolling_corr: no full window fits (window ",
          wlen, " points, series ", a.grid.n, ")");

  RollingCorr out;
  out.window_len_s = window_len_s;
  out.hop_s = hop_s;
  for (std::size_t start = 0; start + wlen <= a.grid.n; start += hop) {
    std::span<const double> wa(a.values.data() + start, wlen);
    std::span<const double> wb(b.values.data() + start, wlen);
    if (detail::is_constant(wa) || detail::is_constant(wb)) {
      ++out.n_skipped;
      continue;
    }
    out.window_rs.push_back(pearson(wa, wb));
  }
  require(!out.window_rs.empty(),
          "rolling_corr: every window was constant; no correlation defined");
  double sum = 0.0;
  for (double r : out.window_rs) sum += r;
  out.n_windows = out.window_rs.size();
  out.mean_r = sum / double(out.n_windows);
  return out;
}

struct SweepRow {
  double window_s = 0.0;
  double mean_abs_r = 0.0;
  std::size_t n_windows = 0;
  double score = 0.0;
  bool selected = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double selected_length_s = 0.0;
};

/// Window-length sweep with hop = length. score(L) = mean|r| * sqrt(n_windows)
/// expresses the sample-size/correlation compromise; the selected length is
/// the argmax, ties to the shorter candidate. The full table is always
/// returned so any other selection rule can be applied externally.
inline SweepResult window_sweep(const RealSeries& a, const RealSeries& b,
                                const std::vector<double>& lengths_s) {
  require(!lengths_s.empty(), "window_sweep: no candidate lengths");
  SweepResult result;
  std::size_t best = std::size_t(-1);
  std::vector<double> sorted = lengths_s;
  std::sort(sorted.begin(), sorted.end());
  for (double len : sorted) {
    SweepRow row;
    row.window_s = len;
    try {
      RollingCorr rc = rolling_corr(a, b, len, len);
      double sum_abs = 0.0;
      for (double r : rc.window_rs) sum_abs += std::abs(r);
      row.n_windows = rc.n_windows;
      row.mean_abs_r = sum_abs / double(rc.n_windows);
      row.score = row.mean_abs_r * std::sqrt(double(rc.n_windows));
    } catch (const Error&) {
      // candidate admits no window at this series length; keep a zero row
    }
    result.rows.push_back(row);
    if (row.n_windows >= 2) {
      if (best == std::size_t(-1) || row.score > result.rows[best].score)
        best = result.rows.size() - 1;
    }
  }
  require(best != std::size_t(-1),
          "window_sweep: no candidate length admits 2 windows");
  result.rows[best].selected = true;
  result.selected_length_s = result.rows[best].window_s;
  return result;
}

/// Sweep table CSV: "window_s,mean_abs_r,n_windows,score,selected".
inline void write_sweep_csv(const SweepResult& sweep, std::ostream& out) {
  out << "window_s,mean_abs_r,n_windows,score,selected\n";
  for (const auto& row : sweep.rows)
    out << format_g12(row.window_s) << ',' << format_g12(row.mean_abs_r)
        << ',' << row.n_windows << ',' << format_g12(row.score) << ','
        << (row.selected ? 1 : 0) << '\n';
}

inline void write_sweep_csv(const SweepResult& sweep,
                            const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_sweep_csv: cannot open '", path, "'");
  write_sweep_csv(sweep, out);
}

struct CoeffCorr {
  std::size_t coeff = 0;
  RollingCorr rolling;
};

struct MfccCorrResult {
  std::vector<CoeffCorr> per_coeff;
  double average_r = 0.0;
  CorrResult significance; // on average_r with n = paired frames
};

namespace detail {

inline void check_same_frame_grid(const MfccMatrix& a, const MfccMatrix& b) {
  require(a.n_frames == b.n_frames, "mfcc_corr: frame count mismatch (",
          a.n_frames, " vs ", b.n_frames, "); align first");
  require(a.n_coeffs == b.n_coeffs, "mfcc_corr: coefficient count mismatch");
  for (std::size_t f = 0; f < a.n_frames; ++f)
    require(std::abs(a.frame_times_s[f] - b.frame_times_s[f]) <= 1e-9,
            "mfcc_corr: frame clocks differ at frame ", f, "; align first");
}

} // namespace detail

/// Rolling correlation of matching MFCC coefficients between two channels,
/// averaged over the coefficient set. n for significance is the number of
/// paired frames.
inline MfccCorrResult mfcc_corr(const MfccMatrix& a, const MfccMatrix& b,
                                const CoeffSet& set, double window_len_s,
                                double hop_s) {
  detail::check_same_frame_grid(a, b);
  validate(set, a.n_coeffs);

  MfccCorrResult result;
  result.per_coeff.resize(set.indices.size());
  for (std::size_t k = 0; k < set.indices.size(); ++k) {
    std::size_t i = set.indices[k];
    result.per_coeff[k].coeff = i;
    result.per_coeff[k].rolling = rolling_corr(
        a.coefficient_series(i), b.coefficient_series(i), window_len_s, hop_s);
  }
  double sum = 0.0;
  for (const auto& cc : result.per_coeff) sum += cc.rolling.mean_r;
  result.average_r = sum / double(result.per_coeff.size());
  result.significance = corr_significance(result.average_r, a.n_frames);
  return result;
}

struct BinaryMfccResult {
  std::vector<std::pair<std::size_t, double>> per_coeff; // (index, r)
  double average_r = 0.0;
  CorrResult significance;
};

/// Point-biserial correlation of a binary activity series against each MFCC
/// coefficient in the set, sign preserved, averaged over the set. The
/// binary series must already sit on the matrix's frame grid (hold-align it
/// first).
inline BinaryMfccResult binary_vs_mfcc(const BinarySeries& b,
                                       const MfccMatrix& a,
                                       const CoeffSet& set) {
  validate(b);
  validate(set, a.n_coeffs);
  require(b.grid.n == a.n_frames, "binary_vs_mfcc: series length ", b.grid.n,
          " != frame count ", a.n_frames, "; align to the frame grid first");
  bool has0 = false, has1 = false;
  for (auto v : b.values) (v ? has1 : has0) = true;
  require(has0 && has1,
          "binary_vs_mfcc: degenerate input, single-class binary series "
          "after alignment");

  BinaryMfccResult result;
  for (std::size_t i : set.indices) {
    RealSeries col = a.coefficient_series(i);
    result.per_coeff.emplace_back(i, point_biserial(b, col.values));
  }
  double sum = 0.0;
  for (auto& [i, r] : result.per_coeff) sum += r;
  result.average_r = sum / double(result.per_coeff.size());
  result.significance = corr_significance(result.average_r, a.n_frames);
  return result;
}

/// Correlation export CSV: "coeff,r,n,p,stars" plus an "avg" row.
inline void write_corr_csv(const MfccCorrResult& res, std::size_t n_frames,
                           std::ostream& out) {
  out << "coeff,r,n,p,stars\n";
  for (const auto& cc : res.per_coeff) {
    CorrResult sig = corr_significance(cc.rolling.mean_r, n_frames);
    out << cc.coeff << ',' << format_g12(cc.rolling.mean_r) << ',' << n_frames
        << ',' << format_g12(sig.p_value) << ',' << sig.stars << '\n';
  }
  out << "avg," << format_g12(res.average_r) << ',' << res.significance.n
      << ',' << format_g12(res.significance.p_value) << ','
      << res.significance.stars << '\n';
}

inline void write_corr_csv(const BinaryMfccResult& res, std::size_t n_frames,
                           std::ostream& out) {
  out << "coeff,r,n,p,stars\n";
  for (const auto& [i, r] : res.per_coeff) {
    CorrResult sig = corr_significance(r, n_frames);
    out << i << ',' << format_g12(r) << ',' << n_frames << ','
        << format_g12(sig.p_value) << ',' << sig.stars << '\n';
  }
  out << "avg," << format_g12(res.average_r) << ',' << res.significance.n
      << ',' << format_g12(res.significance.p_value) << ','
      << res.significance.stars << '\n';
}

} // namespace phytosig
