#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "phytosig/common.hpp"

namespace phytosig {

/// Uniform clock: timestamps are t0_s + k * dt_s for k in [0, n).
struct TimeGrid {
  double t0_s = 0.0;
  double dt_s = 1.0;
  std::size_t n = 0;

  double time_at(std::size_t k) const { return t0_s + double(k) * dt_s; }
  double last_time() const { return n == 0 ? t0_s : time_at(n - 1); }

  bool operator==(const TimeGrid&) const = default;
};

inline void validate(const TimeGrid& g) {
  require(g.dt_s > 0.0, "TimeGrid: dt_s must be positive, got ", g.dt_s);
}

struct RealSeries {
  TimeGrid grid;
  std::vector<double> values;
  std::string label;
};

/// Per-grid-point 0/1 activity. Values are stored as bytes but always 0 or 1.
struct BinarySeries {
  TimeGrid grid;
  std::vector<std::uint8_t> values;
  std::string label;
};

inline void validate(const RealSeries& s) {
  validate(s.grid);
  require(s.values.size() == s.grid.n, "RealSeries '", s.label,
          "': length ", s.values.size(), " != grid.n ", s.grid.n);
  require(all_finite(s.values), "RealSeries '", s.label,
          "': non-finite value");
}

inline void validate(const BinarySeries& s) {
  validate(s.grid);
  require(s.values.size() == s.grid.n, "BinarySeries '", s.label,
          "': length ", s.values.size(), " != grid.n ", s.grid.n);
  for (std::size_t i = 0; i < s.values.size(); ++i)
    require(s.values[i] <= 1, "BinarySeries '", s.label, "': value at index ",
            i, " is not 0/1");
}

/// Uniformly sampled electrode voltage recording from one channel.
/// `unit` records whether samples are volts or raw ADC counts; the pipeline
/// itself is unit-agnostic.
struct VoltageTrace {
  std::string channel_id;
  double sample_rate_hz = 0.0;
  double t0_s = 0.0;
  std::vector<double> samples;
  std::string unit = "raw";

  double duration_s() const {
    return double(samples.size()) / sample_rate_hz;
  }
  double time_at(std::size_t k) const {
    return t0_s + double(k) / sample_rate_hz;
  }
};

inline void validate(const VoltageTrace& t) {
  require(t.sample_rate_hz > 0.0, "VoltageTrace '", t.channel_id,
          "': sample_rate_hz must be positive");
  require(!t.samples.empty(), "VoltageTrace '", t.channel_id, "': no samples");
  require(all_finite(t.samples), "VoltageTrace '", t.channel_id,
          "': non-finite sample");
}

/// Reads a one-value-per-row voltage CSV. The file carries no sample rate,
/// so the rate is a mandatory parameter. A single non-numeric header row is
/// skipped; any later non-numeric row is an error naming the row.
inline VoltageTrace load_voltage_csv(const std::string& path,
                                     double sample_rate_hz,
                                     const std::string& channel_id) {
  require(sample_rate_hz > 0.0, "load_voltage_csv: sample rate must be positive");
  std::ifstream in(path);
  require(in.good(), "load_voltage_csv: cannot open '", path, "'");
  VoltageTrace trace;
  trace.channel_id = channel_id;
  trace.sample_rate_hz = sample_rate_hz;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = detail::strip_line_ending(line);
    if (line.empty()) continue;
    double v = 0.0;
    if (!detail::parse_double(line, v)) {
      if (row == 1) continue; // header row
      fail("load_voltage_csv: '", path, "' row ", row, ": unparsable value '",
           line, "'");
    }
    require(std::isfinite(v), "load_voltage_csv: '", path, "' row ", row,
            ": non-finite value");
    trace.samples.push_back(v);
  }
  require(!trace.samples.empty(), "load_voltage_csv: '", path,
          "' contains no samples");
  return trace;
}

/// Writes "t_s,value" rows at 12 significant digits.
inline void write_series_csv(const RealSeries& s, std::ostream& out) {
  out << "t_s,value\n";
  for (std::size_t k = 0; k < s.grid.n; ++k)
    out << format_g12(s.grid.time_at(k)) << ',' << format_g12(s.values[k])
        << '\n';
}

inline void write_series_csv(const RealSeries& s, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_series_csv: cannot open '", path, "'");
  write_series_csv(s, out);
}

inline void write_binary_csv(const BinarySeries& s, std::ostream& out) {
  out << "t_s,active\n";
  for (std::size_t k = 0; k < s.grid.n; ++k)
    out << format_g12(s.grid.time_at(k)) << ',' << int(s.values[k]) << '\n';
}

inline void write_binary_csv(const BinarySeries& s, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_binary_csv: cannot open '", path, "'");
  write_binary_csv(s, out);
}

/// Reads a "t_s,value" series CSV back. The grid is reconstructed from the
/// first two timestamps; rows must be uniformly spaced within 1e-9 * dt.
inline RealSeries load_series_csv(const std::string& path,
                                  const std::string& label = "") {
  std::ifstream in(path);
  require(in.good(), "load_series_csv: cannot open '", path, "'");
  std::string line;
  std::size_t row = 0;
  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++row;
    line = detail::strip_line_ending(line);
    if (line.empty()) continue;
    auto comma = line.find(',');
    require(comma != std::string::npos, "load_series_csv: '", path, "' row ",
            row, ": expected 't,value'");
    double t = 0.0, v = 0.0;
    bool ok = detail::parse_double(line.substr(0, comma), t) &&
              detail::parse_double(line.substr(comma + 1), v);
    if (!ok) {
      if (row == 1) continue; // header
      fail("load_series_csv: '", path, "' row ", row, ": unparsable row");
    }
    require(std::isfinite(t) && std::isfinite(v), "load_series_csv: '", path,
            "' row ", row, ": non-finite value");
    times.push_back(t);
    values.push_back(v);
  }
  require(!values.empty(), "load_series_csv: '", path, "' contains no rows");
  RealSeries s;
  s.label = label;
  s.grid.t0_s = times.front();
  s.grid.dt_s = times.size() > 1 ? times[1] - times[0] : 1.0;
  s.grid.n = values.size();
  require(times.size() < 2 || s.grid.dt_s > 0, "load_series_csv: '", path,
          "': timestamps not increasing");
  for (std::size_t k = 0; k < times.size(); ++k)
    require(std::abs(times[k] - s.grid.time_at(k)) <= 1e-9 * s.grid.dt_s,
            "load_series_csv: '", path, "' row ", k + 1,
            ": timestamps are not uniformly spaced");
  s.values = std::move(values);
  return s;
}

/// Centers and scales to population mean 0, sd 1. Constant input is a
/// degenerate-input error, never a silent zero series.
inline RealSeries zscore(const RealSeries& series) {
  validate(series);
  require(series.values.size() >= 2, "zscore: need at least 2 values, got ",
          series.values.size());
  double mean = 0.0;
  for (double v : series.values) mean += v;
  mean /= double(series.values.size());
  double var = 0.0;
  for (double v : series.values) var += (v - mean) * (v - mean);
  var /= double(series.values.size());
  require(var > 0.0, "zscore: degenerate input, series '", series.label,
          "' has zero variance");
  double sd = std::sqrt(var);
  RealSeries out = series;
  for (double& v : out.values) v = (v - mean) / sd;
  return out;
}

enum class AlignMode { hold, linear };

namespace detail {

inline void check_overlap(const TimeGrid& src, const TimeGrid& target) {
  require(target.last_time() >= src.t0_s && target.t0_s <= src.last_time(),
          "align_to_grid: disjoint time spans (source [", src.t0_s, ", ",
          src.last_time(), "], target [", target.t0_s, ", ",
          target.last_time(), "])");
}

/// Fractional source index of target time T, snapped to the nearest grid
/// point when within 1e-9 * dt so that identical grids align exactly.
inline double source_position(const TimeGrid& src, double t) {
  double kf = (t - src.t0_s) / src.dt_s;
  double snapped = std::floor(kf + 0.5);
  if (std::abs(kf - snapped) <= 1e-9) kf = snapped;
  return kf;
}

} // namespace detail

/// Hold resampling: value at the greatest source timestamp <= target
/// timestamp; target points before the first source point take the first
/// value, points after the last take the last.
inline BinarySeries align_to_grid(const BinarySeries& series,
                                  const TimeGrid& target, AlignMode mode) {
  validate(series);
  validate(target);
  require(mode == AlignMode::hold,
          "align_to_grid: binary series only supports hold mode");
  detail::check_overlap(series.grid, target);
  BinarySeries out;
  out.grid = target;
  out.label = series.label;
  out.values.resize(target.n);
  for (std::size_t k = 0; k < target.n; ++k) {
    double pos = detail::source_position(series.grid, target.time_at(k));
    double idx = std::floor(pos);
    long i = idx < 0 ? 0 : long(idx);
    if (i >= long(series.grid.n)) i = long(series.grid.n) - 1;
    out.values[k] = series.values[std::size_t(i)];
  }
  return out;
}

inline RealSeries align_to_grid(const RealSeries& series,
                                const TimeGrid& target, AlignMode mode) {
  validate(series);
  validate(target);
  detail::check_overlap(series.grid, target);
  RealSeries out;
  out.grid = target;
  out.label = series.label;
  out.values.resize(target.n);
  const auto& v = series.values;
  long last = long(series.grid.n) - 1;
  for (std::size_t k = 0; k < target.n; ++k) {
    double pos = detail::source_position(series.grid, target.time_at(k));
    double idx = std::floor(pos);
    long i = long(idx);
    if (i < 0) {
      out.values[k] = v.front();
      continue;
    }
    if (i >= last) {
      out.values[k] = v.back();
      continue;
    }
    if (mode == AlignMode::hold) {
      out.values[k] = v[std::size_t(i)];
    } else {
      double alpha = pos - idx;
      if (alpha <= 1e-9)
        out.values[k] = v[std::size_t(i)];
      else if (alpha >= 1.0 - 1e-9)
        out.values[k] = v[std::size_t(i) + 1];
      else
        out.values[k] =
            (1.0 - alpha) * v[std::size_t(i)] + alpha * v[std::size_t(i) + 1];
    }
  }
  return out;
}

/// Cuts the samples whose timestamps lie in [from_s, to_s).
inline VoltageTrace slice_time(const VoltageTrace& trace, double from_s,
                               double to_s) {
  validate(trace);
  require(from_s < to_s, "slice_time: from_s (", from_s,
          ") must be < to_s (", to_s, ")");
  double rate = trace.sample_rate_hz;
  auto first_at_or_after = [&](double t) {
    double k = std::ceil((t - trace.t0_s) * rate - 1e-9);
    if (k < 0) k = 0;
    if (k > double(trace.samples.size())) k = double(trace.samples.size());
    return std::size_t(k);
  };
  std::size_t lo = first_at_or_after(from_s);
  std::size_t hi = first_at_or_after(to_s);
  require(lo < hi, "slice_time: [", from_s, ", ", to_s,
          ") does not intersect trace '", trace.channel_id, "' span [",
          trace.t0_s, ", ", trace.t0_s + trace.duration_s(), ")");
  VoltageTrace out;
  out.channel_id = trace.channel_id;
  out.sample_rate_hz = rate;
  out.unit = trace.unit;
  out.t0_s = trace.t0_s + double(lo) / rate;
  out.samples.assign(trace.samples.begin() + long(lo),
                     trace.samples.begin() + long(hi));
  return out;
}

/// The voltage samples as a RealSeries on the trace's own clock.
inline RealSeries to_series(const VoltageTrace& trace) {
  validate(trace);
  RealSeries s;
  s.grid = TimeGrid{trace.t0_s, 1.0 / trace.sample_rate_hz,
                    trace.samples.size()};
  s.values = trace.samples;
  s.label = trace.channel_id;
  return s;
}

} // namespace phytosig
