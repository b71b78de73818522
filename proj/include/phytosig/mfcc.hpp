#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "phytosig/common.hpp"
#include "phytosig/fft.hpp"
#include "phytosig/trace.hpp"

namespace phytosig {

/// The paper-backed parameter here is n_coeffs = 20. Everything else is
/// a configurable gap-fill: 1 s frames at 0.5 s hop keep at least two
/// coefficient rows per second, enough rows inside a 21 s correlation
/// window for slow plant signals.
struct MfccConfig {
  double frame_len_s = 1.0;
  double hop_s = 0.5;
  std::size_t n_mels = 26;
  std::size_t n_coeffs = 20;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0; // 0 = Nyquist of the input trace
  double pre_emphasis = 0.97;
  double log_floor = 1e-10;
};

inline void validate(const MfccConfig& c, double sample_rate_hz) {
  require(c.frame_len_s > 0.0, "MfccConfig: frame_len_s must be positive");
  require(c.hop_s > 0.0, "MfccConfig: hop_s must be positive");
  require(c.hop_s <= c.frame_len_s, "MfccConfig: hop_s (", c.hop_s,
          ") must be <= frame_len_s (", c.frame_len_s, ")");
  require(c.n_mels >= 1, "MfccConfig: n_mels must be >= 1");
  require(c.n_coeffs >= 1 && c.n_coeffs <= c.n_mels,
          "MfccConfig: n_coeffs must be in [1, n_mels]");
  double fmax = c.fmax_hz > 0.0 ? c.fmax_hz : sample_rate_hz / 2.0;
  require(c.fmin_hz >= 0.0 && c.fmin_hz < fmax &&
              fmax <= sample_rate_hz / 2.0 + 1e-9,
          "MfccConfig: need 0 <= fmin_hz < fmax_hz <= sample_rate/2, got [",
          c.fmin_hz, ", ", fmax, "] at rate ", sample_rate_hz);
  require(c.pre_emphasis >= 0.0 && c.pre_emphasis < 1.0,
          "MfccConfig: pre_emphasis must be in [0, 1)");
  require(c.log_floor > 0.0, "MfccConfig: log_floor must be positive");
}

/// Per-frame MFCC vectors. coeffs is row-major, n_frames x n_coeffs.
struct MfccMatrix {
  std::vector<double> frame_times_s;
  std::vector<double> coeffs;
  std::size_t n_frames = 0;
  std::size_t n_coeffs = 0;
  MfccConfig config;
  std::string source_channel;

  double at(std::size_t frame, std::size_t coeff) const {
    return coeffs[frame * n_coeffs + coeff];
  }
  /// Coefficient `i` across frames, as a series on the nominal frame clock.
  RealSeries coefficient_series(std::size_t i) const {
    require(i < n_coeffs, "MfccMatrix: coefficient ", i, " out of range [0, ",
            n_coeffs, ")");
    RealSeries s;
    s.grid = TimeGrid{frame_times_s.empty() ? 0.0 : frame_times_s.front(),
                      config.hop_s, n_frames};
    s.values.resize(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) s.values[f] = at(f, i);
    s.label = source_channel + ":c" + std::to_string(i);
    return s;
  }
};

struct FrameSet {
  std::vector<std::vector<double>> frames;
  std::vector<double> frame_times_s;
  std::size_t frame_len = 0;
};

/// Cuts the trace into frames of round(frame_len_s * rate) samples, frame k
/// starting at sample round(k * hop_s * rate). Tail frames that would
/// overrun the end are dropped, never zero-padded. Frame timestamps are the
/// frame centers.
inline FrameSet frame_signal(const VoltageTrace& trace, double frame_len_s,
                             double hop_s) {
  validate(trace);
  require(frame_len_s > 0.0 && hop_s > 0.0,
          "frame_signal: frame and hop must be positive");
  double rate = trace.sample_rate_hz;
  std::size_t n = trace.samples.size();
  std::size_t flen = std::size_t(std::llround(frame_len_s * rate));
  require(flen >= 1, "frame_signal: frame shorter than one sample");
  require(flen <= n, "frame_signal: trace '", trace.channel_id, "' (",
          double(n) / rate, " s) is shorter than one frame (", frame_len_s,
          " s)");
  require(std::llround(hop_s * rate) >= 1,
          "frame_signal: hop shorter than one sample");

  FrameSet set;
  set.frame_len = flen;
  for (std::size_t k = 0;; ++k) {
    std::size_t start = std::size_t(std::llround(double(k) * hop_s * rate));
    if (start + flen > n) break;
    set.frames.emplace_back(trace.samples.begin() + long(start),
                            trace.samples.begin() + long(start + flen));
    set.frame_times_s.push_back(trace.t0_s + double(start) / rate +
                                frame_len_s / 2.0);
  }
  return set;
}

/// Periodic Hann window, w[i] = 0.5 - 0.5 cos(2 pi i / N).
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(two_pi * double(i) / double(n));
  return w;
}

/// |X_j|^2 for bins 0..n_fft/2 of the (optionally Hann-windowed) frame,
/// zero-padded to n_fft. n_fft must be the smallest power of two >= the
/// frame length.
inline std::vector<double> power_spectrum(const std::vector<double>& frame,
                                          std::size_t n_fft,
                                          bool apply_hann = true) {
  require(!frame.empty(), "power_spectrum: empty frame");
  require(is_power_of_two(n_fft) && n_fft >= frame.size() &&
              (n_fft == 1 || n_fft / 2 < frame.size()),
          "power_spectrum: n_fft (", n_fft,
          ") must be the smallest power of two >= frame length (",
          frame.size(), ")");
  std::vector<double> windowed = frame;
  if (apply_hann) {
    std::vector<double> w = hann_window(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) windowed[i] *= w[i];
  }
  auto spectrum = fft_real(windowed, n_fft);
  std::vector<double> power(n_fft / 2 + 1);
  for (std::size_t j = 0; j <= n_fft / 2; ++j)
    power[j] = std::norm(spectrum[j]);
  return power;
}

/// mel(f) = 2595 log10(1 + f / 700)
inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

/// Triangular filters with peaks at n_mels points equally spaced on the mel
/// axis between mel(fmin) and mel(fmax). Rows are peak-normalized to height
/// 1 (this affects only coefficient 0 downstream). Row-major,
/// n_mels x (n_fft/2 + 1).
inline std::vector<double> mel_filterbank(std::size_t n_mels,
                                          std::size_t n_fft,
                                          double sample_rate_hz,
                                          double fmin_hz, double fmax_hz) {
  require(n_mels >= 1, "mel_filterbank: n_mels must be >= 1");
  require(is_power_of_two(n_fft), "mel_filterbank: n_fft must be a power of two");
  require(fmin_hz >= 0.0 && fmin_hz < fmax_hz &&
              fmax_hz <= sample_rate_hz / 2.0 + 1e-9,
          "mel_filterbank: need 0 <= fmin < fmax <= rate/2");

  std::size_t n_bins = n_fft / 2 + 1;
  double mel_lo = hz_to_mel(fmin_hz);
  double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) /
                                      double(n_mels + 1));

  std::vector<double> bank(n_mels * n_bins, 0.0);
  double bin_hz = sample_rate_hz / double(n_fft);
  for (std::size_t m = 0; m < n_mels; ++m) {
    double f_lo = edges[m], f_c = edges[m + 1], f_hi = edges[m + 2];
    double peak = 0.0;
    for (std::size_t j = 0; j < n_bins; ++j) {
      double f = double(j) * bin_hz;
      double w = 0.0;
      if (f > f_lo && f < f_c)
        w = (f - f_lo) / (f_c - f_lo);
      else if (f >= f_c && f < f_hi)
        w = (f_hi - f) / (f_hi - f_c);
      bank[m * n_bins + j] = w;
      if (w > peak) peak = w;
    }
    require(peak > 0.0, "mel_filterbank: filter ", m,
            " is empty; n_mels too large for n_fft resolution");
    for (std::size_t j = 0; j < n_bins; ++j) bank[m * n_bins + j] /= peak;
  }
  return bank;
}

/// Orthonormal DCT-II: c_k = s_k sum_n v_n cos(pi k (2n+1) / (2N)),
/// s_0 = sqrt(1/N), s_k = sqrt(2/N).
inline std::vector<double> dct_ii(const std::vector<double>& v) {
  require(!v.empty(), "dct_ii: empty input");
  std::size_t n = v.size();
  const double pi = 3.14159265358979323846;
  std::vector<double> out(n);
  double s0 = std::sqrt(1.0 / double(n));
  double sk = std::sqrt(2.0 / double(n));
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += v[i] * std::cos(pi * double(k) * (2.0 * double(i) + 1.0) /
                             (2.0 * double(n)));
    out[k] = (k == 0 ? s0 : sk) * acc;
  }
  return out;
}

/// Full MFCC pipeline: pre-emphasis, framing, Hann window, power spectrum,
/// mel filterbank energies, log with floor, DCT-II, first n_coeffs kept.
/// Frames are computed independently (possibly in parallel) and written to
/// preallocated rows, so the result is bit-identical at any thread count.
inline MfccMatrix mfcc(const VoltageTrace& trace, const MfccConfig& config) {
  validate(trace);
  validate(config, trace.sample_rate_hz);

  VoltageTrace emphasized = trace;
  if (config.pre_emphasis > 0.0) {
    const double a = config.pre_emphasis;
    for (std::size_t i = trace.samples.size(); i-- > 1;)
      emphasized.samples[i] =
          trace.samples[i] - a * trace.samples[i - 1];
  }

  FrameSet set = frame_signal(emphasized, config.frame_len_s, config.hop_s);
  std::size_t n_fft = next_power_of_two(set.frame_len);
  double fmax = config.fmax_hz > 0.0 ? config.fmax_hz
                                     : trace.sample_rate_hz / 2.0;
  std::vector<double> bank = mel_filterbank(
      config.n_mels, n_fft, trace.sample_rate_hz, config.fmin_hz, fmax);
  std::size_t n_bins = n_fft / 2 + 1;

  MfccMatrix out;
  out.frame_times_s = set.frame_times_s;
  out.n_frames = set.frames.size();
  out.n_coeffs = config.n_coeffs;
  out.config = config;
  out.config.fmax_hz = fmax;
  out.source_channel = trace.channel_id;
  out.coeffs.resize(out.n_frames * out.n_coeffs);

  detail::parallel_for(out.n_frames, [&](std::size_t f) {
    std::vector<double> power = power_spectrum(set.frames[f], n_fft);
    std::vector<double> log_energy(config.n_mels);
    for (std::size_t m = 0; m < config.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t j = 0; j < n_bins; ++j)
        e += bank[m * n_bins + j] * power[j];
      log_energy[m] = std::log(std::max(e, config.log_floor));
    }
    std::vector<double> cepstrum = dct_ii(log_energy);
    for (std::size_t c = 0; c < config.n_coeffs; ++c)
      out.coeffs[f * out.n_coeffs + c] = cepstrum[c];
  });
  return out;
}

/// CSV export: "t_s,c0,...,c<n-1>", one row per frame, 12 significant digits.
inline void write_mfcc_csv(const MfccMatrix& m, std::ostream& out) {
  out << "t_s";
  for (std::size_t c = 0; c < m.n_coeffs; ++c) out << ",c" << c;
  out << '\n';
  for (std::size_t f = 0; f < m.n_frames; ++f) {
    out << format_g12(m.frame_times_s[f]);
    for (std::size_t c = 0; c < m.n_coeffs; ++c)
      out << ',' << format_g12(m.at(f, c));
    out << '\n';
  }
}

inline void write_mfcc_csv(const MfccMatrix& m, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_mfcc_csv: cannot open '", path, "'");
  write_mfcc_csv(m, out);
}

} // namespace phytosig
