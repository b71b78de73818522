#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "phytosig/common.hpp"
#include "phytosig/flow.hpp"
#include "phytosig/image.hpp"
#include "phytosig/mfcc.hpp"
#include "phytosig/rng.hpp"
#include "phytosig/trace.hpp"

namespace phytosig {
namespace synth {

struct SharedComponent {
  double freq_hz = 0.0;
  double amplitude = 0.0;
  double phase_rad = 0.0;
};

/// Two-channel synthetic electrode recording: shared sinusoidal components
/// plus per-channel seeded gaussian noise, optionally a slow shared drift.
/// Noise stands in for the instruments and surroundings; channels differ
/// only in their noise stream.
struct SynthVoltageConfig {
  double duration_s = 60.0;
  double sample_rate_hz = 10000.0;
  std::vector<SharedComponent> shared_components;
  double noise_sd_ch1 = 0.1;
  double noise_sd_ch2 = 0.1;
  double drift_amplitude = 0.0;
  double drift_period_s = 0.0;
  std::uint64_t seed = 1;
};

inline void validate(const SynthVoltageConfig& cfg) {
  require(cfg.duration_s > 0.0, "SynthVoltageConfig: duration must be positive");
  require(cfg.sample_rate_hz > 0.0,
          "SynthVoltageConfig: sample rate must be positive");
  for (const auto& c : cfg.shared_components)
    require(c.freq_hz >= 0.0 && c.freq_hz < cfg.sample_rate_hz / 2.0,
            "SynthVoltageConfig: component at ", c.freq_hz,
            " Hz is at or above Nyquist");
  require(cfg.noise_sd_ch1 >= 0.0 && cfg.noise_sd_ch2 >= 0.0,
          "SynthVoltageConfig: noise sd must be >= 0");
  require(cfg.drift_amplitude == 0.0 || cfg.drift_period_s > 0.0,
          "SynthVoltageConfig: drift needs a positive period");
}

struct VoltagePairTruth {
  SynthVoltageConfig config; // exact parameters actually used
  std::size_t n_samples = 0;
};

/// Deterministic per seed: channel k's noise comes from an independent
/// child stream, so changing the seed changes noise but never the shared
/// components.
inline std::pair<VoltageTrace, VoltageTrace> gen_correlated_pair(
    const SynthVoltageConfig& cfg, VoltagePairTruth* truth = nullptr) {
  validate(cfg);
  std::size_t n = std::size_t(std::llround(cfg.duration_s * cfg.sample_rate_hz));
  require(n >= 1, "gen_correlated_pair: zero-length trace");

  std::vector<double> shared(n, 0.0);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i) {
    double t = double(i) / cfg.sample_rate_hz;
    double v = 0.0;
    for (const auto& c : cfg.shared_components)
      v += c.amplitude * std::sin(two_pi * c.freq_hz * t + c.phase_rad);
    if (cfg.drift_amplitude != 0.0)
      v += cfg.drift_amplitude * std::sin(two_pi * t / cfg.drift_period_s);
    shared[i] = v;
  }

  Rng root(cfg.seed);
  Rng noise1 = root.fork(1);
  Rng noise2 = root.fork(2);

  auto make_channel = [&](const std::string& id, Rng& rng, double sd) {
    VoltageTrace tr;
    tr.channel_id = id;
    tr.sample_rate_hz = cfg.sample_rate_hz;
    tr.unit = "synthetic";
    tr.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      tr.samples[i] = shared[i] + (sd > 0.0 ? rng.gaussian(0.0, sd) : 0.0);
    return tr;
  };
  auto ch1 = make_channel("box1", noise1, cfg.noise_sd_ch1);
  auto ch2 = make_channel("box2", noise2, cfg.noise_sd_ch2);
  if (truth) {
    truth->config = cfg;
    truth->n_samples = n;
  }
  return {std::move(ch1), std::move(ch2)};
}

enum class Texture { checkerboard, noise, rectangle };

/// Block-motion schedule: the block jiggles horizontally by jiggle_px on
/// every frame interval inside one of the active [start, end) ranges.
struct BlockMotion {
  std::size_t x = 0, y = 0, w = 0, h = 0; // block at rest, frame pixels
  double jiggle_px = 2.0;
  std::vector<std::pair<std::size_t, std::size_t>> active_intervals;
};

struct SynthFramesConfig {
  std::size_t width = 160;
  std::size_t height = 160;
  std::size_t n_frames = 2;
  Texture texture = Texture::checkerboard;
  std::size_t cell_px = 16;  // checkerboard cell edge
  double shift_dx = 0.0;     // global translation per frame, pixels
  double shift_dy = 0.0;
  std::vector<BlockMotion> blocks;
  std::uint64_t seed = 1;
};

struct ShiftTruth {
  double dx = 0.0;
  double dy = 0.0;
};

struct FramesGroundTruth {
  std::vector<ShiftTruth> cumulative_shift;  // per frame, from frame 0
  std::vector<std::vector<std::uint8_t>> block_activity; // per block, per interval
  std::vector<Point2> rectangle_corners;      // frame-0 corner coordinates
};

inline void validate(const SynthFramesConfig& cfg) {
  require(cfg.width >= 16 && cfg.height >= 16,
          "SynthFramesConfig: frames must be at least 16x16");
  require(cfg.n_frames >= 2, "SynthFramesConfig: need at least 2 frames");
  require(cfg.cell_px >= 2, "SynthFramesConfig: cell_px must be >= 2");
  double max_shift = double(cfg.n_frames) *
                     std::max(std::abs(cfg.shift_dx), std::abs(cfg.shift_dy));
  require(max_shift < double(std::min(cfg.width, cfg.height)),
          "SynthFramesConfig: cumulative shift pushes content out of frame");
  for (const auto& b : cfg.blocks) {
    require(b.w > 0 && b.h > 0, "SynthFramesConfig: block extents must be positive");
    require(b.x + b.w + std::size_t(std::ceil(b.jiggle_px)) <= cfg.width &&
                b.y + b.h <= cfg.height,
            "SynthFramesConfig: block leaves frame bounds when jiggling");
    for (auto [lo, hi] : b.active_intervals)
      require(lo < hi && hi <= cfg.n_frames,
              "SynthFramesConfig: active interval [", lo, ", ", hi,
              ") outside frame range");
  }
}

namespace detail_synth {

inline void box_blur(Image& img, int passes) {
  for (int pass = 0; pass < passes; ++pass) {
    Image copy = img;
    for (std::size_t y = 1; y + 1 < img.height; ++y)
      for (std::size_t x = 1; x + 1 < img.width; ++x) {
        double acc = 0.0;
        for (long dy = -1; dy <= 1; ++dy)
          for (long dx = -1; dx <= 1; ++dx)
            acc += copy.px[(y + std::size_t(dy)) * img.width + x +
                           std::size_t(dx)];
        img.px[y * img.width + x] = acc / 9.0;
      }
  }
}

/// Master texture, larger than the frame by `margin` on every side.
/// Frames are cut from it by bilinear resampling, so subpixel shifts carry
/// no accumulation error. Textures are lightly band-limited: hard one-pixel
/// edges do not survive real optics, and bilinear resampling of them is not
/// shift-invariant.
inline Image make_master(const SynthFramesConfig& cfg, std::size_t margin) {
  Image master;
  master.width = cfg.width + 2 * margin;
  master.height = cfg.height + 2 * margin;
  master.px.assign(master.width * master.height, 0.0);
  switch (cfg.texture) {
    case Texture::checkerboard: {
      for (std::size_t y = 0; y < master.height; ++y)
        for (std::size_t x = 0; x < master.width; ++x) {
          std::size_t cx = x / cfg.cell_px;
          std::size_t cy = y / cfg.cell_px;
          master.px[y * master.width + x] = ((cx + cy) % 2 == 0) ? 0.0 : 0.5;
        }
      box_blur(master, 1);
      break;
    }
    case Texture::noise: {
      Rng rng = Rng(cfg.seed).fork(100);
      for (double& v : master.px) v = rng.uniform01();
      box_blur(master, 2);
      break;
    }
    case Texture::rectangle: {
      std::size_t rx = master.width / 2 - cfg.width / 4;
      std::size_t ry = master.height / 2 - cfg.height / 4;
      std::size_t rw = cfg.width / 2;
      std::size_t rh = cfg.height / 2;
      for (std::size_t y = ry; y < ry + rh; ++y)
        for (std::size_t x = rx; x < rx + rw; ++x)
          master.px[y * master.width + x] = 1.0;
      break;
    }
  }
  return master;
}

} // namespace detail_synth

/// Deterministic frame generator with exact ground truth: global subpixel
/// translation of a master texture, plus optional jiggling blocks driving
/// binary-activity ground truth.
inline FrameSequence gen_frames(const SynthFramesConfig& cfg,
                                FramesGroundTruth* truth = nullptr) {
  validate(cfg);
  std::size_t margin =
      std::size_t(std::ceil(double(cfg.n_frames) *
                            std::max(std::abs(cfg.shift_dx),
                                     std::abs(cfg.shift_dy)))) +
      8;
  Image master = detail_synth::make_master(cfg, margin);

  FrameSequence seq;
  seq.width = cfg.width;
  seq.height = cfg.height;
  seq.frame_rate_hz = 30.0;
  seq.source_id = "synth";
  seq.frames.reserve(cfg.n_frames);

  // block offset state per frame: toggles between 0 and jiggle on active
  // intervals
  std::vector<double> block_offset(cfg.blocks.size(), 0.0);
  FramesGroundTruth gt;
  gt.block_activity.resize(cfg.blocks.size());

  for (std::size_t f = 0; f < cfg.n_frames; ++f) {
    double ox = double(margin) - double(f) * cfg.shift_dx;
    double oy = double(margin) - double(f) * cfg.shift_dy;
    Image frame;
    frame.width = cfg.width;
    frame.height = cfg.height;
    frame.px.resize(cfg.width * cfg.height);
    for (std::size_t y = 0; y < cfg.height; ++y)
      for (std::size_t x = 0; x < cfg.width; ++x)
        frame.px[y * cfg.width + x] =
            master.sample(double(x) + ox, double(y) + oy);

    if (f > 0) {
      for (std::size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
        bool active = false;
        for (auto [lo, hi] : cfg.blocks[bi].active_intervals)
          if (f - 1 >= lo && f - 1 < hi) active = true;
        if (active)
          block_offset[bi] = block_offset[bi] == 0.0
                                 ? cfg.blocks[bi].jiggle_px
                                 : 0.0;
        gt.block_activity[bi].push_back(active ? 1 : 0);
      }
    }
    for (std::size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
      const auto& b = cfg.blocks[bi];
      std::size_t bx = b.x + std::size_t(std::llround(block_offset[bi]));
      for (std::size_t y = b.y; y < b.y + b.h; ++y)
        for (std::size_t x = bx; x < bx + b.w; ++x)
          frame.px[y * cfg.width + x] = 1.0;
    }
    seq.frames.push_back(std::move(frame));
    gt.cumulative_shift.push_back(
        {double(f) * cfg.shift_dx, double(f) * cfg.shift_dy});
  }

  if (cfg.texture == Texture::rectangle) {
    double rx = double(master.width / 2 - cfg.width / 4) - double(margin);
    double ry = double(master.height / 2 - cfg.height / 4) - double(margin);
    double rw = double(cfg.width / 2);
    double rh = double(cfg.height / 2);
    gt.rectangle_corners = {{rx, ry},
                            {rx + rw - 1.0, ry},
                            {rx, ry + rh - 1.0},
                            {rx + rw - 1.0, ry + rh - 1.0}};
  }
  if (truth) *truth = std::move(gt);
  return seq;
}

/// Plain O(n^2) DFT power spectrum with the same window/pad semantics as
/// phytosig::power_spectrum, sharing no code with it.
inline std::vector<double> oracle_dft_power(const std::vector<double>& frame,
                                            std::size_t n_fft,
                                            bool apply_hann = true) {
  require(!frame.empty(), "oracle_dft_power: empty frame");
  const double pi = 3.14159265358979323846;
  std::vector<double> padded(n_fft, 0.0);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    double w = apply_hann ? 0.5 - 0.5 * std::cos(2.0 * pi * double(i) /
                                                 double(frame.size()))
                          : 1.0;
    padded[i] = frame[i] * w;
  }
  std::vector<double> power(n_fft / 2 + 1);
  for (std::size_t j = 0; j <= n_fft / 2; ++j) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n_fft; ++i) {
      double ang = 2.0 * pi * double(i) * double(j) / double(n_fft);
      re += padded[i] * std::cos(ang);
      im -= padded[i] * std::sin(ang);
    }
    power[j] = re * re + im * im;
  }
  return power;
}

/// Textbook two-pass Pearson: plain summation, no compensation, no reuse of
/// library code. The equivalence reference for phytosig::pearson.
inline double oracle_pearson(const std::vector<double>& x,
                             const std::vector<double>& y) {
  require(x.size() == y.size(), "oracle_pearson: length mismatch");
  std::size_t n = x.size();
  require(n >= 3, "oracle_pearson: need at least 3 observations");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, "oracle_pearson: degenerate input");
  return sxy / std::sqrt(sxx * syy);
}

namespace detail_synth {

inline double student_t_pdf(double x, double dof) {
  double log_norm = std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0) -
                    0.5 * std::log(dof * 3.14159265358979323846);
  return std::exp(log_norm -
                  (dof + 1.0) / 2.0 * std::log1p(x * x / dof));
}

inline double simpson(double (*f)(double, double), double dof, double a,
                      double b, double fa, double fm, double fb, double tol,
                      int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm, dof), frm = f(rm, dof);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, dof, a, m, fa, flm, fm, tol / 2.0, depth - 1) +
         simpson(f, dof, m, b, fm, frm, fb, tol / 2.0, depth - 1);
}

} // namespace detail_synth

/// Two-sided Student-t p-value by adaptive Simpson quadrature of the pdf on
/// [0, |t|]: p = 1 - 2 * integral. Pure numerics, no incomplete-beta code.
inline double oracle_t_two_sided_p(double t, double dof) {
  require(dof > 0.0, "oracle_t_two_sided_p: dof must be positive");
  double hi = std::abs(t);
  if (hi == 0.0) return 1.0;
  auto f = detail_synth::student_t_pdf;
  double integral = detail_synth::simpson(
      f, dof, 0.0, hi, f(0.0, dof), f(hi / 2.0, dof), f(hi, dof), 1e-13, 60);
  double p = 1.0 - 2.0 * integral;
  return p < 0.0 ? 0.0 : p;
}

/// Straight-line MFCC reference: same pipeline definition as phytosig::mfcc
/// but a direct O(n^2) DFT and direct-sum DCT, sharing no code with the
/// optimized path. Slow on purpose; use short frames.
inline MfccMatrix oracle_mfcc(const VoltageTrace& trace,
                              const MfccConfig& config) {
  validate(trace);
  validate(config, trace.sample_rate_hz);
  const double pi = 3.14159265358979323846;
  double rate = trace.sample_rate_hz;

  // pre-emphasis
  std::vector<double> signal = trace.samples;
  if (config.pre_emphasis > 0.0)
    for (std::size_t i = signal.size(); i-- > 1;)
      signal[i] = trace.samples[i] - config.pre_emphasis * trace.samples[i - 1];

  // framing: start of frame k at round(k * hop * rate)
  std::size_t n = signal.size();
  std::size_t flen = std::size_t(std::llround(config.frame_len_s * rate));
  require(flen >= 1 && flen <= n, "oracle_mfcc: trace shorter than one frame");
  std::vector<std::size_t> starts;
  for (std::size_t k = 0;; ++k) {
    std::size_t s = std::size_t(std::llround(double(k) * config.hop_s * rate));
    if (s + flen > n) break;
    starts.push_back(s);
  }

  std::size_t n_fft = 1;
  while (n_fft < flen) n_fft *= 2;
  std::size_t n_bins = n_fft / 2 + 1;

  // Hann window (periodic)
  std::vector<double> window(flen);
  for (std::size_t i = 0; i < flen; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * pi * double(i) / double(flen));

  // mel triangle filters, peak height 1
  auto to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto from_mel = [](double m) {
    return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
  };
  double fmax = config.fmax_hz > 0.0 ? config.fmax_hz : rate / 2.0;
  double m_lo = to_mel(config.fmin_hz), m_hi = to_mel(fmax);
  std::vector<double> edge(config.n_mels + 2);
  for (std::size_t i = 0; i < edge.size(); ++i)
    edge[i] =
        from_mel(m_lo + (m_hi - m_lo) * double(i) / double(config.n_mels + 1));
  std::vector<std::vector<double>> filters(config.n_mels,
                                           std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < config.n_mels; ++m) {
    double peak = 0.0;
    for (std::size_t j = 0; j < n_bins; ++j) {
      double f = double(j) * rate / double(n_fft);
      double w = 0.0;
      if (f > edge[m] && f < edge[m + 1])
        w = (f - edge[m]) / (edge[m + 1] - edge[m]);
      else if (f >= edge[m + 1] && f < edge[m + 2])
        w = (edge[m + 2] - f) / (edge[m + 2] - edge[m + 1]);
      filters[m][j] = w;
      peak = std::max(peak, w);
    }
    require(peak > 0.0, "oracle_mfcc: empty mel filter ", m);
    for (double& w : filters[m]) w /= peak;
  }

  // DFT twiddle table: cos/sin of 2 pi t / n_fft
  std::vector<double> cos_tab(n_fft), sin_tab(n_fft);
  for (std::size_t t = 0; t < n_fft; ++t) {
    cos_tab[t] = std::cos(2.0 * pi * double(t) / double(n_fft));
    sin_tab[t] = std::sin(2.0 * pi * double(t) / double(n_fft));
  }

  MfccMatrix out;
  out.n_frames = starts.size();
  out.n_coeffs = config.n_coeffs;
  out.config = config;
  out.config.fmax_hz = fmax;
  out.source_channel = trace.channel_id;
  out.coeffs.resize(out.n_frames * out.n_coeffs);
  out.frame_times_s.resize(out.n_frames);

  std::vector<double> frame(flen), power(n_bins), logs(config.n_mels);
  for (std::size_t fi = 0; fi < starts.size(); ++fi) {
    std::size_t s = starts[fi];
    out.frame_times_s[fi] =
        trace.t0_s + double(s) / rate + config.frame_len_s / 2.0;
    for (std::size_t i = 0; i < flen; ++i)
      frame[i] = signal[s + i] * window[i];

    for (std::size_t j = 0; j < n_bins; ++j) {
      double re = 0.0, im = 0.0;
      std::size_t t = 0; // (i * j) mod n_fft, maintained incrementally
      for (std::size_t i = 0; i < flen; ++i) {
        re += frame[i] * cos_tab[t];
        im -= frame[i] * sin_tab[t];
        t += j;
        if (t >= n_fft) t -= n_fft;
      }
      power[j] = re * re + im * im;
    }

    for (std::size_t m = 0; m < config.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t j = 0; j < n_bins; ++j) e += filters[m][j] * power[j];
      logs[m] = std::log(std::max(e, config.log_floor));
    }

    std::size_t nm = config.n_mels;
    for (std::size_t c = 0; c < config.n_coeffs; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < nm; ++i)
        acc += logs[i] * std::cos(pi * double(c) * (2.0 * double(i) + 1.0) /
                                  (2.0 * double(nm)));
      double scale = c == 0 ? std::sqrt(1.0 / double(nm))
                            : std::sqrt(2.0 / double(nm));
      out.coeffs[fi * out.n_coeffs + c] = scale * acc;
    }
  }
  return out;
}

} // namespace synth
} // namespace phytosig
