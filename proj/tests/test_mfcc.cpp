#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "phytosig/mfcc.hpp"
#include "phytosig/rng.hpp"
#include "phytosig/synth.hpp"

using namespace phytosig;
using Catch::Approx;

namespace {

VoltageTrace noise_trace(double duration_s, double rate, std::uint64_t seed,
                         double sd = 1.0) {
  Rng rng(seed);
  VoltageTrace t;
  t.channel_id = "noise";
  t.sample_rate_hz = rate;
  std::size_t n = std::size_t(duration_s * rate);
  for (std::size_t i = 0; i < n; ++i) t.samples.push_back(rng.gaussian(0, sd));
  return t;
}

} // namespace

TEST_CASE("frame_signal counts and boundaries") {
  SECTION("90 s trace, 21 s frames, 21 s hop: 4 frames") {
    VoltageTrace t = noise_trace(90.0, 100.0, 1);
    FrameSet set = frame_signal(t, 21.0, 21.0);
    REQUIRE(set.frames.size() == 4);
  }
  SECTION("1.0 s trace at 10 Hz, 1.0 s frame: exactly one frame of 10") {
    VoltageTrace t = noise_trace(1.0, 10.0, 2);
    FrameSet set = frame_signal(t, 1.0, 1.0);
    REQUIRE(set.frames.size() == 1);
    REQUIRE(set.frames[0].size() == 10);
    REQUIRE(set.frame_times_s[0] == Approx(0.5));
  }
  SECTION("10 s trace, 1 s frame, 0.5 s hop: 19 frames") {
    VoltageTrace t = noise_trace(10.0, 100.0, 3);
    FrameSet set = frame_signal(t, 1.0, 0.5);
    REQUIRE(set.frames.size() == 19);
  }
  SECTION("trace shorter than one frame is an error") {
    VoltageTrace t = noise_trace(0.5, 100.0, 4);
    REQUIRE_THROWS_AS(frame_signal(t, 1.0, 0.5), Error);
  }
}

TEST_CASE("power_spectrum basics and DFT oracle equivalence") {
  SECTION("all-zero frame gives an all-zero spectrum") {
    std::vector<double> frame(100, 0.0);
    auto power = power_spectrum(frame, 128);
    for (double p : power) REQUIRE(p == 0.0);
  }
  SECTION("exact-bin sine, window off: >99% energy in that bin") {
    std::size_t n = 256; // frame length equal to n_fft
    std::size_t bin = 19;
    std::vector<double> frame(n);
    for (std::size_t i = 0; i < n; ++i)
      frame[i] = std::sin(2.0 * 3.14159265358979323846 * double(bin) *
                          double(i) / double(n));
    auto power = power_spectrum(frame, n, /*apply_hann=*/false);
    double total = 0.0;
    for (double p : power) total += p;
    REQUIRE(power[bin] / total > 0.99);
  }
  SECTION("random frame matches the naive DFT oracle within 1e-9 relative") {
    Rng rng(11);
    std::vector<double> frame(300);
    for (double& v : frame) v = rng.uniform(-1.0, 1.0);
    auto fast = power_spectrum(frame, 512);
    auto slow = synth::oracle_dft_power(frame, 512);
    REQUIRE(fast.size() == slow.size());
    double scale = 0.0;
    for (double p : slow) scale = std::max(scale, p);
    for (std::size_t j = 0; j < fast.size(); ++j)
      REQUIRE(std::abs(fast[j] - slow[j]) <= 1e-9 * scale);
  }
  SECTION("Parseval: bin energies equal windowed-frame energy") {
    Rng rng(12);
    std::vector<double> frame(700);
    for (double& v : frame) v = rng.gaussian(0, 1);
    std::size_t n_fft = 1024;
    auto power = power_spectrum(frame, n_fft);

    auto window = hann_window(frame.size());
    double signal_energy = 0.0;
    for (std::size_t i = 0; i < frame.size(); ++i) {
      double w = frame[i] * window[i];
      signal_energy += w * w;
    }
    // full-spectrum sum from the half spectrum: interior bins count twice
    double spectral = power.front() + power.back();
    for (std::size_t j = 1; j + 1 < power.size(); ++j) spectral += 2.0 * power[j];
    spectral /= double(n_fft);
    REQUIRE(spectral == Approx(signal_energy).epsilon(1e-9));
  }
}

TEST_CASE("mel scale and filterbank construction") {
  REQUIRE(hz_to_mel(0.0) == 0.0);
  // direct evaluation of 2595 log10(1 + 1000/700)
  REQUIRE(hz_to_mel(1000.0) ==
          Approx(2595.0 * std::log10(1.0 + 1000.0 / 700.0)).epsilon(1e-12));
  REQUIRE(hz_to_mel(1000.0) == Approx(1000.0).margin(0.5));

  SECTION("every row has a positive weight and peak exactly 1") {
    auto bank = mel_filterbank(26, 1024, 10000.0, 0.0, 5000.0);
    std::size_t n_bins = 513;
    for (std::size_t m = 0; m < 26; ++m) {
      double peak = 0.0;
      for (std::size_t j = 0; j < n_bins; ++j)
        peak = std::max(peak, bank[m * n_bins + j]);
      REQUIRE(peak == 1.0);
    }
  }
  SECTION("filter too narrow for the FFT resolution names the filter") {
    // 256-point FFT at 10 kHz: ~39 Hz per bin; 80 filters squeeze below it
    REQUIRE_THROWS_WITH(mel_filterbank(80, 256, 10000.0, 0.0, 5000.0),
                        Catch::Matchers::ContainsSubstring("filter"));
  }
}

TEST_CASE("dct_ii orthonormal transform") {
  SECTION("constant vector concentrates in c0") {
    auto out = dct_ii({1.0, 1.0, 1.0, 1.0});
    REQUIRE(out[0] == Approx(2.0).epsilon(1e-15));
    for (std::size_t k = 1; k < 4; ++k)
      REQUIRE(out[k] == Approx(0.0).margin(1e-15));
  }
  SECTION("zeros map to zeros") {
    auto out = dct_ii(std::vector<double>(8, 0.0));
    for (double v : out) REQUIRE(v == 0.0);
  }
  SECTION("random length-16 vector matches direct-sum oracle within 1e-10") {
    Rng rng(13);
    std::vector<double> v(16);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    auto fast = dct_ii(v);
    // direct-sum oracle, written out locally
    const double pi = 3.14159265358979323846;
    for (std::size_t k = 0; k < 16; ++k) {
      double acc = 0.0;
      for (std::size_t n = 0; n < 16; ++n)
        acc += v[n] * std::cos(pi * double(k) * (2.0 * double(n) + 1.0) / 32.0);
      double expected = (k == 0 ? std::sqrt(1.0 / 16.0)
                                : std::sqrt(2.0 / 16.0)) * acc;
      REQUIRE(fast[k] == Approx(expected).margin(1e-10));
    }
  }
}

TEST_CASE("mfcc pipeline") {
  MfccConfig small;
  small.frame_len_s = 0.1;
  small.hop_s = 0.05;

  SECTION("zero trace: every row is the DCT of the constant floor vector") {
    VoltageTrace t;
    t.channel_id = "zero";
    t.sample_rate_hz = 1000.0;
    t.samples.assign(1000, 0.0);
    MfccMatrix m = mfcc(t, small);
    REQUIRE(m.n_frames > 1);
    std::vector<double> expected =
        dct_ii(std::vector<double>(small.n_mels, std::log(small.log_floor)));
    for (std::size_t f = 0; f < m.n_frames; ++f)
      for (std::size_t c = 0; c < m.n_coeffs; ++c)
        REQUIRE(m.at(f, c) == Approx(expected[c]).margin(1e-12));
  }
  SECTION("rows carry exactly 20 coefficients") {
    VoltageTrace t = noise_trace(2.0, 1000.0, 21);
    MfccMatrix m = mfcc(t, small);
    REQUIRE(m.n_coeffs == 20);
    REQUIRE(m.coeffs.size() == m.n_frames * 20);
  }
  SECTION("white noise matches the straight-line oracle within 1e-9") {
    VoltageTrace t = noise_trace(3.0, 1000.0, 22);
    MfccMatrix fast = mfcc(t, small);
    MfccMatrix slow = synth::oracle_mfcc(t, small);
    REQUIRE(fast.n_frames == slow.n_frames);
    for (std::size_t f = 0; f < fast.n_frames; ++f)
      for (std::size_t c = 0; c < fast.n_coeffs; ++c) {
        double a = fast.at(f, c), b = slow.at(f, c);
        REQUIRE(std::abs(a - b) <=
                std::max(1e-9 * std::max(std::abs(a), std::abs(b)), 1e-12));
      }
  }
}

TEST_CASE("mfcc properties") {
  MfccConfig cfg;
  cfg.frame_len_s = 0.2;
  cfg.hop_s = 0.1;

  SECTION("determinism across runs and thread counts") {
    VoltageTrace t = noise_trace(4.0, 2000.0, 31);
    set_max_threads(1);
    MfccMatrix serial = mfcc(t, cfg);
    set_max_threads(8);
    MfccMatrix parallel = mfcc(t, cfg);
    set_max_threads(0);
    MfccMatrix again = mfcc(t, cfg);
    REQUIRE(serial.coeffs == parallel.coeffs);
    REQUIRE(serial.coeffs == again.coeffs);
  }

  SECTION("input scaling moves only coefficient 0") {
    VoltageTrace t = noise_trace(3.0, 2000.0, 32);
    VoltageTrace scaled = t;
    for (double& s : scaled.samples) s *= 4.0;
    MfccMatrix a = mfcc(t, cfg);
    MfccMatrix b = mfcc(scaled, cfg);
    for (std::size_t f = 0; f < a.n_frames; ++f) {
      REQUIRE(std::abs(a.at(f, 0) - b.at(f, 0)) > 1e-3); // c0 does move
      for (std::size_t c = 1; c < a.n_coeffs; ++c)
        REQUIRE(std::abs(a.at(f, c) - b.at(f, c)) <=
                1e-6 * std::max(1.0, std::abs(a.at(f, c))));
    }
  }

  SECTION("shift by an exact hop multiple shifts rows") {
    VoltageTrace t = noise_trace(5.0, 2000.0, 33);
    std::size_t hop_samples = std::size_t(cfg.hop_s * t.sample_rate_hz);
    VoltageTrace shifted = t;
    shifted.samples.assign(t.samples.begin() + long(hop_samples),
                           t.samples.end());
    MfccMatrix a = mfcc(t, cfg);
    MfccMatrix b = mfcc(shifted, cfg);
    REQUIRE(b.n_frames >= a.n_frames - 1);
    // row f of the shifted trace equals row f+1 of the original; row 0 is
    // skipped because pre-emphasis sees a different first sample
    for (std::size_t f = 1; f + 1 < a.n_frames && f < b.n_frames; ++f)
      for (std::size_t c = 0; c < a.n_coeffs; ++c)
        REQUIRE(b.at(f, c) == Approx(a.at(f + 1, c)).margin(1e-9));
  }
}
