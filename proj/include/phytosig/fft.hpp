#pragma once

#include <complex>
#include <vector>

#include "phytosig/common.hpp"

namespace phytosig {

inline bool is_power_of_two(std::size_t n) { return n && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place iterative radix-2 FFT (decimation in time). Strictly sequential
/// with a fixed butterfly order, so results are bit-identical across runs.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  std::size_t n = a.size();
  require(is_power_of_two(n), "fft: length ", n, " is not a power of two");
  if (n < 2) return;

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -two_pi / double(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

/// Forward FFT of a real signal zero-padded to n_fft.
inline std::vector<std::complex<double>> fft_real(
    const std::vector<double>& signal, std::size_t n_fft) {
  require(signal.size() <= n_fft, "fft_real: signal longer than n_fft");
  std::vector<std::complex<double>> a(n_fft, {0.0, 0.0});
  for (std::size_t i = 0; i < signal.size(); ++i) a[i] = {signal[i], 0.0};
  fft_inplace(a);
  return a;
}

} // namespace phytosig
