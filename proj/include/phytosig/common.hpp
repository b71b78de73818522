#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace phytosig {

/// Error type thrown by every operation in the library on bad input or
/// bad data. The message carries the file/row/field context where known.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Parts>
std::string concat(Parts&&... parts) {
  std::ostringstream oss;
  (oss << ... << parts);
  return oss.str();
}

/// Parses a complete token as a double; trailing whitespace/CR allowed.
inline bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

inline std::string strip_line_ending(std::string line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
    line.pop_back();
  return line;
}

} // namespace detail

template <typename... Parts>
[[noreturn]] void fail(Parts&&... parts) {
  throw Error(detail::concat(std::forward<Parts>(parts)...));
}

template <typename... Parts>
void require(bool cond, Parts&&... parts) {
  if (!cond) fail(std::forward<Parts>(parts)...);
}

/// Formats a double with 12 significant digits, the precision used by every
/// CSV writer in the toolkit. Round-trips through text within 1 ulp at this
/// precision.
inline std::string format_g12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// Half-up rounding at `decimals` places: ties go toward +infinity,
/// so -0.10515 at 4 decimals renders as -0.1051.
inline double round_half_up(double v, int decimals) {
  double f = std::pow(10.0, decimals);
  return std::floor(v * f + 0.5) / f;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, round_half_up(v, decimals));
  return buf;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Write-temp-then-rename so readers never observe a half-written file.
inline void write_file_atomic(const std::string& path,
                              const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out.good()) fail("cannot open '", tmp, "' for writing");
    out << content;
    if (!out.good()) fail("write to '", tmp, "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail("cannot rename '", tmp, "' to '", path, "': ", ec.message());
}

namespace detail {

inline std::atomic<unsigned>& max_threads_slot() {
  static std::atomic<unsigned> slot{0}; // 0 = hardware concurrency
  return slot;
}

} // namespace detail

/// Caps the worker count used by parallel loops. 0 restores the hardware
/// default. Thread count never changes results: parallel loops write
/// disjoint, preallocated slots, so output is bit-identical to sequential.
inline void set_max_threads(unsigned n) { detail::max_threads_slot().store(n); }

inline unsigned max_threads() {
  unsigned n = detail::max_threads_slot().load();
  if (n == 0) n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

namespace detail {

/// Runs body(i) for i in [0, n), split into contiguous chunks across
/// threads. body must only touch state owned by index i.
template <typename Body>
void parallel_for(std::size_t n, const Body& body) {
  unsigned workers = max_threads();
  if (n < 2 || workers < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  if (workers > n) workers = static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace detail

} // namespace phytosig
