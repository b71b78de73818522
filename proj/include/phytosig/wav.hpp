#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "phytosig/common.hpp"
#include "phytosig/trace.hpp"

namespace phytosig {
namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

inline void write_u32le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u16le(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

} // namespace detail

/// Loads a RIFF/WAVE file. Only mono 16-bit integer PCM is accepted;
/// anything else is an error reporting what was found, never a silent
/// conversion. Samples are scaled to [-1, 1) by dividing by 32768.
inline VoltageTrace load_voltage_wav(const std::string& path,
                                     const std::string& channel_id) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_voltage_wav: cannot open '", path, "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  require(bytes.size() >= 12, "load_voltage_wav: '", path,
          "' is too short to be a WAV file");
  require(std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          "load_voltage_wav: '", path, "' is not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t chunk_size = detail::read_u32le(hdr + 4);
    std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size())
      chunk_size = std::uint32_t(bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      require(chunk_size >= 16, "load_voltage_wav: '", path,
              "': fmt chunk truncated");
      const unsigned char* f = bytes.data() + body;
      format_tag = detail::read_u16le(f);
      channels = detail::read_u16le(f + 2);
      rate = detail::read_u32le(f + 4);
      bits = detail::read_u16le(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1); // chunks are word-aligned
  }

  require(have_fmt, "load_voltage_wav: '", path, "' has no fmt chunk");
  require(format_tag == 1, "load_voltage_wav: '", path,
          "': unsupported format tag ", format_tag, " (need PCM = 1)");
  require(channels == 1, "load_voltage_wav: '", path,
          "': unsupported channel count ", channels);
  require(bits == 16, "load_voltage_wav: '", path,
          "': unsupported bit depth ", bits);
  require(rate > 0, "load_voltage_wav: '", path, "': zero sample rate");
  require(data != nullptr && data_size >= 2, "load_voltage_wav: '", path,
          "' has no sample data");

  VoltageTrace trace;
  trace.channel_id = channel_id;
  trace.sample_rate_hz = double(rate);
  trace.unit = "normalized";
  std::size_t count = data_size / 2;
  trace.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::int16_t v = std::int16_t(detail::read_u16le(data + 2 * i));
    trace.samples[i] = double(v) / 32768.0;
  }
  return trace;
}

/// Writes mono 16-bit PCM. Samples are quantized with round-to-nearest and
/// clamped to the int16 range, so a write/load round trip stays within
/// 1/32768 per sample.
inline void write_voltage_wav(const VoltageTrace& trace,
                              const std::string& path) {
  validate(trace);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "write_voltage_wav: cannot open '", path, "'");
  std::uint32_t rate = std::uint32_t(trace.sample_rate_hz + 0.5);
  require(rate > 0 && std::abs(double(rate) - trace.sample_rate_hz) < 0.5,
          "write_voltage_wav: sample rate ", trace.sample_rate_hz,
          " is not an integer; WAV headers carry integer rates");
  std::uint32_t data_size = std::uint32_t(trace.samples.size() * 2);

  out.write("RIFF", 4);
  detail::write_u32le(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_u32le(out, 16);
  detail::write_u16le(out, 1);  // PCM
  detail::write_u16le(out, 1);  // mono
  detail::write_u32le(out, rate);
  detail::write_u32le(out, rate * 2); // byte rate
  detail::write_u16le(out, 2);  // block align
  detail::write_u16le(out, 16); // bits
  out.write("data", 4);
  detail::write_u32le(out, data_size);
  for (double s : trace.samples) {
    long q = std::lround(s * 32768.0);
    if (q < -32768) q = -32768;
    if (q > 32767) q = 32767;
    detail::write_u16le(out, std::uint16_t(std::int16_t(q)));
  }
  require(out.good(), "write_voltage_wav: write to '", path, "' failed");
}

} // namespace phytosig
