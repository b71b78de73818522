#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "phytosig/common.hpp"

namespace phytosig {

/// Grayscale intensity grid, row-major, values in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> px;

  double at(std::size_t x, std::size_t y) const { return px[y * width + x]; }
  double& at(std::size_t x, std::size_t y) { return px[y * width + x]; }

  /// Bilinear sample at a subpixel position. Coordinates outside the image
  /// clamp to the border (replication), so windowed algorithms stay defined
  /// near the edges.
  double sample(double x, double y) const {
    if (x < 0.0) x = 0.0;
    if (y < 0.0) y = 0.0;
    if (x > double(width - 1)) x = double(width - 1);
    if (y > double(height - 1)) y = double(height - 1);
    std::size_t x0 = std::size_t(x);
    std::size_t y0 = std::size_t(y);
    if (x0 >= width - 1) x0 = width - 2;
    if (y0 >= height - 1) y0 = height - 2;
    double ax = x - double(x0);
    double ay = y - double(y0);
    double top = (1.0 - ax) * at(x0, y0) + ax * at(x0 + 1, y0);
    double bot = (1.0 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1);
    return (1.0 - ay) * top + ay * bot;
  }
};

/// Ordered frames of one recording. Video decoding is out of scope; frames
/// arrive as image files listed by a manifest.
struct FrameSequence {
  std::size_t width = 0;
  std::size_t height = 0;
  double frame_rate_hz = 0.0;
  std::vector<Image> frames;
  std::string source_id;
};

inline void validate(const FrameSequence& seq) {
  require(seq.frame_rate_hz > 0.0, "FrameSequence '", seq.source_id,
          "': frame rate must be positive");
  require(seq.frames.size() >= 2, "FrameSequence '", seq.source_id,
          "': need at least 2 frames, got ", seq.frames.size());
  for (std::size_t i = 0; i < seq.frames.size(); ++i)
    require(seq.frames[i].width == seq.width &&
                seq.frames[i].height == seq.height,
            "FrameSequence '", seq.source_id, "': frame ", i,
            " has mismatched dimensions");
}

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& token) {
  token.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') { // comment to end of line
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    token.push_back(char(c));
    c = in.get();
  }
  return c;
}

} // namespace detail

/// Binary PGM (P5), maxval 255 or 65535, normalized to [0, 1].
inline Image load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_pgm: cannot open '", path, "'");
  std::string tok;
  detail::pgm_next_token(in, tok);
  require(tok == "P5", "load_pgm: '", path, "' is not binary PGM (magic '",
          tok, "')");
  auto read_number = [&](const char* what) {
    detail::pgm_next_token(in, tok);
    require(!tok.empty(), "load_pgm: '", path, "': missing ", what);
    for (char c : tok)
      require(std::isdigit(static_cast<unsigned char>(c)), "load_pgm: '",
              path, "': bad ", what, " '", tok, "'");
    return std::stoul(tok);
  };
  std::size_t width = read_number("width");
  std::size_t height = read_number("height");
  std::size_t maxval = read_number("maxval");
  require(width > 0 && height > 0, "load_pgm: '", path, "': empty image");
  require(maxval == 255 || maxval == 65535, "load_pgm: '", path,
          "': unsupported maxval ", maxval);

  Image img;
  img.width = width;
  img.height = height;
  img.px.resize(width * height);
  std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(width * height * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), long(raw.size()));
  require(std::size_t(in.gcount()) == raw.size(), "load_pgm: '", path,
          "': truncated pixel data");
  double scale = 1.0 / double(maxval);
  for (std::size_t i = 0; i < width * height; ++i) {
    std::size_t v = bytes_per == 1
                        ? raw[i]
                        : (std::size_t(raw[2 * i]) << 8) | raw[2 * i + 1];
    img.px[i] = double(v) * scale;
  }
  return img;
}

/// Writes binary PGM. maxval 65535 keeps enough depth for subpixel work.
inline void write_pgm(const Image& img, const std::string& path,
                      std::size_t maxval = 65535) {
  require(maxval == 255 || maxval == 65535,
          "write_pgm: maxval must be 255 or 65535");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "write_pgm: cannot open '", path, "'");
  out << "P5\n" << img.width << ' ' << img.height << '\n' << maxval << '\n';
  for (double v : img.px) {
    double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    std::size_t q = std::size_t(std::llround(clamped * double(maxval)));
    if (maxval == 255) {
      out.put(char(q));
    } else {
      out.put(char(q >> 8));
      out.put(char(q & 0xff));
    }
  }
  require(out.good(), "write_pgm: write to '", path, "' failed");
}

namespace detail {

inline std::uint32_t read_u32be(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

} // namespace detail

/// Grayscale PNG (color type 0, bit depth 8 or 16, non-interlaced),
/// normalized to [0, 1]. IDAT is inflated with zlib and rows are
/// unfiltered per the five standard filter types.
inline Image load_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_png: cannot open '", path, "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n',
                                       0x1a, '\n'};
  require(bytes.size() > 8 && std::equal(sig, sig + 8, bytes.begin()),
          "load_png: '", path, "' is not a PNG file");

  std::size_t width = 0, height = 0;
  int bit_depth = 0;
  bool have_header = false;
  std::vector<unsigned char> compressed;

  std::size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t len = detail::read_u32be(&bytes[pos]);
    require(pos + 12 + len <= bytes.size(), "load_png: '", path,
            "': truncated chunk");
    std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
    const unsigned char* body = &bytes[pos + 8];
    std::uint32_t expect_crc = detail::read_u32be(&bytes[pos + 8 + len]);
    std::uint32_t got_crc =
        std::uint32_t(crc32(crc32(0L, &bytes[pos + 4], 4), body, len));
    require(expect_crc == got_crc, "load_png: '", path, "': bad CRC in ",
            type, " chunk");
    if (type == "IHDR") {
      require(len == 13, "load_png: '", path, "': malformed IHDR");
      width = detail::read_u32be(body);
      height = detail::read_u32be(body + 4);
      bit_depth = body[8];
      int color_type = body[9], interlace = body[12];
      require(color_type == 0, "load_png: '", path,
              "': unsupported color type ", color_type,
              " (need grayscale 0)");
      require(bit_depth == 8 || bit_depth == 16, "load_png: '", path,
              "': unsupported bit depth ", bit_depth);
      require(interlace == 0, "load_png: '", path,
              "': interlaced PNG not supported");
      have_header = true;
    } else if (type == "IDAT") {
      compressed.insert(compressed.end(), body, body + len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  require(have_header, "load_png: '", path, "': missing IHDR");
  require(!compressed.empty(), "load_png: '", path, "': missing IDAT");
  require(width > 0 && height > 0, "load_png: '", path, "': empty image");

  std::size_t bpp = std::size_t(bit_depth) / 8;
  std::size_t stride = width * bpp;
  std::vector<unsigned char> raw((stride + 1) * height);
  uLongf raw_size = raw.size();
  int rc = uncompress(raw.data(), &raw_size, compressed.data(),
                      uLong(compressed.size()));
  require(rc == Z_OK && raw_size == raw.size(), "load_png: '", path,
          "': IDAT inflate failed");

  Image img;
  img.width = width;
  img.height = height;
  img.px.resize(width * height);
  std::vector<unsigned char> prev(stride, 0), cur(stride);
  double scale = 1.0 / double((1u << bit_depth) - 1);
  for (std::size_t y = 0; y < height; ++y) {
    const unsigned char* row = &raw[(stride + 1) * y];
    int filter = row[0];
    require(filter >= 0 && filter <= 4, "load_png: '", path,
            "': unknown filter type ", filter);
    for (std::size_t i = 0; i < stride; ++i) {
      int x = row[1 + i];
      int a = i >= bpp ? cur[i - bpp] : 0;
      int b = prev[i];
      int c = i >= bpp ? prev[i - bpp] : 0;
      switch (filter) {
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: x += detail::paeth(a, b, c); break;
        default: break;
      }
      cur[i] = static_cast<unsigned char>(x & 0xff);
    }
    for (std::size_t px = 0; px < width; ++px) {
      std::size_t v = bpp == 1 ? cur[px]
                               : (std::size_t(cur[2 * px]) << 8) |
                                     cur[2 * px + 1];
      img.px[y * width + px] = double(v) * scale;
    }
    std::swap(prev, cur);
  }
  return img;
}

/// Loads a frame by extension: .pgm or .png.
inline Image load_frame_image(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".png") return load_png(path);
  fail("load_frame_image: '", path, "': unsupported extension '", ext,
       "' (need .pgm or .png)");
}

/// Frame manifest: one frame path per line in temporal order, relative to
/// the manifest's directory. An optional header line "# fps=<real>" carries
/// the frame rate; a frame_rate_hz argument > 0 overrides it.
inline FrameSequence load_frame_manifest(const std::string& manifest_path,
                                         double frame_rate_hz = 0.0) {
  std::ifstream in(manifest_path);
  require(in.good(), "load_frame_manifest: cannot open '", manifest_path,
          "'");
  std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();
  double fps_from_file = 0.0;
  std::vector<std::string> paths;
  std::string line;
  while (std::getline(in, line)) {
    line = detail::strip_line_ending(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find("fps=");
      if (eq != std::string::npos)
        fps_from_file = std::atof(line.c_str() + eq + 4);
      continue;
    }
    paths.push_back((base / line).string());
  }
  require(!paths.empty(), "load_frame_manifest: '", manifest_path,
          "' lists no frames");

  FrameSequence seq;
  seq.source_id = manifest_path;
  seq.frame_rate_hz = frame_rate_hz > 0.0 ? frame_rate_hz : fps_from_file;
  require(seq.frame_rate_hz > 0.0, "load_frame_manifest: '", manifest_path,
          "': no frame rate (pass one or add a '# fps=<real>' header)");
  seq.frames.reserve(paths.size());
  for (const auto& p : paths) seq.frames.push_back(load_frame_image(p));
  seq.width = seq.frames.front().width;
  seq.height = seq.frames.front().height;
  validate(seq);
  return seq;
}

} // namespace phytosig
