#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "phytosig/common.hpp"
#include "phytosig/image.hpp"
#include "phytosig/trace.hpp"

namespace phytosig {

/// Static region next to a dancer's hand. Boxes are fixed per recording;
/// continuous hand tracking is deliberately not attempted.
struct BoundingBox {
  std::string label; // "left_hand" | "right_hand" | custom
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;
};

inline void validate(const BoundingBox& box, std::size_t frame_w,
                     std::size_t frame_h) {
  require(box.w > 0 && box.h > 0, "BoundingBox '", box.label,
          "': extents must be positive");
  require(box.x + box.w <= frame_w && box.y + box.h <= frame_h,
          "BoundingBox '", box.label, "' (", box.x, ",", box.y, " ", box.w,
          "x", box.h, ") lies outside the ", frame_w, "x", frame_h, " frame");
}

struct BinarizePolicy {
  double pixel_delta_min = 0.02; // per-pixel change that counts as movement
  enum class Mode { fixed, adaptive } mode = Mode::adaptive;
  double fixed_threshold = 0.0;  // used in fixed mode
  double adaptive_k = 3.0;       // threshold = median + k * MAD
  std::size_t min_run_frames = 2;
};

inline void validate(const BinarizePolicy& p) {
  require(p.pixel_delta_min > 0.0 && p.pixel_delta_min <= 1.0,
          "BinarizePolicy: pixel_delta_min must be in (0, 1]");
  require(p.adaptive_k >= 0.0, "BinarizePolicy: adaptive k must be >= 0");
}

/// Fraction of box pixels whose intensity changed by more than
/// pixel_delta_min between consecutive frames. One value per frame
/// interval, on the frame clock.
inline RealSeries box_energy(const FrameSequence& frames,
                             const BoundingBox& box,
                             double pixel_delta_min = 0.02) {
  validate(frames);
  validate(box, frames.width, frames.height);
  require(pixel_delta_min > 0.0, "box_energy: pixel_delta_min must be positive");

  RealSeries out;
  out.label = box.label;
  out.grid = TimeGrid{0.0, 1.0 / frames.frame_rate_hz,
                      frames.frames.size() - 1};
  out.values.resize(out.grid.n);
  double area = double(box.w) * double(box.h);
  for (std::size_t k = 0; k + 1 < frames.frames.size(); ++k) {
    const Image& a = frames.frames[k];
    const Image& b = frames.frames[k + 1];
    std::size_t changed = 0;
    for (std::size_t y = box.y; y < box.y + box.h; ++y)
      for (std::size_t x = box.x; x < box.x + box.w; ++x)
        if (std::abs(b.at(x, y) - a.at(x, y)) > pixel_delta_min) ++changed;
    out.values[k] = double(changed) / area;
  }
  return out;
}

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace detail

/// Thresholds an energy series into 0/1 activity. Adaptive mode uses
/// median + k * MAD, which rides out lighting drift; an all-zero energy
/// series stays all zeros rather than erroring. Runs of 1s shorter than
/// min_run_frames are flipped back to 0 (single-frame flicker is not a
/// dance).
inline BinarySeries binarize(const RealSeries& energy,
                             const BinarizePolicy& policy) {
  validate(energy);
  validate(policy);
  require(!energy.values.empty(), "binarize: empty energy series");

  double threshold;
  if (policy.mode == BinarizePolicy::Mode::fixed) {
    threshold = policy.fixed_threshold;
  } else {
    double med = detail::median_of(energy.values);
    std::vector<double> dev(energy.values.size());
    for (std::size_t i = 0; i < dev.size(); ++i)
      dev[i] = std::abs(energy.values[i] - med);
    threshold = med + policy.adaptive_k * detail::median_of(std::move(dev));
  }

  BinarySeries out;
  out.grid = energy.grid;
  out.label = energy.label;
  out.values.resize(energy.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = energy.values[i] > threshold ? 1 : 0;

  // debounce: drop 1-runs shorter than min_run_frames
  if (policy.min_run_frames > 1) {
    std::size_t i = 0;
    while (i < out.values.size()) {
      if (out.values[i] == 0) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < out.values.size() && out.values[j] == 1) ++j;
      if (j - i < policy.min_run_frames)
        std::fill(out.values.begin() + long(i), out.values.begin() + long(j),
                  std::uint8_t(0));
      i = j;
    }
  }
  return out;
}

/// Box specification file: one "label x y w h" line per box (pixels),
/// '#' comments allowed.
inline std::vector<BoundingBox> load_boxes(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_boxes: cannot open '", path, "'");
  std::vector<BoundingBox> boxes;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = detail::strip_line_ending(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    BoundingBox box;
    long x = -1, y = -1, w = -1, h = -1;
    iss >> box.label >> x >> y >> w >> h;
    require(!iss.fail() && x >= 0 && y >= 0 && w > 0 && h > 0, "load_boxes: '",
            path, "' row ", row, ": expected 'label x y w h', got '", line,
            "'");
    box.x = std::size_t(x);
    box.y = std::size_t(y);
    box.w = std::size_t(w);
    box.h = std::size_t(h);
    boxes.push_back(box);
  }
  require(!boxes.empty(), "load_boxes: '", path, "' defines no boxes");
  return boxes;
}

} // namespace phytosig
