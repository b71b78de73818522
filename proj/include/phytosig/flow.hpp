#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "phytosig/common.hpp"
#include "phytosig/image.hpp"
#include "phytosig/trace.hpp"

namespace phytosig {

struct CornerParams {
  std::size_t max_corners = 100;
  double quality_level = 0.01; // relative to the strongest response
  double min_distance_px = 8.0;
  std::size_t block_size_px = 3; // odd
};

inline void validate(const CornerParams& p) {
  require(p.max_corners >= 1, "CornerParams: max_corners must be >= 1");
  require(p.quality_level > 0.0 && p.quality_level <= 1.0,
          "CornerParams: quality_level must be in (0, 1]");
  require(p.min_distance_px >= 0.0,
          "CornerParams: min_distance_px must be >= 0");
  require(p.block_size_px >= 1 && p.block_size_px % 2 == 1,
          "CornerParams: block_size_px must be odd, got ", p.block_size_px);
}

struct FlowParams {
  std::size_t window_px = 15; // odd
  std::size_t pyramid_levels = 3;
  std::size_t max_iterations = 30;
  double epsilon_px = 0.01;
  double max_error = 0.05; // RMS photometric residual on [0,1] intensities
};

inline void validate(const FlowParams& p) {
  require(p.window_px >= 3 && p.window_px % 2 == 1,
          "FlowParams: window_px must be odd and >= 3, got ", p.window_px);
  require(p.pyramid_levels >= 1, "FlowParams: pyramid_levels must be >= 1");
  require(p.max_iterations >= 1, "FlowParams: max_iterations must be >= 1");
  require(p.epsilon_px > 0.0, "FlowParams: epsilon_px must be positive");
  require(p.max_error > 0.0, "FlowParams: max_error must be positive");
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Positions of the frame-0 corner set across frames. Once a point is lost
/// it stays lost; positions are meaningful only where tracked is true.
struct PointTrack {
  std::size_t n_frames = 0;
  std::size_t n_points = 0;
  std::vector<Point2> positions;       // n_frames * n_points
  std::vector<std::uint8_t> tracked;   // same shape

  const Point2& at(std::size_t frame, std::size_t point) const {
    return positions[frame * n_points + point];
  }
  bool is_tracked(std::size_t frame, std::size_t point) const {
    return tracked[frame * n_points + point] != 0;
  }
};

/// Per-frame-interval vertical displacement of the plant, pixels,
/// image-down positive (leaf lift is negative). Intervals with no tracked
/// point are gaps, not zeros, and are skipped downstream.
struct MovementTrace {
  TimeGrid grid; // dt = 1 / frame_rate, value k covers frames k -> k+1
  std::vector<double> dy_px;
  std::vector<std::size_t> n_contributing;

  bool is_gap(std::size_t k) const { return n_contributing[k] == 0; }
};

namespace detail {

/// 3x3 Sobel responses; the one-pixel border keeps zero gradients.
inline void sobel(const Image& img, std::vector<double>& gx,
                  std::vector<double>& gy) {
  std::size_t w = img.width, h = img.height;
  gx.assign(w * h, 0.0);
  gy.assign(w * h, 0.0);
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      double tl = img.at(x - 1, y - 1), tc = img.at(x, y - 1),
             tr = img.at(x + 1, y - 1);
      double ml = img.at(x - 1, y), mr = img.at(x + 1, y);
      double bl = img.at(x - 1, y + 1), bc = img.at(x, y + 1),
             br = img.at(x + 1, y + 1);
      gx[y * w + x] = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      gy[y * w + x] = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
    }
  }
}

inline double min_eigenvalue(double a, double b, double c) {
  // of the symmetric matrix [a b; b c]
  double half_trace = 0.5 * (a + c);
  double det_part = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  return half_trace - det_part;
}

} // namespace detail

/// Shi-Tomasi corners: minimum eigenvalue of the Sobel structure tensor
/// summed over block_size windows, relative quality threshold, greedy
/// non-maximum suppression by min_distance, strongest max_corners returned
/// in descending score order (ties by y then x).
inline std::vector<Point2> shi_tomasi(const Image& frame,
                                      const CornerParams& params) {
  validate(params);
  std::size_t w = frame.width, h = frame.height;
  require(w >= params.block_size_px + 2 && h >= params.block_size_px + 2,
          "shi_tomasi: frame ", w, "x", h, " too small for block size ",
          params.block_size_px);

  std::vector<double> gx, gy;
  detail::sobel(frame, gx, gy);

  std::size_t r = params.block_size_px / 2;
  std::vector<double> score(w * h, 0.0);
  std::size_t margin = r + 1; // block window must stay inside the gradient field
  for (std::size_t y = margin; y + margin < h; ++y) {
    for (std::size_t x = margin; x + margin < w; ++x) {
      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      for (std::size_t by = y - r; by <= y + r; ++by)
        for (std::size_t bx = x - r; bx <= x + r; ++bx) {
          double ix = gx[by * w + bx];
          double iy = gy[by * w + bx];
          sxx += ix * ix;
          sxy += ix * iy;
          syy += iy * iy;
        }
      score[y * w + x] = detail::min_eigenvalue(sxx, sxy, syy);
    }
  }

  double max_score = 0.0;
  for (double s : score) max_score = std::max(max_score, s);
  if (max_score <= 0.0) return {};
  double threshold = params.quality_level * max_score;

  // candidates: 3x3 local maxima above threshold; on plateaus the first
  // point in (y, x) scan order wins
  struct Candidate {
    double s;
    std::size_t x, y;
  };
  std::vector<Candidate> candidates;
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      double s = score[y * w + x];
      if (s < threshold) continue;
      bool is_max = true;
      for (std::size_t ny = y - 1; ny <= y + 1 && is_max; ++ny)
        for (std::size_t nx = x - 1; nx <= x + 1; ++nx) {
          if (nx == x && ny == y) continue;
          double ns = score[ny * w + nx];
          if (ns > s || (ns == s && (ny < y || (ny == y && nx < x)))) {
            is_max = false;
            break;
          }
        }
      if (is_max) candidates.push_back({s, x, y});
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.s != b.s) return a.s > b.s;
              if (a.y != b.y) return a.y < b.y;
              return a.x < b.x;
            });

  std::vector<Point2> corners;
  double min_dist2 = params.min_distance_px * params.min_distance_px;
  for (const auto& c : candidates) {
    bool keep = true;
    for (const auto& p : corners) {
      double dx = double(c.x) - p.x;
      double dy = double(c.y) - p.y;
      if (dx * dx + dy * dy < min_dist2) {
        keep = false;
        break;
      }
    }
    if (keep) {
      corners.push_back({double(c.x), double(c.y)});
      if (corners.size() == params.max_corners) break;
    }
  }
  return corners;
}

namespace detail {

/// Half-resolution downsample: 5-tap binomial blur then decimation,
/// replicated borders.
inline Image pyr_down(const Image& src) {
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16,
                              1.0 / 16};
  std::size_t w = src.width, h = src.height;
  Image tmp;
  tmp.width = w;
  tmp.height = h;
  tmp.px.resize(w * h);
  auto clamp = [](long v, long hi) {
    return std::size_t(v < 0 ? 0 : (v > hi ? hi : v));
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i)
        acc += k[i + 2] * src.px[y * w + clamp(long(x) + i, long(w) - 1)];
      tmp.px[y * w + x] = acc;
    }
  Image dst;
  dst.width = (w + 1) / 2;
  dst.height = (h + 1) / 2;
  dst.px.resize(dst.width * dst.height);
  for (std::size_t y = 0; y < dst.height; ++y)
    for (std::size_t x = 0; x < dst.width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i)
        acc += k[i + 2] *
               tmp.px[clamp(long(2 * y) + i, long(h) - 1) * w + 2 * x];
      dst.px[y * dst.width + x] = acc;
    }
  return dst;
}

inline std::vector<Image> build_pyramid(const Image& img,
                                        std::size_t levels) {
  std::vector<Image> pyr;
  pyr.push_back(img);
  for (std::size_t l = 1; l < levels; ++l) {
    const Image& prev = pyr.back();
    if (prev.width < 8 || prev.height < 8) break;
    pyr.push_back(pyr_down(prev));
  }
  return pyr;
}

/// Central-difference intensity derivatives at a subpixel position.
inline void sample_derivatives(const Image& img, double x, double y,
                               double& ix, double& iy) {
  ix = 0.5 * (img.sample(x + 1.0, y) - img.sample(x - 1.0, y));
  iy = 0.5 * (img.sample(x, y + 1.0) - img.sample(x, y - 1.0));
}

/// Window samples clamp at the border, so a point stays usable as long as
/// its center is inside the frame.
inline bool center_inside(const Image& img, double cx, double cy) {
  return cx >= 0.0 && cy >= 0.0 && cx <= double(img.width) - 1.0 &&
         cy <= double(img.height) - 1.0;
}

} // namespace detail

struct FlowStatus {
  Point2 position;
  bool tracked = false;
};

/// Pyramidal Lucas-Kanade: coarse-to-fine iterative least-squares flow over
/// a square window with bilinear subpixel sampling. A point is lost when its
/// window leaves the frame, the normal matrix turns near-singular (smaller
/// eigenvalue < 1e-6), or the final RMS photometric residual exceeds
/// max_error.
inline std::vector<FlowStatus> lucas_kanade(const Image& prev,
                                            const Image& next,
                                            const std::vector<Point2>& points,
                                            const FlowParams& params) {
  validate(params);
  require(prev.width == next.width && prev.height == next.height,
          "lucas_kanade: frame dimensions differ (", prev.width, "x",
          prev.height, " vs ", next.width, "x", next.height, ")");

  auto prev_pyr = detail::build_pyramid(prev, params.pyramid_levels);
  auto next_pyr = detail::build_pyramid(next, params.pyramid_levels);
  std::size_t levels = std::min(prev_pyr.size(), next_pyr.size());
  long radius = long(params.window_px / 2);

  std::vector<FlowStatus> out(points.size());
  detail::parallel_for(points.size(), [&](std::size_t pi) {
    const Point2& p0 = points[pi];
    require(p0.x >= 0 && p0.y >= 0 && p0.x <= double(prev.width - 1) &&
                p0.y <= double(prev.height - 1),
            "lucas_kanade: point ", pi, " outside frame bounds");
    double gx = 0.0, gy = 0.0; // flow guess carried across levels
    bool ok = true;
    for (std::size_t li = levels; li-- > 0 && ok;) {
      const Image& a = prev_pyr[li];
      const Image& b = next_pyr[li];
      double scale = std::pow(0.5, double(li));
      double px = p0.x * scale;
      double py = p0.y * scale;
      bool finest = li == 0;
      // a coarse level whose window does not fit is skipped; it only
      // accelerates convergence. At full resolution it means the point
      // left the frame.
      auto skip_level = [&] {
        if (finest) {
          ok = false;
        } else {
          gx *= 2.0;
          gy *= 2.0;
        }
      };
      if (!detail::center_inside(a, px, py)) {
        skip_level();
        continue;
      }

      // spatial gradient matrix of the source window
      std::vector<double> ix((2 * radius + 1) * (2 * radius + 1));
      std::vector<double> iy(ix.size());
      std::vector<double> ival(ix.size());
      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      std::size_t idx = 0;
      for (long wy = -radius; wy <= radius; ++wy)
        for (long wx = -radius; wx <= radius; ++wx, ++idx) {
          double sx = px + double(wx);
          double sy = py + double(wy);
          detail::sample_derivatives(a, sx, sy, ix[idx], iy[idx]);
          ival[idx] = a.sample(sx, sy);
          sxx += ix[idx] * ix[idx];
          sxy += ix[idx] * iy[idx];
          syy += iy[idx] * iy[idx];
        }
      if (detail::min_eigenvalue(sxx, sxy, syy) < 1e-6) {
        skip_level();
        continue;
      }
      double det = sxx * syy - sxy * sxy;

      double vx = 0.0, vy = 0.0;
      bool level_ok = true;
      for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
        double tx = px + gx + vx;
        double ty = py + gy + vy;
        if (!detail::center_inside(b, tx, ty)) {
          level_ok = false;
          break;
        }
        double bx = 0.0, by = 0.0;
        idx = 0;
        for (long wy = -radius; wy <= radius; ++wy)
          for (long wx = -radius; wx <= radius; ++wx, ++idx) {
            double diff = ival[idx] -
                          b.sample(tx + double(wx), ty + double(wy));
            bx += diff * ix[idx];
            by += diff * iy[idx];
          }
        double dx = (syy * bx - sxy * by) / det;
        double dy = (sxx * by - sxy * bx) / det;
        vx += dx;
        vy += dy;
        if (std::sqrt(dx * dx + dy * dy) < params.epsilon_px) break;
      }
      if (!level_ok) {
        skip_level();
        continue;
      }

      if (finest) {
        gx += vx;
        gy += vy;
        // final photometric check at full resolution
        double tx = px + gx;
        double ty = py + gy;
        if (!detail::center_inside(b, tx, ty)) {
          ok = false;
          break;
        }
        double sum2 = 0.0;
        idx = 0;
        for (long wy = -radius; wy <= radius; ++wy)
          for (long wx = -radius; wx <= radius; ++wx, ++idx) {
            double diff = ival[idx] -
                          b.sample(tx + double(wx), ty + double(wy));
            sum2 += diff * diff;
          }
        double residual = std::sqrt(sum2 / double(ival.size()));
        if (residual > params.max_error) ok = false;
      } else {
        gx = 2.0 * (gx + vx);
        gy = 2.0 * (gy + vy);
      }
    }
    out[pi].tracked = ok;
    out[pi].position = ok ? Point2{p0.x + gx, p0.y + gy} : p0;
  });
  return out;
}

/// Detects corners on frame 0 only and chains lucas_kanade between
/// consecutive frames. Lost points are never re-detected; splicing a fresh
/// corner onto an old series would fabricate continuity.
inline PointTrack track_points(const FrameSequence& frames,
                               const CornerParams& corner_params,
                               const FlowParams& flow_params) {
  validate(frames);
  std::vector<Point2> corners = shi_tomasi(frames.frames[0], corner_params);
  require(!corners.empty(), "track_points: no corners found on frame 0");

  PointTrack track;
  track.n_frames = frames.frames.size();
  track.n_points = corners.size();
  track.positions.resize(track.n_frames * track.n_points);
  track.tracked.assign(track.n_frames * track.n_points, 0);
  for (std::size_t p = 0; p < corners.size(); ++p) {
    track.positions[p] = corners[p];
    track.tracked[p] = 1;
  }

  std::vector<Point2> current = corners;
  std::vector<bool> alive(corners.size(), true);
  for (std::size_t f = 1; f < track.n_frames; ++f) {
    std::vector<Point2> query;
    std::vector<std::size_t> query_ids;
    for (std::size_t p = 0; p < corners.size(); ++p)
      if (alive[p]) {
        query.push_back(current[p]);
        query_ids.push_back(p);
      }
    if (query.empty()) break;
    auto flow =
        lucas_kanade(frames.frames[f - 1], frames.frames[f], query, flow_params);
    for (std::size_t q = 0; q < query.size(); ++q) {
      std::size_t p = query_ids[q];
      if (flow[q].tracked) {
        current[p] = flow[q].position;
        track.positions[f * track.n_points + p] = flow[q].position;
        track.tracked[f * track.n_points + p] = 1;
      } else {
        alive[p] = false;
      }
    }
  }
  return track;
}

/// Median vertical displacement per frame interval, image-down positive.
inline MovementTrace vertical_movement(const PointTrack& track,
                                       double frame_rate_hz) {
  require(track.n_frames >= 2 && track.n_points >= 1,
          "vertical_movement: track must cover >= 2 frames and >= 1 point");
  require(frame_rate_hz > 0.0,
          "vertical_movement: frame rate must be positive");

  MovementTrace out;
  out.grid = TimeGrid{0.0, 1.0 / frame_rate_hz, track.n_frames - 1};
  out.dy_px.resize(out.grid.n, 0.0);
  out.n_contributing.resize(out.grid.n, 0);
  std::vector<double> deltas;
  for (std::size_t k = 0; k + 1 < track.n_frames; ++k) {
    deltas.clear();
    for (std::size_t p = 0; p < track.n_points; ++p)
      if (track.is_tracked(k, p) && track.is_tracked(k + 1, p))
        deltas.push_back(track.at(k + 1, p).y - track.at(k, p).y);
    out.n_contributing[k] = deltas.size();
    if (deltas.empty()) continue; // gap, not zero
    std::sort(deltas.begin(), deltas.end());
    std::size_t m = deltas.size() / 2;
    out.dy_px[k] = deltas.size() % 2 == 1
                       ? deltas[m]
                       : 0.5 * (deltas[m - 1] + deltas[m]);
  }
  return out;
}

/// MovementTrace CSV: "t_s,dy_px,n_points"; gap rows emit an empty dy field.
inline void write_movement_csv(const MovementTrace& m, std::ostream& out) {
  out << "t_s,dy_px,n_points\n";
  for (std::size_t k = 0; k < m.grid.n; ++k) {
    out << format_g12(m.grid.time_at(k)) << ',';
    if (!m.is_gap(k)) out << format_g12(m.dy_px[k]);
    out << ',' << m.n_contributing[k] << '\n';
  }
}

inline void write_movement_csv(const MovementTrace& m,
                               const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_movement_csv: cannot open '", path, "'");
  write_movement_csv(m, out);
}

} // namespace phytosig
