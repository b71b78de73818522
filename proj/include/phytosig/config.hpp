#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "phytosig/common.hpp"
#include "phytosig/experiment.hpp"
#include "phytosig/flow.hpp"

namespace phytosig {

/// Every knob of the pipeline in one place. Serialized as flat
/// "section.key = value" lines; the same format feeds --config and the
/// run_config.txt that every CLI run emits, so any run can be reproduced
/// from its own output.
struct RunConfig {
  MfccConfig mfcc;
  CornerParams corner;
  FlowParams flow;
  BinarizePolicy binarize;
  CoeffSet coeff_set;
  double window_len_s = 21.0; // stated optimum in the source material
  double hop_s = 21.0;
  PipelineConfig::Hands hands = PipelineConfig::Hands::per_hand;
  std::uint64_t seed = 1;
  unsigned threads = 0; // 0 = hardware default; never changes results
  double video_fps = 0.0;

  PipelineConfig pipeline() const {
    PipelineConfig p;
    p.mfcc = mfcc;
    p.binarize = binarize;
    p.coeff_set = coeff_set;
    p.window_len_s = window_len_s;
    p.hop_s = hop_s;
    p.hands = hands;
    return p;
  }
};

namespace detail {

inline std::string coeff_set_to_string(const CoeffSet& set) {
  std::string out;
  for (std::size_t i = 0; i < set.indices.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(set.indices[i]);
  }
  return out;
}

inline CoeffSet coeff_set_from_string(const std::string& text) {
  CoeffSet set;
  set.indices.clear();
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    long v = std::atol(part.c_str());
    require(v >= 0 && (v > 0 || part == "0"), "coeff set: bad index '", part,
            "'");
    set.indices.push_back(std::size_t(v));
  }
  require(!set.indices.empty(), "coeff set: no indices in '", text, "'");
  return set;
}

} // namespace detail

/// The config keys in a fixed order, value formatting identical to what the
/// parser accepts.
inline std::vector<std::pair<std::string, std::string>> config_key_values(
    const RunConfig& c) {
  auto g = [](double v) { return format_g12(v); };
  return {
      {"mfcc.frame_len_s", g(c.mfcc.frame_len_s)},
      {"mfcc.hop_s", g(c.mfcc.hop_s)},
      {"mfcc.n_mels", std::to_string(c.mfcc.n_mels)},
      {"mfcc.n_coeffs", std::to_string(c.mfcc.n_coeffs)},
      {"mfcc.fmin_hz", g(c.mfcc.fmin_hz)},
      {"mfcc.fmax_hz", g(c.mfcc.fmax_hz)},
      {"mfcc.pre_emphasis", g(c.mfcc.pre_emphasis)},
      {"mfcc.log_floor", g(c.mfcc.log_floor)},
      {"corner.max_corners", std::to_string(c.corner.max_corners)},
      {"corner.quality_level", g(c.corner.quality_level)},
      {"corner.min_distance_px", g(c.corner.min_distance_px)},
      {"corner.block_size_px", std::to_string(c.corner.block_size_px)},
      {"flow.window_px", std::to_string(c.flow.window_px)},
      {"flow.pyramid_levels", std::to_string(c.flow.pyramid_levels)},
      {"flow.max_iterations", std::to_string(c.flow.max_iterations)},
      {"flow.epsilon_px", g(c.flow.epsilon_px)},
      {"flow.max_error", g(c.flow.max_error)},
      {"binarize.pixel_delta_min", g(c.binarize.pixel_delta_min)},
      {"binarize.mode",
       c.binarize.mode == BinarizePolicy::Mode::fixed ? "fixed" : "adaptive"},
      {"binarize.fixed_threshold", g(c.binarize.fixed_threshold)},
      {"binarize.adaptive_k", g(c.binarize.adaptive_k)},
      {"binarize.min_run_frames", std::to_string(c.binarize.min_run_frames)},
      {"corr.coeff_set", detail::coeff_set_to_string(c.coeff_set)},
      {"corr.window_len_s", g(c.window_len_s)},
      {"corr.hop_s", g(c.hop_s)},
      {"corr.hands",
       c.hands == PipelineConfig::Hands::merged ? "merged" : "per_hand"},
      {"run.seed", std::to_string(c.seed)},
      {"run.threads", std::to_string(c.threads)},
      {"run.video_fps", g(c.video_fps)},
  };
}

/// Applies one "section.key" assignment; unknown keys are an error so typos
/// never pass silently.
inline void config_set(RunConfig& c, const std::string& key,
                       const std::string& value) {
  auto as_double = [&](double& slot, bool positive = false) {
    double v = 0;
    require(detail::parse_double(value, v), "config: key '", key,
            "': expected a number, got '", value, "'");
    require(!positive || v > 0, "config: key '", key, "': must be positive");
    slot = v;
  };
  auto as_count = [&](std::size_t& slot) {
    long v = std::atol(value.c_str());
    require(v >= 0, "config: key '", key, "': expected a count");
    slot = std::size_t(v);
  };
  if (key == "mfcc.frame_len_s") as_double(c.mfcc.frame_len_s, true);
  else if (key == "mfcc.hop_s") as_double(c.mfcc.hop_s, true);
  else if (key == "mfcc.n_mels") as_count(c.mfcc.n_mels);
  else if (key == "mfcc.n_coeffs") as_count(c.mfcc.n_coeffs);
  else if (key == "mfcc.fmin_hz") as_double(c.mfcc.fmin_hz);
  else if (key == "mfcc.fmax_hz") as_double(c.mfcc.fmax_hz);
  else if (key == "mfcc.pre_emphasis") as_double(c.mfcc.pre_emphasis);
  else if (key == "mfcc.log_floor") as_double(c.mfcc.log_floor, true);
  else if (key == "corner.max_corners") as_count(c.corner.max_corners);
  else if (key == "corner.quality_level") as_double(c.corner.quality_level, true);
  else if (key == "corner.min_distance_px") as_double(c.corner.min_distance_px);
  else if (key == "corner.block_size_px") as_count(c.corner.block_size_px);
  else if (key == "flow.window_px") as_count(c.flow.window_px);
  else if (key == "flow.pyramid_levels") as_count(c.flow.pyramid_levels);
  else if (key == "flow.max_iterations") as_count(c.flow.max_iterations);
  else if (key == "flow.epsilon_px") as_double(c.flow.epsilon_px, true);
  else if (key == "flow.max_error") as_double(c.flow.max_error, true);
  else if (key == "binarize.pixel_delta_min")
    as_double(c.binarize.pixel_delta_min, true);
  else if (key == "binarize.mode") {
    if (value == "fixed") c.binarize.mode = BinarizePolicy::Mode::fixed;
    else if (value == "adaptive") c.binarize.mode = BinarizePolicy::Mode::adaptive;
    else fail("config: key 'binarize.mode': expected fixed|adaptive, got '",
              value, "'");
  } else if (key == "binarize.fixed_threshold")
    as_double(c.binarize.fixed_threshold);
  else if (key == "binarize.adaptive_k") as_double(c.binarize.adaptive_k);
  else if (key == "binarize.min_run_frames")
    as_count(c.binarize.min_run_frames);
  else if (key == "corr.coeff_set")
    c.coeff_set = detail::coeff_set_from_string(value);
  else if (key == "corr.window_len_s") as_double(c.window_len_s, true);
  else if (key == "corr.hop_s") as_double(c.hop_s, true);
  else if (key == "corr.hands") {
    if (value == "merged") c.hands = PipelineConfig::Hands::merged;
    else if (value == "per_hand") c.hands = PipelineConfig::Hands::per_hand;
    else fail("config: key 'corr.hands': expected per_hand|merged, got '",
              value, "'");
  } else if (key == "run.seed") {
    c.seed = std::strtoull(value.c_str(), nullptr, 10);
  } else if (key == "run.threads") {
    long v = std::atol(value.c_str());
    require(v >= 0, "config: key 'run.threads': expected a count");
    c.threads = unsigned(v);
  } else if (key == "run.video_fps") {
    as_double(c.video_fps);
  } else {
    fail("config: unknown key '", key, "'");
  }
}

/// Parses a flat key-value config file. Returns extra (non-config) keys
/// such as "command" or input paths to the caller untouched.
inline std::map<std::string, std::string> load_config_file(
    const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  require(in.good(), "load_config_file: cannot open '", path, "'");
  std::map<std::string, std::string> extras;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(detail::strip_line_ending(line));
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    require(eq != std::string::npos, "load_config_file: '", path, "' line ",
            line_no, ": expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.rfind("mfcc.", 0) == 0 || key.rfind("corner.", 0) == 0 ||
        key.rfind("flow.", 0) == 0 || key.rfind("binarize.", 0) == 0 ||
        key.rfind("corr.", 0) == 0 || key.rfind("run.", 0) == 0) {
      config_set(config, key, value);
    } else {
      extras[key] = value;
    }
  }
  return extras;
}

/// Serializes the run: all effective parameters plus caller-supplied extras
/// (command name, inputs). Re-running from this file reproduces the outputs
/// bit-identically.
inline std::string serialize_run_config(
    const RunConfig& config,
    const std::vector<std::pair<std::string, std::string>>& extras) {
  std::ostringstream out;
  for (const auto& [k, v] : extras) out << k << " = " << v << '\n';
  for (const auto& [k, v] : config_key_values(config))
    out << k << " = " << v << '\n';
  return out.str();
}

} // namespace phytosig
