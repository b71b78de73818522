// phytosig - plant-response measurement toolkit
//
// Subcommands: mfcc, track, motion, correlate, sweep, analysis1, analysis2,
// analysis3, synth voltage, synth frames, plot, rerun. Every run writes
// run_config.txt into its output directory; `phytosig rerun` reproduces a
// run bit-identically from that file. Exit codes: 0 success, 1 usage error,
// 2 data error. Messages go to stderr, data to files or stdout.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "phytosig/config.hpp"
#include "phytosig/experiment.hpp"
#include "phytosig/flow.hpp"
#include "phytosig/image.hpp"
#include "phytosig/mfcc.hpp"
#include "phytosig/motion.hpp"
#include "phytosig/stats.hpp"
#include "phytosig/synth.hpp"
#include "phytosig/trace.hpp"
#include "phytosig/wav.hpp"

namespace fs = std::filesystem;
using namespace phytosig;

namespace {

struct RunContext {
  std::string command;
  RunConfig cfg;
  std::vector<std::pair<std::string, std::string>> inputs; // recorded order
  fs::path out_dir;

  std::string input(const std::string& key,
                    const std::string& fallback = "") const {
    for (const auto& [k, v] : inputs)
      if (k == key) return v;
    require(!fallback.empty() || has(key), "missing input '", key,
            "' for command '", command, "'");
    return fallback;
  }
  bool has(const std::string& key) const {
    for (const auto& [k, v] : inputs)
      if (k == key) return true;
    return false;
  }
  double input_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    double v = 0;
    require(detail::parse_double(input(key), v), "input '", key,
            "' is not a number");
    return v;
  }
};

void write_run_config(const RunContext& ctx) {
  std::vector<std::pair<std::string, std::string>> extras;
  extras.emplace_back("command", ctx.command);
  for (const auto& kv : ctx.inputs) extras.push_back(kv);
  write_file_atomic((ctx.out_dir / "run_config.txt").string(),
                    serialize_run_config(ctx.cfg, extras));
}

VoltageTrace load_any_voltage(const std::string& path, double csv_rate,
                              const std::string& channel) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".wav") return load_voltage_wav(path, channel);
  require(csv_rate > 0.0, "CSV voltage input '", path,
          "' needs --rate (files carry no sample rate)");
  return load_voltage_csv(path, csv_rate, channel);
}

std::string capture_series_csv(const RealSeries& s) {
  std::ostringstream out;
  write_series_csv(s, out);
  return out.str();
}

// ---------------------------------------------------------------- commands

void cmd_mfcc(const RunContext& ctx) {
  VoltageTrace trace =
      load_any_voltage(ctx.input("input"), ctx.input_double("rate", 0.0),
                       ctx.input("channel", "ch1"));
  MfccMatrix m = mfcc(trace, ctx.cfg.mfcc);
  std::ostringstream csv;
  write_mfcc_csv(m, csv);
  write_file_atomic((ctx.out_dir / "mfcc.csv").string(), csv.str());
  std::cerr << "mfcc: " << m.n_frames << " frames x " << m.n_coeffs
            << " coefficients -> " << (ctx.out_dir / "mfcc.csv").string()
            << "\n";
}

void cmd_track(const RunContext& ctx) {
  FrameSequence frames =
      load_frame_manifest(ctx.input("frames"), ctx.cfg.video_fps);
  PointTrack track = track_points(frames, ctx.cfg.corner, ctx.cfg.flow);
  MovementTrace movement = vertical_movement(track, frames.frame_rate_hz);
  std::ostringstream csv;
  write_movement_csv(movement, csv);
  write_file_atomic((ctx.out_dir / "movement.csv").string(), csv.str());
  std::cerr << "track: " << track.n_points << " points over "
            << track.n_frames << " frames -> "
            << (ctx.out_dir / "movement.csv").string() << "\n";
}

void cmd_motion(const RunContext& ctx) {
  FrameSequence frames =
      load_frame_manifest(ctx.input("frames"), ctx.cfg.video_fps);
  auto boxes = load_boxes(ctx.input("boxes"));
  for (const auto& box : boxes) {
    RealSeries energy =
        box_energy(frames, box, ctx.cfg.binarize.pixel_delta_min);
    BinarySeries active = binarize(energy, ctx.cfg.binarize);
    write_file_atomic((ctx.out_dir / (box.label + "_energy.csv")).string(),
                      capture_series_csv(energy));
    std::ostringstream bin_csv;
    write_binary_csv(active, bin_csv);
    write_file_atomic((ctx.out_dir / (box.label + ".csv")).string(),
                      bin_csv.str());
  }
  std::cerr << "motion: " << boxes.size() << " boxes -> "
            << ctx.out_dir.string() << "\n";
}

void cmd_correlate(const RunContext& ctx) {
  RealSeries a = load_series_csv(ctx.input("a"), "a");
  RealSeries b = load_series_csv(ctx.input("b"), "b");
  RollingCorr rolling =
      rolling_corr(a, b, ctx.cfg.window_len_s, ctx.cfg.hop_s);
  double full_r = pearson(a.values, b.values);
  CorrResult sig = corr_significance(full_r, a.values.size());

  std::ostringstream out;
  out << "kind,r,n,p,stars\n";
  out << "full," << format_g12(sig.r) << ',' << sig.n << ','
      << format_g12(sig.p_value) << ',' << sig.stars << '\n';
  CorrResult rolling_sig =
      corr_significance(rolling.mean_r, a.values.size());
  out << "rolling_mean," << format_g12(rolling.mean_r) << ','
      << a.values.size() << ',' << format_g12(rolling_sig.p_value) << ','
      << rolling_sig.stars << '\n';
  write_file_atomic((ctx.out_dir / "corr.csv").string(), out.str());

  std::ostringstream windows;
  windows << "window_start_s,r\n";
  std::size_t hop = std::size_t(std::llround(ctx.cfg.hop_s / a.grid.dt_s));
  for (std::size_t w = 0; w < rolling.window_rs.size(); ++w)
    windows << format_g12(a.grid.t0_s + double(w * hop) * a.grid.dt_s) << ','
            << format_g12(rolling.window_rs[w]) << '\n';
  write_file_atomic((ctx.out_dir / "rolling.csv").string(), windows.str());

  std::cout << "r=" << format_g12(full_r) << " n=" << sig.n
            << " p=" << format_g12(sig.p_value) << " stars=" << sig.stars
            << " rolling_mean_r=" << format_g12(rolling.mean_r)
            << " windows=" << rolling.n_windows
            << " skipped=" << rolling.n_skipped << "\n";
}

void cmd_sweep(const RunContext& ctx) {
  RealSeries a = load_series_csv(ctx.input("a"), "a");
  RealSeries b = load_series_csv(ctx.input("b"), "b");
  std::vector<double> lengths;
  for (const auto& part : detail::split(ctx.input("lengths"), ',')) {
    double v = 0;
    require(detail::parse_double(part, v) && v > 0,
            "sweep: bad length '", part, "'");
    lengths.push_back(v);
  }
  SweepResult sweep = window_sweep(a, b, lengths);
  std::ostringstream csv;
  write_sweep_csv(sweep, csv);
  write_file_atomic((ctx.out_dir / "sweep.csv").string(), csv.str());
  std::cout << "selected_window_s=" << format_g12(sweep.selected_length_s)
            << "\n";
}

void render_all(const ResultsTable& table, const fs::path& stem,
                int decimals) {
  render(table, RenderFormat::csv, stem.string() + ".csv", decimals);
  render(table, RenderFormat::text, stem.string() + ".txt", decimals);
  render(table, RenderFormat::svg, stem.string() + ".svg", decimals);
}

void cmd_analysis1(const RunContext& ctx) {
  auto records = load_manifest(ctx.input("manifest"));
  auto tables = run_analysis1(records, ctx.cfg.pipeline());
  if (tables.empty()) {
    std::cerr << "analysis1: no data (no usable records in manifest)\n";
    return;
  }
  fs::path dir = ctx.out_dir / "analysis1";
  fs::create_directories(dir);
  for (const auto& [plant, table] : tables) {
    if (table.rows.empty()) continue;
    render_all(table, dir / plant, 3);
  }
  std::cerr << "analysis1: " << tables.size() << " plant tables -> "
            << dir.string() << "\n";
}

void cmd_analysis2(const RunContext& ctx) {
  auto records = load_manifest(ctx.input("manifest"));
  Analysis2Result res = run_analysis2(records, ctx.cfg.pipeline());
  if (res.table.rows.empty()) {
    std::cerr << "analysis2: no data (no record has dancer frames and boxes)\n";
    return;
  }
  fs::path dir = ctx.out_dir / "analysis2";
  fs::create_directories(dir);
  render_all(res.table, dir / "table", 4);
  std::cerr << "analysis2: " << res.table.rows.size() << " rows -> "
            << dir.string() << "\n";
}

void cmd_analysis3(const RunContext& ctx) {
  auto records = load_manifest(ctx.input("manifest"));
  Analysis3Result res = run_analysis3(records, ctx.cfg.pipeline());
  if (res.control.rows.empty() && res.experimental.rows.empty()) {
    std::cerr << "analysis3: no data (no usable records in manifest)\n";
    return;
  }
  fs::path dir = ctx.out_dir / "analysis3";
  fs::create_directories(dir);
  if (!res.control.rows.empty()) render_all(res.control, dir / "control", 3);
  if (!res.experimental.rows.empty())
    render_all(res.experimental, dir / "experimental", 3);
  write_file_atomic((dir / "comparison.txt").string(), res.comparison + "\n");
  std::cerr << "analysis3: " << res.comparison << "\n";
}

void cmd_synth_voltage(const RunContext& ctx) {
  synth::SynthVoltageConfig cfg;
  cfg.duration_s = ctx.input_double("duration", 60.0);
  cfg.sample_rate_hz = ctx.input_double("rate", 10000.0);
  cfg.seed = ctx.cfg.seed;
  if (ctx.has("shared")) {
    for (const auto& comp : detail::split(ctx.input("shared"), ';')) {
      if (comp.empty()) continue;
      auto parts = detail::split(comp, ':');
      require(parts.size() >= 2, "synth voltage: component '", comp,
              "' must be freq:amplitude[:phase]");
      synth::SharedComponent sc;
      require(detail::parse_double(parts[0], sc.freq_hz) &&
                  detail::parse_double(parts[1], sc.amplitude),
              "synth voltage: bad component '", comp, "'");
      if (parts.size() > 2)
        require(detail::parse_double(parts[2], sc.phase_rad),
                "synth voltage: bad phase in '", comp, "'");
      cfg.shared_components.push_back(sc);
    }
  }
  if (ctx.has("noise_sd")) {
    auto parts = detail::split(ctx.input("noise_sd"), ',');
    require(detail::parse_double(parts[0], cfg.noise_sd_ch1),
            "synth voltage: bad noise sd");
    cfg.noise_sd_ch2 = cfg.noise_sd_ch1;
    if (parts.size() > 1)
      require(detail::parse_double(parts[1], cfg.noise_sd_ch2),
              "synth voltage: bad noise sd");
  }
  if (ctx.has("drift")) {
    auto parts = detail::split(ctx.input("drift"), ':');
    require(parts.size() == 2 &&
                detail::parse_double(parts[0], cfg.drift_amplitude) &&
                detail::parse_double(parts[1], cfg.drift_period_s),
            "synth voltage: drift must be amplitude:period_s");
  }

  synth::VoltagePairTruth truth;
  auto [ch1, ch2] = synth::gen_correlated_pair(cfg, &truth);
  std::string format = ctx.input("format", "wav");
  if (format == "wav") {
    write_voltage_wav(ch1, (ctx.out_dir / "ch1.wav").string());
    write_voltage_wav(ch2, (ctx.out_dir / "ch2.wav").string());
  } else if (format == "csv") {
    write_file_atomic((ctx.out_dir / "ch1.csv").string(),
                      capture_series_csv(to_series(ch1)));
    write_file_atomic((ctx.out_dir / "ch2.csv").string(),
                      capture_series_csv(to_series(ch2)));
  } else {
    fail("synth voltage: unknown format '", format, "' (wav|csv)");
  }

  std::ostringstream meta;
  meta << "n_samples = " << truth.n_samples << '\n';
  meta << "sample_rate_hz = " << format_g12(cfg.sample_rate_hz) << '\n';
  meta << "seed = " << cfg.seed << '\n';
  for (const auto& c : cfg.shared_components)
    meta << "component = " << format_g12(c.freq_hz) << ':'
         << format_g12(c.amplitude) << ':' << format_g12(c.phase_rad) << '\n';
  meta << "noise_sd = " << format_g12(cfg.noise_sd_ch1) << ','
       << format_g12(cfg.noise_sd_ch2) << '\n';
  write_file_atomic((ctx.out_dir / "truth.txt").string(), meta.str());
  std::cerr << "synth voltage: " << truth.n_samples << " samples x2 -> "
            << ctx.out_dir.string() << "\n";
}

void cmd_synth_frames(const RunContext& ctx) {
  synth::SynthFramesConfig cfg;
  cfg.width = std::size_t(ctx.input_double("width", 160));
  cfg.height = std::size_t(ctx.input_double("height", 160));
  cfg.n_frames = std::size_t(ctx.input_double("n_frames", 30));
  cfg.cell_px = std::size_t(ctx.input_double("cell_px", 16));
  cfg.seed = ctx.cfg.seed;
  std::string texture = ctx.input("texture", "checkerboard");
  if (texture == "checkerboard") cfg.texture = synth::Texture::checkerboard;
  else if (texture == "noise") cfg.texture = synth::Texture::noise;
  else if (texture == "rectangle") cfg.texture = synth::Texture::rectangle;
  else fail("synth frames: unknown texture '", texture, "'");
  if (ctx.has("shift")) {
    auto parts = detail::split(ctx.input("shift"), ',');
    require(parts.size() == 2 && detail::parse_double(parts[0], cfg.shift_dx) &&
                detail::parse_double(parts[1], cfg.shift_dy),
            "synth frames: shift must be dx,dy");
  }
  if (ctx.has("block")) {
    auto parts = detail::split(ctx.input("block"), ',');
    require(parts.size() == 4, "synth frames: block must be x,y,w,h");
    synth::BlockMotion block;
    block.x = std::size_t(std::atol(parts[0].c_str()));
    block.y = std::size_t(std::atol(parts[1].c_str()));
    block.w = std::size_t(std::atol(parts[2].c_str()));
    block.h = std::size_t(std::atol(parts[3].c_str()));
    block.jiggle_px = ctx.input_double("jiggle", 2.0);
    for (const auto& range : detail::split(ctx.input("active", ""), ';')) {
      if (range.empty()) continue;
      auto dash = range.find('-');
      require(dash != std::string::npos, "synth frames: active range '",
              range, "' must be lo-hi");
      block.active_intervals.emplace_back(
          std::size_t(std::atol(range.substr(0, dash).c_str())),
          std::size_t(std::atol(range.substr(dash + 1).c_str())));
    }
    cfg.blocks.push_back(block);
  }

  synth::FramesGroundTruth truth;
  FrameSequence seq = synth::gen_frames(cfg, &truth);
  double fps = ctx.cfg.video_fps > 0 ? ctx.cfg.video_fps : 30.0;

  std::ostringstream manifest;
  manifest << "# fps=" << format_g12(fps) << '\n';
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.pgm", f);
    write_pgm(seq.frames[f], (ctx.out_dir / name).string());
    manifest << name << '\n';
  }
  write_file_atomic((ctx.out_dir / "frames.txt").string(), manifest.str());

  std::ostringstream truth_csv;
  truth_csv << "frame,true_dx,true_dy";
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b)
    truth_csv << ",block" << b << "_active";
  truth_csv << '\n';
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    truth_csv << f << ',' << format_g12(truth.cumulative_shift[f].dx) << ','
              << format_g12(truth.cumulative_shift[f].dy);
    for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
      if (f == 0)
        truth_csv << ',';
      else
        truth_csv << ',' << int(truth.block_activity[b][f - 1]);
    }
    truth_csv << '\n';
  }
  write_file_atomic((ctx.out_dir / "truth.csv").string(), truth_csv.str());
  std::cerr << "synth frames: " << seq.frames.size() << " frames -> "
            << ctx.out_dir.string() << "\n";
}

std::string series_to_svg(const RealSeries& s) {
  const double width = 640.0, height = 360.0, margin = 40.0;
  double lo = s.values[0], hi = s.values[0];
  for (double v : s.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n  <polyline class=\"series\" fill=\"none\" "
      << "stroke=\"#4878a8\" points=\"";
  for (std::size_t k = 0; k < s.grid.n; ++k) {
    double x = margin + (width - 2 * margin) * double(k) /
                            double(std::max<std::size_t>(s.grid.n - 1, 1));
    double y = height - margin -
               (height - 2 * margin) * (s.values[k] - lo) / (hi - lo);
    if (k) svg << ' ';
    svg << format_g12(x) << ',' << format_g12(y);
  }
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

void cmd_plot(const RunContext& ctx) {
  if (ctx.has("series")) {
    RealSeries s = load_series_csv(ctx.input("series"), "series");
    write_file_atomic((ctx.out_dir / "plot.svg").string(), series_to_svg(s));
  } else if (ctx.has("table")) {
    // re-parse a table CSV produced by the analysis commands
    std::ifstream in(ctx.input("table"));
    require(in.good(), "plot: cannot open '", ctx.input("table"), "'");
    std::string line;
    require(bool(std::getline(in, line)), "plot: empty table file");
    auto header = detail::split(detail::strip_line_ending(line), ',');
    require(header.size() >= 3 && header[0] == "label",
            "plot: '", ctx.input("table"), "' is not a results-table CSV");
    ResultsTable table;
    table.title = fs::path(ctx.input("table")).stem().string();
    for (std::size_t c = 1; c + 1 < header.size(); c += 2) {
      std::string name = header[c];
      if (name.size() > 2 && name.substr(name.size() - 2) == "_r")
        name = name.substr(0, name.size() - 2);
      table.columns.push_back(name);
    }
    while (std::getline(in, line)) {
      auto fields = detail::split(detail::strip_line_ending(line), ',');
      if (fields.empty() || fields[0].empty()) continue;
      if (fields[0] == "avg") continue; // recomputed below
      TableRow row;
      row.label = fields[0];
      for (std::size_t c = 0; c < table.columns.size(); ++c) {
        TableCell cell;
        std::size_t fi = 1 + 2 * c;
        if (fi < fields.size() && detail::parse_double(fields[fi], cell.r)) {
          if (fi + 1 < fields.size()) cell.stars = fields[fi + 1];
        } else {
          cell.ok = false;
          cell.note = fi + 1 < fields.size() ? fields[fi + 1] : "missing";
        }
        row.cells.push_back(cell);
      }
      table.rows.push_back(row);
    }
    require(!table.rows.empty(), "plot: table has no data rows");
    compute_averages(table);
    write_file_atomic((ctx.out_dir / "plot.svg").string(),
                      table_to_svg(table));
  } else {
    fail("plot: pass --series or --table");
  }
  std::cerr << "plot -> " << (ctx.out_dir / "plot.svg").string() << "\n";
}

void dispatch(RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  set_max_threads(ctx.cfg.threads);
  if (ctx.command == "mfcc") cmd_mfcc(ctx);
  else if (ctx.command == "track") cmd_track(ctx);
  else if (ctx.command == "motion") cmd_motion(ctx);
  else if (ctx.command == "correlate") cmd_correlate(ctx);
  else if (ctx.command == "sweep") cmd_sweep(ctx);
  else if (ctx.command == "analysis1") cmd_analysis1(ctx);
  else if (ctx.command == "analysis2") cmd_analysis2(ctx);
  else if (ctx.command == "analysis3") cmd_analysis3(ctx);
  else if (ctx.command == "synth-voltage") cmd_synth_voltage(ctx);
  else if (ctx.command == "synth-frames") cmd_synth_frames(ctx);
  else if (ctx.command == "plot") cmd_plot(ctx);
  else fail("unknown command '", ctx.command, "' in run config");
  write_run_config(ctx);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"phytosig: plant-response measurement toolkit\n"
               "Electrode traces to MFCC features, video frames to movement "
               "series,\nand the rolling-window correlation analyses over "
               "them."};
  app.require_subcommand(0, 1);

  RunContext ctx;
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::string seed_flag, threads_flag, fps_flag;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "config file (flat key = value lines)");
    sub->add_option("-o,--out-dir", out_dir, "output directory")
        ->capture_default_str();
    sub->add_option("--set", overrides,
                    "override one config key, e.g. --set corr.window_len_s=21")
        ->take_all();
    sub->add_option("--seed", seed_flag,
                    "seed for every random draw (gap-fill; default 1)");
    sub->add_option("--threads", threads_flag,
                    "worker cap, 0 = hardware; never changes results");
  };

  // per-subcommand inputs, collected as strings and recorded in
  // run_config.txt so `rerun` can replay them
  std::map<std::string, std::string> in;

  CLI::App* c_mfcc = app.add_subcommand(
      "mfcc", "voltage recording (.wav/.csv) -> MFCC matrix CSV");
  c_mfcc->add_option("-i,--input", in["input"], "voltage file")->required();
  c_mfcc->add_option("--rate", in["rate"],
                     "sample rate for CSV input (gap-fill; WAV carries one)");
  c_mfcc->add_option("--channel", in["channel"], "channel id label");
  add_common(c_mfcc);

  CLI::App* c_track = app.add_subcommand(
      "track", "frame manifest -> plant vertical-movement CSV");
  c_track->add_option("--frames", in["frames"], "frame manifest")->required();
  c_track->add_option("--fps", fps_flag,
                      "frame rate override (else manifest header)");
  add_common(c_track);

  CLI::App* c_motion = app.add_subcommand(
      "motion", "frame manifest + boxes -> per-box binary activity CSV");
  c_motion->add_option("--frames", in["frames"], "frame manifest")->required();
  c_motion->add_option("--boxes", in["boxes"], "box file: label x y w h")
      ->required();
  c_motion->add_option("--fps", fps_flag, "frame rate override");
  add_common(c_motion);

  CLI::App* c_corr = app.add_subcommand(
      "correlate", "two aligned series CSVs -> correlation + rolling windows");
  c_corr->add_option("--a", in["a"], "first series CSV")->required();
  c_corr->add_option("--b", in["b"], "second series CSV")->required();
  add_common(c_corr);

  CLI::App* c_sweep = app.add_subcommand(
      "sweep", "window-length sweep over two aligned series CSVs");
  c_sweep->add_option("--a", in["a"], "first series CSV")->required();
  c_sweep->add_option("--b", in["b"], "second series CSV")->required();
  c_sweep
      ->add_option("--lengths", in["lengths"],
                   "candidate window lengths, e.g. 7,14,21,42 (21 is the "
                   "stated optimum)")
      ->required();
  add_common(c_sweep);

  for (const char* name : {"analysis1", "analysis2", "analysis3"}) {
    CLI::App* sub = app.add_subcommand(
        name, std::string(name) + ": experiment manifest -> results tables");
    sub->add_option("--manifest", in["manifest"], "experiment manifest")
        ->required();
    add_common(sub);
  }

  CLI::App* c_synth = app.add_subcommand("synth", "synthetic data generators");
  c_synth->require_subcommand(1);
  CLI::App* c_sv = c_synth->add_subcommand(
      "voltage", "correlated two-channel voltage pair");
  c_sv->add_option("--duration", in["duration"], "seconds (default 60)");
  c_sv->add_option("--rate", in["rate"], "samples/second (default 10000)");
  c_sv->add_option("--shared", in["shared"],
                   "shared components freq:amp[:phase];...");
  c_sv->add_option("--noise-sd", in["noise_sd"],
                   "per-channel noise sd (one value or ch1,ch2)");
  c_sv->add_option("--drift", in["drift"], "slow drift amplitude:period_s");
  c_sv->add_option("--format", in["format"], "wav (default) or csv");
  add_common(c_sv);

  CLI::App* c_sf =
      c_synth->add_subcommand("frames", "synthetic frame sequence (PGM)");
  c_sf->add_option("--width", in["width"], "frame width (default 160)");
  c_sf->add_option("--height", in["height"], "frame height (default 160)");
  c_sf->add_option("--n-frames", in["n_frames"], "frame count (default 30)");
  c_sf->add_option("--texture", in["texture"],
                   "checkerboard (default) | noise | rectangle");
  c_sf->add_option("--cell-px", in["cell_px"], "checkerboard cell (default 16)");
  c_sf->add_option("--shift", in["shift"], "global shift per frame dx,dy");
  c_sf->add_option("--block", in["block"], "jiggling block x,y,w,h");
  c_sf->add_option("--jiggle", in["jiggle"], "block jiggle in px (default 2)");
  c_sf->add_option("--active", in["active"],
                   "block active frame intervals lo-hi;lo-hi");
  c_sf->add_option("--fps", fps_flag, "manifest fps (default 30)");
  add_common(c_sf);

  CLI::App* c_plot = app.add_subcommand("plot", "series or table CSV -> SVG");
  c_plot->add_option("--series", in["series"], "series CSV to plot");
  c_plot->add_option("--table", in["table"], "results-table CSV to plot");
  add_common(c_plot);

  CLI::App* c_rerun = app.add_subcommand(
      "rerun", "replay a run bit-identically from its run_config.txt");
  std::string rerun_from;
  c_rerun->add_option("from", rerun_from, "path to run_config.txt")
      ->required();
  c_rerun->add_option("-o,--out-dir", out_dir, "output directory")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help() << std::flush;
    return 1;
  }

  try {
    // config file first, then --set, then plain flags: flags win
    if (!config_path.empty()) load_config_file(config_path, ctx.cfg);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      require(eq != std::string::npos, "--set expects key=value, got '", kv,
              "'");
      config_set(ctx.cfg, detail::trim(kv.substr(0, eq)),
                 detail::trim(kv.substr(eq + 1)));
    }
    if (!seed_flag.empty()) config_set(ctx.cfg, "run.seed", seed_flag);
    if (!threads_flag.empty()) config_set(ctx.cfg, "run.threads", threads_flag);
    if (!fps_flag.empty()) config_set(ctx.cfg, "run.video_fps", fps_flag);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == c_rerun) {
      RunConfig replay_cfg;
      auto extras = load_config_file(rerun_from, replay_cfg);
      require(extras.count("command"), "rerun: '", rerun_from,
              "' has no 'command' key");
      ctx.cfg = replay_cfg;
      ctx.command = extras["command"];
      extras.erase("command");
      for (const auto& [k, v] : extras) ctx.inputs.emplace_back(k, v);
    } else if (c_sv->parsed()) {
      ctx.command = "synth-voltage";
      for (const auto& [k, v] : in)
        if (!v.empty()) ctx.inputs.emplace_back(k, v);
    } else if (c_sf->parsed()) {
      ctx.command = "synth-frames";
      for (const auto& [k, v] : in)
        if (!v.empty()) ctx.inputs.emplace_back(k, v);
    } else {
      ctx.command = sub->get_name();
      for (const auto& [k, v] : in)
        if (!v.empty()) ctx.inputs.emplace_back(k, v);
    }
    ctx.out_dir = out_dir;
    dispatch(ctx);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
