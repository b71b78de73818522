#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phytosig/common.hpp"
#include "phytosig/image.hpp"
#include "phytosig/mfcc.hpp"
#include "phytosig/motion.hpp"
#include "phytosig/stats.hpp"
#include "phytosig/trace.hpp"
#include "phytosig/wav.hpp"

namespace phytosig {

/// One row of the experiment table. `discarded` records are retained for
/// provenance but excluded from every analysis. Group membership and
/// first-exposure status are explicit fields; n_plants is supplied by the
/// manifest, never computed.
struct ExperimentRecord {
  std::size_t id = 0;
  std::string plant;                 // beetroot | tomatoes | lettuce | ...
  std::string dance;                 // e.g. "Planets EU", "control, CCUL"
  std::string group;                 // control | experimental
  bool first_exposure = false;
  std::vector<std::string> voltage_paths; // 1-2, resolved against manifest dir
  double csv_sample_rate_hz = 0.0;   // required when a voltage path is CSV
  std::string dancer_frames;         // optional frame manifest path
  std::string boxes_path;            // optional box file path
  double video_fps = 0.0;            // optional; frame manifest may carry fps
  double distance_m = 1.0;
  double duration_s = 90.0;
  bool discarded = false;
  std::size_t n_plants = 0;
};

struct TableCell {
  double r = 0.0;
  std::string stars;
  bool ok = true;
  std::string note; // error or degeneracy description when !ok
};

struct TableRow {
  std::string label;
  std::vector<TableCell> cells; // one per column
};

/// Rows of (label, r, stars) per column plus per-column averages over the
/// ok cells. Averages stay unrounded; rounding happens at render time only.
struct ResultsTable {
  std::string title;
  std::vector<std::string> columns;
  std::vector<TableRow> rows;
  std::vector<double> averages;
  std::vector<std::size_t> avg_counts;
  std::size_t n_plants = 0;
};

/// Recomputes the per-column averages from the ok cells.
inline void compute_averages(ResultsTable& table) {
  table.averages.assign(table.columns.size(), 0.0);
  table.avg_counts.assign(table.columns.size(), 0);
  for (const auto& row : table.rows) {
    require(row.cells.size() == table.columns.size(), "ResultsTable '",
            table.title, "': row '", row.label, "' has ", row.cells.size(),
            " cells for ", table.columns.size(), " columns");
    for (std::size_t c = 0; c < row.cells.size(); ++c) {
      if (!row.cells[c].ok) continue;
      table.averages[c] += row.cells[c].r;
      ++table.avg_counts[c];
    }
  }
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    table.averages[c] =
        table.avg_counts[c] ? table.averages[c] / double(table.avg_counts[c])
                            : 0.0;
}

/// Everything the analyses need beyond the records themselves. Defaults
/// follow the source material where it speaks (21 s window) and documented
/// gap-fills elsewhere.
struct PipelineConfig {
  MfccConfig mfcc;
  BinarizePolicy binarize;
  CoeffSet coeff_set;
  double window_len_s = 21.0;
  double hop_s = 21.0; // non-overlapping windows by default
  enum class Hands { per_hand, merged } hands = Hands::per_hand;
};

namespace detail {

inline bool parse_bool_field(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes") { out = true; return true; }
  if (v == "false" || v == "0" || v == "no") { out = false; return true; }
  return false;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

} // namespace detail

/// Experiment manifest: "[experiment]" opens a record, "key = value" lines
/// fill it, '#' starts a comment. Paths are relative to the manifest's
/// directory. Schema errors name the record id and field.
inline std::vector<ExperimentRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_manifest: cannot open '", path, "'");
  std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<ExperimentRecord> records;
  ExperimentRecord* current = nullptr;
  std::string line;
  std::size_t line_no = 0;

  auto record_name = [&]() {
    return current->id ? std::to_string(current->id)
                       : std::string("#") + std::to_string(records.size());
  };
  auto resolve = [&](const std::string& p) {
    return (base / p).string();
  };

  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(detail::strip_line_ending(line));
    if (line.empty() || line[0] == '#') continue;
    if (line == "[experiment]") {
      records.emplace_back();
      current = &records.back();
      continue;
    }
    require(current != nullptr, "load_manifest: '", path, "' line ", line_no,
            ": field before any [experiment] header");
    auto eq = line.find('=');
    require(eq != std::string::npos, "load_manifest: '", path, "' line ",
            line_no, ": expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    auto bad = [&](const char* what) {
      fail("load_manifest: record ", record_name(), ": field '", key, "': ",
           what, " (got '", value, "')");
    };
    if (key == "id") {
      long v = std::atol(value.c_str());
      if (v <= 0) bad("expected a positive integer");
      current->id = std::size_t(v);
    } else if (key == "plant") {
      if (value.empty()) bad("expected a plant name");
      current->plant = value;
    } else if (key == "dance") {
      current->dance = value;
    } else if (key == "group") {
      if (value != "control" && value != "experimental")
        bad("expected control|experimental");
      current->group = value;
    } else if (key == "first_exposure") {
      if (!detail::parse_bool_field(value, current->first_exposure))
        bad("expected true|false");
    } else if (key == "voltage") {
      for (const auto& p : detail::split(value, ';'))
        if (!p.empty()) current->voltage_paths.push_back(resolve(p));
    } else if (key == "sample_rate_hz") {
      double v = 0;
      if (!detail::parse_double(value, v) || v <= 0) bad("expected a positive rate");
      current->csv_sample_rate_hz = v;
    } else if (key == "dancer_frames") {
      current->dancer_frames = resolve(value);
    } else if (key == "boxes") {
      current->boxes_path = resolve(value);
    } else if (key == "fps") {
      double v = 0;
      if (!detail::parse_double(value, v) || v <= 0) bad("expected a positive fps");
      current->video_fps = v;
    } else if (key == "distance_m") {
      double v = 0;
      if (!detail::parse_double(value, v) || v < 0) bad("expected a distance");
      current->distance_m = v;
    } else if (key == "duration_s") {
      double v = 0;
      if (!detail::parse_double(value, v) || v <= 0) bad("expected a duration");
      current->duration_s = v;
    } else if (key == "discarded") {
      if (!detail::parse_bool_field(value, current->discarded))
        bad("expected true|false");
    } else if (key == "n_plants") {
      long v = std::atol(value.c_str());
      if (v < 0) bad("expected a count");
      current->n_plants = std::size_t(v);
    } else {
      fail("load_manifest: record ", record_name(), ": unknown field '", key,
           "'");
    }
  }

  for (const auto& rec : records) {
    auto name = std::to_string(rec.id);
    require(rec.id > 0, "load_manifest: a record is missing field 'id'");
    require(!rec.plant.empty(), "load_manifest: record ", name,
            ": field 'plant' is required");
    require(rec.group == "control" || rec.group == "experimental",
            "load_manifest: record ", name,
            ": field 'group' must be control|experimental");
    require(!rec.voltage_paths.empty() && rec.voltage_paths.size() <= 2,
            "load_manifest: record ", name,
            ": field 'voltage' must list 1-2 paths, got ",
            rec.voltage_paths.size());
    require(rec.dancer_frames.empty() == rec.boxes_path.empty(),
            "load_manifest: record ", name,
            ": fields 'dancer_frames' and 'boxes' must come together");
  }
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j)
      require(records[i].id != records[j].id,
              "load_manifest: duplicate record id ", records[i].id);
  return records;
}

namespace detail {

inline std::string two_digit(std::size_t id) {
  std::string s = std::to_string(id);
  return s.size() < 2 ? "0" + s : s;
}

inline VoltageTrace load_record_voltage(const ExperimentRecord& rec,
                                        std::size_t index) {
  const std::string& path = rec.voltage_paths.at(index);
  std::string channel = "box" + std::to_string(index + 1);
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".wav") return load_voltage_wav(path, channel);
  require(rec.csv_sample_rate_hz > 0.0, "record ", rec.id,
          ": CSV voltage '", path,
          "' needs the manifest field 'sample_rate_hz'");
  return load_voltage_csv(path, rec.csv_sample_rate_hz, channel);
}

/// The per-record statistic shared by Analyses 1 and 3: average rolling
/// correlation of the two channels' lower-order MFCCs.
inline CorrResult analysis1_statistic(const ExperimentRecord& rec,
                                      const PipelineConfig& cfg) {
  require(rec.voltage_paths.size() == 2, "record ", rec.id,
          ": this analysis needs 2 voltage paths, got ",
          rec.voltage_paths.size());
  VoltageTrace a = load_record_voltage(rec, 0);
  VoltageTrace b = load_record_voltage(rec, 1);
  MfccMatrix ma = mfcc(a, cfg.mfcc);
  MfccMatrix mb = mfcc(b, cfg.mfcc);
  MfccCorrResult res =
      mfcc_corr(ma, mb, cfg.coeff_set, cfg.window_len_s, cfg.hop_s);
  CorrResult out = res.significance;
  out.r = res.average_r;
  return out;
}

} // namespace detail

/// Analysis 1: per record, correlate the two channels' MFCCs; group rows by
/// plant species; per-record failures become row-level error cells and the
/// table is still produced.
inline std::map<std::string, ResultsTable> run_analysis1(
    const std::vector<ExperimentRecord>& records, const PipelineConfig& cfg) {
  std::map<std::string, ResultsTable> tables;
  for (const auto& rec : records) {
    if (rec.discarded) continue;
    ResultsTable& table = tables[rec.plant];
    if (table.columns.empty()) {
      table.title = "Channel agreement - " + rec.plant;
      table.columns = {"correlation"};
    }
    TableRow row;
    row.label = detail::two_digit(rec.id);
    TableCell cell;
    try {
      CorrResult res = detail::analysis1_statistic(rec, cfg);
      cell.r = res.r;
      cell.stars = res.stars;
      table.n_plants += rec.n_plants;
    } catch (const Error& e) {
      cell.ok = false;
      cell.note = e.what();
    }
    row.cells.push_back(cell);
    table.rows.push_back(row);
  }
  for (auto& [plant, table] : tables) compute_averages(table);
  return tables;
}

struct Analysis2Result {
  ResultsTable table; // columns per hand, or one merged column
};

/// Analysis 2: binary dancer activity per hand against the plant's MFCCs.
/// Hands::merged ORs the two aligned hand series into one column; the
/// source tables are ambiguous about this, so both modes exist.
inline Analysis2Result run_analysis2(
    const std::vector<ExperimentRecord>& records, const PipelineConfig& cfg) {
  Analysis2Result out;
  out.table.title = "Dancer movement vs electrical discharge";
  bool merged = cfg.hands == PipelineConfig::Hands::merged;
  out.table.columns = merged
                          ? std::vector<std::string>{"merged"}
                          : std::vector<std::string>{"left_hand", "right_hand"};

  for (const auto& rec : records) {
    if (rec.discarded || rec.dancer_frames.empty() || rec.boxes_path.empty())
      continue;
    TableRow row;
    row.label = detail::two_digit(rec.id);
    row.cells.assign(out.table.columns.size(), TableCell{});
    bool any_ok = false;
    try {
      FrameSequence frames =
          load_frame_manifest(rec.dancer_frames, rec.video_fps);
      auto boxes = load_boxes(rec.boxes_path);
      auto find_box = [&](const std::string& label) -> const BoundingBox& {
        for (const auto& b : boxes)
          if (b.label == label) return b;
        fail("record ", rec.id, ": box file '", rec.boxes_path,
             "' has no box labeled '", label, "'");
      };
      VoltageTrace trace = detail::load_record_voltage(rec, 0);
      MfccMatrix m = mfcc(trace, cfg.mfcc);
      TimeGrid frame_grid{m.frame_times_s.front(), m.config.hop_s,
                          m.n_frames};

      auto hand_series = [&](const std::string& label) {
        RealSeries energy = box_energy(frames, find_box(label),
                                       cfg.binarize.pixel_delta_min);
        BinarySeries active = binarize(energy, cfg.binarize);
        return align_to_grid(active, frame_grid, AlignMode::hold);
      };

      std::vector<BinarySeries> columns;
      if (merged) {
        BinarySeries left = hand_series("left_hand");
        BinarySeries right = hand_series("right_hand");
        BinarySeries both = left;
        both.label = "merged";
        for (std::size_t i = 0; i < both.values.size(); ++i)
          both.values[i] = both.values[i] | right.values[i];
        columns.push_back(both);
      } else {
        columns.push_back(hand_series("left_hand"));
        columns.push_back(hand_series("right_hand"));
      }

      for (std::size_t c = 0; c < columns.size(); ++c) {
        try {
          BinaryMfccResult res = binary_vs_mfcc(columns[c], m, cfg.coeff_set);
          row.cells[c].r = res.average_r;
          row.cells[c].stars = res.significance.stars;
          any_ok = true;
        } catch (const Error& e) {
          row.cells[c].ok = false;
          row.cells[c].note = e.what(); // e.g. degenerate single-class hand
        }
      }
    } catch (const Error& e) {
      for (auto& cell : row.cells) {
        cell.ok = false;
        cell.note = e.what();
      }
    }
    if (any_ok) out.table.n_plants += rec.n_plants;
    out.table.rows.push_back(row);
  }
  compute_averages(out.table);
  return out;
}

struct Analysis3Result {
  ResultsTable control;
  ResultsTable experimental;
  bool comparison_valid = false;
  std::string comparison; // both group averages, or the omission notice
};

/// Analysis 3: the Analysis-1 statistic split into control (first exposure)
/// and experimental (regularly danced) groups, with a comparison line.
inline Analysis3Result run_analysis3(
    const std::vector<ExperimentRecord>& records, const PipelineConfig& cfg) {
  Analysis3Result out;
  out.control.title = "Control group (first exposure)";
  out.experimental.title = "Experimental group (regularly danced)";
  out.control.columns = out.experimental.columns = {"correlation"};

  for (const auto& rec : records) {
    if (rec.discarded) continue;
    ResultsTable& table = rec.group == "control" ? out.control
                                                 : out.experimental;
    TableRow row;
    row.label = detail::two_digit(rec.id) + " - " + rec.plant;
    TableCell cell;
    try {
      CorrResult res = detail::analysis1_statistic(rec, cfg);
      cell.r = res.r;
      cell.stars = res.stars;
      table.n_plants += rec.n_plants;
    } catch (const Error& e) {
      cell.ok = false;
      cell.note = e.what();
    }
    row.cells.push_back(cell);
    table.rows.push_back(row);
  }
  compute_averages(out.control);
  compute_averages(out.experimental);

  if (out.control.avg_counts[0] > 0 && out.experimental.avg_counts[0] > 0) {
    out.comparison_valid = true;
    out.comparison = detail::concat(
        "control average ", format_fixed(out.control.averages[0], 3),
        " vs experimental average ",
        format_fixed(out.experimental.averages[0], 3));
  } else {
    out.comparison =
        "comparison omitted: at least one group has no usable record";
  }
  return out;
}

/// Monospace rendering with half-up rounding at `decimals`. Averages are
/// computed on unrounded values and rounded only here.
inline std::string summarize(const ResultsTable& table, int decimals = 3) {
  require(!table.rows.empty(), "summarize: table '", table.title,
          "' has no rows");
  std::size_t label_w = std::string("experiment").size();
  for (const auto& row : table.rows) label_w = std::max(label_w, row.label.size());

  std::ostringstream out;
  out << table.title;
  if (table.n_plants > 0) out << " (n=" << table.n_plants << ")";
  out << '\n';
  out << "experiment" << std::string(label_w - 10, ' ');
  for (const auto& col : table.columns) out << "  " << col;
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.label << std::string(label_w - row.label.size(), ' ');
    for (std::size_t c = 0; c < row.cells.size(); ++c) {
      const TableCell& cell = row.cells[c];
      if (cell.ok)
        out << "  " << format_fixed(cell.r, decimals) << cell.stars;
      else
        out << "  [" << (cell.note.empty() ? "error" : cell.note) << "]";
    }
    out << '\n';
  }
  out << "average" << std::string(label_w - 7, ' ');
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.avg_counts[c] > 0)
      out << "  " << format_fixed(table.averages[c], decimals);
    else
      out << "  [no data]";
  }
  out << '\n';
  return out.str();
}

/// Machine-readable CSV at full 12-significant-digit precision; error cells
/// leave the value empty and carry the note in the stars column.
inline std::string table_to_csv(const ResultsTable& table) {
  std::ostringstream out;
  out << "label";
  for (const auto& col : table.columns)
    out << ',' << col << "_r," << col << "_stars";
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.label;
    for (const auto& cell : row.cells) {
      if (cell.ok)
        out << ',' << format_g12(cell.r) << ',' << cell.stars;
      else
        out << ",," << "error: " << cell.note;
    }
    out << '\n';
  }
  out << "avg";
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.avg_counts[c] > 0)
      out << ',' << format_g12(table.averages[c]) << ',';
    else
      out << ",,no data";
  }
  out << '\n';
  return out.str();
}

/// Bar chart of the row r values with one reference line per column at the
/// column average. Bars carry class="bar", average lines class="avg".
inline std::string table_to_svg(const ResultsTable& table) {
  const double width = 640.0, height = 360.0;
  const double margin = 40.0;
  const double plot_w = width - 2 * margin, plot_h = height - 2 * margin;
  double y_zero = margin + plot_h / 2.0; // r in [-1, 1]
  auto y_of = [&](double r) { return y_zero - r * plot_h / 2.0; };

  std::size_t n_rows = table.rows.size();
  std::size_t n_cols = table.columns.size();
  double slot = plot_w / double(std::max<std::size_t>(n_rows, 1));
  double bar_w = slot / double(n_cols + 1);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  svg << "  <title>" << table.title << "</title>\n";
  svg << "  <line class=\"axis\" x1=\"" << margin << "\" y1=\"" << y_zero
      << "\" x2=\"" << width - margin << "\" y2=\"" << y_zero
      << "\" stroke=\"#888\"/>\n";
  static const char* palette[] = {"#4878a8", "#a85448", "#6a9955", "#9468a8"};
  for (std::size_t row = 0; row < n_rows; ++row) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      const TableCell& cell = table.rows[row].cells[c];
      if (!cell.ok) continue;
      double x = margin + double(row) * slot + double(c) * bar_w + bar_w / 2.0;
      double top = std::min(y_of(cell.r), y_zero);
      double bar_h = std::abs(y_of(cell.r) - y_zero);
      svg << "  <rect class=\"bar\" x=\"" << format_g12(x) << "\" y=\""
          << format_g12(top) << "\" width=\"" << format_g12(bar_w)
          << "\" height=\"" << format_g12(bar_h) << "\" fill=\""
          << palette[c % 4] << "\"/>\n";
    }
  }
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (table.avg_counts[c] == 0) continue;
    double y = y_of(table.averages[c]);
    svg << "  <line class=\"avg\" x1=\"" << margin << "\" y1=\""
        << format_g12(y) << "\" x2=\"" << width - margin << "\" y2=\""
        << format_g12(y) << "\" stroke=\"" << palette[c % 4]
        << "\" stroke-dasharray=\"6 3\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

enum class RenderFormat { csv, text, svg };

/// Writes the table in the requested format (atomically).
inline void render(const ResultsTable& table, RenderFormat format,
                   const std::string& path, int decimals = 3) {
  require(!table.rows.empty(), "render: table '", table.title,
          "' has no rows");
  switch (format) {
    case RenderFormat::csv: write_file_atomic(path, table_to_csv(table)); break;
    case RenderFormat::text:
      write_file_atomic(path, summarize(table, decimals));
      break;
    case RenderFormat::svg: write_file_atomic(path, table_to_svg(table)); break;
  }
}

} // namespace phytosig
