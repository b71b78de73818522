#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef PHYTOSIG_CLI_PATH
#error "PHYTOSIG_CLI_PATH must point at the built CLI binary"
#endif

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "phytosig_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(PHYTOSIG_CLI_PATH) + " " + args +
                    " >/dev/null 2>/dev/null";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return slurp(a) == slurp(b);
}

} // namespace

TEST_CASE("cli exit codes") {
  SECTION("no arguments: usage text, exit 1") {
    REQUIRE(run_cli("") == 1);
  }
  SECTION("unknown flag: exit 1") {
    REQUIRE(run_cli("mfcc --definitely-not-a-flag x") == 1);
  }
  SECTION("missing data file: exit 2") {
    auto dir = fresh_dir("exit2");
    REQUIRE(run_cli("mfcc -i /nonexistent/x.wav -o " + dir.string()) == 2);
  }
  SECTION("bad config key: exit 1") {
    auto dir = fresh_dir("exit1cfg");
    REQUIRE(run_cli("mfcc -i x.wav --set mfcc.bogus=1 -o " + dir.string()) ==
            1);
  }
  SECTION("--help exits 0") {
    REQUIRE(run_cli("--help") == 0);
  }
}

TEST_CASE("synth voltage + mfcc + rerun determinism") {
  auto synth_dir = fresh_dir("synth_v");
  REQUIRE(run_cli("synth voltage --duration 30 --rate 1000 "
                  "--shared 0.05:1.0:0.2 --noise-sd 0.1 --seed 7 -o " +
                  synth_dir.string()) == 0);
  REQUIRE(fs::exists(synth_dir / "ch1.wav"));
  REQUIRE(fs::exists(synth_dir / "ch2.wav"));
  REQUIRE(fs::exists(synth_dir / "truth.txt"));
  REQUIRE(fs::exists(synth_dir / "run_config.txt"));

  SECTION("rerun from run_config.txt reproduces the files bit-identically") {
    auto replay = fresh_dir("synth_v_replay");
    REQUIRE(run_cli("rerun " + (synth_dir / "run_config.txt").string() +
                    " -o " + replay.string()) == 0);
    REQUIRE(same_bytes(synth_dir / "ch1.wav", replay / "ch1.wav"));
    REQUIRE(same_bytes(synth_dir / "ch2.wav", replay / "ch2.wav"));
    REQUIRE(same_bytes(synth_dir / "run_config.txt",
                       replay / "run_config.txt"));
  }

  SECTION("mfcc output is identical across thread counts and reruns") {
    auto m1 = fresh_dir("mfcc_t1");
    auto m4 = fresh_dir("mfcc_t4");
    std::string base = "mfcc -i " + (synth_dir / "ch1.wav").string() +
                       " --set mfcc.frame_len_s=0.5 --set mfcc.hop_s=0.25 ";
    REQUIRE(run_cli(base + "--threads 1 -o " + m1.string()) == 0);
    REQUIRE(run_cli(base + "--threads 4 -o " + m4.string()) == 0);
    REQUIRE(same_bytes(m1 / "mfcc.csv", m4 / "mfcc.csv"));

    auto replay = fresh_dir("mfcc_replay");
    REQUIRE(run_cli("rerun " + (m1 / "run_config.txt").string() + " -o " +
                    replay.string()) == 0);
    REQUIRE(same_bytes(m1 / "mfcc.csv", replay / "mfcc.csv"));
  }
}

TEST_CASE("sweep subcommand emits a score table with one selected row") {
  auto dir = fresh_dir("sweep");
  // build two correlated series CSVs through synth voltage in csv format
  REQUIRE(run_cli("synth voltage --duration 200 --rate 2 "
                  "--shared 0.05:1.0 --noise-sd 0.4 --seed 9 --format csv -o " +
                  dir.string()) == 0);
  auto out = fresh_dir("sweep_out");
  REQUIRE(run_cli("sweep --a " + (dir / "ch1.csv").string() + " --b " +
                  (dir / "ch2.csv").string() + " --lengths 7,14,21,42 -o " +
                  out.string()) == 0);
  std::string csv = slurp(out / "sweep.csv");
  REQUIRE(csv.rfind("window_s,mean_abs_r,n_windows,score,selected", 0) == 0);
  std::size_t selected = 0, pos = 0;
  while ((pos = csv.find(",1\n", pos)) != std::string::npos) {
    ++selected;
    pos += 3;
  }
  REQUIRE(selected == 1);
}

TEST_CASE("analysis1 on an identical-trace manifest yields r = 1") {
  auto dir = fresh_dir("a1");
  REQUIRE(run_cli("synth voltage --duration 50 --rate 500 "
                  "--shared '0.05:1.0;2:0.5' --noise-sd 0 --seed 3 -o " +
                  dir.string()) == 0);
  std::ofstream(dir / "m.txt")
      << "[experiment]\nid = 1\nplant = beetroot\ngroup = experimental\n"
         "voltage = ch1.wav; ch2.wav\nn_plants = 2\n";
  auto out = fresh_dir("a1_out");
  REQUIRE(run_cli("analysis1 --manifest " + (dir / "m.txt").string() +
                  " -o " + out.string()) == 0);
  std::string csv = slurp(out / "analysis1" / "beetroot.csv");
  REQUIRE_THAT(csv, Catch::Matchers::ContainsSubstring("label,correlation_r"));
  REQUIRE_THAT(csv, Catch::Matchers::ContainsSubstring("01,1,***"));
  REQUIRE(fs::exists(out / "analysis1" / "beetroot.txt"));
  REQUIRE(fs::exists(out / "analysis1" / "beetroot.svg"));
  REQUIRE(fs::exists(out / "run_config.txt"));

  SECTION("rerun reproduces all table files bit-identically") {
    auto replay = fresh_dir("a1_replay");
    REQUIRE(run_cli("rerun " + (out / "run_config.txt").string() + " -o " +
                    replay.string()) == 0);
    REQUIRE(same_bytes(out / "analysis1" / "beetroot.csv",
                       replay / "analysis1" / "beetroot.csv"));
    REQUIRE(same_bytes(out / "analysis1" / "beetroot.svg",
                       replay / "analysis1" / "beetroot.svg"));
  }
}

TEST_CASE("synth frames + track + motion round trip through files") {
  auto frames_dir = fresh_dir("frames");
  REQUIRE(run_cli("synth frames --width 160 --height 160 --n-frames 10 "
                  "--texture noise --shift 0,1 --seed 5 -o " +
                  frames_dir.string()) == 0);
  REQUIRE(fs::exists(frames_dir / "frames.txt"));
  REQUIRE(fs::exists(frames_dir / "frame_0000.pgm"));
  REQUIRE(fs::exists(frames_dir / "truth.csv"));

  SECTION("track recovers downward movement of about 1 px/frame") {
    auto out = fresh_dir("track_out");
    REQUIRE(run_cli("track --frames " + (frames_dir / "frames.txt").string() +
                    " -o " + out.string()) == 0);
    std::string csv = slurp(out / "movement.csv");
    REQUIRE(csv.rfind("t_s,dy_px,n_points", 0) == 0);
    // every interval should report ~1 px downward median movement
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line); // header
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
      auto c1 = line.find(',');
      auto c2 = line.find(',', c1 + 1);
      double dy = std::atof(line.substr(c1 + 1, c2 - c1 - 1).c_str());
      REQUIRE(dy == Catch::Approx(1.0).margin(0.2));
      ++rows;
    }
    REQUIRE(rows == 9);
  }

  SECTION("motion emits per-box binary series") {
    // keep the active stretch under half the intervals so the adaptive
    // median threshold rests on the quiet majority
    auto block_dir = fresh_dir("frames_block");
    REQUIRE(run_cli("synth frames --width 96 --height 96 --n-frames 20 "
                    "--block 30,30,10,10 --active 5-12 --seed 6 -o " +
                    block_dir.string()) == 0);
    std::ofstream(block_dir / "boxes.txt")
        << "left_hand 26 26 20 20\nright_hand 70 70 20 20\n";
    auto out = fresh_dir("motion_out");
    REQUIRE(run_cli("motion --frames " + (block_dir / "frames.txt").string() +
                    " --boxes " + (block_dir / "boxes.txt").string() + " -o " +
                    out.string()) == 0);
    std::string left = slurp(out / "left_hand.csv");
    REQUIRE(left.rfind("t_s,active", 0) == 0);
    REQUIRE_THAT(left, Catch::Matchers::ContainsSubstring(",1"));
    std::string right = slurp(out / "right_hand.csv");
    REQUIRE_THAT(right, !Catch::Matchers::ContainsSubstring(",1"));
  }
}

TEST_CASE("plot renders SVG from series and tables") {
  auto dir = fresh_dir("plot");
  REQUIRE(run_cli("synth voltage --duration 50 --rate 2 --shared 0.05:1 "
                  "--noise-sd 0.1 --seed 4 --format csv -o " +
                  dir.string()) == 0);
  auto out = fresh_dir("plot_out");
  REQUIRE(run_cli("plot --series " + (dir / "ch1.csv").string() + " -o " +
                  out.string()) == 0);
  std::string svg = slurp(out / "plot.svg");
  REQUIRE_THAT(svg, Catch::Matchers::ContainsSubstring("<polyline"));
}
