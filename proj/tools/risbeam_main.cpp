// Command-line front end: loads a scenario configuration, runs one of the
// four optimization methods, and exports the beam pattern, the surface state,
// and a machine-readable report into the output directory.
//
// Exit codes: 0 on success, 1 when the optimization itself fails (the
// diagnostic is also written into report.json), 2 on usage errors (bad
// flags, unknown method, unreadable or invalid configuration).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "risbeam/channel.hpp"
#include "risbeam/report.hpp"
#include "risbeam/scene.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "risbeam: multi-receiver transmit-precoder and reconfigurable-surface "
      "optimizer with reradiation-mask control"};
  std::string config_path;
  std::string method;
  std::string out_dir = "out";
  long long seed = 0;
  double sweep_grid_deg = 0.5;
  double bandwidth_hz = risbeam::kDefaultBandwidthHz;
  double angle_noise_deg = 0.0;
  bool verbose = false;

  app.add_option("--config", config_path,
                 "Scenario configuration file (.json or .toml)")
      ->required();
  app.add_option("--method", method, "uacp | uacp-mask | uadp | nn")
      ->required();
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--out", out_dir, "Output directory (created if missing)");
  app.add_option("--sweep-grid", sweep_grid_deg,
                 "Beam-pattern angle spacing in degrees (default 0.5)");
  app.add_option("--bandwidth-hz", bandwidth_hz,
                 "Bandwidth scaling the Mbps columns (default 1e7)");
  app.add_option("--angle-noise-deg", angle_noise_deg,
                 "Uniform angle jitter added to the network inputs (nn only)");
  app.add_flag("--verbose", verbose, "Per-iteration progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  std::string method_label;
  try {
    method_label = risbeam::canonical_method(method);
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  if (!(sweep_grid_deg > 0.0) || sweep_grid_deg > 178.0) {
    std::cerr << "usage error: --sweep-grid must be in (0, 178]\n";
    return 2;
  }
  if (!(bandwidth_hz > 0.0)) {
    std::cerr << "usage error: --bandwidth-hz must be positive\n";
    return 2;
  }
  if (angle_noise_deg < 0.0) {
    std::cerr << "usage error: --angle-noise-deg must be >= 0\n";
    return 2;
  }

  risbeam::Scenario s;
  risbeam::SceneGeometry geom;
  risbeam::ChannelSet cs;
  try {
    s = risbeam::load_scenario(config_path);
    if (seed_opt->count() > 0) s.seed = seed;
    s.validate();
    geom = risbeam::build_geometry(s);
    cs = risbeam::assemble_channels(s, geom);
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "usage error: cannot create output directory '" << out_dir
              << "': " << ec.message() << "\n";
    return 2;
  }

  risbeam::RunMethodOptions opts;
  opts.angle_noise_deg = angle_noise_deg;
  opts.verbose = verbose;

  try {
    const risbeam::MethodRun run = risbeam::run_method(s, cs, method, opts);
    const risbeam::RunReport rep =
        risbeam::build_report(s, cs, run, bandwidth_hz);
    const auto pattern = risbeam::beam_pattern(
        s, geom, cs, run.solution.theta, run.solution.F,
        risbeam::angle_grid(-89.0, 89.0, sweep_grid_deg));
    risbeam::write_beam_pattern_csv(out_dir + "/beam_pattern.csv", pattern);
    risbeam::write_ris_state_csv(out_dir + "/ris_state.csv", run.solution.theta,
                                 s.ris_rows, s.ris_cols);
    risbeam::write_report_json(out_dir + "/report.json", rep);
    // Wall time is volatile; it goes to stderr, never into the artifacts.
    std::fprintf(stderr, "wall_time_s=%.3f\n", rep.wall_time_s);
    std::printf(
        "method=%s min_rate=%.6g bits/s/Hz (%.6g Mbps at %.6g Hz) "
        "iterations=%d max_mask_power_dbm=%.6g outputs=%s\n",
        rep.method.c_str(), rep.min_rate_bits,
        rep.min_rate_bits * bandwidth_hz / 1e6, bandwidth_hz, rep.iterations,
        rep.max_mask_power_dbm, out_dir.c_str());
    return 0;
  } catch (const std::exception& e) {
    risbeam::RunReport rep;
    rep.method = method_label;
    rep.error = e.what();
    rep.bandwidth_hz = bandwidth_hz;
    rep.config_echo = s;
    try {
      risbeam::write_report_json(out_dir + "/report.json", rep);
    } catch (const std::exception& io) {
      std::cerr << "error: " << io.what() << "\n";
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
