#pragma once

// Run artifacts and the shared method dispatcher.
//
// A run produces three files: beam_pattern.csv (reradiated power versus
// observation angle), ris_state.csv (per-element surface coefficients), and
// report.json (rates, mask headroom, and a full echo of the scenario, with
// stable key order so identical runs serialize byte-identically). Wall-clock
// time is kept in memory and printed to stderr only — it never enters a
// serialized artifact, so repeated runs of the same (config, seed, method)
// produce identical bytes.
//
// CSV conventions: header row, comma separator, '.' decimal point, LF line
// endings, numeric fields printed with "%.17g" so values survive a
// parse round trip. Rates are reported in bits/s/Hz and, scaled by a declared
// bandwidth (default 10 MHz), in Mbps.

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "risbeam/ao.hpp"
#include "risbeam/channel.hpp"
#include "risbeam/scene.hpp"

namespace risbeam {

inline constexpr double kDefaultBandwidthHz = 1e7;

// 10 log10(P) + 30; -inf for P = 0.
double power_dbm(double power_w);

struct RunMethodOptions {
  double angle_noise_deg = 0.0; // network-input angle jitter (nn only)
  bool verbose = false;
};

// One optimizer run, tagged with its canonical method label.
struct MethodRun {
  std::string method;         // uacp | uacp_mask | uadp | nn
  bool mask_enforced = false; // whether the reradiation cap was applied
  Solution solution;
};

// Normalizes a method name to its canonical label (uacp, uacp_mask, uadp,
// nn); throws std::invalid_argument for anything else.
std::string canonical_method(const std::string& method);

// Dispatches to the continuous optimizer (with or without the mask), the
// discrete-phase search, or the network trainer. Accepts "uacp",
// "uacp-mask"/"uacp_mask", "uadp", and "nn"; anything else throws
// std::invalid_argument. Optimizer failures propagate as std::runtime_error.
MethodRun run_method(const Scenario& s, const ChannelSet& cs,
                     const std::string& method, const RunMethodOptions& opts);

struct RunReport {
  std::string method;
  std::string error; // empty on success; failure diagnostic otherwise
  double bandwidth_hz = kDefaultBandwidthHz;
  double min_rate_bits = 0.0;
  std::vector<double> per_receiver_rates; // bits/s/Hz
  int iterations = 0;
  double wall_time_s = 0.0; // in-memory only, never serialized
  bool mask_enforced = false;
  double max_mask_power_dbm = 0.0; // worst probe at the returned solution
  Scenario config_echo;
};

// Evaluates rates and the worst reradiated probe power at the run's solution.
RunReport build_report(const Scenario& s, const ChannelSet& cs,
                       const MethodRun& run, double bandwidth_hz);

// Inclusive regular grid lo, lo+spacing, ..., hi (hi always included).
std::vector<double> angle_grid(double lo_deg, double hi_deg,
                               double spacing_deg);

// Reradiated power (Watts) toward a far-field probe per grid angle. Angles
// must lie within [-89, 89] degrees.
std::vector<std::pair<double, double>> beam_pattern(
    const Scenario& s, const SceneGeometry& g, const ChannelSet& cs,
    const Eigen::VectorXcd& theta, const std::vector<Eigen::MatrixXcd>& F,
    const std::vector<double>& angles_deg);

void write_beam_pattern_csv(const std::string& path,
                            const std::vector<std::pair<double, double>>& pattern);

// Per-element table: element index (row-major over the grid), grid row and
// column, real/imaginary parts, amplitude, and phase in [0, 2*pi).
void write_ris_state_csv(const std::string& path,
                         const Eigen::VectorXcd& theta, int rows, int cols);

// Stable-key-order JSON. Parse -> serialize -> parse is the identity on the
// serialized text. wall_time_s is intentionally absent from the text.
std::string report_to_json_text(const RunReport& r);
RunReport report_from_json_text(const std::string& text);
void write_report_json(const std::string& path, const RunReport& r);

// One (RIS size, method) cell of the size sweep.
struct SweepCell {
  int ris_rows = 0;
  int ris_cols = 0;
  std::string method;
  double min_rate_bits = 0.0; // NaN when the cell failed
  std::string error;          // empty on success
};

// Runs every method at every size on the base scenario (seed and all other
// fields unchanged). Cells run concurrently; failures are recorded in the
// cell and the sweep continues. Result order is size-major, method-minor.
std::vector<SweepCell> rate_vs_ris_size(
    const Scenario& base, const std::vector<std::pair<int, int>>& sizes,
    const std::vector<std::string>& methods, const RunMethodOptions& opts);

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepCell>& cells,
                     double bandwidth_hz);

} // namespace risbeam
