#pragma once

// Scene description: experiment parameters, 3D geometry, path loss, and the
// angular reradiation-mask interval set.
//
// Geometry convention (all lengths in meters, angles from the surface normal
// of the RIS, which occupies the x-y plane with elements on a half-wavelength
// rectangular grid centered at the origin):
//   transmitter midpoint  (-d_ris, 0, l_t)   with l_t  = d_ris/tan(theta_inc)
//   receiver i midpoint   (D-d_ris, 0, l_r_i) with l_r_i = (D-d_ris)/tan(theta_ref_i)
// so the transmitter sits at angle theta_inc on the negative-x side and
// receiver i at angle theta_ref_i on the positive-x side. Transmit/receive
// antennas are linear arrays along the z-axis at half-wavelength spacing,
// centered on those midpoints.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace risbeam {

struct Scenario {
  double frequency_hz = 27e9;
  double D_m = 100.0;     // transmitter-to-receiver-plane distance
  double d_ris_m = 20.0;  // transmitter-plane-to-RIS distance
  double theta_inc_deg = 20.0;
  std::vector<double> theta_ref_deg; // strictly increasing
  int N_t = 8;
  std::vector<int> N_r; // one entry per receiver
  int ris_rows = 12;
  int ris_cols = 12;
  double K_r = 1e5;       // Rician factor
  double P_max_w = 2.0;   // total transmit power budget
  double sigma2_w = 1e-12; // noise variance
  double rho_w = 1e-15;   // mask power cap
  long long seed = 1;
  int phase_levels = 4;   // discrete-phase codebook size
  double theta_low_deg = 10.0;  // admissible angle range (also the encoder range)
  double theta_high_deg = 60.0;

  int num_receivers() const { return static_cast<int>(theta_ref_deg.size()); }
  int n_ris() const { return ris_rows * ris_cols; }
  double wavelength_m() const;

  // Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

struct SceneGeometry {
  // One 3D point per RIS element, row-major over (row, col).
  std::vector<Eigen::Vector3d> element_positions;
  std::vector<Eigen::Vector3d> tx_antenna_positions;
  std::vector<std::vector<Eigen::Vector3d>> rx_antenna_positions; // per receiver
  double lambda_m = 0.0;
  double l_t = 0.0;
  std::vector<double> l_r;
  double d1 = 0.0;
  std::vector<double> d2;
  double cos_gamma1 = 0.0;
  std::vector<double> cos_gamma2;
};

// Antenna gains of the transmit and receive sides used by the path-loss model.
inline constexpr double kAntennaGainTx = 2.0;
inline constexpr double kAntennaGainRx = 2.0;

// Builds all element/antenna positions and derived lengths from a scenario.
// Throws std::invalid_argument for degenerate angles or D <= d_ris.
SceneGeometry build_geometry(const Scenario& s);

// Free-space end-to-end path-loss factor 1/beta for receiver i:
//   G_t G_r lambda^4 cos(gamma1) cos(gamma2_i) / (256 pi^2 d1^2 d2_i^2).
double path_loss_factor(const SceneGeometry& g, int receiver);

// Same model evaluated for a far-field observation probe at distance
// `distance_m` and angle `angle_deg` from the RIS normal.
double path_loss_factor_probe(const SceneGeometry& g, double angle_deg,
                              double distance_m);

// Angular interval set over which reradiation is capped.
struct MaskSpec {
  std::vector<std::pair<double, double>> intervals_deg; // closed [lo, hi]
  // 1-degree discretization with inclusive endpoints, concatenated over
  // intervals in order.
  std::vector<double> grid(double spacing_deg = 1.0) const;
  bool contains(double angle_deg) const;
};

// Builds the forbidden interval set from the sorted reflection angles:
// outer guard bands [-89, ref_first - 15] and [ref_last + 15, 89], plus a
// middle band [left + 10, right - 10] for every adjacent pair with gap > 20.
// Empty intervals are dropped.
MaskSpec build_mask_set(const std::vector<double>& theta_refs_deg);

// Configuration ingest. Field names match the Scenario members exactly.
// JSON and a flat TOML subset (top-level key = value pairs) are accepted,
// selected by file extension (.json / .toml).
Scenario load_scenario(const std::string& path);
Scenario scenario_from_json_text(const std::string& text);
Scenario scenario_from_toml_text(const std::string& text);

} // namespace risbeam
