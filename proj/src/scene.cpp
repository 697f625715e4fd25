#include "risbeam/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "risbeam/units.hpp"

namespace risbeam {

double Scenario::wavelength_m() const { return kSpeedOfLight / frequency_hz; }

void Scenario::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("scenario: " + msg); };
  if (frequency_hz <= 0) fail("frequency_hz must be positive");
  if (D_m <= 0 || d_ris_m <= 0) fail("D_m and d_ris_m must be positive");
  if (D_m <= d_ris_m) fail("D_m must exceed d_ris_m");
  if (theta_ref_deg.empty()) fail("at least one reflection angle required");
  if (N_r.size() != theta_ref_deg.size())
    fail("N_r must have one entry per reflection angle");
  if (N_t <= 0 || ris_rows <= 0 || ris_cols <= 0) fail("array sizes must be positive");
  for (int nr : N_r)
    if (nr <= 0) fail("receiver antenna counts must be positive");
  if (K_r < 0) fail("K_r must be nonnegative");
  if (P_max_w <= 0) fail("P_max_w must be positive");
  if (sigma2_w <= 0) fail("sigma2_w must be positive");
  if (rho_w <= 0) fail("rho_w must be positive");
  if (phase_levels < 1) fail("phase_levels must be >= 1");
  if (!(theta_low_deg < theta_high_deg)) fail("theta_low_deg must be below theta_high_deg");

  auto in_open_quadrant = [](double a) { return a > 0.0 && a < 90.0; };
  if (!in_open_quadrant(theta_inc_deg)) fail("theta_inc_deg must lie in (0, 90)");
  double prev = -1e300;
  for (double a : theta_ref_deg) {
    if (!in_open_quadrant(a)) fail("every theta_ref_deg must lie in (0, 90)");
    if (!(a > prev)) fail("theta_ref_deg must be strictly increasing");
    prev = a;
  }
  if (theta_inc_deg < theta_low_deg || theta_inc_deg > theta_high_deg)
    fail("theta_inc_deg outside [theta_low_deg, theta_high_deg]");
  for (double a : theta_ref_deg)
    if (a < theta_low_deg || a > theta_high_deg)
      fail("theta_ref_deg outside [theta_low_deg, theta_high_deg]");
}

SceneGeometry build_geometry(const Scenario& s) {
  s.validate();
  SceneGeometry g;
  g.lambda_m = s.wavelength_m();
  const double spacing = g.lambda_m / 2.0;

  const double ti = deg2rad(s.theta_inc_deg);
  g.l_t = s.d_ris_m / std::tan(ti);
  g.d1 = std::sqrt(s.d_ris_m * s.d_ris_m + g.l_t * g.l_t);
  g.cos_gamma1 = g.l_t / g.d1;

  const double w = s.D_m - s.d_ris_m;
  const int n = s.num_receivers();
  g.l_r.resize(n);
  g.d2.resize(n);
  g.cos_gamma2.resize(n);
  for (int i = 0; i < n; ++i) {
    const double tr = deg2rad(s.theta_ref_deg[i]);
    g.l_r[i] = w / std::tan(tr);
    g.d2[i] = std::sqrt(w * w + g.l_r[i] * g.l_r[i]);
    g.cos_gamma2[i] = g.l_r[i] / g.d2[i];
  }

  // RIS elements: rectangular grid in the x-y plane centered at the origin,
  // enumerated row-major over (row, col).
  g.element_positions.reserve(static_cast<size_t>(s.n_ris()));
  for (int r = 0; r < s.ris_rows; ++r) {
    for (int c = 0; c < s.ris_cols; ++c) {
      const double x = (c - (s.ris_cols - 1) / 2.0) * spacing;
      const double y = (r - (s.ris_rows - 1) / 2.0) * spacing;
      g.element_positions.emplace_back(x, y, 0.0);
    }
  }

  // Transmit/receive antennas: z-axis lines centered on the midpoints.
  auto line_array = [&](const Eigen::Vector3d& mid, int count) {
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k) {
      pts.emplace_back(mid.x(), mid.y(), mid.z() + (k - (count - 1) / 2.0) * spacing);
    }
    return pts;
  };
  g.tx_antenna_positions = line_array({-s.d_ris_m, 0.0, g.l_t}, s.N_t);
  g.rx_antenna_positions.resize(n);
  for (int i = 0; i < n; ++i) {
    g.rx_antenna_positions[i] = line_array({w, 0.0, g.l_r[i]}, s.N_r[i]);
  }
  return g;
}

namespace {
double path_loss_from_parts(double lambda, double cg1, double cg2, double d1, double d2) {
  const double num = kAntennaGainTx * kAntennaGainRx * std::pow(lambda, 4) * cg1 * cg2;
  const double den = 256.0 * kPi * kPi * d1 * d1 * d2 * d2;
  return num / den;
}
} // namespace

double path_loss_factor(const SceneGeometry& g, int receiver) {
  if (receiver < 0 || receiver >= static_cast<int>(g.d2.size()))
    throw std::out_of_range("path_loss_factor: receiver index");
  return path_loss_from_parts(g.lambda_m, g.cos_gamma1, g.cos_gamma2[receiver],
                              g.d1, g.d2[receiver]);
}

double path_loss_factor_probe(const SceneGeometry& g, double angle_deg, double distance_m) {
  const double cg2 = std::cos(deg2rad(angle_deg));
  return path_loss_from_parts(g.lambda_m, g.cos_gamma1, cg2, g.d1, distance_m);
}

std::vector<double> MaskSpec::grid(double spacing_deg) const {
  std::vector<double> out;
  for (const auto& [lo, hi] : intervals_deg) {
    double a = lo;
    while (a < hi - 1e-9) {
      out.push_back(a);
      a += spacing_deg;
    }
    out.push_back(hi);
  }
  return out;
}

bool MaskSpec::contains(double angle_deg) const {
  for (const auto& [lo, hi] : intervals_deg)
    if (angle_deg >= lo - 1e-12 && angle_deg <= hi + 1e-12) return true;
  return false;
}

MaskSpec build_mask_set(const std::vector<double>& refs) {
  if (refs.empty()) throw std::invalid_argument("build_mask_set: empty angle list");
  for (size_t i = 1; i < refs.size(); ++i)
    if (!(refs[i] > refs[i - 1]))
      throw std::invalid_argument("build_mask_set: angles must be strictly increasing");

  MaskSpec m;
  auto push = [&m](double lo, double hi) {
    if (lo <= hi) m.intervals_deg.emplace_back(lo, hi);
  };
  push(-89.0, refs.front() - 15.0);
  for (size_t i = 0; i + 1 < refs.size(); ++i) {
    if (refs[i + 1] - refs[i] > 20.0) push(refs[i] + 10.0, refs[i + 1] - 10.0);
  }
  push(refs.back() + 15.0, 89.0);
  // Keep intervals sorted by lower endpoint (outer-left, middles, outer-right).
  std::sort(m.intervals_deg.begin(), m.intervals_deg.end());
  return m;
}

} // namespace risbeam
