#pragma once

// Rician channel synthesis and end-to-end effective channels.
//
// The transmitter reaches each receiver only through the surface:
//   H_i = sqrt(beta_inv_i) * G_i * diag(theta) * U
// where U (N_ris x N_t) is the transmitter->surface channel, G_i
// (N_r_i x N_ris) the surface->receiver-i channel, and beta_inv_i the
// end-to-end path-loss power factor. U and G_i are Rician: a deterministic
// pure-phase line-of-sight part from exact element-pairwise distances plus
// an i.i.d. complex-Gaussian scattered part.
//
// Observation probes are single-antenna far-field points used to evaluate
// reradiation toward arbitrary angles. Their row is the deterministic
// plane-wave steering vector exp(+j 2 pi x_n sin(psi) / lambda) scaled by
// the square root of the probe's path-loss factor; the common bulk-distance
// phase is dropped so probes at +/-psi are exactly elementwise conjugate.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "risbeam/rng.hpp"
#include "risbeam/scene.hpp"

namespace risbeam {

struct ChannelSet {
  Eigen::MatrixXcd U;                // N_ris x N_t
  std::vector<Eigen::MatrixXcd> G;   // per receiver, N_r_i x N_ris
  std::vector<double> beta_inv;      // per receiver, 1/beta (power factor)
  long long rng_seed = 0;

  int num_receivers() const { return static_cast<int>(G.size()); }
  int n_ris() const { return static_cast<int>(U.rows()); }
  int n_tx() const { return static_cast<int>(U.cols()); }

  // Path-loss-weighted receive channel sqrt(beta_inv_i) * G_i.
  Eigen::MatrixXcd g_eff(int i) const;
};

struct ObservationProbe {
  double angle_deg = 0.0;
  Eigen::MatrixXcd G_ob;   // 1 x N_ris, includes sqrt(beta_inv_ob)
  double beta_inv_ob = 0.0;
};

// Entry (a,b) = exp(-j 2 pi |row_points[a] - col_points[b]| / lambda).
Eigen::MatrixXcd los_matrix(const std::vector<Eigen::Vector3d>& row_points,
                            const std::vector<Eigen::Vector3d>& col_points,
                            double lambda_m);

// (1/sqrt(K_r+1)) * (sqrt(K_r) * los + NLOS), NLOS entries i.i.d. unit-variance
// circularly symmetric complex Gaussian drawn row-major from `rng`.
Eigen::MatrixXcd rician_channel(const Eigen::MatrixXcd& los, double K_r,
                                RandomStream& rng);

// Builds U, every G_i, and every beta_inv_i for the scenario. Each matrix
// consumes its own named substream ("U", "G1", "G2", ...) of s.seed, so adding
// receivers never perturbs earlier draws.
ChannelSet assemble_channels(const Scenario& s, const SceneGeometry& g);

// H_i = sqrt(beta_inv_i) * G_i * diag(theta) * U. Throws on size mismatch.
Eigen::MatrixXcd effective_channel(const ChannelSet& cs,
                                   const Eigen::VectorXcd& theta, int i);

// Far-field single-antenna probe at `angle_deg` from the surface normal, at
// distance D_m, in the incidence plane.
ObservationProbe observation_probe(const Scenario& s, const SceneGeometry& g,
                                   double angle_deg);

// Binary regression fixtures (magic + dims + row-major interleaved re/im).
void dump_channels(const ChannelSet& cs, const std::string& path);
ChannelSet load_channels(const std::string& path);

} // namespace risbeam
