#pragma once

// Rates, the variational rate lower bound, and the Hermitian quadratic forms
// consumed by the sub-solvers.
//
// Rate model: receiver i sees y_i = H_i f_i s_i + sum_{j != i} H_i f_j s_j + n,
// so its achievable rate is
//   R_i = log2 det(I + H_i F_i Omega_i^{-1} F_i^H H_i^H),
//   Omega_i = sum_{j != i} H_i F_j F_j^H H_i^H + sigma2 I.
//
// The surrogate is the variational lower bound on R_i parameterized by a
// receive filter W_i and an error covariance Sigma_i; it is concave separately
// in the precoders and in the surface response, and it touches R_i exactly at
// the minimum-mean-square-error choice of (W_i, Sigma_i) returned by
// update_filters. All rate-like quantities are in bits: the 1/ln(2) scaling of
// the trace algebra is folded into E, b, c, J, K, and the piece constants so
// that the assembled quadratics reproduce surrogate_value exactly.
//
// Factor convention: every positive-semidefinite form stores a thin factor R
// with form = R^H R (so x^H form x = |R x|^2); ranks are small (a few stream
// counts), which the conic solver exploits. Mask forms are in Watts (no bits
// scaling): theta^H M theta is the absolute reradiated power at that probe.

#include <vector>

#include <Eigen/Dense>

#include "risbeam/channel.hpp"

namespace risbeam {

struct AuxiliaryFilters {
  std::vector<Eigen::MatrixXcd> W;      // per receiver, N_r x N_r
  std::vector<Eigen::MatrixXcd> Sigma;  // per receiver, Hermitian PD
};

// Surrogate of receiver i as a function of theta:
//   s_i(theta) = -theta^H E_i theta + 2 Re(theta^H b_i) + c_i
// plus one Watts-valued mask form per mask grid angle.
struct ThetaQuadratics {
  std::vector<Eigen::MatrixXcd> E;         // per receiver, N_ris x N_ris PSD
  std::vector<Eigen::MatrixXcd> E_factor;  // rank x N_ris, E = R^H R
  std::vector<Eigen::VectorXcd> b;         // per receiver, N_ris
  std::vector<double> c;                   // per receiver
  std::vector<double> mask_angles_deg;     // mask grid
  std::vector<Eigen::MatrixXcd> mask_forms;    // per angle, N_ris x N_ris PSD
  std::vector<Eigen::MatrixXcd> mask_factors;  // per angle, rank x N_ris
};

// Surrogate of receiver m as a function of the target receiver's precoder F
// (all other precoders and the filters held fixed):
//   piece_m(F) = -Tr(F^H J[m] F) + [m == target] 2 Re Tr(K F) + consts[m].
struct PrecoderQuadratics {
  int target = 0;
  std::vector<Eigen::MatrixXcd> J;         // per receiver, N_t x N_t PSD
  std::vector<Eigen::MatrixXcd> J_factor;  // rank x N_t, J = R^H R
  Eigen::MatrixXcd K;                      // target only, N_r x N_t
  Eigen::VectorXcd b_vec;                  // conj-stacked K acting on vec(F)
  std::vector<double> consts;              // per receiver piece
  double residual_power_w = 0.0;           // P_max - power of the other precoders
};

double achievable_rate(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                       const std::vector<Eigen::MatrixXcd>& F, double sigma2,
                       int i);

// min over receivers of achievable_rate.
double min_rate(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                const std::vector<Eigen::MatrixXcd>& F, double sigma2);

// Minimum-mean-square-error filters: W_i = (H_i F_i)^H T_i^{-1} with
// T_i = (H_i F_i)(H_i F_i)^H + Omega_i, and Sigma_i = I - W_i H_i F_i.
AuxiliaryFilters update_filters(const ChannelSet& cs,
                                const Eigen::VectorXcd& theta,
                                const std::vector<Eigen::MatrixXcd>& F,
                                double sigma2);

// Variational bound of receiver i at arbitrary (W, Sigma). Equals
// achievable_rate when evaluated at update_filters output.
double surrogate_value(const AuxiliaryFilters& filters, const ChannelSet& cs,
                       const Eigen::VectorXcd& theta,
                       const std::vector<Eigen::MatrixXcd>& F, double sigma2,
                       int i);

// sum_i |G_ob diag(theta) U F_i|_F^2 in Watts.
double reradiated_power(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                        const std::vector<Eigen::MatrixXcd>& F,
                        const ObservationProbe& probe);

ThetaQuadratics build_theta_quadratics(const AuxiliaryFilters& filters,
                                       const ChannelSet& cs,
                                       const std::vector<Eigen::MatrixXcd>& F,
                                       double sigma2,
                                       const std::vector<ObservationProbe>& probes);

// Quadratic pieces for re-optimizing precoder `target` under the residual
// power budget P_max - sum_{j != target} |F_j|_F^2 (throws if that is <= 0).
PrecoderQuadratics build_precoder_quadratics(const AuxiliaryFilters& filters,
                                             const ChannelSet& cs,
                                             const Eigen::VectorXcd& theta,
                                             const std::vector<Eigen::MatrixXcd>& F,
                                             double sigma2, int target,
                                             double P_max_w);

// Per-receiver ingredients of the variational bound as a joint function of
// every precoder at once:
//   value_m(F_1..F_K) = base[m] + 2 Re tr(K[m] F_m) - sum_j |R[m] F_j|_F^2.
// Unlike the single-target form above nothing is absorbed into constants, so
// one max-min program can re-optimize all precoders together under the total
// power budget.
struct JointPrecoderQuadratics {
  std::vector<Eigen::MatrixXcd> R;     // per receiver, rank x N_t kernel factor
  std::vector<Eigen::MatrixXcd> K;     // per receiver, N_r x N_t linear term
  std::vector<double> base;            // filter- and noise-only constants
};

JointPrecoderQuadratics build_joint_precoder_quadratics(
    const AuxiliaryFilters& filters, const ChannelSet& cs,
    const Eigen::VectorXcd& theta, double sigma2);

// Evaluates value_m of the joint form above.
double joint_precoder_surrogate(const JointPrecoderQuadratics& q,
                                const std::vector<Eigen::MatrixXcd>& F, int m);

// Column-stacking bijection between N_t x N_r precoders and length
// N_t*N_r vectors.
Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& F);
Eigen::MatrixXcd devectorize(const Eigen::VectorXcd& f, int n_t, int n_r);

// Convenience evaluators for the assembled theta quadratics.
double theta_surrogate(const ThetaQuadratics& tq, const Eigen::VectorXcd& theta,
                       int i);
double theta_mask_power(const ThetaQuadratics& tq, const Eigen::VectorXcd& theta,
                        int mask_index);

// log2 det of a Hermitian positive definite matrix (throws std::domain_error
// if the Cholesky factorization fails).
double log2_det_hermitian(const Eigen::MatrixXcd& m);

} // namespace risbeam
