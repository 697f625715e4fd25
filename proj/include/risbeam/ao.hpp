#pragma once

// Alternating optimization of the receive filters, the transmit precoders,
// and the surface response, maximizing the minimum receiver rate.
//
// One outer iteration refreshes the filters, re-solves every precoder jointly
// in one max-min program under the total power budget (and, when enabled, the
// reradiation caps), then re-solves the surface response under per-element
// amplitude caps and the same reradiation caps. The objective trace is the
// min-rate surrogate evaluated at freshly updated filters, where it coincides
// with the true minimum achievable rate; a decrease triggers a rollback to
// the previous iterate and counts as convergence.
//
// The whole alternation runs from two structurally different surface starts
// (a superposed redirection profile and a random draw) and keeps the better
// final objective.

#include <vector>

#include <Eigen/Dense>

#include "risbeam/channel.hpp"
#include "risbeam/objective.hpp"
#include "risbeam/scene.hpp"

namespace risbeam {

struct AOOptions {
  double epsilon = 1e-8;     // stop when |f_t - f_{t-1}| <= epsilon
  int max_outer_iters = 100;
  bool mask_enabled = false;
  double solver_tol = 1e-8;  // conic sub-solver pass-through
  int solver_max_iter = 200;
  bool verbose = false;      // per-iteration trace lines on stderr
};

struct Solution {
  Eigen::VectorXcd theta;
  std::vector<Eigen::MatrixXcd> F;
  std::vector<double> objective_trace;  // f_0 .. f_T, non-decreasing
  std::vector<double> rates;            // final per-receiver achievable rates
  int iterations = 0;                   // outer iterations executed
  double wall_time_s = 0.0;
};

// min over receivers of the variational bound at the given filters.
double objective_f(const AuxiliaryFilters& filters, const ChannelSet& cs,
                   const Eigen::VectorXcd& theta,
                   const std::vector<Eigen::MatrixXcd>& F, double sigma2);

// Observation probes at the 1-degree mask grid of the scenario.
std::vector<ObservationProbe> mask_probes(const Scenario& s,
                                          const SceneGeometry& g);

// Scales theta toward zero until every probe's reradiated power is within
// rho_w (identity when already compliant).
Eigen::VectorXcd project_mask_power(const ChannelSet& cs,
                                    const Eigen::VectorXcd& theta,
                                    const std::vector<Eigen::MatrixXcd>& F,
                                    const std::vector<ObservationProbe>& probes,
                                    double rho_w);

// Re-solves receiver `target`'s precoder as one concave max-min sub-problem
// at fixed theta and the given filters, under the residual power budget
// P_max minus the power of the other precoders. Shared by the alternating
// optimizer and the discrete-phase search.
Eigen::MatrixXcd solve_precoder_subproblem(const AuxiliaryFilters& filters,
                                           const ChannelSet& cs,
                                           const Eigen::VectorXcd& theta,
                                           const std::vector<Eigen::MatrixXcd>& F,
                                           double sigma2, int target,
                                           double P_max_w, double tol,
                                           int max_iter);

// Re-solves every precoder jointly as one concave max-min program over the
// stacked precoder vector, under the total power budget and, when probes are
// given, the reradiation caps at the current theta. Sequential per-receiver
// updates stall once the receiver rates tie -- lifting the minimum then needs
// a coordinated move across all precoders -- so the alternating optimizer and
// the discrete-phase search use this joint step. F supplies the per-receiver
// shapes and must be mask-feasible when probes are given.
std::vector<Eigen::MatrixXcd> solve_joint_precoders(
    const AuxiliaryFilters& filters, const ChannelSet& cs,
    const Eigen::VectorXcd& theta, const std::vector<Eigen::MatrixXcd>& F,
    double sigma2, double P_max_w,
    const std::vector<ObservationProbe>& probes, double rho_w, double tol,
    int max_iter);

Solution optimize_uacp(const Scenario& s, const ChannelSet& cs,
                       const AOOptions& opts);

} // namespace risbeam
