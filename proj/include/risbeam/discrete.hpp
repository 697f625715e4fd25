#pragma once

// Greedy coordinate search of the surface response over an L-level phase
// codebook, alternating with the same convex precoder updates as the
// continuous optimizer.
//
// One round sweeps the surface elements in order; for each element every
// codebook candidate is scored by the min-receiver surrogate (incremental
// O(1) quadratic-form updates, caches rebuilt exactly at round boundaries)
// and the best candidate that keeps every mask probe within the power cap is
// accepted. Elements whose current value is off the codebook (possible right
// after the warm start, whose continuous phases are normalized and then
// scaled into the mask) are forced onto it by the first sweep that finds any
// feasible candidate; that restoration move may lower the objective, so
// monotonicity of the trace is guaranteed only from the first all-codebook
// iterate onward. After each sweep the precoders are re-solved receiver by
// receiver and the filters refreshed; because those updates ignore the mask,
// the precoders are then uniformly rescaled back inside the cap whenever
// they overshoot it. The run converges when a round makes no forced moves,
// the objective changes by at most epsilon, and the mask holds; the returned
// phases are bit-exact codebook table entries.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "risbeam/ao.hpp"
#include "risbeam/channel.hpp"
#include "risbeam/objective.hpp"
#include "risbeam/scene.hpp"

namespace risbeam {

enum class GreedyInit {
  kFromContinuous,  // warm start from the masked continuous optimizer
  kRandom,          // uniform random codebook phases
};

struct GreedyOptions {
  int L = 4;                 // codebook size, >= 1
  double epsilon = 1e-8;     // objective-change convergence threshold
  int max_sweeps = 50;
  GreedyInit init_mode = GreedyInit::kFromContinuous;
  double solver_tol = 1e-8;  // precoder sub-solver pass-through
  int solver_max_iter = 200;
  int warm_start_iters = 100;  // outer-iteration budget of the warm start
  bool verbose = false;        // per-round trace lines on stderr
};

// The codebook e^{j 2 pi l / L}, l = 0..L-1. Returned phases of the greedy
// search are bit-exact copies of these table entries.
std::vector<std::complex<double>> phase_codebook(int L);

// Scales theta toward zero so the largest quadratic-form power meets rho_w
// with equality (identity when already compliant). Quadratic-form variant of
// the channel-level projection in ao.hpp.
Eigen::VectorXcd project_mask_forms(
    const Eigen::VectorXcd& theta,
    const std::vector<Eigen::MatrixXcd>& mask_forms, double rho_w);

// True iff theta's reradiated power is within rho_w at every mask form
// (vacuously true when the form list is empty).
bool mask_indicator(const Eigen::VectorXcd& theta,
                    const std::vector<Eigen::MatrixXcd>& mask_forms,
                    double rho_w);

// Runs the discrete-phase search; the mask is always enforced. Throws
// std::runtime_error when no feasible codebook assignment can be reached
// (diagnostics name the stuck element and its best candidate's mask power).
Solution optimize_uadp(const Scenario& s, const ChannelSet& cs,
                       const GreedyOptions& opts);

} // namespace risbeam
