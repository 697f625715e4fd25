#include "risbeam/discrete.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "risbeam/rng.hpp"
#include "risbeam/units.hpp"

namespace risbeam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool in_codebook(const std::complex<double>& v,
                 const std::vector<std::complex<double>>& cb) {
  for (const auto& c : cb)
    if (v.real() == c.real() && v.imag() == c.imag()) return true;
  return false;
}

double max_probe_power(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                       const std::vector<Eigen::MatrixXcd>& F,
                       const std::vector<ObservationProbe>& probes) {
  double worst = 0.0;
  for (const ObservationProbe& p : probes)
    worst = std::max(worst, reradiated_power(cs, theta, F, p));
  return worst;
}

struct SweepStats {
  int moves = 0;   // accepted coordinate changes
  int forced = 0;  // moves that discretized an off-codebook entry
  int stuck = 0;   // off-codebook entries with no feasible candidate
};

// One in-place coordinate pass over the surface. Candidate scores and mask
// powers come from O(1) updates of cached form products; the caches are
// rebuilt from scratch here, so drift cannot outlive a sweep.
SweepStats greedy_sweep(const ThetaQuadratics& tq,
                        const std::vector<std::complex<double>>& cb,
                        double rho_w, Eigen::VectorXcd& theta) {
  const int n_rx = static_cast<int>(tq.E.size());
  const int n_masks = static_cast<int>(tq.mask_forms.size());
  const int n_ris = static_cast<int>(theta.size());
  // Slack for the initial scaled point, which sits on the cap to roundoff.
  const double cap = rho_w * (1.0 + 1e-12);

  std::vector<Eigen::VectorXcd> g(n_rx);
  std::vector<double> q(n_rx);
  std::vector<std::complex<double>> lin(n_rx);
  for (int i = 0; i < n_rx; ++i) {
    g[i] = tq.E[i] * theta;
    q[i] = std::real(theta.dot(g[i]));
    lin[i] = theta.dot(tq.b[i]);
  }
  std::vector<Eigen::VectorXcd> gm(n_masks);
  std::vector<double> pm(n_masks);
  for (int k = 0; k < n_masks; ++k) {
    gm[k] = tq.mask_forms[k] * theta;
    pm[k] = std::real(theta.dot(gm[k]));
  }

  auto min_surrogate = [&]() {
    double worst = kInf;
    for (int i = 0; i < n_rx; ++i)
      worst = std::min(worst, -q[i] + 2.0 * std::real(lin[i]) + tq.c[i]);
    return worst;
  };

  SweepStats st;
  for (int n = 0; n < n_ris; ++n) {
    const std::complex<double> cur = theta(n);
    const bool on_cb = in_codebook(cur, cb);
    bool cur_feasible = true;
    for (int k = 0; k < n_masks; ++k)
      if (pm[k] > cap) { cur_feasible = false; break; }

    // Keeping the current value is an option only when it already lives on
    // the codebook and the surface is mask-compliant; otherwise the best
    // feasible candidate is taken regardless of the objective change.
    double f_best = (on_cb && cur_feasible) ? min_surrogate() : -kInf;
    int best_l = -1;
    double least_violation = kInf; // min over candidates of their worst power
    for (int l = 0; l < static_cast<int>(cb.size()); ++l) {
      const std::complex<double> d = cb[l] - cur;
      if (d.real() == 0.0 && d.imag() == 0.0) continue;
      const double ad2 = std::norm(d);
      double worst_p = 0.0;
      for (int k = 0; k < n_masks; ++k) {
        const double p2 = pm[k] + 2.0 * std::real(std::conj(d) * gm[k](n)) +
                          ad2 * std::real(tq.mask_forms[k](n, n));
        worst_p = std::max(worst_p, p2);
      }
      least_violation = std::min(least_violation, worst_p);
      if (worst_p > cap) continue;
      double f_try = kInf;
      for (int i = 0; i < n_rx; ++i) {
        const double q2 = q[i] + 2.0 * std::real(std::conj(d) * g[i](n)) +
                          ad2 * std::real(tq.E[i](n, n));
        const std::complex<double> lin2 = lin[i] + std::conj(d) * tq.b[i](n);
        f_try = std::min(f_try, -q2 + 2.0 * std::real(lin2) + tq.c[i]);
      }
      if (f_try > f_best) {
        f_best = f_try;
        best_l = l;
      }
    }

    if (best_l >= 0) {
      const std::complex<double> d = cb[best_l] - cur;
      const double ad2 = std::norm(d);
      for (int i = 0; i < n_rx; ++i) {
        q[i] += 2.0 * std::real(std::conj(d) * g[i](n)) +
                ad2 * std::real(tq.E[i](n, n));
        g[i] += d * tq.E[i].col(n);
        lin[i] += std::conj(d) * tq.b[i](n);
      }
      for (int k = 0; k < n_masks; ++k) {
        pm[k] += 2.0 * std::real(std::conj(d) * gm[k](n)) +
                 ad2 * std::real(tq.mask_forms[k](n, n));
        gm[k] += d * tq.mask_forms[k].col(n);
      }
      theta(n) = cb[best_l]; // bit-exact table entry
      ++st.moves;
      if (!on_cb) ++st.forced;
    } else {
      if (!on_cb) ++st.stuck;
      if (!cur_feasible)
        throw std::runtime_error(
            "optimize_uadp: surface element " + std::to_string(n + 1) +
            " has no mask-feasible codebook candidate while the current "
            "surface violates the cap (best candidate peak " +
            std::to_string(least_violation) + " W, cap " +
            std::to_string(rho_w) + " W)");
    }
  }
  return st;
}

} // namespace

std::vector<std::complex<double>> phase_codebook(int L) {
  if (L < 1)
    throw std::invalid_argument("phase_codebook: L must be at least 1");
  std::vector<std::complex<double>> cb(L);
  for (int l = 0; l < L; ++l)
    cb[l] = std::polar(1.0, 2.0 * kPi * static_cast<double>(l) / L);
  return cb;
}

Eigen::VectorXcd project_mask_forms(
    const Eigen::VectorXcd& theta,
    const std::vector<Eigen::MatrixXcd>& mask_forms, double rho_w) {
  double worst = 0.0;
  for (const auto& m : mask_forms)
    worst = std::max(worst, std::real(theta.dot(m * theta)));
  if (worst <= rho_w) return theta;
  return Eigen::VectorXcd(std::sqrt(rho_w / worst) * theta);
}

bool mask_indicator(const Eigen::VectorXcd& theta,
                    const std::vector<Eigen::MatrixXcd>& mask_forms,
                    double rho_w) {
  for (const auto& m : mask_forms)
    if (std::real(theta.dot(m * theta)) > rho_w) return false;
  return true;
}

Solution optimize_uadp(const Scenario& s, const ChannelSet& cs,
                       const GreedyOptions& opts) {
  if (opts.L < 1)
    throw std::invalid_argument("optimize_uadp: L must be at least 1");
  if (!(opts.epsilon > 0.0))
    throw std::invalid_argument("optimize_uadp: epsilon must be positive");
  if (opts.max_sweeps < 1)
    throw std::invalid_argument("optimize_uadp: max_sweeps must be positive");
  const auto t_start = std::chrono::steady_clock::now();
  const int n_rx = cs.num_receivers();
  const int n_ris = cs.n_ris();
  const int n_t = cs.n_tx();
  const double sigma2 = s.sigma2_w;
  const std::vector<std::complex<double>> cb = phase_codebook(opts.L);

  SceneGeometry geom = build_geometry(s);
  const std::vector<ObservationProbe> probes = mask_probes(s, geom);

  Eigen::VectorXcd theta;
  std::vector<Eigen::MatrixXcd> F;
  if (opts.init_mode == GreedyInit::kFromContinuous) {
    AOOptions ao;
    ao.epsilon = opts.epsilon;
    ao.max_outer_iters = opts.warm_start_iters;
    ao.mask_enabled = true;
    ao.solver_tol = opts.solver_tol;
    ao.solver_max_iter = opts.solver_max_iter;
    const Solution warm = optimize_uacp(s, cs, ao);
    theta = warm.theta;
    for (int n = 0; n < n_ris; ++n) {
      const double a = std::abs(theta(n));
      theta(n) = a > 1e-12 ? theta(n) / a : std::complex<double>(1.0, 0.0);
    }
    F = warm.F;
  } else {
    RandomStream rng(static_cast<std::uint64_t>(s.seed), "uadp-init");
    theta.resize(n_ris);
    for (int n = 0; n < n_ris; ++n)
      theta(n) = cb[static_cast<int>(rng.raw() % cb.size())];
    F.resize(n_rx);
    for (int i = 0; i < n_rx; ++i) {
      Eigen::MatrixXcd f(n_t, s.N_r[i]);
      for (int r = 0; r < f.rows(); ++r)
        for (int c = 0; c < f.cols(); ++c) f(r, c) = rng.complex_normal();
      f *= std::sqrt(s.P_max_w / (2.0 * n_rx)) / f.norm();
      F[i] = f;
    }
  }

  // A unit-modulus start can overshoot the cap: the continuous stage may have
  // met it by scaling the surface amplitudes down, which the normalization
  // above undoes. The sweeps can only move an element while the worst probe
  // stays under the cap, so restore feasibility through the precoders -- with
  // headroom -- rather than through the amplitudes: the phases then get
  // chosen in the same regime the final solution lives in, and the later
  // precoder passes win the power back under the exact cap.
  {
    const double worst0 = max_probe_power(cs, theta, F, probes);
    const double target0 = 0.25 * s.rho_w;
    if (worst0 > target0) {
      const double shrink = std::sqrt(target0 / worst0);
      for (auto& f : F) f *= shrink;
    }
  }
  // Amplitude projection stays as a safety net for pathological starts.
  AuxiliaryFilters filters = update_filters(cs, theta, F, sigma2);
  ThetaQuadratics tq = build_theta_quadratics(filters, cs, F, sigma2, probes);
  theta = project_mask_forms(theta, tq.mask_forms, s.rho_w);
  filters = update_filters(cs, theta, F, sigma2);
  double f_prev = objective_f(filters, cs, theta, F, sigma2);

  Solution sol;
  sol.objective_trace.push_back(f_prev);

  int iters = 0;
  int stuck_rounds = 0;
  for (int t = 1; t <= opts.max_sweeps; ++t) {
    iters = t;
    const Eigen::VectorXcd theta_old = theta;
    const std::vector<Eigen::MatrixXcd> F_old = F;

    filters = update_filters(cs, theta, F, sigma2);
    tq = build_theta_quadratics(filters, cs, F, sigma2, probes);
    const SweepStats st = greedy_sweep(tq, cb, s.rho_w, theta);

    filters = update_filters(cs, theta, F, sigma2);
    F = solve_joint_precoders(filters, cs, theta, F, sigma2, s.P_max_w,
                              probes, s.rho_w, opts.solver_tol,
                              opts.solver_max_iter);
    // The joint precoder step keeps the reradiated power at or under the cap
    // for the current phases, so on clean rounds the rescale below is a
    // no-op.
    //
    // A start that only meets the cap through a deep amplitude down-scaling
    // can leave elements with no feasible unit-modulus candidate at all (any
    // amplitude raise overshoots a probe already sitting at the cap). While
    // that deadlock persists, aim the rescale strictly below the cap, deeper
    // each stuck round, so the next sweep has room to force every element
    // onto the codebook; the precoder updates recover the rate afterwards.
    if (st.stuck > 0)
      ++stuck_rounds;
    else
      stuck_rounds = 0;
    const double cap_target =
        s.rho_w * std::pow(0.25, std::min(stuck_rounds, 20));
    const double worst_now = max_probe_power(cs, theta, F, probes);
    if (worst_now > cap_target) {
      const double shrink = std::sqrt(cap_target / worst_now);
      for (auto& f : F) f *= shrink;
    }
    filters = update_filters(cs, theta, F, sigma2);
    const double f_t = objective_f(filters, cs, theta, F, sigma2);
    const bool discretizing = st.forced > 0 || st.stuck > 0;

    if (opts.verbose)
      std::fprintf(stderr,
                   "uadp sweep=%d f=%.10f moves=%d forced=%d stuck=%d "
                   "mask_max_w=%.3e\n",
                   t, f_t, st.moves, st.forced, st.stuck,
                   max_probe_power(cs, theta, F, probes));

    if (!discretizing && f_t < f_prev) {
      // Solver-noise dip on an all-codebook round: revert and stop.
      theta = theta_old;
      F = F_old;
      break;
    }
    sol.objective_trace.push_back(f_t);
    const bool mask_ok =
        max_probe_power(cs, theta, F, probes) <= s.rho_w * (1.0 + 1e-9);
    const bool converged =
        !discretizing && mask_ok && std::abs(f_t - f_prev) <= opts.epsilon;
    f_prev = f_t;
    if (converged) break;
  }

  int leftover = 0;
  for (int n = 0; n < n_ris; ++n)
    if (!in_codebook(theta(n), cb)) ++leftover;
  if (leftover > 0) {
    char cap[32];
    std::snprintf(cap, sizeof(cap), "%g", s.rho_w);
    throw std::runtime_error(
        "optimize_uadp: " + std::to_string(leftover) +
        " surface elements could not be moved onto the codebook within " +
        std::to_string(opts.max_sweeps) +
        " sweeps without violating the mask cap of " + cap + " W");
  }

  // Roundoff safeguard on the power budget; shrinking the precoders can only
  // lower the reradiated power, so it never breaks mask compliance.
  double power = 0.0;
  for (const auto& f : F) power += f.squaredNorm();
  if (power > s.P_max_w) {
    const double shrink = std::sqrt(s.P_max_w / power);
    for (auto& f : F) f *= shrink;
  }
  const double final_mask = max_probe_power(cs, theta, F, probes);
  if (final_mask > s.rho_w * (1.0 + 1e-9))
    throw std::runtime_error(
        "optimize_uadp: finished infeasible (peak reradiated power " +
        std::to_string(final_mask) + " W exceeds cap " +
        std::to_string(s.rho_w) + " W)");

  sol.theta = theta;
  sol.F = F;
  sol.iterations = iters;
  sol.rates.resize(n_rx);
  for (int i = 0; i < n_rx; ++i)
    sol.rates[i] = achievable_rate(cs, theta, F, sigma2, i);
  sol.wall_time_s = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t_start)
                        .count();
  return sol;
}

} // namespace risbeam
