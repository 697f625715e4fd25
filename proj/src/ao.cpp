#include "risbeam/ao.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "risbeam/conic.hpp"
#include "risbeam/rng.hpp"
#include "risbeam/units.hpp"

namespace risbeam {

namespace {

// I_n (x) A: the quadratic form of a per-column matrix functional on the
// column-stacked vector.
Eigen::MatrixXcd block_diag_repeat(const Eigen::MatrixXcd& a, int n) {
  Eigen::MatrixXcd out =
      Eigen::MatrixXcd::Zero(a.rows() * n, a.cols() * n);
  for (int k = 0; k < n; ++k)
    out.block(k * a.rows(), k * a.cols(), a.rows(), a.cols()) = a;
  return out;
}

double max_probe_power(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                       const std::vector<Eigen::MatrixXcd>& F,
                       const std::vector<ObservationProbe>& probes) {
  double worst = 0.0;
  for (const ObservationProbe& p : probes)
    worst = std::max(worst, reradiated_power(cs, theta, F, p));
  return worst;
}

// Unit-modulus surface start that superposes, per element, the phase
// profiles re-aiming the incident wavefront at each commanded reflection
// angle. Built from the cascade phase of the actual channel matrices so it
// follows whatever sign and position conventions they use.
Eigen::VectorXcd multibeam_start(const Scenario& s, const ChannelSet& cs,
                                 const SceneGeometry& g) {
  const int n_ris = cs.n_ris();
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n_ris);
  for (double angle : s.theta_ref_deg) {
    const ObservationProbe p = observation_probe(s, g, angle);
    for (int e = 0; e < n_ris; ++e) {
      // Phase accumulated from the first transmit antenna through element e
      // toward the probe direction; conjugating it aligns the element for
      // coherent reradiation at this angle.
      const std::complex<double> cascade = cs.U(e, 0) * p.G_ob(0, e);
      const double a = std::abs(cascade);
      acc(e) +=
          a > 0.0 ? std::conj(cascade) / a : std::complex<double>(1.0, 0.0);
    }
  }
  Eigen::VectorXcd theta(n_ris);
  for (int e = 0; e < n_ris; ++e) {
    const double a = std::abs(acc(e));
    theta(e) = a > 1e-12 ? acc(e) / a : std::complex<double>(1.0, 0.0);
  }
  return theta;
}

} // namespace

double objective_f(const AuxiliaryFilters& filters, const ChannelSet& cs,
                   const Eigen::VectorXcd& theta,
                   const std::vector<Eigen::MatrixXcd>& F, double sigma2) {
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cs.num_receivers(); ++i)
    worst = std::min(worst, surrogate_value(filters, cs, theta, F, sigma2, i));
  return worst;
}

std::vector<ObservationProbe> mask_probes(const Scenario& s,
                                          const SceneGeometry& g) {
  std::vector<ObservationProbe> probes;
  for (double angle : build_mask_set(s.theta_ref_deg).grid())
    probes.push_back(observation_probe(s, g, angle));
  return probes;
}

Eigen::VectorXcd project_mask_power(const ChannelSet& cs,
                                    const Eigen::VectorXcd& theta,
                                    const std::vector<Eigen::MatrixXcd>& F,
                                    const std::vector<ObservationProbe>& probes,
                                    double rho_w) {
  double scale = 1.0;
  for (const ObservationProbe& p : probes) {
    const double pw = reradiated_power(cs, theta, F, p);
    if (pw > rho_w) scale = std::min(scale, std::sqrt(rho_w / pw));
  }
  return scale < 1.0 ? Eigen::VectorXcd(scale * theta) : theta;
}

Eigen::MatrixXcd solve_precoder_subproblem(const AuxiliaryFilters& filters,
                                           const ChannelSet& cs,
                                           const Eigen::VectorXcd& theta,
                                           const std::vector<Eigen::MatrixXcd>& F,
                                           double sigma2, int target,
                                           double P_max_w, double tol,
                                           int max_iter) {
  PrecoderQuadratics pq = build_precoder_quadratics(filters, cs, theta, F,
                                                    sigma2, target, P_max_w);
  const int n_t = cs.n_tx();
  const int n_r = static_cast<int>(F[target].cols());
  MaxMinQP qp;
  qp.dim = n_t * n_r;
  qp.ball_type = BallType::kTotalPower;
  qp.total_power = pq.residual_power_w;
  for (int m = 0; m < cs.num_receivers(); ++m) {
    QuadPiece piece;
    piece.factor = block_diag_repeat(pq.J_factor[m], n_r);
    if (m == target) piece.b = pq.b_vec;
    piece.c = pq.consts[m];
    qp.pieces.push_back(piece);
  }
  ConicSolution c = solve(qp, tol, max_iter);
  if (c.status == ConicStatus::kInfeasible)
    throw std::runtime_error(
        "solve_precoder_subproblem: infeasible for receiver " +
        std::to_string(target + 1));
  return devectorize(c.x, n_t, n_r);
}

std::vector<Eigen::MatrixXcd> solve_joint_precoders(
    const AuxiliaryFilters& filters, const ChannelSet& cs,
    const Eigen::VectorXcd& theta, const std::vector<Eigen::MatrixXcd>& F,
    double sigma2, double P_max_w,
    const std::vector<ObservationProbe>& probes, double rho_w, double tol,
    int max_iter) {
  const JointPrecoderQuadratics q =
      build_joint_precoder_quadratics(filters, cs, theta, sigma2);
  const int n_rx = cs.num_receivers();
  const int n_t = cs.n_tx();
  int total_cols = 0;
  std::vector<int> col_offset(static_cast<size_t>(n_rx));
  for (int i = 0; i < n_rx; ++i) {
    col_offset[static_cast<size_t>(i)] = total_cols;
    total_cols += static_cast<int>(F[static_cast<size_t>(i)].cols());
  }
  const int dim = n_t * total_cols;

  MaxMinQP qp;
  qp.dim = dim;
  qp.ball_type = BallType::kTotalPower;
  qp.total_power = P_max_w;
  for (int m = 0; m < n_rx; ++m) {
    const auto mi = static_cast<size_t>(m);
    QuadPiece piece;
    // The kernel R_m applies to every column of every precoder; the linear
    // term touches only receiver m's own block of the stacked vector.
    piece.factor = block_diag_repeat(q.R[mi], total_cols);
    piece.b = Eigen::VectorXcd::Zero(dim);
    const Eigen::MatrixXcd& Km = q.K[mi];
    for (Eigen::Index s = 0; s < Km.rows(); ++s)
      for (Eigen::Index t = 0; t < Km.cols(); ++t)
        piece.b((col_offset[mi] + s) * n_t + t) = std::conj(Km(s, t));
    piece.c = q.base[mi];
    qp.pieces.push_back(piece);
  }
  for (const ObservationProbe& p : probes) {
    const Eigen::MatrixXcd row = p.G_ob * theta.asDiagonal() * cs.U;
    QuadConstraint cap;
    cap.factor = block_diag_repeat(row, total_cols);
    const Eigen::MatrixXcd quad = cap.factor.adjoint() * cap.factor;
    cap.Q = 0.5 * (quad + quad.adjoint());
    cap.bound = rho_w;
    qp.ineqs.push_back(cap);
  }

  ConicSolution c = solve(qp, tol, max_iter);
  if (c.status == ConicStatus::kInfeasible)
    throw std::runtime_error("solve_joint_precoders: infeasible");
  std::vector<Eigen::MatrixXcd> out(static_cast<size_t>(n_rx));
  for (int i = 0; i < n_rx; ++i) {
    const auto ii = static_cast<size_t>(i);
    const int n_r = static_cast<int>(F[ii].cols());
    out[ii] =
        devectorize(c.x.segment(col_offset[ii] * n_t, n_t * n_r), n_t, n_r);
  }
  return out;
}

Solution optimize_uacp(const Scenario& s, const ChannelSet& cs,
                       const AOOptions& opts) {
  if (!(opts.epsilon > 0.0))
    throw std::invalid_argument("optimize_uacp: epsilon must be positive");
  const auto t_start = std::chrono::steady_clock::now();
  const int n_rx = cs.num_receivers();
  const int n_ris = cs.n_ris();
  const int n_t = cs.n_tx();
  const double sigma2 = s.sigma2_w;

  SceneGeometry geom = build_geometry(s);
  std::vector<ObservationProbe> probes;
  if (opts.mask_enabled) probes = mask_probes(s, geom);

  // Shared precoder start: equal power split at half budget, random
  // directions. Feasible by construction and reproducible from the scenario
  // seed.
  RandomStream rng(s.seed, "ao-init");
  std::vector<Eigen::MatrixXcd> F0(n_rx);
  for (int i = 0; i < n_rx; ++i) {
    Eigen::MatrixXcd f(n_t, s.N_r[i]);
    for (int r = 0; r < f.rows(); ++r)
      for (int c = 0; c < f.cols(); ++c) f(r, c) = rng.complex_normal();
    f *= std::sqrt(s.P_max_w / (2.0 * n_rx)) / f.norm();
    F0[i] = f;
  }
  Eigen::VectorXcd theta_random(n_ris);
  for (int n = 0; n < n_ris; ++n)
    theta_random(n) = std::polar(1.0, rng.uniform(0.0, 2.0 * kPi));

  struct Run {
    Eigen::VectorXcd theta;
    std::vector<Eigen::MatrixXcd> F;
    std::vector<double> trace;
    int iters = 0;
  };

  // One alternating ascent from a given surface start (scaled into the mask
  // if enforced).
  auto run_from = [&](Eigen::VectorXcd theta, int start_idx) {
    std::vector<Eigen::MatrixXcd> F = F0;
    if (opts.mask_enabled)
      theta = project_mask_power(cs, theta, F, probes, s.rho_w);

    AuxiliaryFilters filters = update_filters(cs, theta, F, sigma2);
    double f_prev = objective_f(filters, cs, theta, F, sigma2);
    Run run;
    run.trace.push_back(f_prev);

    auto solve_theta = [&]() {
      ThetaQuadratics tq =
          build_theta_quadratics(filters, cs, F, sigma2, probes);
      MaxMinQP qp;
      qp.dim = n_ris;
      qp.ball_type = BallType::kPerCoordinate;
      for (int i = 0; i < n_rx; ++i) {
        QuadPiece piece;
        piece.E = tq.E[i];
        piece.factor = tq.E_factor[i];
        piece.b = tq.b[i];
        piece.c = tq.c[i];
        qp.pieces.push_back(piece);
      }
      for (std::size_t a = 0; a < tq.mask_forms.size(); ++a) {
        QuadConstraint cap;
        cap.Q = tq.mask_forms[a];
        cap.factor = tq.mask_factors[a];
        cap.bound = s.rho_w;
        qp.ineqs.push_back(cap);
      }
      ConicSolution c = solve(qp, opts.solver_tol, opts.solver_max_iter);
      if (c.status == ConicStatus::kInfeasible)
        throw std::runtime_error(
            "optimize_uacp: surface sub-problem infeasible");
      Eigen::VectorXcd cand = c.x;
      if (!opts.mask_enabled) {
        // Unconstrained surface amplitudes waste no power at unit modulus;
        // snap back to the circle when that does not hurt the bound.
        Eigen::VectorXcd snapped(n_ris);
        for (int n = 0; n < n_ris; ++n) {
          const double a = std::abs(cand(n));
          snapped(n) =
              a > 1e-12 ? cand(n) / a : std::complex<double>(1.0, 0.0);
        }
        auto min_piece = [&](const Eigen::VectorXcd& v) {
          double worst = std::numeric_limits<double>::infinity();
          for (int i = 0; i < n_rx; ++i)
            worst = std::min(worst, theta_surrogate(tq, v, i));
          return worst;
        };
        if (min_piece(snapped) >= min_piece(cand)) cand = snapped;
      }
      return cand;
    };

    for (int t = 1; t <= opts.max_outer_iters; ++t) {
      run.iters = t;
      const Eigen::VectorXcd theta_old = theta;
      const std::vector<Eigen::MatrixXcd> F_old = F;

      filters = update_filters(cs, theta, F, sigma2);
      F = solve_joint_precoders(filters, cs, theta, F, sigma2, s.P_max_w,
                                probes, s.rho_w, opts.solver_tol,
                                opts.solver_max_iter);
      filters = update_filters(cs, theta, F, sigma2);
      theta = solve_theta();
      filters = update_filters(cs, theta, F, sigma2);
      const double f_t = objective_f(filters, cs, theta, F, sigma2);

      if (opts.verbose) {
        double mask_w =
            probes.empty() ? 0.0 : max_probe_power(cs, theta, F, probes);
        std::fprintf(
            stderr,
            "ao start=%d iter=%d f=%.10f min_rate=%.10f mask_max_w=%.3e\n",
            start_idx, t, f_t, min_rate(cs, theta, F, sigma2), mask_w);
      }

      if (f_t < f_prev) {
        // Rollback: revert and treat as converged, keeping the trace
        // monotone.
        theta = theta_old;
        F = F_old;
        break;
      }
      run.trace.push_back(f_t);
      const bool converged = std::abs(f_t - f_prev) <= opts.epsilon;
      f_prev = f_t;
      if (converged) break;
    }

    run.theta = theta;
    run.F = F;
    return run;
  };

  // The alternating ascent is a local method. From random scatter phases it
  // reliably forms one or two lobes but can stall balancing three or more
  // receivers through sidelobe scatter, so run it from two structurally
  // different surface starts -- the superposed redirection profile and a
  // random draw -- and keep the better final objective.
  Run best = run_from(multibeam_start(s, cs, geom), 0);
  {
    Run other = run_from(theta_random, 1);
    if (other.trace.back() > best.trace.back()) best = std::move(other);
  }
  Eigen::VectorXcd theta = best.theta;
  std::vector<Eigen::MatrixXcd> F = best.F;

  // Final safeguards against roundoff drift on the returned iterate.
  double power = 0.0;
  for (const auto& f : F) power += f.squaredNorm();
  if (power > s.P_max_w) {
    const double shrink = std::sqrt(s.P_max_w / power);
    for (auto& f : F) f *= shrink;
  }
  for (int n = 0; n < n_ris; ++n) {
    const double a = std::abs(theta(n));
    if (a > 1.0) theta(n) /= a;
  }
  if (opts.mask_enabled)
    theta = project_mask_power(cs, theta, F, probes, s.rho_w);

  Solution sol;
  sol.objective_trace = best.trace;
  sol.theta = theta;
  sol.F = F;
  sol.iterations = best.iters;
  for (int i = 0; i < n_rx; ++i)
    sol.rates.push_back(achievable_rate(cs, theta, F, sigma2, i));
  sol.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return sol;
}

} // namespace risbeam
