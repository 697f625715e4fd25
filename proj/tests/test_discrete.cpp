#include "risbeam/discrete.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "risbeam/ao.hpp"
#include "risbeam/channel.hpp"
#include "risbeam/objective.hpp"
#include "risbeam/rng.hpp"
#include "risbeam/scene.hpp"
#include "risbeam/units.hpp"

namespace risbeam {
namespace {

Scenario tiny_scenario(long long seed) {
  Scenario s;
  s.theta_inc_deg = 30.0;
  s.theta_ref_deg = {40.0};
  s.N_t = 2;
  s.N_r = {1};
  s.ris_rows = 2;
  s.ris_cols = 2;
  s.P_max_w = 2.0;
  s.sigma2_w = 1e-12;
  s.rho_w = 1.0; // loose: every phase assignment is mask-feasible
  s.seed = seed;
  s.phase_levels = 2;
  s.validate();
  return s;
}

Scenario pair_scenario(long long seed) {
  Scenario s;
  s.theta_inc_deg = 20.0;
  s.theta_ref_deg = {30.0, 50.0};
  s.N_t = 4;
  s.N_r = {2, 2};
  s.ris_rows = 3;
  s.ris_cols = 3;
  s.P_max_w = 2.0;
  s.sigma2_w = 1e-12;
  s.rho_w = 1.0;
  s.seed = seed;
  s.phase_levels = 4;
  s.validate();
  return s;
}

bool entry_in_codebook(const std::complex<double>& v,
                       const std::vector<std::complex<double>>& cb) {
  for (const auto& c : cb)
    if (v.real() == c.real() && v.imag() == c.imag()) return true;
  return false;
}

void check_uadp_invariants(const Scenario& s, const ChannelSet& cs,
                           const Solution& sol, int L) {
  const auto cb = phase_codebook(L);
  for (int n = 0; n < sol.theta.size(); ++n)
    EXPECT_TRUE(entry_in_codebook(sol.theta(n), cb)) << "element " << n;
  double power = 0.0;
  for (const auto& f : sol.F) power += f.squaredNorm();
  EXPECT_LE(power, s.P_max_w * (1.0 + 1e-9));
  SceneGeometry g = build_geometry(s);
  for (const ObservationProbe& p : mask_probes(s, g))
    EXPECT_LE(reradiated_power(cs, sol.theta, sol.F, p),
              s.rho_w * (1.0 + 1e-9));
  ASSERT_EQ(static_cast<int>(sol.rates.size()), cs.num_receivers());
  for (int i = 0; i < cs.num_receivers(); ++i)
    EXPECT_NEAR(sol.rates[i],
                achievable_rate(cs, sol.theta, sol.F, s.sigma2_w, i), 1e-9);
  EXPECT_GT(sol.iterations, 0);
  ASSERT_FALSE(sol.objective_trace.empty());
  // Monotone once the first round has moved everything onto the codebook
  // (the discretizing round itself may dip below the continuous warm start).
  for (std::size_t k = 2; k < sol.objective_trace.size(); ++k)
    EXPECT_GE(sol.objective_trace[k], sol.objective_trace[k - 1] - 1e-12)
        << "round " << k;
}

// Alternates the convex precoder updates at fixed theta until the min rate
// settles; for a concave sub-problem this reaches the optimal value from any
// start, giving an algorithm-independent score for one phase assignment.
double precoder_fixpoint(const Scenario& s, const ChannelSet& cs,
                         const Eigen::VectorXcd& theta,
                         std::vector<Eigen::MatrixXcd> F) {
  double f_prev = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 60; ++t) {
    for (int i = 0; i < cs.num_receivers(); ++i) {
      AuxiliaryFilters filters = update_filters(cs, theta, F, s.sigma2_w);
      F[i] = solve_precoder_subproblem(filters, cs, theta, F, s.sigma2_w, i,
                                       s.P_max_w, 1e-10, 300);
    }
    const double f = min_rate(cs, theta, F, s.sigma2_w);
    if (std::abs(f - f_prev) <= 1e-14 + 1e-10 * std::abs(f)) return f;
    f_prev = f;
  }
  return f_prev;
}

TEST(Discrete, PhaseCodebookValues) {
  EXPECT_THROW(phase_codebook(0), std::invalid_argument);
  const auto cb1 = phase_codebook(1);
  ASSERT_EQ(cb1.size(), 1u);
  EXPECT_EQ(cb1[0].real(), 1.0);
  EXPECT_EQ(cb1[0].imag(), 0.0);
  const auto cb4 = phase_codebook(4);
  ASSERT_EQ(cb4.size(), 4u);
  for (int l = 0; l < 4; ++l) {
    EXPECT_NEAR(std::abs(cb4[l]), 1.0, 1e-15);
    double want = 2.0 * kPi * l / 4.0;
    if (want > kPi) want -= 2.0 * kPi; // arg reports (-pi, pi]
    EXPECT_NEAR(std::arg(cb4[l]), want, 1e-15);
  }
  EXPECT_NEAR(cb4[1].real(), 0.0, 1e-15);
  EXPECT_NEAR(cb4[1].imag(), 1.0, 1e-15);
  EXPECT_NEAR(cb4[2].real(), -1.0, 1e-15);
  EXPECT_NEAR(cb4[3].imag(), -1.0, 1e-15);
}

TEST(Discrete, ProjectMaskFormsIdentityAndExactScale) {
  std::vector<Eigen::MatrixXcd> forms{Eigen::MatrixXcd::Identity(3, 3)};
  Eigen::VectorXcd theta(3);
  theta << std::complex<double>(1.0, 0.0), std::complex<double>(0.0, 1.0),
      std::complex<double>(1.0, 1.0); // power against identity = 4
  const Eigen::VectorXcd kept = project_mask_forms(theta, forms, 5.0);
  EXPECT_TRUE((kept.array() == theta.array()).all());
  // Power at four times the cap scales by exactly one half.
  const Eigen::VectorXcd scaled = project_mask_forms(theta, forms, 1.0);
  EXPECT_TRUE((scaled.array() == (0.5 * theta).array()).all());
}

TEST(Discrete, ProjectMaskFormsBindsWorstProbe) {
  RandomStream rng(3, "discrete-mask-oracle");
  const int n = 5;
  std::vector<Eigen::MatrixXcd> forms;
  for (int k = 0; k < 3; ++k) {
    Eigen::MatrixXcd fac(2, n);
    for (int r = 0; r < fac.rows(); ++r)
      for (int c = 0; c < fac.cols(); ++c) fac(r, c) = rng.complex_normal();
    forms.push_back(fac.adjoint() * fac);
  }
  Eigen::VectorXcd theta(n);
  for (int i = 0; i < n; ++i) theta(i) = rng.complex_normal();
  auto worst = [&](const Eigen::VectorXcd& v) {
    double w = 0.0;
    for (const auto& m : forms) w = std::max(w, std::real(v.dot(m * v)));
    return w;
  };
  const double rho = worst(theta) / 7.3; // strictly infeasible start
  const Eigen::VectorXcd proj = project_mask_forms(theta, forms, rho);
  EXPECT_NEAR(worst(proj), rho, 1e-9 * rho);
  const double a = proj.norm() / theta.norm();
  EXPECT_TRUE(proj.isApprox(a * theta, 1e-12)); // pure scaling
  EXPECT_TRUE(mask_indicator(proj, forms, rho * (1.0 + 1e-9)));
  EXPECT_FALSE(mask_indicator(proj * (1.0 + 1e-3), forms, rho));
}

TEST(Discrete, MaskIndicatorTrivialCases) {
  const Eigen::VectorXcd theta = Eigen::VectorXcd::Ones(4);
  EXPECT_TRUE(mask_indicator(theta, {}, 1e-30)); // empty probe set
  const std::vector<Eigen::MatrixXcd> zero{Eigen::MatrixXcd::Zero(4, 4)};
  EXPECT_TRUE(mask_indicator(theta, zero, 1e-30)); // zero precoders
}

TEST(Discrete, GreedyNeverBeatsExhaustiveAndImprovesOnInit) {
  Scenario s = tiny_scenario(5);
  ChannelSet cs = assemble_channels(s, build_geometry(s));
  GreedyOptions opts;
  opts.L = 2;
  opts.init_mode = GreedyInit::kRandom;
  Solution sol = optimize_uadp(s, cs, opts);
  check_uadp_invariants(s, cs, sol, opts.L);
  // A codebook start keeps the whole trace monotone and above its origin.
  for (std::size_t k = 1; k < sol.objective_trace.size(); ++k)
    EXPECT_GE(sol.objective_trace[k], sol.objective_trace[k - 1] - 1e-12);
  const double greedy = min_rate(cs, sol.theta, sol.F, s.sigma2_w);
  EXPECT_GE(greedy, sol.objective_trace.front() - 1e-12);
  EXPECT_GT(greedy, 0.0);

  // Enumerate all 16 assignments of a 4-element surface over 2 levels,
  // re-optimizing the precoder to its fixpoint for each.
  const auto cb = phase_codebook(2);
  RandomStream rng(s.seed, "exhaustive-init");
  Eigen::MatrixXcd f0(s.N_t, s.N_r[0]);
  for (int r = 0; r < f0.rows(); ++r)
    for (int c = 0; c < f0.cols(); ++c) f0(r, c) = rng.complex_normal();
  f0 *= std::sqrt(s.P_max_w / 2.0) / f0.norm();
  double best = -std::numeric_limits<double>::infinity();
  for (int code = 0; code < 16; ++code) {
    Eigen::VectorXcd theta(4);
    for (int n = 0; n < 4; ++n) theta(n) = cb[(code >> n) & 1];
    best = std::max(best, precoder_fixpoint(s, cs, theta, {f0}));
  }
  EXPECT_LE(greedy, best * (1.0 + 1e-6) + 1e-15);

  // The warm-started variant must respect the same exhaustive bound.
  GreedyOptions warm;
  warm.L = 2;
  Solution sol2 = optimize_uadp(s, cs, warm);
  check_uadp_invariants(s, cs, sol2, warm.L);
  EXPECT_LE(min_rate(cs, sol2.theta, sol2.F, s.sigma2_w),
            best * (1.0 + 1e-6) + 1e-15);
}

TEST(Discrete, SingletonCodebookForcesAllOnes) {
  Scenario s = tiny_scenario(9);
  ChannelSet cs = assemble_channels(s, build_geometry(s));
  GreedyOptions opts;
  opts.L = 1;
  opts.max_sweeps = 10;
  Solution sol = optimize_uadp(s, cs, opts);
  for (int n = 0; n < sol.theta.size(); ++n) {
    EXPECT_EQ(sol.theta(n).real(), 1.0);
    EXPECT_EQ(sol.theta(n).imag(), 0.0);
  }
}

TEST(Discrete, DeterministicAcrossRuns) {
  Scenario s = pair_scenario(11);
  ChannelSet cs = assemble_channels(s, build_geometry(s));
  GreedyOptions opts;
  opts.init_mode = GreedyInit::kRandom;
  const Solution a = optimize_uadp(s, cs, opts);
  const Solution b = optimize_uadp(s, cs, opts);
  ASSERT_EQ(a.theta.size(), b.theta.size());
  EXPECT_TRUE((a.theta.array() == b.theta.array()).all());
  ASSERT_EQ(a.objective_trace.size(), b.objective_trace.size());
  for (std::size_t k = 0; k < a.objective_trace.size(); ++k)
    EXPECT_EQ(a.objective_trace[k], b.objective_trace[k]);
}

TEST(Discrete, BindingMaskStaysFeasibleAndDiscrete) {
  Scenario s = pair_scenario(3);
  ChannelSet cs = assemble_channels(s, build_geometry(s));
  GreedyOptions opts;
  Solution loose = optimize_uadp(s, cs, opts);
  check_uadp_invariants(s, cs, loose, opts.L);

  SceneGeometry g = build_geometry(s);
  const auto probes = mask_probes(s, g);
  double worst = 0.0;
  for (const auto& p : probes)
    worst = std::max(worst, reradiated_power(cs, loose.theta, loose.F, p));
  ASSERT_GT(worst, 0.0);

  // Halving the cap below the loose run's peak makes the mask bind; the
  // search must still end feasible and fully on the codebook.
  Scenario tight = s;
  tight.rho_w = 0.5 * worst;
  Solution bound = optimize_uadp(tight, cs, opts);
  check_uadp_invariants(tight, cs, bound, opts.L);
}

TEST(Discrete, ExtremeMaskSolvedByPowerSacrifice) {
  // A cap this far below any reachable sidelobe level cannot be met by phase
  // choices alone. The search must meet it by giving up transmit power while
  // staying fully on the codebook, not by failing or returning off-codebook
  // amplitudes.
  Scenario s = tiny_scenario(2);
  s.rho_w = 1e-32;
  ChannelSet cs = assemble_channels(s, build_geometry(s));
  GreedyOptions opts;
  opts.L = 2;
  opts.init_mode = GreedyInit::kRandom;
  Solution sol = optimize_uadp(s, cs, opts);
  check_uadp_invariants(s, cs, sol, opts.L);
  double power = 0.0;
  for (const auto& f : sol.F) power += f.squaredNorm();
  EXPECT_LT(power, 1e-6 * s.P_max_w);
}

TEST(Discrete, OptionValidation) {
  Scenario s = tiny_scenario(1);
  ChannelSet cs = assemble_channels(s, build_geometry(s));
  GreedyOptions opts;
  opts.L = 0;
  EXPECT_THROW(optimize_uadp(s, cs, opts), std::invalid_argument);
  opts.L = 2;
  opts.epsilon = 0.0;
  EXPECT_THROW(optimize_uadp(s, cs, opts), std::invalid_argument);
  opts.epsilon = 1e-8;
  opts.max_sweeps = 0;
  EXPECT_THROW(optimize_uadp(s, cs, opts), std::invalid_argument);
}

} // namespace
} // namespace risbeam
