#include "risbeam/objective.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "risbeam/rng.hpp"

namespace risbeam {
namespace {

Eigen::MatrixXcd random_matrix(RandomStream& rng, int rows, int cols) {
  Eigen::MatrixXcd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.complex_normal();
  return m;
}

struct SmallInstance {
  ChannelSet cs;
  Eigen::VectorXcd theta;
  std::vector<Eigen::MatrixXcd> F;
  double sigma2 = 0.1;
};

// Two receivers (2 and 1 antennas), 3 transmit antennas, 6 surface elements.
SmallInstance make_instance(std::uint64_t seed) {
  RandomStream rng(seed, "objective-instance");
  SmallInstance inst;
  inst.cs.rng_seed = static_cast<std::int64_t>(seed);
  inst.cs.U = random_matrix(rng, 6, 3);
  inst.cs.G = {random_matrix(rng, 2, 6), random_matrix(rng, 1, 6)};
  inst.cs.beta_inv = {1.0, 0.5};
  inst.theta = random_matrix(rng, 6, 1).col(0);
  inst.F = {random_matrix(rng, 3, 2), random_matrix(rng, 3, 1)};
  return inst;
}

ObservationProbe make_probe(std::uint64_t seed) {
  RandomStream rng(seed, "probe");
  ObservationProbe p;
  p.angle_deg = 33.0;
  p.G_ob = random_matrix(rng, 1, 6);
  p.beta_inv_ob = 1.0;
  return p;
}

TEST(Objective, SurrogateTightAtMmseFilters) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    SmallInstance in = make_instance(seed);
    AuxiliaryFilters filt =
        update_filters(in.cs, in.theta, in.F, in.sigma2);
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double rate = achievable_rate(in.cs, in.theta, in.F, in.sigma2, i);
      const double sur =
          surrogate_value(filt, in.cs, in.theta, in.F, in.sigma2, i);
      ASSERT_GT(rate, 0.0);
      worst = std::max(worst, std::abs(sur - rate) / rate);
    }
    EXPECT_LT(worst, 1e-8);
    const double mr = min_rate(in.cs, in.theta, in.F, in.sigma2);
    EXPECT_LE(mr, achievable_rate(in.cs, in.theta, in.F, in.sigma2, 0));
    EXPECT_LE(mr, achievable_rate(in.cs, in.theta, in.F, in.sigma2, 1));
  }
}

TEST(Objective, ZeroPrecodersGiveZeroRateAndZeroBound) {
  SmallInstance in = make_instance(11);
  in.F[0].setZero();
  in.F[1].setZero();
  EXPECT_DOUBLE_EQ(achievable_rate(in.cs, in.theta, in.F, in.sigma2, 0), 0.0);
  AuxiliaryFilters filt = update_filters(in.cs, in.theta, in.F, in.sigma2);
  EXPECT_NEAR(filt.W[0].norm(), 0.0, 0.0);
  EXPECT_NEAR((filt.Sigma[0] - Eigen::MatrixXcd::Identity(2, 2)).norm(), 0.0,
              0.0);
  EXPECT_NEAR(surrogate_value(filt, in.cs, in.theta, in.F, in.sigma2, 0), 0.0,
              1e-14);
}

TEST(Objective, ScalarLinkClosedForm) {
  ChannelSet cs;
  cs.U = Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(0.6, -0.3));
  cs.G = {Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(-0.2, 1.1))};
  cs.beta_inv = {1.0};
  Eigen::VectorXcd theta = Eigen::VectorXcd::Constant(1, 1.0);
  std::vector<Eigen::MatrixXcd> F = {
      Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(0.9, 0.4))};
  const double sigma2 = 0.05;
  const std::complex<double> hf = cs.G[0](0, 0) * cs.U(0, 0) * F[0](0, 0);
  const double want = std::log2(1.0 + std::norm(hf) / sigma2);
  EXPECT_NEAR(achievable_rate(cs, theta, F, sigma2, 0), want, 1e-12);
  AuxiliaryFilters filt = update_filters(cs, theta, F, sigma2);
  const std::complex<double> w_want = std::conj(hf) / (std::norm(hf) + sigma2);
  EXPECT_NEAR(std::abs(filt.W[0](0, 0) - w_want), 0.0, 1e-12);
  const double sig_want = sigma2 / (std::norm(hf) + sigma2);
  EXPECT_NEAR(std::abs(filt.Sigma[0](0, 0) - sig_want), 0.0, 1e-12);
}

TEST(Objective, SurrogateNeverExceedsRate) {
  SmallInstance in = make_instance(21);
  RandomStream rng(77, "suboptimal-filters");
  const std::vector<int> nr = {2, 1};
  for (int trial = 0; trial < 100; ++trial) {
    AuxiliaryFilters filt;
    for (int i = 0; i < 2; ++i) {
      filt.W.push_back(random_matrix(rng, nr[i], nr[i]));
      Eigen::MatrixXcd r = random_matrix(rng, nr[i], nr[i]);
      filt.Sigma.push_back(r.adjoint() * r +
                           0.05 * Eigen::MatrixXcd::Identity(nr[i], nr[i]));
    }
    for (int i = 0; i < 2; ++i) {
      const double rate = achievable_rate(in.cs, in.theta, in.F, in.sigma2, i);
      const double sur =
          surrogate_value(filt, in.cs, in.theta, in.F, in.sigma2, i);
      EXPECT_LE(sur, rate + 1e-9);
    }
  }
}

TEST(Objective, ReradiatedPowerZeroScalingAndMaskFormAgreement) {
  SmallInstance in = make_instance(31);
  ObservationProbe probe = make_probe(5);
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(6);
  EXPECT_DOUBLE_EQ(reradiated_power(in.cs, zero, in.F, probe), 0.0);
  const double p1 = reradiated_power(in.cs, in.theta, in.F, probe);
  const double p2 = reradiated_power(in.cs, 2.0 * in.theta, in.F, probe);
  EXPECT_NEAR(p2 / p1, 4.0, 1e-10);

  AuxiliaryFilters filt = update_filters(in.cs, in.theta, in.F, in.sigma2);
  ThetaQuadratics tq =
      build_theta_quadratics(filt, in.cs, in.F, in.sigma2, {probe});
  ASSERT_EQ(tq.mask_forms.size(), 1u);
  const double via_form = std::real(
      (in.theta.adjoint() * tq.mask_forms[0] * in.theta)(0, 0));
  EXPECT_NEAR(via_form / p1, 1.0, 1e-10);
  const double via_factor = (tq.mask_factors[0] * in.theta).squaredNorm();
  EXPECT_NEAR(via_factor / p1, 1.0, 1e-10);
  EXPECT_NEAR(theta_mask_power(tq, in.theta, 0) / p1, 1.0, 1e-10);
}

TEST(Objective, ThetaQuadraticsReproduceSurrogateEverywhere) {
  SmallInstance in = make_instance(41);
  AuxiliaryFilters filt = update_filters(in.cs, in.theta, in.F, in.sigma2);
  ThetaQuadratics tq = build_theta_quadratics(filt, in.cs, in.F, in.sigma2, {});
  RandomStream rng(55, "theta-eval-points");
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXcd t = random_matrix(rng, 6, 1).col(0);
    for (int i = 0; i < 2; ++i) {
      const double direct =
          surrogate_value(filt, in.cs, t, in.F, in.sigma2, i);
      const double quad = theta_surrogate(tq, t, i);
      EXPECT_NEAR(std::abs(quad - direct) / std::max(1.0, std::abs(direct)),
                  0.0, 1e-9);
    }
  }
  // And at the expansion point itself the bound is tight.
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(theta_surrogate(tq, in.theta, i),
                achievable_rate(in.cs, in.theta, in.F, in.sigma2, i), 1e-8);
  }
}

TEST(Objective, QuadraticFormsArePsdWithConsistentFactors) {
  SmallInstance in = make_instance(51);
  AuxiliaryFilters filt = update_filters(in.cs, in.theta, in.F, in.sigma2);
  ThetaQuadratics tq = build_theta_quadratics(filt, in.cs, in.F, in.sigma2,
                                              {make_probe(6), make_probe(7)});
  auto check_psd = [](const Eigen::MatrixXcd& m, const Eigen::MatrixXcd& fac) {
    EXPECT_LT((m - m.adjoint()).norm(), 1e-12 * std::max(1.0, m.norm()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    EXPECT_GE(es.eigenvalues().minCoeff(),
              -1e-9 * std::abs(std::real(m.trace())));
    EXPECT_LT((m - fac.adjoint() * fac).norm(), 1e-10 * std::max(1.0, m.norm()));
  };
  for (int i = 0; i < 2; ++i) check_psd(tq.E[i], tq.E_factor[i]);
  for (std::size_t k = 0; k < tq.mask_forms.size(); ++k)
    check_psd(tq.mask_forms[k], tq.mask_factors[k]);

  PrecoderQuadratics pq = build_precoder_quadratics(
      filt, in.cs, in.theta, in.F, in.sigma2, 0, 100.0);
  for (int m = 0; m < 2; ++m) check_psd(pq.J[m], pq.J_factor[m]);
}

double piece_eval(const PrecoderQuadratics& pq, int m,
                  const Eigen::MatrixXcd& f_target) {
  double v = -std::real((f_target.adjoint() * pq.J[m] * f_target).trace()) +
             pq.consts[m];
  if (m == pq.target)
    v += 2.0 * std::real((pq.K * f_target).trace());
  return v;
}

TEST(Objective, PrecoderPiecesMatchSurrogateAtArbitraryTarget) {
  SmallInstance in = make_instance(61);
  AuxiliaryFilters filt = update_filters(in.cs, in.theta, in.F, in.sigma2);
  const double p_max = 100.0;
  for (int target = 0; target < 2; ++target) {
    PrecoderQuadratics pq = build_precoder_quadratics(
        filt, in.cs, in.theta, in.F, in.sigma2, target, p_max);
    EXPECT_EQ(pq.target, target);
    const double used =
        in.F[1 - target].squaredNorm();
    EXPECT_NEAR(pq.residual_power_w, p_max - used, 1e-12 * p_max);
    RandomStream rng(99 + target, "modified-precoder");
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Eigen::MatrixXcd> fmod = in.F;
      if (trial > 0)
        fmod[target] = random_matrix(rng, 3, static_cast<int>(in.F[target].cols()));
      for (int m = 0; m < 2; ++m) {
        const double direct =
            surrogate_value(filt, in.cs, in.theta, fmod, in.sigma2, m);
        const double quad = piece_eval(pq, m, fmod[target]);
        EXPECT_NEAR(std::abs(quad - direct) / std::max(1.0, std::abs(direct)),
                    0.0, 1e-9)
            << "target=" << target << " piece=" << m << " trial=" << trial;
      }
    }
  }
}

TEST(Objective, JointPrecoderFormMatchesSurrogateAtArbitraryPrecoders) {
  SmallInstance in = make_instance(91);
  AuxiliaryFilters filt = update_filters(in.cs, in.theta, in.F, in.sigma2);
  const JointPrecoderQuadratics q =
      build_joint_precoder_quadratics(filt, in.cs, in.theta, in.sigma2);
  RandomStream rng(107, "joint-precoder-points");
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Eigen::MatrixXcd> fmod = in.F;
    if (trial > 0)
      for (auto& f : fmod)
        f = random_matrix(rng, 3, static_cast<int>(f.cols()));
    for (int m = 0; m < 2; ++m) {
      const double direct =
          surrogate_value(filt, in.cs, in.theta, fmod, in.sigma2, m);
      const double joint = joint_precoder_surrogate(q, fmod, m);
      EXPECT_NEAR(std::abs(joint - direct) / std::max(1.0, std::abs(direct)),
                  0.0, 1e-9)
          << "piece=" << m << " trial=" << trial;
    }
  }
}

TEST(Objective, VectorizeRoundTripAndStackedIdentities) {
  SmallInstance in = make_instance(71);
  RandomStream rng(13, "vec");
  const Eigen::MatrixXcd f = random_matrix(rng, 3, 2);
  const Eigen::VectorXcd v = vectorize(f);
  ASSERT_EQ(v.size(), 6);
  EXPECT_TRUE(devectorize(v, 3, 2) == f);
  // Column-major stacking.
  EXPECT_EQ(v(1), f(1, 0));
  EXPECT_EQ(v(3), f(0, 1));

  AuxiliaryFilters filt = update_filters(in.cs, in.theta, in.F, in.sigma2);
  PrecoderQuadratics pq = build_precoder_quadratics(
      filt, in.cs, in.theta, in.F, in.sigma2, 0, 100.0);
  // 2 Re Tr(K F) == 2 Re (vec(F)^H b_vec).
  const double lhs = 2.0 * std::real((pq.K * f).trace());
  const double rhs = 2.0 * std::real((v.adjoint() * pq.b_vec)(0, 0));
  EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
  // Tr(F^H J F) == sum over columns of the per-column quadratic form.
  double col_sum = 0.0;
  for (int c = 0; c < 2; ++c)
    col_sum += std::real((f.col(c).adjoint() * pq.J[1] * f.col(c))(0, 0));
  EXPECT_NEAR(std::real((f.adjoint() * pq.J[1] * f).trace()), col_sum,
              1e-12 * std::max(1.0, col_sum));
}

TEST(Objective, ResidualPowerMustBePositive) {
  SmallInstance in = make_instance(81);
  AuxiliaryFilters filt = update_filters(in.cs, in.theta, in.F, in.sigma2);
  const double used = in.F[1].squaredNorm();
  EXPECT_THROW(build_precoder_quadratics(filt, in.cs, in.theta, in.F,
                                         in.sigma2, 0, used * 0.5),
               std::runtime_error);
}

TEST(Objective, DiagonalSandwichHadamardIdentity) {
  RandomStream rng(123, "hadamard");
  Eigen::MatrixXcd raw = random_matrix(rng, 6, 6);
  const Eigen::MatrixXcd a = (raw + raw.adjoint()) / 2.0;  // Hermitian
  const Eigen::MatrixXcd m = random_matrix(rng, 6, 6);     // arbitrary
  const Eigen::VectorXcd t = random_matrix(rng, 6, 1).col(0);
  const std::complex<double> lhs =
      (t.adjoint() * (a.cwiseProduct(m.transpose())) * t)(0, 0);
  const std::complex<double> rhs =
      (Eigen::MatrixXcd(t.conjugate().asDiagonal()) * a *
       Eigen::MatrixXcd(t.asDiagonal()) * m)
          .trace();
  EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-10 * std::max(1.0, std::abs(rhs)));
}

TEST(Objective, Log2DetHermitian) {
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  EXPECT_NEAR(log2_det_hermitian(d), 3.0, 1e-12);
  d(1, 1) = -1.0;
  EXPECT_THROW(log2_det_hermitian(d), std::domain_error);
}

} // namespace
} // namespace risbeam
