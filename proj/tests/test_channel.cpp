#include "risbeam/channel.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <gtest/gtest.h>

#include "risbeam/units.hpp"

namespace risbeam {
namespace {

Scenario desk_scenario() {
  Scenario s;
  s.theta_ref_deg = {30.0, 50.0};
  s.N_r = {2, 2};
  return s;
}

TEST(Channel, LosMatrixClosedFormEntries) {
  const double lambda = 0.01;
  std::vector<Eigen::Vector3d> a = {{0, 0, 0}, {0, 0, 0}};
  std::vector<Eigen::Vector3d> b = {{0, 0, 0}, {lambda / 2.0, 0, 0}};
  const Eigen::MatrixXcd m = los_matrix(a, b, lambda);
  EXPECT_NEAR(std::abs(m(0, 0) - std::complex<double>(1.0, 0.0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(m(0, 1) - std::complex<double>(-1.0, 0.0)), 0.0, 1e-12);
}

TEST(Channel, LosMatrixMatchesDistancePhaseOracle) {
  RandomStream rng(3, "los-oracle");
  const double lambda = 0.0111;
  std::vector<Eigen::Vector3d> rows, cols;
  for (int i = 0; i < 5; ++i)
    rows.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  for (int i = 0; i < 4; ++i)
    cols.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(5, 9));
  const Eigen::MatrixXcd m = los_matrix(rows, cols, lambda);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 4; ++b) {
      const double d = (rows[a] - cols[b]).norm();
      const std::complex<double> want =
          std::exp(std::complex<double>(0.0, -2.0 * kPi * d / lambda));
      EXPECT_NEAR(std::abs(m(a, b) - want), 0.0, 1e-12);
      EXPECT_NEAR(std::abs(m(a, b)), 1.0, 1e-14);  // pure phase
    }
}

TEST(Channel, RicianHighKTracksLos) {
  SceneGeometry g = build_geometry(desk_scenario());
  const Eigen::MatrixXcd los =
      los_matrix(g.element_positions, g.tx_antenna_positions, g.lambda_m);
  RandomStream rng(1, "U");
  const Eigen::MatrixXcd u = rician_channel(los, 1e5, rng);
  const double max_dev = (u - los).cwiseAbs().maxCoeff();
  EXPECT_LT(max_dev, 0.02);   // scattered part is ~1e5 times weaker in power
  EXPECT_GT(max_dev, 1e-4);   // but present
}

TEST(Channel, RicianZeroKUnitVariance) {
  const Eigen::MatrixXcd los = Eigen::MatrixXcd::Ones(250, 400);
  RandomStream rng(5, "nlos");
  const Eigen::MatrixXcd x = rician_channel(los, 0.0, rng);
  const double mean_power = x.cwiseAbs2().mean();
  EXPECT_NEAR(mean_power, 1.0, 0.05);
}

TEST(Channel, RicianDeterministicGivenSeed) {
  const Eigen::MatrixXcd los = Eigen::MatrixXcd::Ones(6, 7);
  RandomStream r1(9, "det");
  RandomStream r2(9, "det");
  const Eigen::MatrixXcd a = rician_channel(los, 3.0, r1);
  const Eigen::MatrixXcd b = rician_channel(los, 3.0, r2);
  EXPECT_TRUE(a == b);  // bit-identical
}

TEST(Channel, AssembleDeskDimensions) {
  Scenario s = desk_scenario();
  SceneGeometry g = build_geometry(s);
  ChannelSet cs = assemble_channels(s, g);
  EXPECT_EQ(cs.U.rows(), 144);
  EXPECT_EQ(cs.U.cols(), 8);
  ASSERT_EQ(cs.G.size(), 2u);
  EXPECT_EQ(cs.G[0].rows(), 2);
  EXPECT_EQ(cs.G[0].cols(), 144);
  ASSERT_EQ(cs.beta_inv.size(), 2u);
  EXPECT_GT(cs.beta_inv[0], 0.0);
  EXPECT_NEAR(cs.beta_inv[0] / 2.237009850554529e-19, 1.0, 1e-12);
}

TEST(Channel, AssembleThreeReceivers) {
  Scenario s;
  s.theta_ref_deg = {10.0, 30.0, 50.0};
  s.N_r = {2, 2, 2};
  SceneGeometry g = build_geometry(s);
  ChannelSet cs = assemble_channels(s, g);
  EXPECT_EQ(cs.G.size(), 3u);
  EXPECT_EQ(cs.num_receivers(), 3);
}

TEST(Channel, AssembleEarlierDrawsStableWhenAddingReceivers) {
  Scenario s2 = desk_scenario();
  Scenario s3 = s2;
  s3.theta_ref_deg = {30.0, 50.0, 55.0};
  s3.N_r = {2, 2, 2};
  ChannelSet a = assemble_channels(s2, build_geometry(s2));
  ChannelSet b = assemble_channels(s3, build_geometry(s3));
  EXPECT_TRUE(a.U == b.U);
  EXPECT_TRUE(a.G[0] == b.G[0]);
  EXPECT_TRUE(a.G[1] == b.G[1]);
}

TEST(Channel, EffectiveChannelAnnihilationAndIdentity) {
  Scenario s = desk_scenario();
  SceneGeometry g = build_geometry(s);
  ChannelSet cs = assemble_channels(s, g);
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(144);
  EXPECT_NEAR(effective_channel(cs, zero, 0).norm(), 0.0, 0.0);
  const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(144);
  const Eigen::MatrixXcd want = std::sqrt(cs.beta_inv[1]) * cs.G[1] * cs.U;
  EXPECT_NEAR((effective_channel(cs, ones, 1) - want).norm(), 0.0, 1e-12);
}

TEST(Channel, EffectiveChannelMatchesTripleProductOracle) {
  Scenario s = desk_scenario();
  SceneGeometry g = build_geometry(s);
  ChannelSet cs = assemble_channels(s, g);
  RandomStream rng(17, "theta");
  Eigen::VectorXcd theta(144);
  for (int n = 0; n < 144; ++n) theta(n) = rng.complex_normal();
  const Eigen::MatrixXcd got = effective_channel(cs, theta, 0);
  // Naive elementwise oracle.
  const double amp = std::sqrt(cs.beta_inv[0]);
  Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(2, 8);
  for (int r = 0; r < 2; ++r)
    for (int t = 0; t < 8; ++t)
      for (int l = 0; l < 144; ++l)
        want(r, t) += amp * cs.G[0](r, l) * theta(l) * cs.U(l, t);
  EXPECT_NEAR((got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff(), 0.0,
              1e-12);
  // Linearity in theta.
  const Eigen::MatrixXcd scaled = effective_channel(cs, 2.5 * theta, 0);
  EXPECT_NEAR((scaled - 2.5 * got).norm() / got.norm(), 0.0, 1e-12);
}

TEST(Channel, ProbeBroadsideAndMirrorSymmetry) {
  Scenario s = desk_scenario();
  SceneGeometry g = build_geometry(s);
  const ObservationProbe broadside = observation_probe(s, g, 0.0);
  const double amp = std::sqrt(broadside.beta_inv_ob);
  for (int n = 0; n < 144; ++n) {
    EXPECT_NEAR(broadside.G_ob(0, n).real(), amp, 1e-15);
    EXPECT_NEAR(broadside.G_ob(0, n).imag(), 0.0, 1e-15);
  }
  const ObservationProbe plus = observation_probe(s, g, 37.0);
  const ObservationProbe minus = observation_probe(s, g, -37.0);
  EXPECT_NEAR((plus.G_ob - minus.G_ob.conjugate()).norm(), 0.0, 1e-18);
  EXPECT_DOUBLE_EQ(plus.beta_inv_ob, minus.beta_inv_ob);
  EXPECT_NEAR(plus.beta_inv_ob, path_loss_factor_probe(g, 37.0, s.D_m), 0.0);
}

TEST(Channel, DumpLoadRoundTrip) {
  Scenario s = desk_scenario();
  SceneGeometry g = build_geometry(s);
  ChannelSet cs = assemble_channels(s, g);
  const std::string path = ::testing::TempDir() + "/channels.bin";
  dump_channels(cs, path);
  ChannelSet back = load_channels(path);
  EXPECT_TRUE(back.U == cs.U);
  ASSERT_EQ(back.G.size(), cs.G.size());
  EXPECT_TRUE(back.G[1] == cs.G[1]);
  EXPECT_EQ(back.rng_seed, cs.rng_seed);
  EXPECT_EQ(back.beta_inv[0], cs.beta_inv[0]);
  std::remove(path.c_str());
}

} // namespace
} // namespace risbeam
