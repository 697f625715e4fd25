#include "risbeam/channel.hpp"

#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "risbeam/units.hpp"

namespace risbeam {

Eigen::MatrixXcd ChannelSet::g_eff(int i) const {
  return std::sqrt(beta_inv.at(static_cast<size_t>(i))) * G.at(static_cast<size_t>(i));
}

Eigen::MatrixXcd los_matrix(const std::vector<Eigen::Vector3d>& row_points,
                            const std::vector<Eigen::Vector3d>& col_points,
                            double lambda_m) {
  if (row_points.empty() || col_points.empty())
    throw std::invalid_argument("los_matrix: empty point set");
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(row_points.size()),
                     static_cast<Eigen::Index>(col_points.size()));
  const double k = 2.0 * kPi / lambda_m;
  for (size_t a = 0; a < row_points.size(); ++a)
    for (size_t b = 0; b < col_points.size(); ++b) {
      const double d = (row_points[a] - col_points[b]).norm();
      m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          std::polar(1.0, -k * d);
    }
  return m;
}

Eigen::MatrixXcd rician_channel(const Eigen::MatrixXcd& los, double K_r,
                                RandomStream& rng) {
  if (K_r < 0.0) throw std::invalid_argument("rician_channel: K_r must be >= 0");
  Eigen::MatrixXcd out(los.rows(), los.cols());
  const double s_los = std::sqrt(K_r / (K_r + 1.0));
  const double s_nlos = std::sqrt(1.0 / (K_r + 1.0));
  for (Eigen::Index r = 0; r < los.rows(); ++r)
    for (Eigen::Index c = 0; c < los.cols(); ++c)
      out(r, c) = s_los * los(r, c) + s_nlos * rng.complex_normal();
  return out;
}

ChannelSet assemble_channels(const Scenario& s, const SceneGeometry& g) {
  ChannelSet cs;
  cs.rng_seed = s.seed;
  {
    RandomStream rng(static_cast<uint64_t>(s.seed), "U");
    cs.U = rician_channel(los_matrix(g.element_positions, g.tx_antenna_positions, g.lambda_m),
                          s.K_r, rng);
  }
  const int n = s.num_receivers();
  cs.G.reserve(static_cast<size_t>(n));
  cs.beta_inv.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    RandomStream rng(static_cast<uint64_t>(s.seed), "G" + std::to_string(i + 1));
    cs.G.push_back(rician_channel(
        los_matrix(g.rx_antenna_positions[static_cast<size_t>(i)], g.element_positions,
                   g.lambda_m),
        s.K_r, rng));
    cs.beta_inv.push_back(path_loss_factor(g, i));
  }
  return cs;
}

Eigen::MatrixXcd effective_channel(const ChannelSet& cs,
                                   const Eigen::VectorXcd& theta, int i) {
  if (i < 0 || i >= cs.num_receivers())
    throw std::out_of_range("effective_channel: receiver index");
  if (theta.size() != cs.U.rows())
    throw std::invalid_argument("effective_channel: theta length != N_ris");
  const auto& Gi = cs.G[static_cast<size_t>(i)];
  if (Gi.cols() != cs.U.rows())
    throw std::invalid_argument("effective_channel: G/U dimension mismatch");
  return std::sqrt(cs.beta_inv[static_cast<size_t>(i)]) *
         (Gi * theta.asDiagonal() * cs.U);
}

ObservationProbe observation_probe(const Scenario& s, const SceneGeometry& g,
                                   double angle_deg) {
  if (angle_deg < -89.0 - 1e-12 || angle_deg > 89.0 + 1e-12)
    throw std::invalid_argument("observation_probe: angle outside [-89, 89] degrees");
  ObservationProbe p;
  p.angle_deg = angle_deg;
  p.beta_inv_ob = path_loss_factor_probe(g, angle_deg, s.D_m);
  const double amp = std::sqrt(p.beta_inv_ob);
  const double k_sin = 2.0 * kPi * std::sin(deg2rad(angle_deg)) / g.lambda_m;
  const Eigen::Index n = static_cast<Eigen::Index>(g.element_positions.size());
  p.G_ob.resize(1, n);
  for (Eigen::Index e = 0; e < n; ++e) {
    const double x = g.element_positions[static_cast<size_t>(e)].x();
    p.G_ob(0, e) = amp * std::polar(1.0, k_sin * x);
  }
  return p;
}

namespace {

constexpr char kMagic[8] = {'R', 'B', 'C', 'H', '0', '0', '0', '1'};

void write_matrix(std::ofstream& out, const Eigen::MatrixXcd& m) {
  const int64_t rows = m.rows(), cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double re = m(r, c).real(), im = m(r, c).imag();
      out.write(reinterpret_cast<const char*>(&re), sizeof re);
      out.write(reinterpret_cast<const char*>(&im), sizeof im);
    }
}

Eigen::MatrixXcd read_matrix(std::ifstream& in) {
  int64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || rows < 0 || cols < 0 || rows > (1 << 20) || cols > (1 << 20))
    throw std::runtime_error("channel file: bad matrix header");
  Eigen::MatrixXcd m(rows, cols);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) {
      double re = 0, im = 0;
      in.read(reinterpret_cast<char*>(&re), sizeof re);
      in.read(reinterpret_cast<char*>(&im), sizeof im);
      m(r, c) = {re, im};
    }
  if (!in) throw std::runtime_error("channel file: truncated matrix data");
  return m;
}

} // namespace

void dump_channels(const ChannelSet& cs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  const int64_t n = cs.num_receivers();
  out.write(reinterpret_cast<const char*>(&cs.rng_seed), sizeof cs.rng_seed);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  write_matrix(out, cs.U);
  for (int64_t i = 0; i < n; ++i) {
    const double b = cs.beta_inv[static_cast<size_t>(i)];
    out.write(reinterpret_cast<const char*>(&b), sizeof b);
    write_matrix(out, cs.G[static_cast<size_t>(i)]);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ChannelSet load_channels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("channel file: bad magic: " + path);
  ChannelSet cs;
  int64_t n = 0;
  in.read(reinterpret_cast<char*>(&cs.rng_seed), sizeof cs.rng_seed);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n < 0 || n > 4096) throw std::runtime_error("channel file: bad receiver count");
  cs.U = read_matrix(in);
  for (int64_t i = 0; i < n; ++i) {
    double b = 0;
    in.read(reinterpret_cast<char*>(&b), sizeof b);
    if (!in) throw std::runtime_error("channel file: truncated");
    cs.beta_inv.push_back(b);
    cs.G.push_back(read_matrix(in));
  }
  return cs;
}

} // namespace risbeam
