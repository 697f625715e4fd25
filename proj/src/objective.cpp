#include "risbeam/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace risbeam {

namespace {

constexpr double kLn2 = 0.6931471805599453;

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& m) {
  return 0.5 * (m + m.adjoint());
}

// T_i = sum_j H_i F_j F_j^H H_i^H + sigma2 I, and the interference-only
// variant Omega_i (j != i). `skip` < 0 keeps every term.
Eigen::MatrixXcd noise_plus_terms(const Eigen::MatrixXcd& Hi,
                                  const std::vector<Eigen::MatrixXcd>& F,
                                  double sigma2, int skip) {
  const Eigen::Index nr = Hi.rows();
  Eigen::MatrixXcd T = sigma2 * Eigen::MatrixXcd::Identity(nr, nr);
  for (int j = 0; j < static_cast<int>(F.size()); ++j) {
    if (j == skip) continue;
    const Eigen::MatrixXcd HF = Hi * F[static_cast<size_t>(j)];
    T.noalias() += HF * HF.adjoint();
  }
  return hermitian_part(T);
}

Eigen::MatrixXcd inverse_hermitian(const Eigen::MatrixXcd& m) {
  Eigen::LLT<Eigen::MatrixXcd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("matrix not positive definite");
  return llt.solve(Eigen::MatrixXcd::Identity(m.rows(), m.cols()));
}

Eigen::MatrixXcd inverse_sqrt_hermitian(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw std::domain_error("matrix not positive definite");
  return es.operatorInverseSqrt();
}

// Horizontal stack of U * F_j over every receiver: one column per stream.
Eigen::MatrixXcd stacked_streams(const ChannelSet& cs,
                                 const std::vector<Eigen::MatrixXcd>& F) {
  Eigen::Index total = 0;
  for (const auto& Fj : F) total += Fj.cols();
  Eigen::MatrixXcd X(cs.U.rows(), total);
  Eigen::Index at = 0;
  for (const auto& Fj : F) {
    X.middleCols(at, Fj.cols()).noalias() = cs.U * Fj;
    at += Fj.cols();
  }
  return X;
}

} // namespace

double log2_det_hermitian(const Eigen::MatrixXcd& m) {
  Eigen::LLT<Eigen::MatrixXcd> llt(hermitian_part(m));
  if (llt.info() != Eigen::Success)
    throw std::domain_error("log2_det: matrix not positive definite");
  const Eigen::MatrixXcd L = llt.matrixL();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < L.rows(); ++k) acc += std::log2(L(k, k).real());
  return 2.0 * acc;
}

double achievable_rate(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                       const std::vector<Eigen::MatrixXcd>& F, double sigma2,
                       int i) {
  if (sigma2 <= 0.0) throw std::invalid_argument("achievable_rate: sigma2 <= 0");
  const Eigen::MatrixXcd Hi = effective_channel(cs, theta, i);
  const Eigen::MatrixXcd T = noise_plus_terms(Hi, F, sigma2, -1);
  const Eigen::MatrixXcd Omega = noise_plus_terms(Hi, F, sigma2, i);
  return log2_det_hermitian(T) - log2_det_hermitian(Omega);
}

double min_rate(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                const std::vector<Eigen::MatrixXcd>& F, double sigma2) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cs.num_receivers(); ++i)
    best = std::min(best, achievable_rate(cs, theta, F, sigma2, i));
  return best;
}

AuxiliaryFilters update_filters(const ChannelSet& cs,
                                const Eigen::VectorXcd& theta,
                                const std::vector<Eigen::MatrixXcd>& F,
                                double sigma2) {
  if (sigma2 <= 0.0) throw std::invalid_argument("update_filters: sigma2 <= 0");
  AuxiliaryFilters out;
  const int n = cs.num_receivers();
  out.W.reserve(static_cast<size_t>(n));
  out.Sigma.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXcd Hi = effective_channel(cs, theta, i);
    const Eigen::MatrixXcd HF = Hi * F[static_cast<size_t>(i)];
    const Eigen::MatrixXcd T = noise_plus_terms(Hi, F, sigma2, -1);
    Eigen::LLT<Eigen::MatrixXcd> llt(T);
    if (llt.info() != Eigen::Success)
      throw std::domain_error("update_filters: total covariance not PD");
    // W = (HF)^H T^{-1}, computed as the solution of T W^H = HF.
    const Eigen::MatrixXcd W = llt.solve(HF).adjoint();
    const Eigen::Index nr = Hi.rows();
    const Eigen::MatrixXcd Sigma =
        hermitian_part(Eigen::MatrixXcd::Identity(nr, nr) - W * HF);
    out.W.push_back(W);
    out.Sigma.push_back(Sigma);
  }
  return out;
}

double surrogate_value(const AuxiliaryFilters& filters, const ChannelSet& cs,
                       const Eigen::VectorXcd& theta,
                       const std::vector<Eigen::MatrixXcd>& F, double sigma2,
                       int i) {
  const auto& W = filters.W.at(static_cast<size_t>(i));
  const auto& Sigma = filters.Sigma.at(static_cast<size_t>(i));
  const Eigen::MatrixXcd Hi = effective_channel(cs, theta, i);
  const Eigen::MatrixXcd Sinv = inverse_hermitian(Sigma);
  const Eigen::Index nr = Hi.rows();

  const Eigen::MatrixXcd SinvW = Sinv * W;
  double traces = 2.0 * (SinvW * Hi * F[static_cast<size_t>(i)]).trace().real();
  for (int j = 0; j < static_cast<int>(F.size()); ++j) {
    const Eigen::MatrixXcd WHF = W * Hi * F[static_cast<size_t>(j)];
    traces -= (WHF.adjoint() * Sinv * WHF).trace().real();
  }
  traces -= sigma2 * (W.adjoint() * SinvW).trace().real();
  traces += static_cast<double>(nr) - Sinv.trace().real();
  return traces / kLn2 - log2_det_hermitian(Sigma);
}

double reradiated_power(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                        const std::vector<Eigen::MatrixXcd>& F,
                        const ObservationProbe& probe) {
  const Eigen::MatrixXcd row = probe.G_ob * theta.asDiagonal() * cs.U;
  double p = 0.0;
  for (const auto& Fj : F) p += (row * Fj).squaredNorm();
  return p;
}

ThetaQuadratics build_theta_quadratics(const AuxiliaryFilters& filters,
                                       const ChannelSet& cs,
                                       const std::vector<Eigen::MatrixXcd>& F,
                                       double sigma2,
                                       const std::vector<ObservationProbe>& probes) {
  ThetaQuadratics tq;
  const int n = cs.num_receivers();
  const Eigen::MatrixXcd X = stacked_streams(cs, F);
  const Eigen::MatrixXcd Tsum_t = (X * X.adjoint()).transpose();
  const double inv_sqrt_ln2 = 1.0 / std::sqrt(kLn2);

  for (int i = 0; i < n; ++i) {
    const auto& W = filters.W[static_cast<size_t>(i)];
    const auto& Sigma = filters.Sigma[static_cast<size_t>(i)];
    const Eigen::MatrixXcd Geff = cs.g_eff(i);
    const Eigen::MatrixXcd Sinv = inverse_hermitian(Sigma);
    const Eigen::MatrixXcd Z = inverse_sqrt_hermitian(Sigma) * (W * Geff);

    // E_i = (1/ln2) * A_i hadamard T^T with A_i = Z^H Z; factored as R^H R
    // with one row per (filter-output, stream) pair.
    const Eigen::MatrixXcd A = Z.adjoint() * Z;
    Eigen::MatrixXcd E = hermitian_part((A.array() * Tsum_t.array()).matrix() / kLn2);
    Eigen::MatrixXcd R(Z.rows() * X.cols(), cs.n_ris());
    for (Eigen::Index p = 0; p < Z.rows(); ++p)
      for (Eigen::Index k = 0; k < X.cols(); ++k)
        R.row(p * X.cols() + k) =
            inv_sqrt_ln2 * (Z.row(p).array() * X.col(k).transpose().array()).matrix();
    tq.E.push_back(std::move(E));
    tq.E_factor.push_back(std::move(R));

    // b_i = conj(diag(U F_i Sigma^{-1} W Geff)) / ln2.
    const Eigen::MatrixXcd M1 = cs.U * F[static_cast<size_t>(i)];
    const Eigen::MatrixXcd M2 = Sinv * W * Geff;
    const Eigen::VectorXcd diag =
        (M1.array() * M2.transpose().array()).rowwise().sum().matrix();
    tq.b.push_back(diag.conjugate() / kLn2);

    const double nr = static_cast<double>(W.rows());
    const double c = (-sigma2 * (W.adjoint() * Sinv * W).trace().real() + nr -
                      Sinv.trace().real()) /
                         kLn2 -
                     log2_det_hermitian(Sigma);
    tq.c.push_back(c);
  }

  for (const auto& probe : probes) {
    // Mask form in Watts: M = R^H R with R = (diag(g) X)^T, so
    // theta^H M theta = sum of |probe row * diag(theta) * stream|^2.
    const Eigen::MatrixXcd R =
        (X.array().colwise() * probe.G_ob.row(0).transpose().array())
            .matrix()
            .transpose();
    tq.mask_angles_deg.push_back(probe.angle_deg);
    tq.mask_forms.push_back(hermitian_part(R.adjoint() * R));
    tq.mask_factors.push_back(R);
  }
  return tq;
}

PrecoderQuadratics build_precoder_quadratics(const AuxiliaryFilters& filters,
                                             const ChannelSet& cs,
                                             const Eigen::VectorXcd& theta,
                                             const std::vector<Eigen::MatrixXcd>& F,
                                             double sigma2, int target,
                                             double P_max_w) {
  PrecoderQuadratics pq;
  pq.target = target;
  const int n = cs.num_receivers();
  const double inv_sqrt_ln2 = 1.0 / std::sqrt(kLn2);

  double other_power = 0.0;
  for (int j = 0; j < n; ++j)
    if (j != target) other_power += F[static_cast<size_t>(j)].squaredNorm();
  pq.residual_power_w = P_max_w - other_power;
  if (pq.residual_power_w <= 0.0)
    throw std::runtime_error(
        "build_precoder_quadratics: no transmit power left for this precoder");

  for (int m = 0; m < n; ++m) {
    const auto& W = filters.W[static_cast<size_t>(m)];
    const auto& Sigma = filters.Sigma[static_cast<size_t>(m)];
    const Eigen::MatrixXcd Hm = effective_channel(cs, theta, m);
    const Eigen::MatrixXcd Sinv = inverse_hermitian(Sigma);
    const Eigen::MatrixXcd R = inv_sqrt_ln2 * (inverse_sqrt_hermitian(Sigma) * (W * Hm));
    const Eigen::MatrixXcd J = hermitian_part(R.adjoint() * R);
    const Eigen::MatrixXcd Km = (Sinv * W * Hm) / kLn2;

    double cst = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == target) continue;
      const Eigen::MatrixXcd RF = R * F[static_cast<size_t>(j)];
      cst -= RF.squaredNorm();
    }
    if (m != target)
      cst += 2.0 * (Km * F[static_cast<size_t>(m)]).trace().real();
    const double nr = static_cast<double>(W.rows());
    cst += (-sigma2 * (W.adjoint() * Sinv * W).trace().real() + nr -
            Sinv.trace().real()) /
           kLn2;
    cst -= log2_det_hermitian(Sigma);
    pq.consts.push_back(cst);
    pq.J.push_back(J);
    pq.J_factor.push_back(R);
    if (m == target) {
      pq.K = Km;
      const Eigen::Index nt = Km.cols(), ns = Km.rows();
      pq.b_vec.resize(nt * ns);
      for (Eigen::Index s = 0; s < ns; ++s)
        for (Eigen::Index t = 0; t < nt; ++t)
          pq.b_vec(s * nt + t) = std::conj(Km(s, t));
    }
  }
  return pq;
}

JointPrecoderQuadratics build_joint_precoder_quadratics(
    const AuxiliaryFilters& filters, const ChannelSet& cs,
    const Eigen::VectorXcd& theta, double sigma2) {
  JointPrecoderQuadratics q;
  const int n = cs.num_receivers();
  const double inv_sqrt_ln2 = 1.0 / std::sqrt(kLn2);
  for (int m = 0; m < n; ++m) {
    const auto& W = filters.W[static_cast<size_t>(m)];
    const auto& Sigma = filters.Sigma[static_cast<size_t>(m)];
    const Eigen::MatrixXcd Hm = effective_channel(cs, theta, m);
    const Eigen::MatrixXcd Sinv = inverse_hermitian(Sigma);
    q.R.push_back(inv_sqrt_ln2 *
                  (inverse_sqrt_hermitian(Sigma) * (W * Hm)));
    q.K.push_back((Sinv * W * Hm) / kLn2);
    const double nr = static_cast<double>(W.rows());
    q.base.push_back((-sigma2 * (W.adjoint() * Sinv * W).trace().real() + nr -
                      Sinv.trace().real()) /
                         kLn2 -
                     log2_det_hermitian(Sigma));
  }
  return q;
}

double joint_precoder_surrogate(const JointPrecoderQuadratics& q,
                                const std::vector<Eigen::MatrixXcd>& F,
                                int m) {
  const auto mi = static_cast<size_t>(m);
  double v = q.base[mi] + 2.0 * (q.K[mi] * F[mi]).trace().real();
  for (const auto& Fj : F) v -= (q.R[mi] * Fj).squaredNorm();
  return v;
}

Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& F) {
  return Eigen::Map<const Eigen::VectorXcd>(F.data(), F.size());
}

Eigen::MatrixXcd devectorize(const Eigen::VectorXcd& f, int n_t, int n_r) {
  if (f.size() != static_cast<Eigen::Index>(n_t) * n_r)
    throw std::invalid_argument("devectorize: length mismatch");
  return Eigen::Map<const Eigen::MatrixXcd>(f.data(), n_t, n_r);
}

double theta_surrogate(const ThetaQuadratics& tq, const Eigen::VectorXcd& theta,
                       int i) {
  const auto& E = tq.E.at(static_cast<size_t>(i));
  const auto& b = tq.b.at(static_cast<size_t>(i));
  const double quad = (theta.adjoint() * E * theta)(0).real();
  const double lin = 2.0 * (theta.adjoint() * b)(0).real();
  return -quad + lin + tq.c.at(static_cast<size_t>(i));
}

double theta_mask_power(const ThetaQuadratics& tq, const Eigen::VectorXcd& theta,
                        int mask_index) {
  const auto& M = tq.mask_forms.at(static_cast<size_t>(mask_index));
  return (theta.adjoint() * M * theta)(0).real();
}

} // namespace risbeam
