#include "risbeam/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace risbeam {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Second-order cone (Jordan algebra) primitives. A cone vector v of dimension
// m splits as (v0, vbar) and is interior iff v0 > |vbar|.

double cone_det(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v(0) * v(0) - v.tail(v.size() - 1).squaredNorm();
}

Eigen::VectorXd jordan_mul(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b) {
  Eigen::VectorXd out(a.size());
  out(0) = a.dot(b);
  out.tail(a.size() - 1) =
      a(0) * b.tail(b.size() - 1) + b(0) * a.tail(a.size() - 1);
  return out;
}

// Solves lambda o y = v for y.
Eigen::VectorXd jordan_solve(const Eigen::Ref<const Eigen::VectorXd>& lambda,
                             const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Eigen::Index m = lambda.size();
  const double den = cone_det(lambda);
  Eigen::VectorXd y(m);
  y(0) = (lambda(0) * v(0) - lambda.tail(m - 1).dot(v.tail(m - 1))) / den;
  y.tail(m - 1) = (v.tail(m - 1) - y(0) * lambda.tail(m - 1)) / lambda(0);
  return y;
}

// Largest step alpha keeping v + alpha * dv inside the cone (capped).
double max_cone_step(const Eigen::Ref<const Eigen::VectorXd>& v,
                     const Eigen::Ref<const Eigen::VectorXd>& dv) {
  const Eigen::Index m = v.size();
  const double A = dv(0) * dv(0) - dv.tail(m - 1).squaredNorm();
  const double B = v(0) * dv(0) - v.tail(m - 1).dot(dv.tail(m - 1));
  const double C = cone_det(v);
  // Smallest positive root of A a^2 + 2 B a + C = 0, written as
  // C / (-B + sqrt(B^2 - A C)) for numerical stability; no positive root
  // means the ray never leaves the cone.
  const double disc = B * B - A * C;
  if (A >= 0.0 && (B >= 0.0 || disc < 0.0)) return kInfinity;
  const double den = -B + std::sqrt(std::max(disc, 0.0));
  return den > 0.0 ? C / den : kInfinity;
}

// Nesterov-Todd scaling for one cone: a symmetric PD map W with
// W z = W^{-1} s, stored as W = eta (2 u u^T - J) with det_J(u) = 1.
struct NTScaling {
  double eta = 1.0;
  Eigen::VectorXd u;   // scaling point, cone interior, J-determinant 1
  Eigen::VectorXd ju;  // J u (cached)
};

NTScaling compute_scaling(const Eigen::Ref<const Eigen::VectorXd>& s,
                          const Eigen::Ref<const Eigen::VectorXd>& z) {
  const Eigen::Index m = s.size();
  // Iterates are kept strictly interior, but roundoff near the boundary can
  // push the Jordan determinant nonpositive; clamp to a tiny positive floor
  // relative to the vector scale so the scaling stays finite.
  const double s_floor = 1e-28 * s.squaredNorm() + 1e-300;
  const double z_floor = 1e-28 * z.squaredNorm() + 1e-300;
  const double as = std::sqrt(std::max(cone_det(s), s_floor));
  const double az = std::sqrt(std::max(cone_det(z), z_floor));
  const Eigen::VectorXd sh = s / as;
  const Eigen::VectorXd zh = z / az;
  const double gamma = std::sqrt((1.0 + sh.dot(zh)) / 2.0);
  Eigen::VectorXd wbar(m);
  wbar(0) = (sh(0) + zh(0)) / (2.0 * gamma);
  wbar.tail(m - 1) = (sh.tail(m - 1) - zh.tail(m - 1)) / (2.0 * gamma);
  NTScaling sc;
  sc.eta = std::sqrt(as / az);
  sc.u.resize(m);
  sc.u(0) = std::sqrt((wbar(0) + 1.0) / 2.0);
  sc.u.tail(m - 1) = wbar.tail(m - 1) / (2.0 * sc.u(0));
  sc.ju = sc.u;
  sc.ju.tail(m - 1) = -sc.ju.tail(m - 1);
  return sc;
}

// W v = eta (2 (u.v) u - J v); in-place, no temporaries.
void apply_w(const NTScaling& sc, Eigen::Ref<Eigen::VectorXd> v) {
  const Eigen::Index m = v.size();
  const double dot = sc.u.dot(v);
  v(0) = sc.eta * (2.0 * dot * sc.u(0) - v(0));
  v.tail(m - 1) =
      sc.eta * (2.0 * dot * sc.u.tail(m - 1) + v.tail(m - 1));
}

// W^{-1} v = (1/eta) (2 (Ju.v) Ju - J v).
void apply_w_inv(const NTScaling& sc, Eigen::Ref<Eigen::VectorXd> v) {
  const Eigen::Index m = v.size();
  const double dot = sc.ju.dot(v);
  v(0) = (2.0 * dot * sc.ju(0) - v(0)) / sc.eta;
  v.tail(m - 1) =
      (2.0 * dot * sc.ju.tail(m - 1) + v.tail(m - 1)) / sc.eta;
}

struct ConeSpan {
  Eigen::Index start = 0;
  Eigen::Index dim = 0;
};

// ---------------------------------------------------------------------------
// Problem transformation state.

struct TransformedPiece {
  Eigen::MatrixXcd R;  // rank x d (scaled)
  Eigen::VectorXcd b;
  double c = 0.0;
};

struct TransformedIneq {
  Eigen::MatrixXcd R;  // rank x d, bound normalized to 1
};

} // namespace

Eigen::MatrixXd real_embedding(const Eigen::MatrixXcd& m) {
  const Eigen::Index r = m.rows(), c = m.cols();
  Eigen::MatrixXd out(2 * r, 2 * c);
  out.topLeftCorner(r, c) = m.real();
  out.topRightCorner(r, c) = -m.imag();
  out.bottomLeftCorner(r, c) = m.imag();
  out.bottomRightCorner(r, c) = m.real();
  return out;
}

Eigen::VectorXd real_embedding(const Eigen::VectorXcd& v) {
  Eigen::VectorXd out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

Eigen::MatrixXcd psd_factor(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return Eigen::MatrixXcd(0, 0);
  if (m.rows() != m.cols())
    throw std::invalid_argument("psd_factor: matrix not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      0.5 * (m + m.adjoint()));
  if (es.info() != Eigen::Success)
    throw std::invalid_argument("psd_factor: eigendecomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  const double trace = std::max(ev.sum(), 0.0);
  const double neg_tol = 1e-9 * std::max(trace, 1e-300);
  if (ev.minCoeff() < -neg_tol)
    throw std::invalid_argument("psd_factor: matrix is not positive semidefinite");
  const double cutoff = std::max(ev.maxCoeff(), 0.0) * 1e-14;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > cutoff) ++rank;
  Eigen::MatrixXcd R(rank, m.cols());
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > cutoff)
      R.row(at++) = std::sqrt(ev(i)) * es.eigenvectors().col(i).adjoint();
  return R;
}

double piece_value(const QuadPiece& p, const Eigen::VectorXcd& x) {
  double quad = 0.0;
  if (p.factor.size() > 0)
    quad = (p.factor * x).squaredNorm();
  else if (p.E.size() > 0)
    quad = (x.adjoint() * p.E * x)(0).real();
  double lin = 0.0;
  if (p.b.size() > 0) lin = 2.0 * (x.adjoint() * p.b)(0).real();
  return -quad + lin + p.c;
}

void dump_problem(const MaxMinQP& qp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_problem: cannot open " + path);
  out.precision(17);
  auto put_matrix = [&out](const Eigen::MatrixXcd& m) {
    out << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out << m(r, c).real() << " " << m(r, c).imag() << " ";
      out << "\n";
    }
  };
  out << "maxminqp dim " << qp.dim << "\n";
  out << "ball " << (qp.ball_type == BallType::kPerCoordinate ? "per_coordinate"
                                                              : "total_power")
      << " " << qp.total_power << "\n";
  out << "pieces " << qp.pieces.size() << "\n";
  for (const auto& p : qp.pieces) {
    out << "piece c " << p.c << "\n";
    put_matrix(p.E);
    put_matrix(Eigen::MatrixXcd(p.b));
  }
  out << "ineqs " << qp.ineqs.size() << "\n";
  for (const auto& q : qp.ineqs) {
    out << "ineq bound " << q.bound << "\n";
    put_matrix(q.Q);
  }
}

ConicSolution solve(const MaxMinQP& qp, double tol, int max_iter) {
  if (qp.pieces.empty())
    throw std::invalid_argument("conic solve: need at least one piece");
  if (qp.dim <= 0) throw std::invalid_argument("conic solve: dim must be positive");
  const Eigen::Index d = qp.dim;

  // --- Factor and validate all quadratics. ---------------------------------
  std::vector<Eigen::MatrixXcd> piece_R(qp.pieces.size());
  for (size_t p = 0; p < qp.pieces.size(); ++p) {
    const auto& piece = qp.pieces[p];
    if (piece.factor.size() > 0) {
      if (piece.factor.cols() != d)
        throw std::invalid_argument("conic solve: piece factor dimension");
      piece_R[p] = piece.factor;
    } else if (piece.E.size() > 0) {
      if (piece.E.rows() != d || piece.E.cols() != d)
        throw std::invalid_argument("conic solve: piece matrix dimension");
      piece_R[p] = psd_factor(piece.E);
    } else {
      piece_R[p] = Eigen::MatrixXcd(0, d);
    }
  }
  std::vector<Eigen::MatrixXcd> ineq_R;
  std::vector<double> ineq_bound;
  Eigen::Index zero_rows = 0;
  std::vector<Eigen::MatrixXcd> zero_R;
  for (const auto& q : qp.ineqs) {
    if (q.bound < 0.0)
      throw std::invalid_argument("conic solve: negative constraint bound");
    Eigen::MatrixXcd R;
    if (q.factor.size() > 0) {
      if (q.factor.cols() != d)
        throw std::invalid_argument("conic solve: constraint factor dimension");
      R = q.factor;
    } else if (q.Q.size() > 0) {
      if (q.Q.rows() != d || q.Q.cols() != d)
        throw std::invalid_argument("conic solve: constraint matrix dimension");
      R = psd_factor(q.Q);
    } else {
      R = Eigen::MatrixXcd(0, d);
    }
    if (R.rows() == 0) continue;  // zero form: trivially satisfied
    if (q.bound == 0.0) {
      zero_rows += R.rows();
      zero_R.push_back(std::move(R));
    } else {
      ineq_R.push_back(std::move(R));
      ineq_bound.push_back(q.bound);
    }
  }

  // --- Zero-bound caps force x into the nullspace of their factors. --------
  Eigen::MatrixXcd basis;  // d x d2, orthonormal columns
  if (zero_rows > 0) {
    Eigen::MatrixXcd Z(zero_rows, d);
    Eigen::Index at = 0;
    for (const auto& R : zero_R) {
      Z.middleRows(at, R.rows()) = R;
      at += R.rows();
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Z, Eigen::ComputeFullV);
    const Eigen::Index rank = svd.rank();
    basis = svd.matrixV().rightCols(d - rank);
  } else {
    basis = Eigen::MatrixXcd::Identity(d, d);
  }
  const Eigen::Index d2 = basis.cols();

  auto finish_at_point = [&](const Eigen::VectorXcd& x, ConicStatus status,
                             const KktResiduals& kkt, int iters) {
    ConicSolution sol;
    sol.x = x;
    sol.status = status;
    sol.kkt = kkt;
    sol.iterations = iters;
    double best = kInfinity;
    for (const auto& p : qp.pieces) best = std::min(best, piece_value(p, x));
    sol.objective = best;
    return sol;
  };

  if (d2 == 0) {
    // Variable fully pinned to zero by the zero-bound caps.
    return finish_at_point(Eigen::VectorXcd::Zero(d), ConicStatus::kOptimal,
                           KktResiduals{}, 0);
  }

  // --- Restrict, scale the variable, normalize bounds, scale pieces. -------
  if (qp.ball_type == BallType::kTotalPower && qp.total_power <= 0.0)
    throw std::invalid_argument("conic solve: total power must be positive");
  const double omega =
      qp.ball_type == BallType::kTotalPower ? std::sqrt(qp.total_power) : 1.0;

  std::vector<TransformedPiece> pieces(qp.pieces.size());
  double scale = 0.0;
  for (size_t p = 0; p < qp.pieces.size(); ++p) {
    TransformedPiece& tp = pieces[p];
    tp.R = omega * (piece_R[p] * basis);
    tp.b = qp.pieces[p].b.size() > 0
               ? Eigen::VectorXcd(omega * (basis.adjoint() * qp.pieces[p].b))
               : Eigen::VectorXcd::Zero(d2);
    tp.c = qp.pieces[p].c;
    scale = std::max({scale, tp.R.squaredNorm(), std::abs(tp.c)});
    if (tp.b.size() > 0) scale = std::max(scale, tp.b.cwiseAbs().maxCoeff());
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  for (auto& tp : pieces) {
    tp.R /= std::sqrt(scale);
    tp.b /= scale;
    tp.c /= scale;
  }

  std::vector<TransformedIneq> ineqs(ineq_R.size());
  for (size_t m = 0; m < ineq_R.size(); ++m)
    ineqs[m].R = (omega / std::sqrt(ineq_bound[m])) * (ineq_R[m] * basis);

  // Per-coordinate balls become |<row_n, y>| <= 1 rows under the restriction.
  const bool per_coordinate = qp.ball_type == BallType::kPerCoordinate;

  // --- Assemble the cone program: min c^T u, G u + s = h, s in product SOC.
  const Eigen::Index n = 2 * d2 + 1;
  std::vector<ConeSpan> cones;
  Eigen::Index rows = 0;
  for (const auto& tp : pieces) {
    cones.push_back({rows, 2 * tp.R.rows() + 2});
    rows += 2 * tp.R.rows() + 2;
  }
  for (const auto& ti : ineqs) {
    cones.push_back({rows, 2 * ti.R.rows() + 2});
    rows += 2 * ti.R.rows() + 2;
  }
  if (per_coordinate) {
    for (Eigen::Index k = 0; k < d; ++k) {
      cones.push_back({rows, 3});
      rows += 3;
    }
  } else {
    cones.push_back({rows, 2 * d2 + 1});
    rows += 2 * d2 + 1;
  }

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows, n);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(rows);
  auto put_factor_rows = [&](Eigen::Index at, const Eigen::MatrixXcd& R,
                             double coeff) {
    for (Eigen::Index k = 0; k < R.rows(); ++k) {
      G.row(at + 2 * k).head(d2) = -coeff * R.row(k).real();
      G.row(at + 2 * k).segment(d2, d2) = coeff * R.row(k).imag();
      G.row(at + 2 * k + 1).head(d2) = -coeff * R.row(k).imag();
      G.row(at + 2 * k + 1).segment(d2, d2) = -coeff * R.row(k).real();
    }
  };

  {
    size_t cone_idx = 0;
    for (const auto& tp : pieces) {
      const Eigen::Index at = cones[cone_idx++].start;
      const Eigen::Index r = tp.R.rows();
      // Affine head/tail rows share -q^T with q = [2 bbar; -1].
      Eigen::RowVectorXd qrow(n);
      qrow.head(d2) = 2.0 * tp.b.real().transpose();
      qrow.segment(d2, d2) = 2.0 * tp.b.imag().transpose();
      qrow(n - 1) = -1.0;
      G.row(at) = -qrow;
      h(at) = tp.c + 1.0;
      put_factor_rows(at + 1, tp.R, 2.0);
      G.row(at + 1 + 2 * r) = -qrow;
      h(at + 1 + 2 * r) = tp.c - 1.0;
    }
    for (const auto& ti : ineqs) {
      const Eigen::Index at = cones[cone_idx++].start;
      const Eigen::Index r = ti.R.rows();
      h(at) = 2.0;
      put_factor_rows(at + 1, ti.R, 2.0);
      h(at + 1 + 2 * r) = 0.0;
    }
    if (per_coordinate) {
      for (Eigen::Index k = 0; k < d; ++k) {
        const Eigen::Index at = cones[cone_idx++].start;
        h(at) = 1.0;
        const Eigen::RowVectorXcd row = basis.row(k);
        G.row(at + 1).head(d2) = -row.real();
        G.row(at + 1).segment(d2, d2) = row.imag();
        G.row(at + 2).head(d2) = -row.imag();
        G.row(at + 2).segment(d2, d2) = -row.real();
      }
    } else {
      const Eigen::Index at = cones[cone_idx++].start;
      h(at) = 1.0;
      G.block(at + 1, 0, 2 * d2, 2 * d2) =
          -Eigen::MatrixXd::Identity(2 * d2, 2 * d2);
    }
  }

  Eigen::VectorXd c_vec = Eigen::VectorXd::Zero(n);
  c_vec(n - 1) = -1.0;

  // --- Strictly feasible primal start; identity dual start. ----------------
  double min_c = kInfinity;
  for (const auto& tp : pieces) min_c = std::min(min_c, tp.c);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  u(n - 1) = min_c - 1.0;
  Eigen::VectorXd s = h - G * u;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(rows);
  for (const auto& cone : cones) z(cone.start) = 1.0;

  const double nu = static_cast<double>(cones.size());
  const double h_norm = std::max(1.0, h.lpNorm<Eigen::Infinity>());

  auto scaled_objective = [&](const Eigen::VectorXd& uu) {
    const Eigen::VectorXcd y =
        uu.head(d2).cast<std::complex<double>>() +
        std::complex<double>(0, 1) * uu.segment(d2, d2).cast<std::complex<double>>();
    double best = kInfinity;
    for (const auto& tp : pieces) {
      double v = -(tp.R * y).squaredNorm() + 2.0 * (y.adjoint() * tp.b)(0).real() +
                 tp.c;
      best = std::min(best, v);
    }
    return best;
  };

  Eigen::VectorXd u_best = u;
  double best_obj = scaled_objective(u);

  KktResiduals kkt;
  ConicStatus status = ConicStatus::kMaxIter;
  int iters_done = 0;

  std::vector<NTScaling> scalings(cones.size());
  Eigen::VectorXd lambda(rows);
  Eigen::MatrixXd Y(rows, n), M(n, n), M_reg(n, n);
  Eigen::VectorXd psi(rows), gvec(rows), bz(rows), rhs(n);

  auto apply_winv_all = [&](Eigen::VectorXd& v) {
    for (size_t k = 0; k < cones.size(); ++k)
      apply_w_inv(scalings[k], v.segment(cones[k].start, cones[k].dim));
  };
  auto apply_w_all = [&](Eigen::VectorXd& v) {
    for (size_t k = 0; k < cones.size(); ++k)
      apply_w(scalings[k], v.segment(cones[k].start, cones[k].dim));
  };

  Eigen::LLT<Eigen::MatrixXd> llt;
  auto factorize = [&]() {
    double delta = 0.0;
    for (int attempt = 0; attempt < 9; ++attempt) {
      M_reg = M;
      if (delta > 0.0) M_reg.diagonal().array() += delta;
      llt.compute(M_reg);
      if (llt.info() == Eigen::Success) return true;
      delta = delta == 0.0 ? 1e-14 * std::max(1.0, M.trace() / double(n))
                           : delta * 100.0;
    }
    return false;
  };
  auto solve_kkt = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd x = llt.solve(r);
    for (int ref = 0; ref < 2; ++ref) {
      Eigen::VectorXd res = r - M.selfadjointView<Eigen::Lower>() * x;
      if (res.lpNorm<Eigen::Infinity>() <=
          1e-13 * std::max(1.0, r.lpNorm<Eigen::Infinity>()))
        break;
      x += llt.solve(res);
    }
    return x;
  };

  const bool trace = std::getenv("RISBEAM_CONIC_TRACE") != nullptr;

  for (int iter = 0; iter < max_iter; ++iter) {
    iters_done = iter + 1;
    const Eigen::VectorXd r_d = c_vec + G.transpose() * z;
    const Eigen::VectorXd r_p = G * u + s - h;
    const double gap = s.dot(z);
    const double mu = gap / nu;

    kkt.primal_infeas = r_p.lpNorm<Eigen::Infinity>() / h_norm;
    kkt.dual_infeas = r_d.lpNorm<Eigen::Infinity>();
    kkt.gap = gap / std::max(1.0, std::abs(c_vec.dot(u)));

    if (trace)
      std::fprintf(stderr,
                   "conic iter %3d mu=%9.3e pres=%9.3e dres=%9.3e gap=%9.3e "
                   "obj=%+.9e\n",
                   iter, mu, kkt.primal_infeas, kkt.dual_infeas, kkt.gap,
                   scaled_objective(u));

    if (!u.allFinite() || !s.allFinite() || !z.allFinite()) {
      status = ConicStatus::kMaxIter;  // numerical breakdown; keep u_best
      break;
    }

    const double obj_now = scaled_objective(u);
    if (std::isfinite(obj_now) && obj_now > best_obj) {
      best_obj = obj_now;
      u_best = u;
    }

    if (kkt.primal_infeas <= tol && kkt.dual_infeas <= tol &&
        (gap <= tol || kkt.gap <= tol)) {
      status = ConicStatus::kOptimal;
      break;
    }
    const double hz = h.dot(z);
    if (hz < -tol &&
        (G.transpose() * z).lpNorm<Eigen::Infinity>() <= tol * (-hz)) {
      status = ConicStatus::kInfeasible;
      break;
    }

    for (size_t k = 0; k < cones.size(); ++k) {
      scalings[k] =
          compute_scaling(s.segment(cones[k].start, cones[k].dim),
                          z.segment(cones[k].start, cones[k].dim));
      Eigen::VectorXd lam = z.segment(cones[k].start, cones[k].dim);
      apply_w(scalings[k], lam);
      lambda.segment(cones[k].start, cones[k].dim) = lam;
    }

    // Y = W^{-1} G, applied blockwise: W^{-1} B = (2 ju (ju^T B) - J B) / eta.
    for (size_t k = 0; k < cones.size(); ++k) {
      const auto& sc = scalings[k];
      const Eigen::Index at = cones[k].start, m = cones[k].dim;
      const Eigen::RowVectorXd proj = sc.ju.transpose() * G.middleRows(at, m);
      Y.middleRows(at, m).noalias() = (2.0 / sc.eta) * sc.ju * proj;
      Y.row(at) -= G.row(at) / sc.eta;
      Y.middleRows(at + 1, m - 1) += G.middleRows(at + 1, m - 1) / sc.eta;
    }
    M.setZero();
    M.selfadjointView<Eigen::Lower>().rankUpdate(Y.transpose(), 1.0);
    if (!factorize()) {
      status = ConicStatus::kMaxIter;
      break;
    }

    // Newton system in (du, dz, ds):
    //   G^T dz = -r_d,   G du + ds = -r_p,   W^2 dz + ds = -W g
    // solved via normal equations, then refined against the full system
    // (the W^{-2} back-substitution loses accuracy near the boundary).
    auto compute_direction = [&](const Eigen::VectorXd& psi_in,
                                 Eigen::VectorXd& du, Eigen::VectorXd& dz,
                                 Eigen::VectorXd& ds) {
      gvec = psi_in;
      for (size_t k = 0; k < cones.size(); ++k) {
        auto seg = gvec.segment(cones[k].start, cones[k].dim);
        seg = -jordan_solve(lambda.segment(cones[k].start, cones[k].dim), seg);
      }
      bz = gvec;
      apply_w_all(bz);     // W g
      bz += r_p;           // r_p + W g
      Eigen::VectorXd tmp = bz;
      apply_winv_all(tmp);
      apply_winv_all(tmp);  // W^{-2}(r_p + W g)
      rhs = -r_d - G.transpose() * tmp;
      du = solve_kkt(rhs);
      dz = G * du + bz;
      apply_winv_all(dz);
      apply_winv_all(dz);
      ds = -r_p - G * du;

      const Eigen::VectorXd wg = bz - r_p;  // W g
      for (int ref = 0; ref < 2; ++ref) {
        Eigen::VectorXd w2dz = dz;
        apply_w_all(w2dz);
        apply_w_all(w2dz);
        const Eigen::VectorXd e1 = -r_d - G.transpose() * dz;
        const Eigen::VectorXd e2 = -r_p - G * du - ds;
        const Eigen::VectorXd e3 = wg - w2dz - ds;
        const double err = std::max({e1.lpNorm<Eigen::Infinity>(),
                                     e2.lpNorm<Eigen::Infinity>(),
                                     e3.lpNorm<Eigen::Infinity>()});
        if (err <= 1e-12) break;
        Eigen::VectorXd e32 = e3 - e2;
        Eigen::VectorXd tmp2 = e32;
        apply_winv_all(tmp2);
        apply_winv_all(tmp2);
        const Eigen::VectorXd du_c =
            solve_kkt(e1 - G.transpose() * tmp2);
        Eigen::VectorXd dz_c = G * du_c + e32;
        apply_winv_all(dz_c);
        apply_winv_all(dz_c);
        Eigen::VectorXd w2dzc = dz_c;
        apply_w_all(w2dzc);
        apply_w_all(w2dzc);
        du += du_c;
        dz += dz_c;
        ds += e3 - w2dzc;
      }
    };

    // Predictor (affine) direction.
    for (size_t k = 0; k < cones.size(); ++k)
      psi.segment(cones[k].start, cones[k].dim) =
          jordan_mul(lambda.segment(cones[k].start, cones[k].dim),
                     lambda.segment(cones[k].start, cones[k].dim));
    Eigen::VectorXd du_a(n), dz_a(rows), ds_a(rows);
    compute_direction(psi, du_a, dz_a, ds_a);

    double alpha_aff = 1.0;
    for (size_t k = 0; k < cones.size(); ++k) {
      alpha_aff = std::min(alpha_aff,
                           max_cone_step(s.segment(cones[k].start, cones[k].dim),
                                         ds_a.segment(cones[k].start, cones[k].dim)));
      alpha_aff = std::min(alpha_aff,
                           max_cone_step(z.segment(cones[k].start, cones[k].dim),
                                         dz_a.segment(cones[k].start, cones[k].dim)));
    }
    alpha_aff = std::min(alpha_aff, 1.0);
    const double mu_aff =
        (s + alpha_aff * ds_a).dot(z + alpha_aff * dz_a) / nu;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(1.0, std::max(0.0, sigma));

    // Corrector: lambda o lambda + (W^{-1} ds_a) o (W dz_a) - sigma mu e.
    {
      Eigen::VectorXd wds = ds_a, wdz = dz_a;
      apply_winv_all(wds);
      apply_w_all(wdz);
      for (size_t k = 0; k < cones.size(); ++k) {
        auto span = cones[k];
        psi.segment(span.start, span.dim) +=
            jordan_mul(wds.segment(span.start, span.dim),
                       wdz.segment(span.start, span.dim));
        psi(span.start) -= sigma * mu;
      }
    }
    Eigen::VectorXd du(n), dz(rows), ds(rows);
    compute_direction(psi, du, dz, ds);

    double alpha = kInfinity;
    for (size_t k = 0; k < cones.size(); ++k) {
      alpha = std::min(alpha,
                       max_cone_step(s.segment(cones[k].start, cones[k].dim),
                                     ds.segment(cones[k].start, cones[k].dim)));
      alpha = std::min(alpha,
                       max_cone_step(z.segment(cones[k].start, cones[k].dim),
                                     dz.segment(cones[k].start, cones[k].dim)));
    }
    alpha = std::min(1.0, 0.99 * alpha);
    if (trace)
      std::fprintf(stderr, "           alpha_aff=%9.3e sigma=%9.3e alpha=%9.3e\n",
                   alpha_aff, sigma, alpha);
    if (!std::isfinite(alpha) || alpha <= 1e-10 || !du.allFinite() ||
        !dz.allFinite() || !ds.allFinite()) {
      status = ConicStatus::kMaxIter;
      break;
    }
    u += alpha * du;
    s += alpha * ds;
    z += alpha * dz;
  }

  const Eigen::VectorXd& u_ret =
      status == ConicStatus::kOptimal ? u : u_best;

  // Map back to the original complex variable.
  Eigen::VectorXcd y(d2);
  for (Eigen::Index k = 0; k < d2; ++k)
    y(k) = std::complex<double>(u_ret(k), u_ret(d2 + k));
  Eigen::VectorXcd x = omega * (basis * y);

  // Feasibility safeguard in original units: shrink toward zero (all
  // constraints are centered balls/caps) if roundoff pushed anything over.
  double shrink = 1.0;
  if (per_coordinate) {
    const double mx = x.cwiseAbs().maxCoeff();
    if (mx > 1.0) shrink = std::min(shrink, 1.0 / mx);
  } else {
    const double pw = x.squaredNorm();
    if (pw > qp.total_power) shrink = std::min(shrink, std::sqrt(qp.total_power / pw));
  }
  for (size_t m = 0; m < ineq_R.size(); ++m) {
    const double val = (ineq_R[m] * x).squaredNorm();
    if (val > ineq_bound[m] * (1.0 + 1e-9) && val > 0.0)
      shrink = std::min(shrink, std::sqrt(ineq_bound[m] / val));
  }
  if (shrink < 1.0) x *= shrink;

  return finish_at_point(x, status, kkt, iters_done);
}

} // namespace risbeam
