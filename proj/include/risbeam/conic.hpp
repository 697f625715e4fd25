#pragma once

// Max-min-of-concave-quadratics solver over a complex decision vector.
//
// Problem shape:
//   maximize   min_p  ( -x^H E_p x + 2 Re(x^H b_p) + c_p )
//   subject to x^H Q_m x <= bound_m                (quadratic caps)
//              |x_n| <= 1 for every coordinate, or |x|^2 <= total_power
//
// All E_p and Q_m must be Hermitian positive semidefinite, so the epigraph
// form (maximize t with t below every piece) is convex. The solver embeds the
// complex variable into R^{2d}, rewrites every quadratic with a thin factor
// (form = R^H R) as a second-order cone, and runs a primal-dual interior-point
// method with Nesterov-Todd scaling and a predictor-corrector step, solving
// the per-iteration Newton systems via dense normal equations.
//
// Numerical hygiene built in: each quadratic cap is rescaled by its bound
// (bounds span many orders of magnitude), pieces are rescaled to unit
// magnitude, and caps with bound exactly zero are eliminated beforehand by
// restricting the variable to the nullspace of their factors.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace risbeam {

struct QuadPiece {
  Eigen::MatrixXcd E;       // d x d Hermitian PSD (may be 0x0 meaning zero)
  Eigen::VectorXcd b;       // length d
  double c = 0.0;
  // Optional thin factor with E = factor^H factor; computed from E if empty.
  Eigen::MatrixXcd factor;
};

struct QuadConstraint {
  Eigen::MatrixXcd Q;       // d x d Hermitian PSD
  double bound = 0.0;       // >= 0
  Eigen::MatrixXcd factor;  // optional, Q = factor^H factor
};

enum class BallType { kPerCoordinate, kTotalPower };

struct MaxMinQP {
  int dim = 0;
  std::vector<QuadPiece> pieces;
  std::vector<QuadConstraint> ineqs;
  BallType ball_type = BallType::kPerCoordinate;
  double total_power = 1.0;  // used when ball_type == kTotalPower
};

enum class ConicStatus { kOptimal, kMaxIter, kInfeasible };

struct KktResiduals {
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  double gap = 0.0;
};

struct ConicSolution {
  Eigen::VectorXcd x;
  double objective = 0.0;  // min over pieces evaluated at x
  KktResiduals kkt;
  ConicStatus status = ConicStatus::kMaxIter;
  int iterations = 0;
};

ConicSolution solve(const MaxMinQP& qp, double tol = 1e-8, int max_iter = 200);

// Evaluates one piece at x: -x^H E x + 2 Re(x^H b) + c.
double piece_value(const QuadPiece& p, const Eigen::VectorXcd& x);

// Complex-to-real embeddings (exposed for verification): a Hermitian form
// x^H M x equals z^T embed(M) z with z = [Re x; Im x], and a complex linear
// functional 2 Re(x^H b) equals 2 embed(b)^T z.
Eigen::MatrixXd real_embedding(const Eigen::MatrixXcd& m);
Eigen::VectorXd real_embedding(const Eigen::VectorXcd& v);

// Thin PSD factor R (rank x d) with M = R^H R; throws std::invalid_argument
// if M has an eigenvalue below -1e-9 * trace.
Eigen::MatrixXcd psd_factor(const Eigen::MatrixXcd& m);

// Text dump (dimensions, then matrices row-major) for offline debugging.
void dump_problem(const MaxMinQP& qp, const std::string& path);

} // namespace risbeam
