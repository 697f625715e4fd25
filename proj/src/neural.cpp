#include "risbeam/neural.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "risbeam/objective.hpp"
#include "risbeam/rng.hpp"

namespace risbeam {

namespace {

constexpr double kInvLn2 = 1.4426950408889634074; // 1/ln(2)

void check_net(const NetParams& p, const Eigen::VectorXd& x) {
  if (p.W1.cols() != x.size() || p.b1.size() != p.W1.rows() ||
      p.W2.cols() != p.W1.rows() || p.b2.size() != p.W2.rows() ||
      p.W3.cols() != p.W2.rows() || p.b3.size() != p.W3.rows()) {
    throw std::invalid_argument(
        "forward: network parameter and input dimensions disagree");
  }
}

// Per-entry projection onto the unit circle. A zero coefficient carries no
// phase information; it is pinned to 1 (and reported, since it means the
// network output collapsed there).
Eigen::VectorXcd normalize_entries(const Eigen::VectorXcd& v) {
  Eigen::VectorXcd u(v.size());
  for (Eigen::Index n = 0; n < v.size(); ++n) {
    const double m = std::abs(v(n));
    if (m == 0.0) {
      std::fprintf(stderr,
                   "project_theta: zero-amplitude surface coefficient %ld "
                   "pinned to 1\n",
                   static_cast<long>(n));
      u(n) = std::complex<double>(1.0, 0.0);
    } else {
      u(n) = v(n) / m;
    }
  }
  return u;
}

// Everything the decoder computes, kept around so the reverse pass can reuse
// the exact forward intermediates (branch choices included).
struct DecodeTrace {
  Eigen::VectorXd z1, s1, s2, y;
  DecodedPoint raw;                      // pre-projection theta and precoders
  std::vector<Eigen::MatrixXcd> F_tilde; // power-projected precoders
  double P_t = 0.0;                      // raw total transmit power
  double alpha = 1.0;                    // power scale, 1 when within budget
  Eigen::VectorXcd theta_hat;            // unit-modulus surface response
  double Pm = 0.0;                       // worst probe power at (theta_hat, F_tilde)
  int active = -1;                       // probe attaining it
  double a = 1.0;                        // reradiation scale, 1 when compliant
  DecodedPoint out;                      // (a * theta_hat, F_tilde)
};

DecodeTrace run_forward_decode(const NetParams& p, const Eigen::VectorXd& x,
                               const Scenario& s, const ChannelSet& cs,
                               const std::vector<ObservationProbe>& probes,
                               bool mask_enabled) {
  check_net(p, x);
  DecodeTrace t;
  t.z1 = p.W1 * x + p.b1;
  t.s1 = t.z1.cwiseMax(0.0);
  t.s2 = p.W2 * t.s1 + p.b2;
  t.y = p.W3 * t.s2 + p.b3;
  t.raw = extract_solution(t.y, cs.n_ris(), cs.n_tx(), s.N_r);

  t.P_t = 0.0;
  for (const auto& f : t.raw.F) t.P_t += f.squaredNorm();
  if (t.P_t > s.P_max_w) {
    t.alpha = std::sqrt(s.P_max_w / t.P_t);
    t.F_tilde.reserve(t.raw.F.size());
    for (const auto& f : t.raw.F) t.F_tilde.push_back(t.alpha * f);
  } else {
    t.F_tilde = t.raw.F;
  }

  t.theta_hat = normalize_entries(t.raw.theta);

  if (mask_enabled && !probes.empty()) {
    for (std::size_t k = 0; k < probes.size(); ++k) {
      const double pw = reradiated_power(cs, t.theta_hat, t.F_tilde, probes[k]);
      if (pw > t.Pm) {
        t.Pm = pw;
        t.active = static_cast<int>(k);
      }
    }
    if (t.Pm > s.rho_w) t.a = std::sqrt(s.rho_w / t.Pm);
  }

  t.out.theta = (t.a == 1.0) ? t.theta_hat
                             : Eigen::VectorXcd(t.a * t.theta_hat);
  t.out.F = t.F_tilde;
  return t;
}

// Gradients (in the convention dl = 2 Re(g^H dz)) of the minimum achievable
// rate at a fixed operating point, taken at the bottleneck receiver.
struct RateGradient {
  double min_rate = 0.0;
  int argmin = 0;
  Eigen::VectorXcd g_theta;
  std::vector<Eigen::MatrixXcd> g_F;
};

RateGradient rate_gradient(const ChannelSet& cs, const Eigen::VectorXcd& theta,
                           const std::vector<Eigen::MatrixXcd>& F,
                           double sigma2) {
  const int R = cs.num_receivers();
  RateGradient out;
  out.min_rate = std::numeric_limits<double>::infinity();
  for (int i = 0; i < R; ++i) {
    const double r = achievable_rate(cs, theta, F, sigma2, i);
    if (r < out.min_rate) {
      out.min_rate = r;
      out.argmin = i;
    }
  }
  const int i = out.argmin;
  const Eigen::MatrixXcd H = effective_channel(cs, theta, i);
  const Eigen::Index n_ri = H.rows();
  std::vector<Eigen::MatrixXcd> A(R);
  Eigen::MatrixXcd T =
      sigma2 * Eigen::MatrixXcd::Identity(n_ri, n_ri);
  for (int j = 0; j < R; ++j) {
    A[j] = H * F[j];
    T += A[j] * A[j].adjoint();
  }
  const Eigen::MatrixXcd Omega = T - A[i] * A[i].adjoint();
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n_ri, n_ri);
  const Eigen::MatrixXcd Tinv = T.llt().solve(I);
  const Eigen::MatrixXcd Oinv = Omega.llt().solve(I);

  out.g_F.resize(R);
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(cs.n_tx(), n_ri);
  for (int j = 0; j < R; ++j) {
    const Eigen::MatrixXcd M = (j == i) ? Tinv : Eigen::MatrixXcd(Tinv - Oinv);
    out.g_F[j] = kInvLn2 * (H.adjoint() * (M * A[j]));
    B += F[j] * (A[j].adjoint() * M);
  }
  // The surface gradient is the diagonal of U B g_eff, conjugated: the rate
  // depends on theta only through H = g_eff diag(theta) U.
  const Eigen::MatrixXcd P1 = cs.U * B;                       // N x n_ri
  const Eigen::MatrixXcd Gt = cs.g_eff(i).transpose();        // N x n_ri
  const Eigen::VectorXcd c = (P1.array() * Gt.array()).rowwise().sum();
  out.g_theta = kInvLn2 * c.conjugate();
  return out;
}

// Reverse pass from the loss at the decoded point back to the network
// parameters. Every projection contributes its exact local Jacobian at the
// branch the forward pass took.
double loss_and_gradient_from_trace(const DecodeTrace& t, const NetParams& p,
                                    const Eigen::VectorXd& x, const Scenario& s,
                                    const ChannelSet& cs,
                                    const std::vector<ObservationProbe>& probes,
                                    NetParams* grad) {
  if (grad == nullptr)
    return -min_rate(cs, t.out.theta, t.out.F, s.sigma2_w);

  const RateGradient rg = rate_gradient(cs, t.out.theta, t.out.F, s.sigma2_w);
  const int R = cs.num_receivers();

  // Loss is the negated minimum rate.
  Eigen::VectorXcd g_theta_out = -rg.g_theta;
  std::vector<Eigen::MatrixXcd> g_F_tilde(R);
  for (int j = 0; j < R; ++j) g_F_tilde[j] = -rg.g_F[j];

  // Reradiation scale theta_out = a * theta_hat with a = sqrt(rho / Pm):
  // a depends on theta_hat and on the precoders through the active probe's
  // power Pm = theta_hat^H M_A theta_hat = sum_j |D F_j|^2.
  Eigen::VectorXcd g_theta_hat;
  if (t.a < 1.0) {
    const double S_theta = g_theta_out.dot(t.theta_hat).real();
    const double coef = S_theta * t.a / t.Pm;
    const Eigen::MatrixXcd& C = probes[static_cast<std::size_t>(t.active)].G_ob;
    Eigen::MatrixXcd S_F_sum =
        Eigen::MatrixXcd::Zero(cs.n_tx(), cs.n_tx());
    for (const auto& f : t.F_tilde) S_F_sum += f * f.adjoint();
    const Eigen::MatrixXcd K = cs.U * S_F_sum * cs.U.adjoint();
    const Eigen::MatrixXcd MA =
        (C.adjoint() * C).cwiseProduct(K.transpose());
    g_theta_hat = t.a * g_theta_out - coef * (MA * t.theta_hat);
    const Eigen::MatrixXcd D = C * t.theta_hat.asDiagonal() * cs.U; // 1 x N_t
    for (int j = 0; j < R; ++j)
      g_F_tilde[j] -= coef * (D.adjoint() * (D * t.F_tilde[j]));
  } else {
    g_theta_hat = g_theta_out;
  }

  // Unit-modulus normalization theta_hat = theta_bar / |theta_bar|.
  Eigen::VectorXcd g_theta_bar(t.raw.theta.size());
  for (Eigen::Index n = 0; n < t.raw.theta.size(); ++n) {
    const double m = std::abs(t.raw.theta(n));
    if (m == 0.0) {
      g_theta_bar(n) = 0.0; // pinned entry: locally constant
      continue;
    }
    const std::complex<double> u = t.theta_hat(n);
    g_theta_bar(n) =
        (g_theta_hat(n) - u * u * std::conj(g_theta_hat(n))) / (2.0 * m);
  }

  // Power scale F_tilde = alpha * F_bar with alpha = sqrt(P_max / P_t).
  std::vector<Eigen::MatrixXcd> g_F_bar(R);
  if (t.alpha < 1.0) {
    double S_F = 0.0;
    for (int j = 0; j < R; ++j)
      S_F += g_F_tilde[j].conjugate().cwiseProduct(t.raw.F[j]).sum().real();
    const double coef = S_F * t.alpha / t.P_t;
    for (int j = 0; j < R; ++j)
      g_F_bar[j] = t.alpha * g_F_tilde[j] - coef * t.raw.F[j];
  } else {
    g_F_bar = g_F_tilde;
  }

  // Real packing y -> (theta_bar, F_bar): d/dy_re = 2 Re g, d/dy_im = 2 Im g.
  DecodedPoint gpt;
  gpt.theta = g_theta_bar;
  gpt.F = g_F_bar;
  const Eigen::VectorXd gy = 2.0 * pack_solution(gpt);

  grad->b3 = gy;
  grad->W3 = gy * t.s2.transpose();
  const Eigen::VectorXd gs2 = p.W3.transpose() * gy;
  grad->b2 = gs2;
  grad->W2 = gs2 * t.s1.transpose();
  Eigen::VectorXd gs1 = p.W2.transpose() * gs2;
  for (Eigen::Index i = 0; i < gs1.size(); ++i)
    if (t.z1(i) <= 0.0) gs1(i) = 0.0;
  grad->b1 = gs1;
  grad->W1 = gs1 * x.transpose();

  return -rg.min_rate;
}

} // namespace

int AngleEncoding::bins() const {
  if (!(mu_deg > 0.0) || !(theta_high_deg > theta_low_deg)) {
    throw std::invalid_argument(
        "AngleEncoding: need theta_high > theta_low and mu > 0");
  }
  const double n = (theta_high_deg - theta_low_deg) / mu_deg;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-9 * std::max(1.0, std::abs(n))) {
    throw std::invalid_argument(
        "AngleEncoding: angle range is not a multiple of the resolution");
  }
  return static_cast<int>(r) + 1;
}

Eigen::VectorXd one_hot_encode(double angle_deg, const AngleEncoding& enc) {
  const int nb = enc.bins();
  if (!(angle_deg >= enc.theta_low_deg && angle_deg <= enc.theta_high_deg)) {
    throw std::invalid_argument("one_hot_encode: angle " +
                                std::to_string(angle_deg) +
                                " outside the representable range");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(nb);
  const double tpos = (angle_deg - enc.theta_low_deg) / enc.mu_deg;
  int idx = static_cast<int>(std::floor(tpos));
  idx = std::min(std::max(idx, 0), nb - 1);
  if (enc.literal_fractional) {
    const double frac = angle_deg - std::floor(angle_deg);
    if (frac > enc.mu_deg) {
      const double shifted = angle_deg - enc.mu_deg;
      v(idx) = 1.0 + (shifted - std::floor(shifted));
    } else if (frac > 0.0) {
      v(idx) = frac;
    }
    // A grid-point angle has zero fractional part and encodes to the zero
    // vector under this rule; kept verbatim for comparison runs.
  } else {
    v(idx) = 1.0 + (tpos - idx);
  }
  return v;
}

Eigen::VectorXd encode_input(double theta_inc_deg,
                             const std::vector<double>& theta_refs_deg,
                             const AngleEncoding& enc) {
  const int nb = enc.bins();
  Eigen::VectorXd x(
      static_cast<Eigen::Index>(1 + theta_refs_deg.size()) * nb);
  x.segment(0, nb) = one_hot_encode(theta_inc_deg, enc);
  for (std::size_t i = 0; i < theta_refs_deg.size(); ++i)
    x.segment(static_cast<Eigen::Index>(i + 1) * nb, nb) =
        one_hot_encode(theta_refs_deg[i], enc);
  return x;
}

NetDims net_dims(const Scenario& s, const AngleEncoding& enc, int hidden1,
                 int hidden2) {
  if (hidden1 < 1 || hidden2 < 1)
    throw std::invalid_argument("net_dims: hidden sizes must be positive");
  NetDims d;
  d.input = (1 + s.num_receivers()) * enc.bins();
  d.hidden1 = hidden1;
  d.hidden2 = hidden2;
  int out = 2 * s.n_ris();
  for (int r : s.N_r) out += 2 * s.N_t * r;
  d.output = out;
  return d;
}

NetParams init_params(const NetDims& dims, std::uint64_t seed) {
  if (dims.input < 1 || dims.hidden1 < 1 || dims.hidden2 < 1 ||
      dims.output < 1) {
    throw std::invalid_argument("init_params: all dimensions must be positive");
  }
  RandomStream rng(seed, "nn-init");
  NetParams p;
  const auto fill = [&rng](Eigen::MatrixXd& w, int rows, int cols) {
    w.resize(rows, cols);
    const double lim = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-lim, lim);
  };
  fill(p.W1, dims.hidden1, dims.input);
  p.b1 = Eigen::VectorXd::Zero(dims.hidden1);
  fill(p.W2, dims.hidden2, dims.hidden1);
  p.b2 = Eigen::VectorXd::Zero(dims.hidden2);
  fill(p.W3, dims.output, dims.hidden2);
  p.b3 = Eigen::VectorXd::Zero(dims.output);
  return p;
}

Eigen::VectorXd forward(const NetParams& p, const Eigen::VectorXd& x) {
  check_net(p, x);
  const Eigen::VectorXd s1 = (p.W1 * x + p.b1).cwiseMax(0.0);
  return p.W3 * (p.W2 * s1 + p.b2) + p.b3;
}

DecodedPoint extract_solution(const Eigen::VectorXd& y, int n_ris, int n_t,
                              const std::vector<int>& n_r) {
  if (n_ris < 1 || n_t < 1 || n_r.empty())
    throw std::invalid_argument("extract_solution: empty layout");
  Eigen::Index expected = 2 * n_ris;
  for (int r : n_r) {
    if (r < 1) throw std::invalid_argument("extract_solution: empty layout");
    expected += 2 * static_cast<Eigen::Index>(n_t) * r;
  }
  if (y.size() != expected) {
    throw std::invalid_argument(
        "extract_solution: output vector has length " +
        std::to_string(y.size()) + ", layout needs " +
        std::to_string(expected));
  }
  DecodedPoint pt;
  pt.theta.resize(n_ris);
  for (int n = 0; n < n_ris; ++n)
    pt.theta(n) = std::complex<double>(y(n), y(n_ris + n));
  Eigen::Index off = 2 * n_ris;
  pt.F.reserve(n_r.size());
  for (int r : n_r) {
    const Eigen::Index m = static_cast<Eigen::Index>(n_t) * r;
    Eigen::VectorXcd v(m);
    for (Eigen::Index k = 0; k < m; ++k)
      v(k) = std::complex<double>(y(off + k), y(off + m + k));
    pt.F.push_back(devectorize(v, n_t, r));
    off += 2 * m;
  }
  return pt;
}

Eigen::VectorXd pack_solution(const DecodedPoint& point) {
  const Eigen::Index n_ris = point.theta.size();
  Eigen::Index total = 2 * n_ris;
  for (const auto& f : point.F) total += 2 * f.size();
  Eigen::VectorXd y(total);
  for (Eigen::Index n = 0; n < n_ris; ++n) {
    y(n) = point.theta(n).real();
    y(n_ris + n) = point.theta(n).imag();
  }
  Eigen::Index off = 2 * n_ris;
  for (const auto& f : point.F) {
    const Eigen::VectorXcd v = vectorize(f);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      y(off + k) = v(k).real();
      y(off + v.size() + k) = v(k).imag();
    }
    off += 2 * v.size();
  }
  return y;
}

std::vector<Eigen::MatrixXcd> project_power(
    const std::vector<Eigen::MatrixXcd>& F, double P_max_w) {
  if (!(P_max_w > 0.0))
    throw std::invalid_argument("project_power: budget must be positive");
  double total = 0.0;
  for (const auto& f : F) total += f.squaredNorm();
  if (total <= P_max_w) return F;
  const double scale = std::sqrt(P_max_w / total);
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(F.size());
  for (const auto& f : F) out.push_back(scale * f);
  return out;
}

Eigen::VectorXcd project_theta(const Eigen::VectorXcd& theta_bar,
                               const std::vector<Eigen::MatrixXcd>& mask_forms,
                               double rho_w, bool mask_enabled) {
  Eigen::VectorXcd th = normalize_entries(theta_bar);
  if (mask_enabled && !mask_forms.empty()) {
    if (!(rho_w > 0.0))
      throw std::invalid_argument("project_theta: cap must be positive");
    double worst = 0.0;
    for (const auto& M : mask_forms)
      worst = std::max(worst, th.dot(M * th).real());
    if (worst > rho_w) th *= std::sqrt(rho_w / worst);
  }
  return th;
}

DecodedPoint decode_network(const NetParams& p, const Eigen::VectorXd& x,
                            const Scenario& s, const ChannelSet& cs,
                            const std::vector<ObservationProbe>& probes,
                            bool mask_enabled) {
  return run_forward_decode(p, x, s, cs, probes, mask_enabled).out;
}

double nn_loss(const ChannelSet& cs, const Eigen::VectorXcd& theta,
               const std::vector<Eigen::MatrixXcd>& F, double sigma2) {
  return -min_rate(cs, theta, F, sigma2);
}

double nn_loss_and_gradient(const NetParams& p, const Eigen::VectorXd& x,
                            const Scenario& s, const ChannelSet& cs,
                            const std::vector<ObservationProbe>& probes,
                            bool mask_enabled, NetParams* grad) {
  const DecodeTrace t =
      run_forward_decode(p, x, s, cs, probes, mask_enabled);
  return loss_and_gradient_from_trace(t, p, x, s, cs, probes, grad);
}

TrainResult train_network(const Scenario& s, const ChannelSet& cs,
                          const TrainOptions& opts) {
  if (!(opts.learning_rate > 0.0))
    throw std::invalid_argument("train_network: learning rate must be positive");
  if (opts.iterations < 1)
    throw std::invalid_argument("train_network: need at least one iteration");
  if (opts.hidden1 < 1 || opts.hidden2 < 1)
    throw std::invalid_argument("train_network: hidden sizes must be positive");
  if (opts.angle_noise_deg < 0.0)
    throw std::invalid_argument("train_network: noise width must be >= 0");
  const auto t0 = std::chrono::steady_clock::now();

  AngleEncoding enc{s.theta_low_deg, s.theta_high_deg, opts.mu_deg, false};
  const std::uint64_t seed = static_cast<std::uint64_t>(
      opts.seed >= 0 ? opts.seed : s.seed);

  double inc = s.theta_inc_deg;
  std::vector<double> refs = s.theta_ref_deg;
  if (opts.angle_noise_deg > 0.0) {
    RandomStream noise(seed, "nn-angle-noise");
    const auto jitter = [&](double v) {
      return std::clamp(v + noise.uniform(0.0, opts.angle_noise_deg),
                        s.theta_low_deg, s.theta_high_deg);
    };
    inc = jitter(inc);
    for (double& r : refs) r = jitter(r);
  }
  const Eigen::VectorXd x = encode_input(inc, refs, enc);

  NetParams p = init_params(net_dims(s, enc, opts.hidden1, opts.hidden2), seed);
  std::vector<ObservationProbe> probes;
  if (opts.mask_enabled) probes = mask_probes(s, build_geometry(s));

  // Adaptive per-coordinate steps: squared-gradient accumulators.
  NetParams acc;
  acc.W1 = Eigen::MatrixXd::Zero(p.W1.rows(), p.W1.cols());
  acc.b1 = Eigen::VectorXd::Zero(p.b1.size());
  acc.W2 = Eigen::MatrixXd::Zero(p.W2.rows(), p.W2.cols());
  acc.b2 = Eigen::VectorXd::Zero(p.b2.size());
  acc.W3 = Eigen::MatrixXd::Zero(p.W3.rows(), p.W3.cols());
  acc.b3 = Eigen::VectorXd::Zero(p.b3.size());
  const auto step = [lr = opts.learning_rate](auto& w, auto& a,
                                              const auto& g) {
    a.array() += g.array().square();
    w.array() -= lr * g.array() / (a.array().sqrt() + 1e-10);
  };

  double best_loss = std::numeric_limits<double>::infinity();
  DecodedPoint best;
  NetParams best_params;
  Solution sol;
  sol.objective_trace.reserve(static_cast<std::size_t>(opts.iterations) + 1);

  for (int it = 0; it <= opts.iterations; ++it) {
    const bool want_grad = it < opts.iterations;
    const DecodeTrace tr =
        run_forward_decode(p, x, s, cs, probes, opts.mask_enabled);
    NetParams g;
    const double loss = loss_and_gradient_from_trace(
        tr, p, x, s, cs, probes, want_grad ? &g : nullptr);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_network: non-finite loss at iteration " +
                               std::to_string(it));
    if (loss < best_loss) {
      best_loss = loss;
      best = tr.out;
      best_params = p;
    }
    sol.objective_trace.push_back(-best_loss);
    if (opts.verbose)
      std::fprintf(stderr, "nn it=%d loss=%.9e best=%.9e\n", it, loss,
                   best_loss);
    if (!want_grad) break;
    if (!(g.W1.allFinite() && g.b1.allFinite() && g.W2.allFinite() &&
          g.b2.allFinite() && g.W3.allFinite() && g.b3.allFinite())) {
      throw std::runtime_error(
          "train_network: non-finite gradient at iteration " +
          std::to_string(it));
    }
    step(p.W1, acc.W1, g.W1);
    step(p.b1, acc.b1, g.b1);
    step(p.W2, acc.W2, g.W2);
    step(p.b2, acc.b2, g.b2);
    step(p.W3, acc.W3, g.W3);
    step(p.b3, acc.b3, g.b3);
  }

  sol.theta = best.theta;
  sol.F = best.F;
  sol.rates.resize(static_cast<std::size_t>(cs.num_receivers()));
  for (int i = 0; i < cs.num_receivers(); ++i)
    sol.rates[static_cast<std::size_t>(i)] =
        achievable_rate(cs, sol.theta, sol.F, s.sigma2_w, i);
  sol.iterations = opts.iterations;
  sol.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  TrainResult res;
  res.params = std::move(best_params);
  res.solution = std::move(sol);
  res.input = x;
  return res;
}

namespace {

constexpr char kNetMagic[4] = {'R', 'B', 'N', 'N'};
constexpr std::uint32_t kNetVersion = 1;

void write_doubles(std::ofstream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* data, std::size_t n,
                  const char* what) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in)
    throw std::runtime_error(std::string("load_net: truncated while reading ") +
                             what);
}

} // namespace

void save_net(const NetParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_net: cannot open " + path);
  out.write(kNetMagic, 4);
  out.write(reinterpret_cast<const char*>(&kNetVersion), sizeof(kNetVersion));
  const std::int64_t dims[4] = {p.W1.cols(), p.W1.rows(), p.W2.rows(),
                                p.W3.rows()};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  write_doubles(out, p.W1.data(), static_cast<std::size_t>(p.W1.size()));
  write_doubles(out, p.b1.data(), static_cast<std::size_t>(p.b1.size()));
  write_doubles(out, p.W2.data(), static_cast<std::size_t>(p.W2.size()));
  write_doubles(out, p.b2.data(), static_cast<std::size_t>(p.b2.size()));
  write_doubles(out, p.W3.data(), static_cast<std::size_t>(p.W3.size()));
  write_doubles(out, p.b3.data(), static_cast<std::size_t>(p.b3.size()));
  out.flush();
  if (!out) throw std::runtime_error("save_net: write failed for " + path);
}

NetParams load_net(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_net: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kNetMagic, 4) != 0)
    throw std::runtime_error("load_net: not a network parameter file: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kNetVersion)
    throw std::runtime_error("load_net: unsupported format version in " + path);
  std::int64_t dims[4];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in)
    throw std::runtime_error("load_net: truncated header in " + path);
  for (std::int64_t d : dims)
    if (d < 1 || d > (1 << 24))
      throw std::runtime_error("load_net: corrupt dimensions in " + path);
  NetParams p;
  p.W1.resize(dims[1], dims[0]);
  p.b1.resize(dims[1]);
  p.W2.resize(dims[2], dims[1]);
  p.b2.resize(dims[2]);
  p.W3.resize(dims[3], dims[2]);
  p.b3.resize(dims[3]);
  read_doubles(in, p.W1.data(), static_cast<std::size_t>(p.W1.size()), "W1");
  read_doubles(in, p.b1.data(), static_cast<std::size_t>(p.b1.size()), "b1");
  read_doubles(in, p.W2.data(), static_cast<std::size_t>(p.W2.size()), "W2");
  read_doubles(in, p.b2.data(), static_cast<std::size_t>(p.b2.size()), "b2");
  read_doubles(in, p.W3.data(), static_cast<std::size_t>(p.W3.size()), "W3");
  read_doubles(in, p.b3.data(), static_cast<std::size_t>(p.b3.size()), "b3");
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("load_net: trailing bytes in " + path);
  return p;
}

} // namespace risbeam
