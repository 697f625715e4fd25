#pragma once

// Model-driven neural optimizer: a small dense network maps an encoding of
// the incidence/reflection angles to the surface response and the precoders,
// trained without labels by descending the negative minimum rate of the
// decoded, feasibility-projected point.
//
// Forward pass (rectifier on the first hidden layer only; the second hidden
// layer and the output are affine):
//   y = W3 (W2 max(W1 x + b1, 0) + b2) + b3.
// The output splits into [Re theta; Im theta] and, per receiver,
// [Re vec(F_i); Im vec(F_i)] with column-stacked precoders. Decoding projects
// the raw point onto the feasible set: the precoders are rescaled onto the
// power budget when they exceed it, surface entries are normalized to unit
// modulus (an exactly-zero entry becomes 1, with a stderr diagnostic), and,
// when the mask is enforced, the surface is uniformly scaled until the worst
// probe meets the cap. Training differentiates through the projections with
// their true local Jacobians — including the dependence of both scale
// factors on everything upstream — takes per-parameter adaptive-gradient
// steps (accumulated squared gradients, root-scaled), and returns the
// best-loss iterate.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "risbeam/ao.hpp"
#include "risbeam/channel.hpp"
#include "risbeam/scene.hpp"

namespace risbeam {

struct AngleEncoding {
  double theta_low_deg = 10.0;
  double theta_high_deg = 60.0;
  double mu_deg = 0.5; // angular resolution
  // Reproduce the printed fractional-part rule, which zeroes out grid-point
  // angles; kept for comparison only. The default formula is always nonzero:
  // value 1 + frac((angle - low)/mu) at index int((angle - low)/mu).
  bool literal_fractional = false;

  // Number of representable angles, (high - low)/mu + 1. Throws
  // std::invalid_argument when the range is not a multiple of mu.
  int bins() const;
};

// One angle -> vector with exactly one nonzero (see AngleEncoding). Throws
// std::invalid_argument for out-of-range angles.
Eigen::VectorXd one_hot_encode(double angle_deg, const AngleEncoding& enc);

// Stacked encodings: incidence first, then the reflection angles in order.
Eigen::VectorXd encode_input(double theta_inc_deg,
                             const std::vector<double>& theta_refs_deg,
                             const AngleEncoding& enc);

struct NetParams {
  Eigen::MatrixXd W1; // hidden1 x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2; // hidden2 x hidden1
  Eigen::VectorXd b2;
  Eigen::MatrixXd W3; // output x hidden2
  Eigen::VectorXd b3;
};

struct NetDims {
  int input = 0;
  int hidden1 = 1024;
  int hidden2 = 512;
  int output = 0; // 2 N_ris + sum_i 2 N_t N_r[i]
};

NetDims net_dims(const Scenario& s, const AngleEncoding& enc, int hidden1,
                 int hidden2);

// Uniform initialization within +/- sqrt(6/(fan_in+fan_out)), zero biases,
// reproducible from the seed.
NetParams init_params(const NetDims& dims, std::uint64_t seed);

Eigen::VectorXd forward(const NetParams& p, const Eigen::VectorXd& x);

struct DecodedPoint {
  Eigen::VectorXcd theta;
  std::vector<Eigen::MatrixXcd> F;
};

// Raw output vector -> complex surface response and precoders (no
// projections). Throws std::invalid_argument on a length mismatch.
DecodedPoint extract_solution(const Eigen::VectorXd& y, int n_ris, int n_t,
                              const std::vector<int>& n_r);

// Inverse of extract_solution.
Eigen::VectorXd pack_solution(const DecodedPoint& point);

// Scales every precoder by sqrt(P_max / total) when the total power exceeds
// the budget; identity otherwise.
std::vector<Eigen::MatrixXcd> project_power(
    const std::vector<Eigen::MatrixXcd>& F, double P_max_w);

// Normalizes every entry to unit modulus (zero entries become 1 with a
// stderr diagnostic); when mask_enabled, additionally scales the whole
// vector down until the worst quadratic-form power meets rho_w.
Eigen::VectorXcd project_theta(const Eigen::VectorXcd& theta_bar,
                               const std::vector<Eigen::MatrixXcd>& mask_forms,
                               double rho_w, bool mask_enabled);

// Decoded and fully projected network output for the scenario's channels.
DecodedPoint decode_network(const NetParams& p, const Eigen::VectorXd& x,
                            const Scenario& s, const ChannelSet& cs,
                            const std::vector<ObservationProbe>& probes,
                            bool mask_enabled);

// Negative minimum achievable rate: the training loss.
double nn_loss(const ChannelSet& cs, const Eigen::VectorXcd& theta,
               const std::vector<Eigen::MatrixXcd>& F, double sigma2);

// Loss at parameters p (forward + decode + loss) and, when grad is non-null,
// its gradient with respect to every parameter by reverse accumulation
// through the network, the extraction, and the projections.
double nn_loss_and_gradient(const NetParams& p, const Eigen::VectorXd& x,
                            const Scenario& s, const ChannelSet& cs,
                            const std::vector<ObservationProbe>& probes,
                            bool mask_enabled, NetParams* grad);

struct TrainOptions {
  double learning_rate = 5e-4;
  int iterations = 100;
  int hidden1 = 1024;
  int hidden2 = 512;
  double mu_deg = 0.5;
  bool mask_enabled = true;
  double angle_noise_deg = 0.0; // uniform [0, value) added to input angles
  long long seed = -1;          // < 0: use the scenario seed
  bool verbose = false;         // per-iteration loss lines on stderr
};

struct TrainResult {
  NetParams params;      // best-loss parameters
  Solution solution;     // decoded, projected point of those parameters
  Eigen::VectorXd input; // the encoded (possibly noise-perturbed) input used
};

// Trains on the fixed channel realization in cs. The solution trace records
// the best decoded min-rate seen up to each iteration (non-decreasing).
// Throws std::runtime_error on a non-finite loss or gradient, naming the
// iteration.
TrainResult train_network(const Scenario& s, const ChannelSet& cs,
                          const TrainOptions& opts);

// Flat binary round trip: magic, dims, then row-major coefficients.
void save_net(const NetParams& p, const std::string& path);
NetParams load_net(const std::string& path);

} // namespace risbeam
