#include "risbeam/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "risbeam/discrete.hpp"
#include "risbeam/neural.hpp"
#include "risbeam/objective.hpp"

namespace risbeam {

namespace {

using nlohmann::ordered_json;

// %.17g: enough digits that every double survives a parse round trip, with
// %g's trailing-zero trimming keeping simple values simple ("0.5", "3").
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for: " + path);
}

ordered_json scenario_to_json(const Scenario& s) {
  ordered_json j;
  j["frequency_hz"] = s.frequency_hz;
  j["D_m"] = s.D_m;
  j["d_ris_m"] = s.d_ris_m;
  j["theta_inc_deg"] = s.theta_inc_deg;
  j["theta_ref_deg"] = s.theta_ref_deg;
  j["N_t"] = s.N_t;
  j["N_r"] = s.N_r;
  j["ris_rows"] = s.ris_rows;
  j["ris_cols"] = s.ris_cols;
  j["K_r"] = s.K_r;
  j["P_max_w"] = s.P_max_w;
  j["sigma2_w"] = s.sigma2_w;
  j["rho_w"] = s.rho_w;
  j["seed"] = s.seed;
  j["phase_levels"] = s.phase_levels;
  j["theta_low_deg"] = s.theta_low_deg;
  j["theta_high_deg"] = s.theta_high_deg;
  return j;
}

// JSON has no infinities; the serializer writes them as null. Only the mask
// headroom can legitimately be -inf (a zero-power solution), so map null
// back to that.
double double_or_neg_inf(const ordered_json& v) {
  if (v.is_null()) return -std::numeric_limits<double>::infinity();
  return v.get<double>();
}

} // namespace

double power_dbm(double power_w) { return 10.0 * std::log10(power_w) + 30.0; }

std::string canonical_method(const std::string& method) {
  if (method == "uacp") return "uacp";
  if (method == "uacp-mask" || method == "uacp_mask") return "uacp_mask";
  if (method == "uadp") return "uadp";
  if (method == "nn") return "nn";
  throw std::invalid_argument("unknown method '" + method +
                              "' (expected uacp, uacp-mask, uadp, or nn)");
}

MethodRun run_method(const Scenario& s, const ChannelSet& cs,
                     const std::string& method, const RunMethodOptions& opts) {
  MethodRun out;
  out.method = canonical_method(method);
  if (out.method == "uacp" || out.method == "uacp_mask") {
    AOOptions ao;
    ao.mask_enabled = (out.method == "uacp_mask");
    ao.verbose = opts.verbose;
    out.mask_enforced = ao.mask_enabled;
    out.solution = optimize_uacp(s, cs, ao);
  } else if (out.method == "uadp") {
    GreedyOptions go;
    go.L = s.phase_levels;
    go.verbose = opts.verbose;
    out.mask_enforced = true;
    out.solution = optimize_uadp(s, cs, go);
  } else { // nn
    TrainOptions to;
    to.mask_enabled = true;
    to.angle_noise_deg = opts.angle_noise_deg;
    to.verbose = opts.verbose;
    out.mask_enforced = true;
    out.solution = train_network(s, cs, to).solution;
  }
  return out;
}

RunReport build_report(const Scenario& s, const ChannelSet& cs,
                       const MethodRun& run, double bandwidth_hz) {
  RunReport r;
  r.method = run.method;
  r.bandwidth_hz = bandwidth_hz;
  r.per_receiver_rates = run.solution.rates;
  r.min_rate_bits =
      r.per_receiver_rates.empty()
          ? 0.0
          : *std::min_element(r.per_receiver_rates.begin(),
                              r.per_receiver_rates.end());
  r.iterations = run.solution.iterations;
  r.wall_time_s = run.solution.wall_time_s;
  r.mask_enforced = run.mask_enforced;
  SceneGeometry g = build_geometry(s);
  double worst = 0.0;
  for (const ObservationProbe& probe : mask_probes(s, g))
    worst = std::max(
        worst, reradiated_power(cs, run.solution.theta, run.solution.F, probe));
  r.max_mask_power_dbm = power_dbm(worst);
  r.config_echo = s;
  return r;
}

std::vector<double> angle_grid(double lo_deg, double hi_deg,
                               double spacing_deg) {
  if (!(spacing_deg > 0.0))
    throw std::invalid_argument("angle_grid: spacing must be positive");
  if (!(hi_deg > lo_deg))
    throw std::invalid_argument("angle_grid: need hi > lo");
  const double n_exact = (hi_deg - lo_deg) / spacing_deg;
  const long long n = static_cast<long long>(std::floor(n_exact + 1e-9));
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(n) + 2);
  for (long long k = 0; k <= n; ++k) g.push_back(lo_deg + k * spacing_deg);
  if (std::abs(g.back() - hi_deg) <= 1e-9 * spacing_deg)
    g.back() = hi_deg; // snap so the endpoint is exact
  else
    g.push_back(hi_deg);
  return g;
}

std::vector<std::pair<double, double>> beam_pattern(
    const Scenario& s, const SceneGeometry& g, const ChannelSet& cs,
    const Eigen::VectorXcd& theta, const std::vector<Eigen::MatrixXcd>& F,
    const std::vector<double>& angles_deg) {
  std::vector<std::pair<double, double>> out;
  out.reserve(angles_deg.size());
  for (double angle : angles_deg) {
    if (!(angle >= -89.0 && angle <= 89.0))
      throw std::invalid_argument(
          "beam_pattern: observation angle outside [-89, 89] degrees");
    const ObservationProbe probe = observation_probe(s, g, angle);
    out.emplace_back(angle, reradiated_power(cs, theta, F, probe));
  }
  return out;
}

void write_beam_pattern_csv(
    const std::string& path,
    const std::vector<std::pair<double, double>>& pattern) {
  std::string text = "angle_deg,power_w,power_dbm\n";
  for (const auto& [angle, pw] : pattern) {
    text += fmt(angle);
    text += ',';
    text += fmt(pw);
    text += ',';
    text += fmt(power_dbm(pw));
    text += '\n';
  }
  write_text_file(path, text);
}

void write_ris_state_csv(const std::string& path, const Eigen::VectorXcd& theta,
                         int rows, int cols) {
  if (rows < 1 || cols < 1 ||
      theta.size() != static_cast<Eigen::Index>(rows) * cols)
    throw std::invalid_argument(
        "write_ris_state_csv: grid shape does not match the coefficient count");
  std::string text = "element,row,col,re,im,amplitude,phase_rad\n";
  constexpr double kTwoPi = 6.2831853071795864769;
  for (Eigen::Index n = 0; n < theta.size(); ++n) {
    const int r = static_cast<int>(n) / cols;
    const int c = static_cast<int>(n) % cols;
    double phase = std::arg(theta(n));
    if (phase < 0.0) phase += kTwoPi;
    text += std::to_string(n);
    text += ',';
    text += std::to_string(r);
    text += ',';
    text += std::to_string(c);
    text += ',';
    text += fmt(theta(n).real());
    text += ',';
    text += fmt(theta(n).imag());
    text += ',';
    text += fmt(std::abs(theta(n)));
    text += ',';
    text += fmt(phase);
    text += '\n';
  }
  write_text_file(path, text);
}

std::string report_to_json_text(const RunReport& r) {
  ordered_json j;
  j["method"] = r.method;
  j["error"] = r.error;
  j["bandwidth_hz"] = r.bandwidth_hz;
  j["min_rate_bits"] = r.min_rate_bits;
  j["min_rate_mbps"] = r.min_rate_bits * r.bandwidth_hz / 1e6;
  j["per_receiver_rates_bits"] = r.per_receiver_rates;
  ordered_json mbps = ordered_json::array();
  for (double rate : r.per_receiver_rates)
    mbps.push_back(rate * r.bandwidth_hz / 1e6);
  j["per_receiver_rates_mbps"] = mbps;
  j["iterations"] = r.iterations;
  j["mask_enforced"] = r.mask_enforced;
  j["max_mask_power_dbm"] = r.max_mask_power_dbm;
  j["rho_dbm"] = power_dbm(r.config_echo.rho_w);
  j["config"] = scenario_to_json(r.config_echo);
  return j.dump(2) + "\n";
}

RunReport report_from_json_text(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  RunReport r;
  r.method = j.at("method").get<std::string>();
  r.error = j.at("error").get<std::string>();
  r.bandwidth_hz = j.at("bandwidth_hz").get<double>();
  r.min_rate_bits = j.at("min_rate_bits").get<double>();
  r.per_receiver_rates =
      j.at("per_receiver_rates_bits").get<std::vector<double>>();
  r.iterations = j.at("iterations").get<int>();
  r.mask_enforced = j.at("mask_enforced").get<bool>();
  r.max_mask_power_dbm = double_or_neg_inf(j.at("max_mask_power_dbm"));
  r.config_echo = scenario_from_json_text(j.at("config").dump());
  return r;
}

void write_report_json(const std::string& path, const RunReport& r) {
  write_text_file(path, report_to_json_text(r));
}

std::vector<SweepCell> rate_vs_ris_size(
    const Scenario& base, const std::vector<std::pair<int, int>>& sizes,
    const std::vector<std::string>& methods, const RunMethodOptions& opts) {
  const auto cell_task = [](Scenario s, int rows, int cols, std::string method,
                            RunMethodOptions cell_opts) {
    SweepCell c;
    c.ris_rows = rows;
    c.ris_cols = cols;
    c.method = method;
    c.min_rate_bits = std::numeric_limits<double>::quiet_NaN();
    try {
      c.method = canonical_method(method);
      s.ris_rows = rows;
      s.ris_cols = cols;
      s.validate();
      const ChannelSet cs = assemble_channels(s, build_geometry(s));
      const MethodRun run = run_method(s, cs, method, cell_opts);
      c.min_rate_bits = *std::min_element(run.solution.rates.begin(),
                                          run.solution.rates.end());
    } catch (const std::exception& e) {
      c.error = e.what();
    }
    return c;
  };

  std::vector<std::future<SweepCell>> futures;
  futures.reserve(sizes.size() * methods.size());
  for (const auto& [rows, cols] : sizes)
    for (const std::string& method : methods)
      futures.push_back(std::async(std::launch::async, cell_task, base, rows,
                                   cols, method, opts));
  std::vector<SweepCell> cells;
  cells.reserve(futures.size());
  for (auto& f : futures) cells.push_back(f.get());
  return cells;
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepCell>& cells,
                     double bandwidth_hz) {
  std::string text =
      "ris_rows,ris_cols,n_elements,method,min_rate_bits,min_rate_mbps,error\n";
  for (const SweepCell& c : cells) {
    text += std::to_string(c.ris_rows);
    text += ',';
    text += std::to_string(c.ris_cols);
    text += ',';
    text += std::to_string(c.ris_rows * c.ris_cols);
    text += ',';
    text += c.method;
    text += ',';
    text += fmt(c.min_rate_bits);
    text += ',';
    text += fmt(c.min_rate_bits * bandwidth_hz / 1e6);
    text += ',';
    text += csv_quote(c.error);
    text += '\n';
  }
  write_text_file(path, text);
}

} // namespace risbeam
