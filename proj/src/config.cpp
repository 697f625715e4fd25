#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "risbeam/scene.hpp"

namespace risbeam {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void apply_json(Scenario& s, const nlohmann::json& j) {
  auto require = [&j](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end())
      throw std::runtime_error(std::string("config: missing required key '") + key + "'");
    return *it;
  };
  s.frequency_hz = require("frequency_hz").get<double>();
  s.D_m = require("D_m").get<double>();
  s.d_ris_m = require("d_ris_m").get<double>();
  s.theta_inc_deg = require("theta_inc_deg").get<double>();
  s.theta_ref_deg = require("theta_ref_deg").get<std::vector<double>>();
  s.N_t = require("N_t").get<int>();
  s.N_r = require("N_r").get<std::vector<int>>();
  s.ris_rows = require("ris_rows").get<int>();
  s.ris_cols = require("ris_cols").get<int>();
  s.K_r = require("K_r").get<double>();
  s.P_max_w = require("P_max_w").get<double>();
  s.sigma2_w = require("sigma2_w").get<double>();
  s.rho_w = require("rho_w").get<double>();
  s.seed = require("seed").get<long long>();
  if (j.contains("phase_levels")) s.phase_levels = j.at("phase_levels").get<int>();
  if (j.contains("theta_low_deg")) s.theta_low_deg = j.at("theta_low_deg").get<double>();
  if (j.contains("theta_high_deg")) s.theta_high_deg = j.at("theta_high_deg").get<double>();
}

// Minimal TOML subset: top-level `key = value` lines with numbers, booleans,
// quoted strings, and flat arrays of numbers. Comments (#) and blank lines are
// skipped. Section headers are rejected so mistakes fail loudly instead of
// silently nesting keys.
nlohmann::json parse_flat_toml(const std::string& text) {
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string v) {
    const char* ws = " \t\r";
    size_t b = v.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    size_t e = v.find_last_not_of(ws);
    return v.substr(b, e - b + 1);
  };
  auto parse_scalar = [&](std::string tok) -> nlohmann::json {
    tok = trim(tok);
    if (tok.empty()) throw std::runtime_error("toml: empty value");
    if (tok.front() == '"' && tok.back() == '"' && tok.size() >= 2)
      return tok.substr(1, tok.size() - 2);
    if (tok == "true") return true;
    if (tok == "false") return false;
    // TOML permits readability underscores inside numbers.
    std::string num;
    for (char c : tok)
      if (c != '_') num.push_back(c);
    try {
      size_t pos = 0;
      if (num.find_first_of(".eE") == std::string::npos) {
        long long v = std::stoll(num, &pos);
        if (pos == num.size()) return v;
        throw std::runtime_error("trailing characters");
      }
      double d = std::stod(num, &pos);
      if (pos != num.size()) throw std::runtime_error("trailing characters");
      return d;
    } catch (const std::exception&) {
      throw std::runtime_error("toml: cannot parse value '" + tok + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside quotes.
    bool quoted = false;
    std::string stripped;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      stripped.push_back(c);
    }
    stripped = trim(stripped);
    if (stripped.empty()) continue;
    if (stripped.front() == '[')
      throw std::runtime_error("toml: section tables are not supported (line " +
                               std::to_string(lineno) + "); use flat keys");
    size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("toml: expected key = value at line " + std::to_string(lineno));
    std::string key = trim(stripped.substr(0, eq));
    std::string val = trim(stripped.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("toml: empty key at line " + std::to_string(lineno));
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']')
        throw std::runtime_error("toml: arrays must close on the same line (line " +
                                 std::to_string(lineno) + ")");
      nlohmann::json arr = nlohmann::json::array();
      std::string body = val.substr(1, val.size() - 2);
      std::string item;
      std::istringstream items(body);
      while (std::getline(items, item, ',')) {
        if (trim(item).empty()) continue;
        arr.push_back(parse_scalar(item));
      }
      j[key] = arr;
    } else {
      j[key] = parse_scalar(val);
    }
  }
  return j;
}

} // namespace

Scenario scenario_from_json_text(const std::string& text) {
  Scenario s;
  apply_json(s, nlohmann::json::parse(text));
  s.validate();
  return s;
}

Scenario scenario_from_toml_text(const std::string& text) {
  Scenario s;
  apply_json(s, parse_flat_toml(text));
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  const std::string text = read_file(path);
  auto ends_with = [&path](const char* suf) {
    const std::string s(suf);
    return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".json")) return scenario_from_json_text(text);
  if (ends_with(".toml")) return scenario_from_toml_text(text);
  throw std::runtime_error("config: unsupported extension (want .json or .toml): " + path);
}

} // namespace risbeam
