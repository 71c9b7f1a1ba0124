#pragma once

// Run configuration: sectioned "key = value [unit]" text.
//
//   [geometry]
//   radius = 97 um
//   separation = 120, 180 nm
//
// Lists are comma separated with one trailing unit. '#' starts a comment.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "casimir/errors.hpp"
#include "casimir/force_curve.hpp"
#include "casimir/materials.hpp"
#include "casimir/numerics.hpp"
#include "casimir/quantities.hpp"

namespace casimir {

struct RunConfig {
  // geometry
  double radius = 0;       // nm
  double period = 0;       // nm
  double amplitude1 = 0;   // nm
  double amplitude2 = 0;   // nm
  std::vector<double> separations;  // nm
  std::vector<double> phases;       // rad; empty means phase_points on [0, 2 pi)
  int phase_points = 64;
  double temperature = 0;  // K

  MaterialModel material;
  std::string material_file;

  NumericsConfig numerics;

  std::vector<double> voltages{0.5};     // V
  double residual_potential = 0;         // V
  std::string coefficient_file;

  // calibrate-demo
  double k_ben = 1.27;                   // nN per signal unit
  double z0 = 117.3;                     // nm
  std::vector<double> displacements{0, 20, 40, 60};  // nm
  double noise = 0.01;                   // relative to the peak signal
  int samples = 8192;
  int trials = 100;

  int precision = 17;
  std::string prefix = "casimir";

  std::vector<double> phase_grid() const {
    if (!phases.empty()) return phases;
    std::vector<double> out(phase_points);
    for (int i = 0; i < phase_points; ++i) out[i] = 2 * units::pi * i / phase_points;
    return out;
  }

  // the resolved configuration, one "key = value" per entry
  std::vector<std::pair<std::string, std::string>> describe() const {
    auto list = [](const std::vector<double>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
      return s;
    };
    std::vector<std::pair<std::string, std::string>> d{
        {"geometry.radius_nm", format_number(radius)},
        {"geometry.period_nm", format_number(period)},
        {"geometry.amplitude1_nm", format_number(amplitude1)},
        {"geometry.amplitude2_nm", format_number(amplitude2)},
        {"geometry.separation_nm", list(separations)},
        {"geometry.phase_rad", list(phase_grid())},
        {"geometry.temperature_K", format_number(temperature)},
        {"material", material.describe()},
        {"numerics", numerics.describe()},
        {"electrostatics.voltage_V", list(voltages)},
        {"electrostatics.residual_potential_V", format_number(residual_potential)},
        {"electrostatics.coefficients", coefficient_file},
        {"calibration.k_ben", format_number(k_ben)},
        {"calibration.z0_nm", format_number(z0)},
        {"calibration.displacement_nm", list(displacements)},
        {"calibration.noise", format_number(noise)},
        {"calibration.samples", std::to_string(samples)},
        {"calibration.trials", std::to_string(trials)},
        {"output.precision", std::to_string(precision)},
        {"output.prefix", prefix},
    };
    return d;
  }
};

namespace detail {

enum class Dim { length, angle, temperature, energy, voltage, none };

inline double unit_factor(Dim d, const std::string& u, int line) {
  static const std::map<std::string, double> len{{"nm", 1}, {"um", 1e3}, {"mm", 1e6}, {"m", 1e9}};
  static const std::map<std::string, double> ang{{"rad", 1}, {"deg", units::pi / 180}};
  static const std::map<std::string, double> tmp{{"K", 1}};
  static const std::map<std::string, double> en{{"eV", 1}, {"meV", 1e-3}};
  static const std::map<std::string, double> vol{{"V", 1}, {"mV", 1e-3}};
  const std::map<std::string, double>* m = nullptr;
  switch (d) {
    case Dim::length: m = &len; break;
    case Dim::angle: m = &ang; break;
    case Dim::temperature: m = &tmp; break;
    case Dim::energy: m = &en; break;
    case Dim::voltage: m = &vol; break;
    case Dim::none:
      if (!u.empty()) throw ConfigError("unexpected unit '" + u + "'", line);
      return 1;
  }
  if (u.empty()) throw ConfigError("missing unit", line);
  auto it = m->find(u);
  if (it == m->end()) throw ConfigError("bad unit '" + u + "'", line);
  return it->second;
}

struct Entry {
  std::string value;
  int line;
};

inline std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// "1, 2.5, 3 nm" -> numbers and unit
inline std::vector<double> parse_numbers(const std::string& text, Dim d, int line) {
  std::string body = text, unit;
  auto sp = body.find_last_of(" \t");
  if (sp != std::string::npos) {
    std::string tail = body.substr(sp + 1);
    if (!tail.empty() && (std::isalpha(static_cast<unsigned char>(tail[0])))) {
      unit = tail;
      body = trim(body.substr(0, sp));
    }
  } else if (!body.empty() && std::isalpha(static_cast<unsigned char>(body.back()))) {
    // "97um" style
    auto p = body.find_first_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ");
    if (p != std::string::npos && p > 0 && body[p - 1] != 'e' && body[p - 1] != 'E') {
      unit = body.substr(p);
      body = body.substr(0, p);
    }
  }
  const double f = unit_factor(d, unit, line);
  std::vector<double> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'", line);
    }
    if (used != item.size()) throw ConfigError("not a number: '" + item + "'", line);
    out.push_back(v * f);
  }
  if (out.empty()) throw ConfigError("empty value", line);
  return out;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& base_dir = ".") {
  using detail::Dim;
  std::map<std::string, detail::Entry> kv;
  std::string line, section;
  int lineno = 0;
  static const std::map<std::string, std::vector<std::string>> known{
      {"geometry", {"radius", "period", "amplitude1", "amplitude2", "separation", "phase", "phase_points",
                    "temperature"}},
      {"material", {"model", "omega_p", "permittivity", "file"}},
      {"numerics", {"orders", "order_padding", "ode_rtol", "ode_atol", "transform_top", "transform_bottom",
                    "matsubara_rel_tol", "k_rel_tol", "l_max", "matsubara_exact", "matsubara_tail_nodes",
                    "static_probe", "corner_angle_nodes", "corner_radial_nodes", "kx_nodes", "ky_nodes",
                    "reference_gap", "z_nodes", "z_rel_tol", "threads"}},
      {"electrostatics", {"voltage", "residual_potential", "coefficients"}},
      {"calibration", {"k_ben", "z0", "displacement", "noise", "samples", "trials"}},
      {"output", {"precision", "prefix"}},
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", lineno);
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!known.count(section)) throw ConfigError("unknown section [" + section + "]", lineno);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
    if (section.empty()) throw ConfigError("key outside any section", lineno);
    std::string key = detail::trim(line.substr(0, eq)), val = detail::trim(line.substr(eq + 1));
    const auto& keys = known.at(section);
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("unknown key '" + key + "' in [" + section + "]", lineno);
    std::string full = section + "." + key;
    if (kv.count(full)) throw ConfigError("duplicate key '" + key + "'", lineno);
    if (val.empty()) throw ConfigError("empty value for '" + key + "'", lineno);
    kv[full] = {val, lineno};
  }
  const int eof = lineno + 1;

  auto has = [&](const std::string& k) { return kv.count(k) > 0; };
  auto require = [&](const std::string& k) -> const detail::Entry& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("missing field '" + k + "'", eof);
    return it->second;
  };
  auto list = [&](const std::string& k, Dim d) {
    const auto& e = require(k);
    return detail::parse_numbers(e.value, d, e.line);
  };
  auto scalar = [&](const std::string& k, Dim d) {
    auto v = list(k, d);
    if (v.size() != 1) throw ConfigError("expected a single value for '" + k + "'", kv.at(k).line);
    return v[0];
  };
  auto integer = [&](const std::string& k) {
    double v = scalar(k, Dim::none);
    if (v != std::floor(v)) throw ConfigError("expected an integer for '" + k + "'", kv.at(k).line);
    return static_cast<int>(v);
  };
  auto text = [&](const std::string& k) { return require(k).value; };
  auto path = [&](const std::string& k) {
    std::filesystem::path p = text(k);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    if (!std::filesystem::is_regular_file(p)) throw ConfigError("file not found: " + p.string(), kv.at(k).line);
    return p.string();
  };
  auto positive = [&](const std::string& k, double v) {
    if (!(v > 0)) throw ConfigError("'" + k + "' must be positive", kv.at(k).line);
    return v;
  };

  RunConfig c;
  c.radius = positive("geometry.radius", scalar("geometry.radius", Dim::length));
  c.period = positive("geometry.period", scalar("geometry.period", Dim::length));
  c.amplitude1 = scalar("geometry.amplitude1", Dim::length);
  c.amplitude2 = scalar("geometry.amplitude2", Dim::length);
  if (c.amplitude1 < 0 || c.amplitude2 < 0)
    throw ConfigError("amplitudes must be nonnegative", kv.at("geometry.amplitude1").line);
  c.separations = list("geometry.separation", Dim::length);
  for (double z : c.separations)
    if (!(z > c.amplitude1 + c.amplitude2))
      throw ConfigError("separation must exceed amplitude1 + amplitude2", kv.at("geometry.separation").line);
  c.temperature = positive("geometry.temperature", scalar("geometry.temperature", Dim::temperature));
  if (has("geometry.phase")) c.phases = list("geometry.phase", Dim::angle);
  if (has("geometry.phase_points")) {
    c.phase_points = integer("geometry.phase_points");
    if (c.phase_points < 1) throw ConfigError("phase_points must be positive", kv.at("geometry.phase_points").line);
  }

  const std::string model = text("material.model");
  const int mline = kv.at("material.model").line;
  try {
    if (model == "plasma") {
      c.material = plasma(scalar("material.omega_p", Dim::energy));
    } else if (model == "ideal") {
      c.material = ideal_metal();
    } else if (model == "dielectric") {
      c.material = dielectric(scalar("material.permittivity", Dim::none));
    } else if (model == "file") {
      c.material_file = path("material.file");
      c.material = load_material(c.material_file);
    } else {
      throw ConfigError("unknown material model '" + model + "'", mline);
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), mline);
  }

  NumericsConfig& n = c.numerics;
  auto num_int = [&](const char* k, int& dst) {
    if (has(std::string("numerics.") + k)) dst = integer(std::string("numerics.") + k);
  };
  auto num_dbl = [&](const char* k, double& dst, Dim d = Dim::none) {
    if (has(std::string("numerics.") + k)) dst = scalar(std::string("numerics.") + k, d);
  };
  num_int("orders", n.orders);
  num_int("order_padding", n.order_padding);
  num_dbl("ode_rtol", n.ode_rtol);
  num_dbl("ode_atol", n.ode_atol);
  num_dbl("transform_top", n.transform_top);
  num_dbl("transform_bottom", n.transform_bottom);
  num_dbl("matsubara_rel_tol", n.matsubara_rel_tol);
  num_dbl("k_rel_tol", n.k_rel_tol);
  num_int("l_max", n.l_max);
  num_int("matsubara_exact", n.matsubara_exact);
  num_int("matsubara_tail_nodes", n.matsubara_tail_nodes);
  num_dbl("static_probe", n.static_probe);
  num_int("corner_angle_nodes", n.corner_angle_nodes);
  num_int("corner_radial_nodes", n.corner_radial_nodes);
  num_int("kx_nodes", n.kx_nodes);
  num_int("ky_nodes", n.ky_nodes);
  num_dbl("reference_gap", n.reference_gap, Dim::length);
  num_int("z_nodes", n.z_nodes);
  num_dbl("z_rel_tol", n.z_rel_tol);
  num_int("threads", n.threads);

  if (has("electrostatics.voltage")) c.voltages = list("electrostatics.voltage", Dim::voltage);
  if (has("electrostatics.residual_potential"))
    c.residual_potential = scalar("electrostatics.residual_potential", Dim::voltage);
  if (has("electrostatics.coefficients")) c.coefficient_file = path("electrostatics.coefficients");

  if (has("calibration.k_ben")) c.k_ben = positive("calibration.k_ben", scalar("calibration.k_ben", Dim::none));
  if (has("calibration.z0")) c.z0 = positive("calibration.z0", scalar("calibration.z0", Dim::length));
  if (has("calibration.displacement")) c.displacements = list("calibration.displacement", Dim::length);
  if (has("calibration.noise")) c.noise = scalar("calibration.noise", Dim::none);
  if (has("calibration.samples")) c.samples = integer("calibration.samples");
  if (has("calibration.trials")) c.trials = integer("calibration.trials");

  if (has("output.precision")) {
    c.precision = integer("output.precision");
    if (c.precision != 17) throw ConfigError("output precision is fixed at 17 digits", kv.at("output.precision").line);
  }
  if (has("output.prefix")) c.prefix = text("output.prefix");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config file " + path);
  try {
    return parse_config(f, std::filesystem::path(path).parent_path().string().empty()
                               ? std::string(".")
                               : std::filesystem::path(path).parent_path().string());
  } catch (const ConfigError& e) {
    throw ConfigError(e.detail() + " (" + path + ")", e.line());
  }
}

}  // namespace casimir
