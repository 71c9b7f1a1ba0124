#pragma once

// Normal electrostatic force between a corrugated sphere and grating as a
// fitted series in z/R, and the lateral force derived from it.

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "casimir/errors.hpp"
#include "casimir/quantities.hpp"

namespace casimir {

struct ElectrostaticCoefficients {
  std::array<double, 7> c{};  // c0..c6
  std::string source;
};

struct ElectrostaticConfig {
  double radius;              // nm
  double separation;          // nm
  double phase;               // rad
  double amplitude1;          // nm
  double amplitude2;          // nm
  double period;              // nm
  double voltage;             // V
  double residual_potential;  // V
  ElectrostaticCoefficients coefficients;
};

// Rows "cK value" for K = 0..6; "# source: ..." records provenance.
inline ElectrostaticCoefficients parse_coefficients(std::istream& is) {
  ElectrostaticCoefficients out;
  std::array<bool, 7> seen{};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) {
      std::string comment = line.substr(hash + 1);
      auto p = comment.find("source:");
      if (p != std::string::npos) {
        std::string s = comment.substr(p + 7);
        s.erase(0, s.find_first_not_of(" \t"));
        if (!out.source.empty()) out.source += " ";
        out.source += s;
      }
      line.erase(hash);
    }
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    double v;
    if (key.size() != 2 || key[0] != 'c' || key[1] < '0' || key[1] > '6' || !(ls >> v))
      throw ConfigError("expected 'cK value' with K in 0..6", lineno);
    std::string rest;
    if (ls >> rest) throw ConfigError("trailing text after coefficient", lineno);
    int k = key[1] - '0';
    if (seen[k]) throw ConfigError("duplicate coefficient " + key, lineno);
    seen[k] = true;
    out.c[k] = v;
  }
  for (int k = 0; k < 7; ++k)
    if (!seen[k]) throw ConfigError("missing coefficient c" + std::to_string(k), lineno);
  return out;
}

inline ElectrostaticCoefficients load_coefficients(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open coefficient file " + path);
  try {
    return parse_coefficients(f);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.detail(), e.line());
  }
}

inline double beta(double z, double phi, double a1, double a2) {
  if (!(z > 0)) throw DomainError("separation must be positive");
  double b = std::sqrt(std::max(0.0, a1 * a1 + a2 * a2 - 2 * a1 * a2 * std::cos(phi))) / z;
  if (!(b < 1)) throw DomainError("beta >= 1: electrostatic series not applicable");
  return b;
}

namespace detail {

// Q_k(beta^2) of the k-th series term, as coefficients of beta^{2j}
inline const std::array<std::array<double, 4>, 7>& series_weights() {
  static const std::array<std::array<double, 4>, 7> w{{
      {1, 0, 0, 0},
      {1, 0, 0, 0},
      {1, 0.5, 0, 0},
      {1, 1.5, 0, 0},
      {1, 3, 3.0 / 8, 0},
      {1, 5, 15.0 / 8, 0},
      {1, 7.5, 90.0 / 16, 5.0 / 16},
  }};
  return w;
}

inline double b_squared(const ElectrostaticConfig& c) {
  return c.amplitude1 * c.amplitude1 + c.amplitude2 * c.amplitude2 -
         2 * c.amplitude1 * c.amplitude2 * std::cos(c.phase);
}

inline void check(const ElectrostaticConfig& c) {
  if (!(c.radius > 0)) throw DomainError("sphere radius must be positive");
  if (!(c.period > 0)) throw DomainError("period must be positive");
  beta(c.separation, c.phase, c.amplitude1, c.amplitude2);
}

}  // namespace detail

// Bracket of the normal force (dimensionless).
inline double electrostatic_series(const ElectrostaticConfig& c) {
  detail::check(c);
  const double z = c.separation, R = c.radius;
  const double b2 = detail::b_squared(c) / (z * z);
  double s = R / (2 * z) / std::sqrt(1 - b2);
  const auto& w = detail::series_weights();
  double zr = 1;
  for (int k = 0; k < 7; ++k) {
    double q = w[k][0] + b2 * (w[k][1] + b2 * (w[k][2] + b2 * w[k][3]));
    s += c.coefficients.c[k] * zr * q;
    zr *= z / R;
  }
  return s;
}

// N; attractive
inline double normal_electrostatic_force(const ElectrostaticConfig& c) {
  const double dv = c.voltage - c.residual_potential;
  return -2 * units::pi * units::eps0 * dv * dv * electrostatic_series(c);
}

// Finite part of int_z^inf of the bracket in dz' (nm).  The series terms grow
// with z', so z'^m integrates to -z^{m+1}/(m+1) by analytic continuation and
// the leading term to -(R/2) ln(z + sqrt(z^2 - b^2)); the discarded pieces are
// independent of phi.
inline double electrostatic_series_integral(const ElectrostaticConfig& c) {
  detail::check(c);
  const double z = c.separation, R = c.radius, b2 = detail::b_squared(c);
  double s = -(R / 2) * std::log(z + std::sqrt(z * z - b2));
  const auto& w = detail::series_weights();
  for (int k = 0; k < 7; ++k) {
    double rk = std::pow(R, k);
    for (int j = 0; j < 4 && 2 * j <= k; ++j) {
      if (w[k][j] == 0) continue;
      int m = k - 2 * j;
      s += c.coefficients.c[k] * w[k][j] * std::pow(b2, j) * (-std::pow(z, m + 1) / (m + 1)) / rk;
    }
  }
  return s;
}

// E = -int_z^inf F_nor dz', J (finite part)
inline double electrostatic_energy(const ElectrostaticConfig& c) {
  const double dv = c.voltage - c.residual_potential;
  return 2 * units::pi * units::eps0 * dv * dv * electrostatic_series_integral(c) * units::nm;
}

// F = -(2 pi/period) dE/dphi, N
inline double lateral_electrostatic_force(const ElectrostaticConfig& c) {
  detail::check(c);
  const double z = c.separation, R = c.radius, b2 = detail::b_squared(c);
  const double db2 = 2 * c.amplitude1 * c.amplitude2 * std::sin(c.phase);
  const double sq = std::sqrt(z * z - b2);
  double d = (R / 2) * db2 / (2 * sq * (z + sq));
  const auto& w = detail::series_weights();
  for (int k = 0; k < 7; ++k) {
    double rk = std::pow(R, k);
    for (int j = 1; j < 4 && 2 * j <= k; ++j) {
      if (w[k][j] == 0) continue;
      int m = k - 2 * j;
      d += c.coefficients.c[k] * w[k][j] * j * std::pow(b2, j - 1) * db2 *
           (-std::pow(z, m + 1) / (m + 1)) / rk;
    }
  }
  const double dv = c.voltage - c.residual_potential;
  const double dE = 2 * units::pi * units::eps0 * dv * dv * d;  // N nm per rad
  return -(2 * units::pi / c.period) * dE;
}

}  // namespace casimir
