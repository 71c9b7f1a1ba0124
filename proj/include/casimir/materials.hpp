#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "casimir/errors.hpp"
#include "casimir/quantities.hpp"

namespace casimir {

struct Oscillator {
  double strength;   // g_j, eV^2
  double frequency;  // omega_j, eV
  double damping;    // gamma_j, eV
};

struct IdealMetal {};
struct Plasma {
  double omega_p;
};
struct GeneralizedPlasma {
  double omega_p;
  std::vector<Oscillator> oscillators;
};
// frequency-independent permittivity; eps = 1 is the empty test medium
struct Dielectric {
  double eps;
};

struct MaterialModel {
  std::variant<IdealMetal, Plasma, GeneralizedPlasma, Dielectric> kind;
  std::string source;

  bool is_ideal() const { return std::holds_alternative<IdealMetal>(kind); }
  bool is_plasma_like() const {
    return std::holds_alternative<Plasma>(kind) || std::holds_alternative<GeneralizedPlasma>(kind);
  }
  double omega_p() const {
    if (auto* p = std::get_if<Plasma>(&kind)) return p->omega_p;
    if (auto* p = std::get_if<GeneralizedPlasma>(&kind)) return p->omega_p;
    return 0;
  }
  std::string describe() const;
};

inline MaterialModel ideal_metal() { return {IdealMetal{}, "ideal metal"}; }
inline MaterialModel plasma(double omega_p) {
  if (!(omega_p > 0)) throw DomainError("plasma frequency must be positive");
  return {Plasma{omega_p}, "plasma model"};
}
inline MaterialModel dielectric(double eps) {
  if (!(eps >= 1)) throw DomainError("permittivity must be >= 1");
  return {Dielectric{eps}, "constant permittivity"};
}
inline MaterialModel generalized_plasma(double omega_p, std::vector<Oscillator> osc,
                                        std::string source = "") {
  if (!(omega_p > 0)) throw DomainError("plasma frequency must be positive");
  for (const auto& o : osc)
    if (!(o.frequency > 0 && o.strength >= 0 && o.damping >= 0))
      throw DomainError("oscillator parameters need omega > 0, g >= 0, gamma >= 0");
  return {GeneralizedPlasma{omega_p, std::move(osc)}, std::move(source)};
}

inline std::string MaterialModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (std::holds_alternative<IdealMetal>(kind)) {
    os << "ideal_metal";
  } else if (auto* p = std::get_if<Plasma>(&kind)) {
    os << "plasma omega_p=" << p->omega_p;
  } else if (auto* g = std::get_if<GeneralizedPlasma>(&kind)) {
    os << "generalized_plasma omega_p=" << g->omega_p;
    for (const auto& o : g->oscillators)
      os << " (" << o.strength << "," << o.frequency << "," << o.damping << ")";
  } else if (auto* d = std::get_if<Dielectric>(&kind)) {
    os << "dielectric eps=" << d->eps;
  }
  return os.str();
}

namespace detail {
inline double oscillator_sum(const std::vector<Oscillator>& osc, double xi) {
  double s = 0;
  for (const auto& o : osc) s += o.strength / (o.frequency * o.frequency + xi * xi + o.damping * xi);
  return s;
}
}  // namespace detail

inline double eps_imag(const MaterialModel& m, double xi) {
  if (!(xi > 0)) throw DomainError("eps_imag needs xi > 0");
  if (m.is_ideal()) throw DomainError("ideal metal has no finite permittivity; use limit form");
  if (auto* p = std::get_if<Plasma>(&m.kind)) return 1 + p->omega_p * p->omega_p / (xi * xi);
  if (auto* g = std::get_if<GeneralizedPlasma>(&m.kind))
    return 1 + g->omega_p * g->omega_p / (xi * xi) + detail::oscillator_sum(g->oscillators, xi);
  return std::get<Dielectric>(m.kind).eps;
}

// eps(i xi) * xi^2 in eV^2, finite at xi = 0 for plasma-like models
inline double eps_xi2(const MaterialModel& m, double xi) {
  if (m.is_ideal()) throw DomainError("ideal metal has no finite permittivity; use limit form");
  if (auto* p = std::get_if<Plasma>(&m.kind)) return xi * xi + p->omega_p * p->omega_p;
  if (auto* g = std::get_if<GeneralizedPlasma>(&m.kind))
    return xi * xi * (1 + detail::oscillator_sum(g->oscillators, xi)) + g->omega_p * g->omega_p;
  return std::get<Dielectric>(m.kind).eps * xi * xi;
}

struct FresnelPair {
  double r_te;
  double r_tm;
};

inline FresnelPair fresnel(const MaterialModel& m, double xi, double kpar) {
  if (xi < 0 || kpar < 0 || (xi == 0 && kpar == 0))
    throw DomainError("fresnel needs xi >= 0, k >= 0, not both zero");
  if (m.is_ideal()) return {-1.0, 1.0};
  const double c2 = units::hbar_c * units::hbar_c;
  double q = std::sqrt(kpar * kpar + xi * xi / c2);
  double k = std::sqrt(kpar * kpar + eps_xi2(m, xi) / c2);
  double r_te = (q - k) / (q + k);
  double r_tm;
  if (xi == 0) {
    if (m.is_plasma_like()) {
      r_tm = 1.0;
    } else {
      double e = std::get<Dielectric>(m.kind).eps;
      r_tm = (e - 1) / (e + 1);
    }
  } else {
    double e = eps_imag(m, xi);
    r_tm = (e * q - k) / (e * q + k);
  }
  return {r_te, r_tm};
}

// Header: "model generalized_plasma omega_p=<eV>" (or "model plasma omega_p=<eV>"),
// then rows "g omega gamma". '#' starts a comment.
inline MaterialModel parse_material(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  int lineno = 0;
  bool have_header = false;
  bool generalized = false;
  double omega_p = 0;
  std::vector<Oscillator> osc;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (!have_header) {
      std::string model, kv;
      if (first != "model" || !(ls >> model))
        throw ConfigError(name + ": expected 'model <name> omega_p=<eV>'", lineno);
      if (model == "generalized_plasma") {
        generalized = true;
      } else if (model != "plasma") {
        throw ConfigError(name + ": unknown material model '" + model + "'", lineno);
      }
      if (!(ls >> kv) || kv.rfind("omega_p=", 0) != 0)
        throw ConfigError(name + ": missing omega_p=<eV>", lineno);
      try {
        omega_p = std::stod(kv.substr(8));
      } catch (const std::exception&) {
        throw ConfigError(name + ": bad omega_p value '" + kv + "'", lineno);
      }
      have_header = true;
      continue;
    }
    if (!generalized) throw ConfigError(name + ": oscillator rows need generalized_plasma", lineno);
    Oscillator o{};
    std::istringstream row(line);
    std::string extra;
    if (!(row >> o.strength >> o.frequency >> o.damping) || (row >> extra))
      throw ConfigError(name + ": expected 'g omega gamma'", lineno);
    osc.push_back(o);
  }
  if (!have_header) throw ConfigError(name + ": missing model header");
  try {
    if (generalized) return generalized_plasma(omega_p, std::move(osc), name);
    auto m = plasma(omega_p);
    m.source = name;
    return m;
  } catch (const DomainError& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

inline MaterialModel load_material(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read material file " + path);
  return parse_material(f, path);
}

}  // namespace casimir
