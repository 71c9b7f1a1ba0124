#pragma once

// Units: lengths in nm, energies and imaginary frequencies as hbar*xi in eV,
// temperature in K, forces in N, energies per area in J/m^2.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "casimir/errors.hpp"

namespace casimir {

namespace units {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double hbar_c = 197.3269804;          // eV nm
inline constexpr double k_boltzmann = 8.617333262145179e-5;  // eV/K
inline constexpr double eps0 = 8.8541878128e-12;       // F/m
inline constexpr double electron_volt = 1.602176634e-19;  // J
inline constexpr double nm = 1e-9;                        // m

// eV/nm^2 -> J/m^2
inline constexpr double ev_per_nm2 = electron_volt / (nm * nm);
// eV/nm -> N
inline constexpr double ev_per_nm = electron_volt / nm;
}  // namespace units

inline double matsubara_xi(int l, double temperature) {
  if (!(temperature > 0)) throw DomainError("temperature must be positive");
  if (l < 0) throw DomainError("Matsubara index must be nonnegative");
  return 2 * units::pi * units::k_boltzmann * temperature * l;
}

struct MatsubaraTerm {
  int index;
  double xi;      // eV
  double weight;  // 1/2 for l = 0
};

struct MatsubaraGrid {
  double temperature = 0;
  std::vector<MatsubaraTerm> terms;
  std::string cutoff_rule;

  std::size_t size() const { return terms.size(); }
};

// probe(l, xi) estimates the magnitude of the l-th term. Terms are appended
// until |w_l probe| < rel_tol * |accumulated sum|.
inline MatsubaraGrid matsubara_grid(double temperature, double rel_tol,
                                    const std::function<double(int, double)>& probe,
                                    int l_max = 200000) {
  if (!(rel_tol > 0 && rel_tol < 1)) throw DomainError("rel_tol must lie in (0,1)");
  MatsubaraGrid g;
  g.temperature = temperature;
  g.cutoff_rule = "relative tail " + std::to_string(rel_tol);
  double sum = 0;
  for (int l = 0; l <= l_max; ++l) {
    double xi = matsubara_xi(l, temperature);
    double w = l == 0 ? 0.5 : 1.0;
    double t = w * probe(l, xi);
    g.terms.push_back({l, xi, w});
    sum += t;
    if (l > 0 && std::abs(t) <= rel_tol * std::abs(sum)) return g;
  }
  throw ConvergenceError("Matsubara sum not converged at l_max = " + std::to_string(l_max) +
                         " (last term / sum above " + std::to_string(rel_tol) + ")");
}

}  // namespace casimir
