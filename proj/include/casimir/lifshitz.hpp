#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <sstream>

#include "casimir/materials.hpp"
#include "casimir/numerics.hpp"
#include "casimir/parallel.hpp"
#include "casimir/quantities.hpp"

namespace casimir {

struct PlatePair {
  MaterialModel material;
  double separation;   // nm
  double temperature;  // K
};

namespace detail {

// int_0^inf k dk sum_pol ln(1 - r^2 e^{-2qd}) in nm^-2, via y = 2qd.
inline double lifshitz_term(const MaterialModel& m, double xi, double d, double rel_tol) {
  const double c = units::hbar_c;
  const double y0 = 2 * xi * d / c;
  auto f = [&](double y) {
    double q = y / (2 * d);
    double k2 = q * q - xi * xi / (c * c);
    double kpar = std::sqrt(std::max(k2, 0.0));
    double e = std::exp(-y);
    if (m.is_ideal()) return 2 * y * std::log1p(-e);
    if (xi == 0 && kpar == 0) return 0.0;
    auto r = fresnel(m, xi, kpar);
    return y * (std::log1p(-r.r_te * r.r_te * e) + std::log1p(-r.r_tm * r.r_tm * e));
  };
  double err = 0;
  double val = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
      f, y0, y0 + 120.0, 30, rel_tol, &err);
  if (err > 10 * rel_tol * std::abs(val) && err > 1e-300) {
    std::ostringstream os;
    os << "k-integral not converged at xi=" << xi << " eV, z=" << d << " nm: estimate " << val
       << " error bound " << err;
    throw ConvergenceError(os.str());
  }
  return val / (4 * d * d);
}

inline double lifshitz_sum(const MaterialModel& m, const MatsubaraGrid& grid, double d,
                           double rel_tol, int threads) {
  std::vector<double> t(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    t[i] = grid.terms[i].weight * lifshitz_term(m, grid.terms[i].xi, d, rel_tol);
  });
  double s = 0;
  for (double v : t) s += v;
  return units::k_boltzmann * grid.temperature / (2 * units::pi) * s * units::ev_per_nm2;
}

inline MatsubaraGrid lifshitz_grid(const PlatePair& p, const NumericsConfig& num) {
  if (!(p.separation > 0)) throw DomainError("plate separation must be positive");
  // terms are computed in blocks so the threads stay busy; the cutoff decision
  // itself is sequential, which keeps the grid independent of the thread count
  const int block = std::max(1, num.threads) * 4;
  std::map<int, double> memo;
  auto probe = [&](int l, double xi) {
    auto it = memo.find(l);
    if (it == memo.end()) {
      std::vector<double> v(block);
      parallel_for(block, num.threads, [&](std::size_t i) {
        v[i] = lifshitz_term(p.material, matsubara_xi(l + static_cast<int>(i), p.temperature),
                             p.separation, num.k_rel_tol);
      });
      for (int i = 0; i < block; ++i) memo[l + i] = v[i];
      it = memo.find(l);
    }
    (void)xi;
    return it->second;
  };
  return matsubara_grid(p.temperature, num.matsubara_rel_tol, probe, num.l_max);
}

}  // namespace detail

inline double plate_plate_free_energy(const PlatePair& p, const NumericsConfig& num) {
  auto grid = detail::lifshitz_grid(p, num);
  return detail::lifshitz_sum(p.material, grid, p.separation, num.k_rel_tol, num.threads);
}

// -dF/dz by Richardson-extrapolated central differences on a fixed Matsubara grid.
inline double plate_plate_pressure(const PlatePair& p, const NumericsConfig& num,
                                   double rel_step = 0.02) {
  const double z = p.separation;
  double h = rel_step * z;
  PlatePair lo = p;
  lo.separation = z - h;
  auto grid = detail::lifshitz_grid(lo, num);
  auto F = [&](double zz) {
    return detail::lifshitz_sum(p.material, grid, zz, num.k_rel_tol, num.threads);
  };
  double d1 = (F(z + h) - F(z - h)) / (2 * h);
  double d2 = (F(z + h / 2) - F(z - h / 2)) / h;
  return -(4 * d2 - d1) / 3 / units::nm;
}

}  // namespace casimir
