#pragma once

#include <sstream>
#include <string>

namespace casimir {

struct NumericsConfig {
  // diffraction orders kept in reflection matrices, n in [-orders, orders]
  int orders = 9;
  // extra orders carried inside the ODE and cropped afterwards
  int order_padding = 6;
  double ode_rtol = 1e-9;
  double ode_atol = 1e-12;
  // extent of the flattening transformation in units of the amplitude
  double transform_top = 1.2;
  double transform_bottom = 2.0;

  // flat-plate Lifshitz sums
  double matsubara_rel_tol = 1e-7;
  double k_rel_tol = 1e-8;
  int l_max = 200000;

  // grating sums: exact Matsubara terms l <= matsubara_exact, quadrature tail beyond
  int matsubara_exact = 14;
  int matsubara_tail_nodes = 12;
  // l = 0 term extrapolated from xi = f, 2f and 4f times xi_1
  double static_probe = 0.05;
  // in-plane wavevector: polar rule on the square next to k = 0 (per triangle),
  // product rule on the remaining strip
  int corner_angle_nodes = 4;
  int corner_radial_nodes = 6;
  int kx_nodes = 5;
  int ky_nodes = 16;
  // smallest gap between corrugation crests the node sets are tuned for
  double reference_gap = 20.0;

  // z' integral: Gauss-Legendre panels in t of z' = z + L t/(1-t)
  int z_nodes = 12;
  double z_rel_tol = 1e-6;

  int threads = 1;

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "orders=" << orders << " order_padding=" << order_padding << " ode_rtol=" << ode_rtol
       << " ode_atol=" << ode_atol << " transform_top=" << transform_top
       << " transform_bottom=" << transform_bottom << " matsubara_rel_tol=" << matsubara_rel_tol
       << " k_rel_tol=" << k_rel_tol << " l_max=" << l_max << " matsubara_exact=" << matsubara_exact
       << " matsubara_tail_nodes=" << matsubara_tail_nodes << " static_probe=" << static_probe
       << " corner_angle_nodes=" << corner_angle_nodes
       << " corner_radial_nodes=" << corner_radial_nodes << " kx_nodes=" << kx_nodes
       << " ky_nodes=" << ky_nodes
       << " reference_gap=" << reference_gap << " z_nodes=" << z_nodes
       << " z_rel_tol=" << z_rel_tol;
    return os.str();
  }
};

}  // namespace casimir
