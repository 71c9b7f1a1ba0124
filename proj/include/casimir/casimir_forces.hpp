#pragma once

// Free energy and lateral force between a corrugated sphere and a corrugated
// grating: exact scattering formula (sphere treated by the proximity
// approximation, corrugations exactly) and the fully additive PFA baseline.
//
// Sign convention: F > 0 pushes the sphere toward increasing x, and
// F = -(2 pi / period) d/dphi [2 pi R int_z^inf E(z', phi) dz'].

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "casimir/errors.hpp"
#include "casimir/force_curve.hpp"
#include "casimir/grating_scatter.hpp"
#include "casimir/lifshitz.hpp"
#include "casimir/materials.hpp"
#include "casimir/numerics.hpp"
#include "casimir/parallel.hpp"
#include "casimir/quadrature.hpp"
#include "casimir/quantities.hpp"

namespace casimir {

struct SphereGratingGeometry {
  double radius;      // nm
  double period;      // nm
  double amplitude1;  // grating, nm
  double amplitude2;  // sphere imprint, nm
  double separation;  // between mean planes, nm
  double phase;       // rad
  double temperature; // K
  MaterialModel material;
};

inline void validate(const SphereGratingGeometry& g) {
  if (!(g.radius > 0)) throw DomainError("sphere radius must be positive");
  if (!(g.period > 0)) throw DomainError("period must be positive");
  if (!(g.amplitude1 >= 0 && g.amplitude2 >= 0)) throw DomainError("amplitudes must be nonnegative");
  if (!(g.temperature > 0)) throw DomainError("temperature must be positive");
  if (!(g.separation > g.amplitude1 + g.amplitude2))
    throw DomainError("separation must exceed A1 + A2 (bodies in contact)");
}

inline std::string describe(const SphereGratingGeometry& g) {
  std::ostringstream os;
  os.precision(17);
  os << "radius_nm=" << g.radius << " period_nm=" << g.period << " amplitude1_nm=" << g.amplitude1
     << " amplitude2_nm=" << g.amplitude2 << " temperature_K=" << g.temperature;
  return os.str();
}

// ---------------------------------------------------------------------------
// spectral nodes (xi, kx, ky) shared by all z' and phi

struct SpectralNode {
  double xi, kx, ky;
  double weight;  // xi-sum weight times the in-plane quadrature weight
};

struct SpectralGrid {
  std::vector<SpectralNode> nodes;
  int xi_nodes = 0;
  int exact_terms = 0;
  int in_plane_nodes = 0;
};

namespace detail {

struct XiNode {
  double xi, weight;
};

// Sum'_l f(xi_l) ~ static term + exact terms 1..L + Euler-Maclaurin tail int_{L+1/2}^inf with an f' correction.
inline std::vector<XiNode> xi_nodes(double temperature, const NumericsConfig& num) {
  const double xi1 = matsubara_xi(1, temperature);
  const int L = num.matsubara_exact;
  if (L < 3) throw DomainError("matsubara_exact must be >= 3");
  std::vector<XiNode> out;
  // static term from probes at f, 2f, 4f, exact for a + b xi^2 + c xi^2 ln xi
  const double f = num.static_probe;
  out.push_back({f * xi1, 0.5 * 16.0 / 9.0});
  out.push_back({2 * f * xi1, -0.5 * 8.0 / 9.0});
  out.push_back({4 * f * xi1, 0.5 / 9.0});
  for (int l = 1; l <= L; ++l) {
    double w = 1;
    if (l == L) w += 2.0 / 24;
    if (l == L - 1) w -= 3.0 / 24;
    if (l == L - 2) w += 1.0 / 24;
    out.push_back({l * xi1, w});
  }
  const double a = (L + 0.5) * xi1;
  const double s = units::hbar_c / (2 * num.reference_gap);
  auto tail = gauss_semi_infinite(num.matsubara_tail_nodes, a, s);
  for (std::size_t i = 0; i < tail.size(); ++i) out.push_back({tail.x[i], tail.w[i] / xi1});
  return out;
}

}  // namespace detail

// In-plane wavevectors on the half strip kx in [0, pi/period], ky >= 0.
// The square [0, pi/period]^2 is split into two triangles at the origin and
// integrated in polar form with radial variable kappa_0 = sqrt(k^2 + xi^2/c^2),
// which is smooth through the conical point k = 0.  The rest of the strip,
// ky >= pi/period, uses a product Gauss rule.
inline SpectralGrid spectral_grid(double period, double temperature, const NumericsConfig& num) {
  if (num.corner_angle_nodes < 1 || num.corner_radial_nodes < 1 || num.kx_nodes < 1 || num.ky_nodes < 1)
    throw DomainError("in-plane node counts must be positive");
  SpectralGrid g;
  auto xs = detail::xi_nodes(temperature, num);
  const double h = units::pi / period;
  auto th = gauss_legendre(num.corner_angle_nodes, 0.0, units::pi / 4);
  const auto& gr = gauss_legendre(num.corner_radial_nodes);
  auto kx = gauss_legendre(num.kx_nodes, 0.0, h);
  auto ky = gauss_semi_infinite(num.ky_nodes, h, 1.0 / (2 * num.reference_gap));
  for (const auto& x : xs) {
    const double a = x.xi / units::hbar_c;
    for (int tri = 0; tri < 2; ++tri)
      for (std::size_t i = 0; i < th.size(); ++i) {
        // tri 0: angle from the kx axis, tri 1: angle from the ky axis
        const double c = std::cos(th.x[i]), sn = std::sin(th.x[i]);
        const double rmax = h / c;
        const double kmax = std::sqrt(rmax * rmax + a * a);
        for (std::size_t j = 0; j < gr.size(); ++j) {
          // kappa_0 = a + (kmax - a) t^2 clusters nodes at the cone tip, where
          // the static terms behave like kappa ln kappa
          const double t = 0.5 * (1 + gr.x[j]);
          const double kap = a + (kmax - a) * t * t;
          const double rho = std::sqrt(std::max(0.0, (kap - a) * (kap + a)));
          const double w = (kmax - a) * t * gr.w[j] * kap * th.w[i];
          double u = std::min(rho * c, h), v = rho * sn;
          if (tri == 1) std::swap(u, v);
          g.nodes.push_back({x.xi, u, v, x.weight * w});
        }
      }
    for (std::size_t i = 0; i < kx.size(); ++i)
      for (std::size_t j = 0; j < ky.size(); ++j)
        g.nodes.push_back({x.xi, kx.x[i], ky.x[j], x.weight * kx.w[i] * ky.w[j]});
  }
  g.xi_nodes = static_cast<int>(xs.size());
  g.exact_terms = num.matsubara_exact + 1;
  g.in_plane_nodes = static_cast<int>(g.nodes.size() / xs.size());
  return g;
}

// F(phi) = sum_k b_k sin(k phi)
struct PhaseSeries {
  std::vector<double> b;  // b_1, b_2, ...

  // from F at phi_j = j pi / M, j = 1..M-1 (discrete sine transform)
  static PhaseSeries from_samples(const std::vector<double>& f) {
    const int M = static_cast<int>(f.size()) + 1;
    PhaseSeries s;
    s.b.assign(M - 1, 0.0);
    for (int k = 1; k < M; ++k)
      for (int j = 1; j < M; ++j) s.b[k - 1] += 2.0 / M * f[j - 1] * std::sin(units::pi * k * j / M);
    return s;
  }

  double operator()(double phi) const {
    double v = 0;
    for (std::size_t k = 0; k < b.size(); ++k) v += b[k] * std::sin((k + 1) * phi);
    return v;
  }

  std::pair<double, double> max_abs() const {
    const int n = 4096;
    int best = 0;
    double fb = 0;
    for (int i = 0; i < n; ++i) {
      double v = std::abs((*this)(2 * units::pi * i / n));
      if (v > fb) fb = v, best = i;
    }
    const double h = 2 * units::pi / n, p0 = 2 * units::pi * best / n;
    auto r = golden_section_max([&](double p) { return std::abs((*this)(p)); }, p0 - h, p0 + h, 1e-12);
    double phi = std::fmod(r.first + 2 * units::pi, 2 * units::pi);
    return {phi, (*this)(phi)};
  }
};

// ---------------------------------------------------------------------------
// reflection-matrix store, keyed by grating and node set, optionally on disk

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

// Referenced to the top of the transformed region, `reference` nm above the mean surface.
struct ReflectionSet {
  std::vector<CMatrix> data;
  double reference = 0;
  long max_nfev = 0;
};

inline std::string cache_key(double amplitude, double period, const MaterialModel& m,
                             const SpectralGrid& grid, const NumericsConfig& num) {
  std::ostringstream os;
  os.precision(17);
  os << "refl-v3|" << m.describe() << "|A=" << amplitude << "|L=" << period << "|N=" << num.orders
     << "|pad=" << num.order_padding << "|rtol=" << num.ode_rtol << "|atol=" << num.ode_atol
     << "|top=" << num.transform_top << "|bot=" << num.transform_bottom;
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& n : grid.nodes) {
    h = fnv1a(&n.xi, sizeof(double), h);
    h = fnv1a(&n.kx, sizeof(double), h);
    h = fnv1a(&n.ky, sizeof(double), h);
  }
  os << "|nodes=" << grid.nodes.size() << ":" << h;
  std::string s = os.str();
  std::ostringstream name;
  name << std::hex << fnv1a(s.data(), s.size());
  return name.str();
}

inline bool load_set(const std::string& path, std::size_t count, int dim, ReflectionSet& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  std::uint64_t n = 0, d = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  f.read(reinterpret_cast<char*>(&d), sizeof d);
  if (!f || n != count || d != static_cast<std::uint64_t>(dim)) return false;
  out.data.assign(count, CMatrix(dim, dim));
  for (auto& m : out.data) f.read(reinterpret_cast<char*>(m.data()), sizeof(cplx) * dim * dim);
  return static_cast<bool>(f);
}

inline void save_set(const std::string& path, const ReflectionSet& s, int dim) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) return;
    std::uint64_t n = s.data.size(), d = dim;
    f.write(reinterpret_cast<const char*>(&n), sizeof n);
    f.write(reinterpret_cast<const char*>(&d), sizeof d);
    for (const auto& m : s.data) f.write(reinterpret_cast<const char*>(m.data()), sizeof(cplx) * dim * dim);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
}

// Every order decays at least like exp(-kappa_min z) with kappa_min^2 = ky^2 + xi^2/c^2,
// so at crest gaps >= reference_gap / 2 such nodes add less than exp(-20).
inline bool negligible_node(const SpectralNode& n, const NumericsConfig& num) {
  const double k0 = n.xi / units::hbar_c;
  return 2 * num.reference_gap * std::sqrt(n.ky * n.ky + k0 * k0) > 40;
}

// Reflection matrices of A cos(Kx) at every node.
inline std::shared_ptr<const ReflectionSet> reflection_set(double amplitude, double period,
                                                           const MaterialModel& m,
                                                           const SpectralGrid& grid,
                                                           const NumericsConfig& num) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const ReflectionSet>> memory;
  const std::string key = cache_key(amplitude, period, m, grid, num);
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = memory.find(key); it != memory.end()) return it->second;
  }
  const int dim = 2 * (2 * num.orders + 1);
  auto set = std::make_shared<ReflectionSet>();
  set->reference = num.transform_top * amplitude;
  std::string path;
  if (const char* dir = std::getenv("CASIMIR_CACHE_DIR"); dir && *dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    path = std::string(dir) + "/refl_" + key + ".bin";
  }
  if (path.empty() || !load_set(path, grid.nodes.size(), dim, *set)) {
    GratingProfile g{period, amplitude, 0.0, m};
    set->data.assign(grid.nodes.size(), CMatrix());
    std::vector<long> nfev(grid.nodes.size(), 0);
    parallel_for(grid.nodes.size(), num.threads, [&](std::size_t i) {
      const auto& n = grid.nodes[i];
      if (negligible_node(n, num)) {
        set->data[i] = CMatrix::Zero(dim, dim);
        return;
      }
      ReflectionDiagnostics d;
      set->data[i] = reflection_matrix_even(g, n.xi, n.kx, n.ky, num, &d, false).data;
      nfev[i] = d.ode.nfev;
    });
    set->max_nfev = nfev.empty() ? 0 : *std::max_element(nfev.begin(), nfev.end());
    if (!path.empty()) save_set(path, *set, dim);
  }
  std::lock_guard<std::mutex> lock(mu);
  return memory.emplace(key, set).first->second;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// exact engine

class ExactEngine {
 public:
  struct Density {
    double energy = 0;  // eV/nm^2
    double dphi = 0;    // eV/nm^2 per rad
  };

  ExactEngine(const SphereGratingGeometry& geom, const NumericsConfig& num)
      : geom_(geom), num_(num) {
    if (!(geom.period > 0 && geom.temperature > 0 && geom.amplitude1 >= 0 && geom.amplitude2 >= 0))
      throw DomainError("invalid grating geometry");
    if (geom.material.is_ideal())
      throw DomainError("the exact grating engine needs a finite permittivity model");
    grid_ = spectral_grid(geom.period, geom.temperature, num);
    r1_ = detail::reflection_set(geom.amplitude1, geom.period, geom.material, grid_, num);
    r2_ = detail::reflection_set(geom.amplitude2, geom.period, geom.material, grid_, num);
    const int N = num.orders, m = 2 * N + 1;
    orders_.resize(2 * m);
    for (int i = 0; i < 2 * m; ++i) orders_(i) = i % m - N;
    report_.orders = N;
    report_.order_padding = num.order_padding;
    report_.matsubara_terms = grid_.exact_terms;
    report_.xi_nodes = grid_.xi_nodes;
    report_.in_plane_nodes = grid_.in_plane_nodes;
    report_.max_ode_evaluations = std::max(r1_->max_nfev, r2_->max_nfev);
  }

  const SpectralGrid& grid() const { return grid_; }
  const ConvergenceReport& report() const { return report_; }
  const SphereGratingGeometry& geometry() const { return geom_; }
  const NumericsConfig& numerics() const { return num_; }

  // Sum over nodes of w * (ln det, d/dphi ln det) for every (z', phi); no prefactor.
  std::vector<std::vector<Density>> node_sums(const std::vector<double>& zp,
                                              const std::vector<double>& phis, bool deriv) const {
    const double gap0 = geom_.amplitude1 + geom_.amplitude2;
    for (double z : zp)
      if (!(z - gap0 >= 0.5 * num_.reference_gap))
        throw DomainError("crest gap below half of reference_gap; lower reference_gap");
    const std::size_t nn = grid_.nodes.size(), block = 32;
    const std::size_t nblocks = (nn + block - 1) / block;
    const std::size_t nz = zp.size(), np = phis.size();
    std::vector<std::vector<Density>> partial(nblocks, std::vector<Density>(nz * np));
    std::vector<double> imag(nblocks, 0.0);
    const int N = num_.orders, m = 2 * N + 1, d = 2 * m;
    const double K = 2 * units::pi / geom_.period;
    parallel_for(nblocks, num_.threads, [&](std::size_t b) {
      Eigen::VectorXd kap(d), dz(d);
      CMatrix A(d, d), B(d, d), B0(d, d), Kmat(d, d), X(d, d);
      Eigen::VectorXcd u(d);
      Eigen::PartialPivLU<CMatrix> lu(d);
      auto& acc = partial[b];
      for (std::size_t i = b * block; i < std::min(nn, (b + 1) * block); ++i) {
        const auto& node = grid_.nodes[i];
        for (int j = 0; j < d; ++j) {
          double a = node.kx + orders_(j) * K;
          kap(j) = std::sqrt(a * a + node.ky * node.ky + node.xi * node.xi / (units::hbar_c * units::hbar_c));
        }
        // lower body: A1 cos(Kx); upper body seen from below: phase shifted by pi, H_y flipped
        const CMatrix& r1 = r1_->data[i];
        const CMatrix& r2 = r2_->data[i];
        for (int c = 0; c < d; ++c)
          for (int r = 0; r < d; ++r) {
            double s = ((orders_(r) - orders_(c)) % 2 == 0) ? 1.0 : -1.0;
            if ((r < m) != (c < m)) s = -s;
            B0(r, c) = s * r2(r, c);
          }
        for (std::size_t iz = 0; iz < nz; ++iz) {
          const double gap = zp[iz] - r1_->reference - r2_->reference;
          dz = (-kap * gap).array().exp();
          A = r1 * dz.asDiagonal();
          for (std::size_t ip = 0; ip < np; ++ip) {
            for (int j = 0; j < d; ++j) u(j) = std::polar(1.0, orders_(j) * phis[ip]);
            B = u.asDiagonal() * B0 * (u.conjugate().array() * dz.array()).matrix().asDiagonal();
            Kmat.setIdentity();
            Kmat.noalias() -= A * B;
            lu.compute(Kmat);
            cplx ld = 0;
            const CMatrix& LU = lu.matrixLU();
            for (int j = 0; j < d; ++j) ld += std::log(LU(j, j));
            // row permutation contributes a sign only; det is real and positive here
            double ldr = ld.real();
            double im = std::remainder(ld.imag() + (permutation_odd(lu) ? units::pi : 0.0), 2 * units::pi);
            imag[b] = std::max(imag[b], std::abs(im));
            Density& out = acc[iz * np + ip];
            out.energy += node.weight * ldr;
            if (deriv) {
              X = lu.solve(A);
              cplx tr = 0;
              for (int c = 0; c < d; ++c)
                for (int r = 0; r < d; ++r) {
                  double dn = orders_(c) - orders_(r);
                  if (dn != 0) tr += X(r, c) * B(c, r) * cplx(0, dn);
                }
              out.dphi += node.weight * (-tr.real());
            }
          }
        }
      }
    });
    std::vector<std::vector<Density>> out(nz, std::vector<Density>(np));
    for (std::size_t b = 0; b < nblocks; ++b) {
      for (std::size_t iz = 0; iz < nz; ++iz)
        for (std::size_t ip = 0; ip < np; ++ip) {
          out[iz][ip].energy += partial[b][iz * np + ip].energy;
          out[iz][ip].dphi += partial[b][iz * np + ip].dphi;
        }
      report_.max_logdet_imag = std::max(report_.max_logdet_imag, imag[b]);
    }
    return out;
  }

  // free energy per area between the two corrugated plates at mean separation z', J/m^2
  double energy_density(double zprime, double phi) const {
    return prefactor() * node_sums({zprime}, {phi}, false)[0][0].energy * units::ev_per_nm2;
  }
  // d/dphi of energy_density, J/m^2 per rad
  double energy_density_dphi(double zprime, double phi) const {
    return prefactor() * node_sums({zprime}, {phi}, true)[0][0].dphi * units::ev_per_nm2;
  }

  // lateral force in N at sphere-grating separation z for each phase
  std::vector<double> lateral_force(double z, const std::vector<double>& phis) const {
    auto dphi = integrate_z(z, phis, [&](const std::vector<double>& zp) {
      auto s = node_sums(zp, phis, true);
      std::vector<std::vector<double>> v(zp.size(), std::vector<double>(phis.size()));
      for (std::size_t i = 0; i < zp.size(); ++i)
        for (std::size_t j = 0; j < phis.size(); ++j) v[i][j] = s[i][j].dphi;
      return v;
    });
    std::vector<double> f(phis.size());
    const double c = -(2 * units::pi / geom_.period) * 2 * units::pi * geom_.radius * prefactor();
    for (std::size_t j = 0; j < phis.size(); ++j) f[j] = c * dphi[j] * units::ev_per_nm;
    return f;
  }
  double lateral_force(double z, double phi) const { return lateral_force(z, std::vector<double>{phi})[0]; }

  // -(2 pi/period) times a central difference in phi of 2 pi R int_z^inf E dz'
  double lateral_force_fd(double z, double phi, double h) const {
    std::vector<double> phis{phi - h, phi + h};
    auto e = integrate_z(z, phis, [&](const std::vector<double>& zp) {
      auto s = node_sums(zp, phis, false);
      // integrate the difference so the slowly decaying phi-independent part cancels
      std::vector<std::vector<double>> v(zp.size(), std::vector<double>(2));
      for (std::size_t i = 0; i < zp.size(); ++i) {
        v[i][0] = s[i][1].energy - s[i][0].energy;
        v[i][1] = 0;
      }
      return v;
    });
    const double c = -(2 * units::pi / geom_.period) * 2 * units::pi * geom_.radius * prefactor();
    return c * e[0] / (2 * h) * units::ev_per_nm;
  }

  // The force is odd and 2 pi periodic in phi, so samples at phi_j = j pi / M,
  // j = 1..M-1, fix its sine coefficients b_1..b_{M-1} (exact if band limited).
  PhaseSeries lateral_force_series(double z, int M = 16) const {
    if (M < 4) throw DomainError("phase series needs M >= 4");
    std::vector<double> phis;
    for (int j = 1; j < M; ++j) phis.push_back(units::pi * j / M);
    auto f = lateral_force(z, phis);
    PhaseSeries s = PhaseSeries::from_samples(f);
    double b1 = std::abs(s.b[0]), tail = 0;
    for (std::size_t k = s.b.size() / 2; k < s.b.size(); ++k) tail = std::max(tail, std::abs(s.b[k]));
    report_.phase_series_tail = b1 > 0 ? tail / b1 : 0;
    return s;
  }

  // (phi*, F*) maximizing |F| over one period, from the phase series
  std::pair<double, double> max_lateral_force(double z, int M = 16) const {
    return lateral_force_series(z, M).max_abs();
  }

 private:
  double prefactor() const { return units::k_boltzmann * geom_.temperature / (units::pi * units::pi); }

  static bool permutation_odd(const Eigen::PartialPivLU<CMatrix>& lu) {
    return lu.permutationP().determinant() < 0;
  }

  // int_z^inf dz' of per-phase integrands over panels in t, z' = z + L t/(1-t)
  template <class Fn>
  std::vector<double> integrate_z(double z, const std::vector<double>& phis, Fn&& fn) const {
    const double gap0 = geom_.amplitude1 + geom_.amplitude2;
    if (!(z > gap0)) throw DomainError("separation must exceed A1 + A2");
    const double L = z - gap0;
    const auto& g = gauss_legendre(num_.z_nodes);
    std::vector<double> total(phis.size(), 0.0);
    double t0 = 0;
    int panels = 0;
    for (; panels < 48; ++panels) {
      double t1 = panels == 0 ? 0.5 : (1 + t0) / 2;
      std::vector<double> zp, w;
      for (std::size_t k = 0; k < g.size(); ++k) {
        double t = t0 + (t1 - t0) * (1 + g.x[k]) / 2;
        zp.push_back(z + L * t / (1 - t));
        w.push_back((t1 - t0) / 2 * g.w[k] * L / ((1 - t) * (1 - t)));
      }
      auto v = fn(zp);
      double pmax = 0, tmax = 0;
      for (std::size_t j = 0; j < phis.size(); ++j) {
        double p = 0;
        for (std::size_t k = 0; k < zp.size(); ++k) p += w[k] * v[k][j];
        total[j] += p;
        pmax = std::max(pmax, std::abs(p));
        tmax = std::max(tmax, std::abs(total[j]));
      }
      report_.z_nodes += static_cast<int>(zp.size());
      t0 = t1;
      if (panels >= 1 && pmax <= num_.z_rel_tol * tmax) {
        report_.z_panels = std::max(report_.z_panels, panels + 1);
        report_.z_tail_estimate = tmax > 0 ? pmax / tmax : 0;
        return total;
      }
      if (tmax == 0 && panels >= 1) {
        report_.z_panels = std::max(report_.z_panels, panels + 1);
        return total;
      }
    }
    throw ConvergenceError("z' integral not converged after 48 panels at z=" + format_number(z));
  }

  SphereGratingGeometry geom_;
  NumericsConfig num_;
  SpectralGrid grid_;
  std::shared_ptr<const detail::ReflectionSet> r1_, r2_;
  Eigen::VectorXi orders_;
  mutable ConvergenceReport report_;
};

inline double grating_free_energy_density(const SphereGratingGeometry& g, const NumericsConfig& num) {
  ExactEngine e(g, num);
  return e.energy_density(g.separation, g.phase);
}

inline double lateral_force_exact(const SphereGratingGeometry& g, const NumericsConfig& num) {
  validate(g);
  ExactEngine e(g, num);
  return e.lateral_force(g.separation, g.phase);
}

inline std::pair<double, double> max_lateral_force(const SphereGratingGeometry& g,
                                                   const NumericsConfig& num) {
  validate(g);
  ExactEngine e(g, num);
  return e.max_lateral_force(g.separation);
}

// ---------------------------------------------------------------------------
// proximity-force baseline

namespace detail {

// Chebyshev interpolant of w^3 E_pp(w) in ln w on [w_lo, w_hi].
class PlateEnergyTable {
 public:
  PlateEnergyTable(const MaterialModel& m, double temperature, double w_lo, double w_hi,
                   const NumericsConfig& num, int n = 40)
      : lo_(std::log(w_lo)), hi_(std::log(w_hi)) {
    if (!(w_lo > 0 && w_hi > w_lo)) throw DomainError("plate energy table needs 0 < w_lo < w_hi");
    x_.resize(n);
    f_.resize(n);
    for (int k = 0; k < n; ++k) x_[k] = std::cos(units::pi * k / (n - 1));
    for (int k = 0; k < n; ++k) {
      double w = std::exp(0.5 * (lo_ + hi_) + 0.5 * (hi_ - lo_) * x_[k]);
      f_[k] = w * w * w * plate_plate_free_energy({m, w, temperature}, num);
    }
  }

  double operator()(double w) const {
    double s = (2 * std::log(w) - lo_ - hi_) / (hi_ - lo_);
    if (s < -1 - 1e-12 || s > 1 + 1e-12) throw DomainError("plate energy table queried outside its range");
    double num = 0, den = 0;
    const int n = static_cast<int>(x_.size());
    for (int k = 0; k < n; ++k) {
      double dx = s - x_[k];
      if (dx == 0) return f_[k] / (w * w * w);
      double c = ((k % 2) ? -1.0 : 1.0) / dx;
      if (k == 0 || k == n - 1) c *= 0.5;
      num += c * f_[k];
      den += c;
    }
    return num / den / (w * w * w);
  }

 private:
  double lo_, hi_;
  std::vector<double> x_, f_;
};

}  // namespace detail

class PfaEngine {
 public:
  // valid for mean separations in [z_lo, z_hi]
  PfaEngine(const SphereGratingGeometry& geom, const NumericsConfig& num, double z_lo, double z_hi,
            int u_nodes = 512)
      : geom_(geom),
        un_(u_nodes),
        table_(geom.material, geom.temperature, z_lo - geom.amplitude1 - geom.amplitude2,
               z_hi + geom.amplitude1 + geom.amplitude2, num) {
    if (!(z_lo > geom.amplitude1 + geom.amplitude2)) throw DomainError("separation must exceed A1 + A2");
    if (u_nodes % 2) throw DomainError("u_nodes must be even");
  }

  // flat-plate energy per area at gap w, J/m^2
  double plate_energy(double w) const { return table_(w); }

  // E_avg(z', phi) = <E_pp(z' + A2 sin(u + phi) - A1 sin u)>_u, J/m^2
  double energy_density(double zprime, double phi) const {
    double s = 0;
    for (int j = 0; j < un_; ++j) {
      double u = 2 * units::pi * j / un_;
      s += table_(zprime + geom_.amplitude2 * std::sin(u + phi) - geom_.amplitude1 * std::sin(u));
    }
    return s / un_;
  }

  // -(4 pi^2 R/period) int_z^inf dz' dE_avg/dphi; the z' integral is done in
  // closed form because d/dphi only shifts the lower limit of int E_pp.
  double lateral_force(double z, double phi) const {
    double s = 0;
    for (int j = 0; j < un_; ++j) {
      double u = 2 * units::pi * j / un_;
      double w = z + geom_.amplitude2 * std::sin(u + phi) - geom_.amplitude1 * std::sin(u);
      s += table_(w) * std::cos(u + phi);
    }
    s *= 2 * units::pi / un_;
    return 2 * units::pi * geom_.radius * units::nm * geom_.amplitude2 / geom_.period * s;
  }

  std::pair<double, double> max_lateral_force(double z, int coarse = 64) const {
    std::vector<double> f(coarse);
    int best = 0;
    for (int i = 0; i < coarse; ++i) {
      f[i] = lateral_force(z, 2 * units::pi * i / coarse);
      if (std::abs(f[i]) > std::abs(f[best])) best = i;
    }
    const double h = 2 * units::pi / coarse;
    auto r = golden_section_max([&](double p) { return std::abs(lateral_force(z, p)); },
                                2 * units::pi * best / coarse - h, 2 * units::pi * best / coarse + h, 1e-6);
    double phi = std::fmod(r.first + 2 * units::pi, 2 * units::pi);
    return {phi, lateral_force(z, phi)};
  }

 private:
  SphereGratingGeometry geom_;
  int un_;
  detail::PlateEnergyTable table_;
};

inline double pfa_lateral_force(const SphereGratingGeometry& g, const NumericsConfig& num) {
  validate(g);
  if (g.amplitude1 == 0 || g.amplitude2 == 0) return 0.0;
  PfaEngine e(g, num, g.separation, g.separation * 1.0001);
  return e.lateral_force(g.separation, g.phase);
}

// 2 pi R E_pp(z) for a smooth sphere above a flat plate, N (R in nm)
inline double pfa_sphere_normal_force(double z, const MaterialModel& m, double temperature,
                                      double radius, const NumericsConfig& num) {
  if (!(z > 0)) throw DomainError("separation must be positive");
  return 2 * units::pi * radius * units::nm * plate_plate_free_energy({m, z, temperature}, num);
}

}  // namespace casimir
