#pragma once

// Reflection matrices of a sinusoidal metal grating at imaginary frequency.
//
// The corrugated interface z = h(x) is flattened by the coordinate change
// z = u + h(x) g(u), with g piecewise linear: g = 1 - u/Ut above the interface
// (u in [0, Ut]) and g = 1 + u/Ub below it (u in [-Ub, 0]). In these coordinates
// vacuum and metal occupy u > 0 and u < 0, the metric is smooth in x, and
// Maxwell's equations for the tangential Fourier amplitudes (Ex, Ey, Hx, Hy)
// become a linear ODE in u. Outside [-Ub, Ut] the coordinates are Cartesian and
// the fields are Rayleigh expansions.
//
// Fields are scaled so that curl E = -k0 H and curl H = k0 eps E with k0 = xi/(hbar c).

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "casimir/dormand_prince.hpp"
#include "casimir/errors.hpp"
#include "casimir/materials.hpp"
#include "casimir/numerics.hpp"
#include "casimir/quantities.hpp"

namespace casimir {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

struct GratingProfile {
  double period;     // nm
  double amplitude;  // nm
  double phase;      // rad, h(x) = A sin(2 pi x / period + phase)
  MaterialModel material;
};

inline void validate(const GratingProfile& g) {
  if (!(g.period > 0)) throw DomainError("grating period must be positive");
  if (!(g.amplitude >= 0)) throw DomainError("grating amplitude must be nonnegative");
  if (!(g.phase >= 0 && g.phase < 2 * units::pi)) throw DomainError("grating phase must lie in [0, 2pi)");
}

// Basis: index p*(2N+1) + (n+N) with p = 0 for E_y and p = 1 for H_y amplitudes.
// Incident waves grow toward +z, reflected waves decay. `reference` is the
// height of the reference plane above the mean surface: the crest z = A unless
// asked otherwise.
struct ReflectionMatrix {
  int order = 0;
  double xi = 0, kx = 0, ky = 0;
  double reference = 0;
  CMatrix data;

  int modes() const { return 2 * order + 1; }
  int dim() const { return 2 * modes(); }
  int diffraction_order(int i) const { return i % modes() - order; }
};

inline ReflectionMatrix shift_phase(const ReflectionMatrix& r, double delta) {
  ReflectionMatrix out = r;
  const int d = r.dim();
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      int dn = r.diffraction_order(i) - r.diffraction_order(j);
      if (dn != 0) out.data(i, j) *= std::polar(1.0, dn * delta);
    }
  return out;
}

// Same grating seen from the other side (z -> -z flips H_y).
inline ReflectionMatrix mirror(const ReflectionMatrix& r) {
  ReflectionMatrix out = r;
  const int m = r.modes();
  out.data.block(0, m, m, m) *= -1.0;
  out.data.block(m, 0, m, m) *= -1.0;
  return out;
}

inline void write_csv(std::ostream& os, const ReflectionMatrix& r) {
  auto label = [&](int i) {
    return std::to_string(r.diffraction_order(i)) + (i < r.modes() ? ":Ey" : ":Hy");
  };
  os << std::setprecision(17);
  os << "# xi_eV=" << r.xi << " kx_per_nm=" << r.kx << " ky_per_nm=" << r.ky << " order=" << r.order << "\n";
  os << "row\\col";
  for (int j = 0; j < r.dim(); ++j) os << "," << label(j);
  os << "\n";
  for (int i = 0; i < r.dim(); ++i) {
    os << label(i);
    for (int j = 0; j < r.dim(); ++j) {
      cplx v = r.data(i, j);
      os << "," << v.real() << (v.imag() < 0 ? "" : "+") << v.imag() << "i";
    }
    os << "\n";
  }
}

class OdeSystem {
 public:
  OdeSystem(const GratingProfile& g, double xi, double kx, double ky, int orders,
            const NumericsConfig& num)
      : xi_(xi), kx_(kx), ky_(ky), n_(orders), m_(2 * orders + 1), amp_(g.amplitude) {
    if (!(xi > 0)) throw DomainError("reflection matrices need xi > 0");
    if (orders < 0) throw DomainError("truncation order must be nonnegative");
    const double c = units::hbar_c;
    const double K = 2 * units::pi / g.period;
    k0_ = xi / c;
    metal_.k0eps = eps_xi2(g.material, xi) / (c * xi);
    metal_.k02eps = eps_xi2(g.material, xi) / (c * c);
    vac_.k0eps = k0_;
    vac_.k02eps = k0_ * k0_;
    alpha_.resize(m_);
    for (int i = 0; i < m_; ++i) alpha_(i) = kx + (i - n_) * K;
    kn_ = (alpha_.array().square() + ky * ky).sqrt();
    c_.resize(m_);
    s_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      c_(i) = kn_(i) > 0 ? alpha_(i) / kn_(i) : 1.0;
      s_(i) = kn_(i) > 0 ? ky / kn_(i) : 0.0;
    }
    tol_.rtol = num.ode_rtol;
    tol_.atol = num.ode_atol;
    // columns are re-orthonormalized, so errors are judged against the column
    tol_.column_scale = true;
    vac_.length = num.transform_top * amp_;
    metal_.length = num.transform_bottom * amp_;
    if (amp_ > 0) {
      if (!(num.transform_top > 1 && num.transform_bottom > 1))
        throw DomainError("transformation extent must exceed the amplitude");
      setup_layer(vac_, -1.0 / vac_.length, K);
      setup_layer(metal_, 1.0 / metal_.length, K);
    }
  }

  int orders() const { return n_; }
  int modes() const { return m_; }
  int dim() const { return 4 * m_; }
  double bottom() const { return -metal_.length; }
  double top() const { return vac_.length; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double k0() const { return k0_; }

  Eigen::VectorXd kappa(bool metal) const {
    const Layer& L = metal ? metal_ : vac_;
    return (alpha_.array().square() + ky_ * ky_ + L.k02eps).sqrt();
  }

  // Mode vectors, columns [E_y-type | H_y-type], dependence e^{sign kappa z}, in
  // the rotated components (p, t) used by rhs().
  CMatrix modes(bool metal, int sign) const {
    const Layer& L = metal ? metal_ : vac_;
    CMatrix v = CMatrix::Zero(4 * m_, 2 * m_);
    Eigen::VectorXd kap = kappa(metal);
    for (int n = 0; n < m_; ++n) {
      const double g = L.k02eps + ky_ * ky_;
      const double lam = sign * kap(n);
      const double a = alpha_(n), k = kn_(n), c = c_(n), s = s_(n);
      // (kx-type, 1) rotated; written out so that no cancellation occurs
      const double along = k > 0 ? ky_ * (a * a + g) / (g * k) : 0;
      const double across = k > 0 ? a * L.k02eps / (g * k) : 1;
      v(n, n) = along;
      v(m_ + n, n) = across;
      v(2 * m_ + n, n) = c * L.k0eps * lam / g;
      v(3 * m_ + n, n) = -s * L.k0eps * lam / g;
      v(n, m_ + n) = -c * k0_ * lam / g;
      v(m_ + n, m_ + n) = s * k0_ * lam / g;
      v(2 * m_ + n, m_ + n) = along;
      v(3 * m_ + n, m_ + n) = across;
    }
    return v;
  }

  // dY/du for Y with 4M rows (Ep, Et, Hp, Ht blocks). Per order, p is the
  // component along (alpha_n, ky) and t the one across it.
  void rhs(double u, const CMatrix& y, CMatrix& dy) const {
    const bool metal = u < 0;
    const Layer& L = metal ? metal_ : vac_;
    const Eigen::Index M = m_, C = y.cols();
    dy.resize(4 * M, C);
    const double k0 = k0_, ke = L.k0eps;
    if (amp_ == 0) {
      for (Eigen::Index j = 0; j < C; ++j)
        for (Eigen::Index n = 0; n < M; ++n) {
          const double k2 = kn_(n) * kn_(n);
          dy(n, j) = -(k2 / ke + k0) * y(3 * M + n, j);
          dy(M + n, j) = k0 * y(2 * M + n, j);
          dy(2 * M + n, j) = (k2 / k0 + ke) * y(M + n, j);
          dy(3 * M + n, j) = -ke * y(n, j);
        }
      return;
    }
    const double g = metal ? 1 + u / L.length : 1 - u / L.length;
    const double gam = g * L.half_ak;
    // Czz = T1 + g^2 T2 = V^-T (1 + g^2 mu) V^-1 with V from the generalized eigenproblem
    if (u != last_u_ || &L != last_layer_) {
      scaled_ = L.v * (1.0 / (1.0 + (g * g) * L.mu.array())).matrix().asDiagonal();
      czzi_.noalias() = scaled_ * L.v.transpose();
      last_u_ = u;
      last_layer_ = &L;
    }

    // Cartesian components for the order coupling
    cart_.resize(4 * M, C);
    for (Eigen::Index j = 0; j < C; ++j)
      for (Eigen::Index n = 0; n < M; ++n) {
        const double c = c_(n), s = s_(n);
        const cplx ep = y(n, j), et = y(M + n, j), hp = y(2 * M + n, j), ht = y(3 * M + n, j);
        cart_(n, j) = c * ep - s * et;
        cart_(M + n, j) = s * ep + c * et;
        cart_(2 * M + n, j) = c * hp - s * ht;
        cart_(3 * M + n, j) = s * hp + c * ht;
      }

    // sources of Ez and Hz before applying Czz^-1
    src_.resize(M, 2 * C);
    const double ike = 1 / ke, mik0 = -1 / k0;
    for (Eigen::Index j = 0; j < C; ++j) {
      const cplx* et = &y(M, j);
      const cplx* ht = &y(3 * M, j);
      const cplx* ex = &cart_(0, j);
      const cplx* hx = ex + 2 * M;
      cplx* se = &src_(0, j);
      cplx* sh = &src_(0, C + j);
      for (Eigen::Index n = 0; n < M; ++n) {
        cplx axe = 0, axh = 0;
        if (n + 1 < M) axe += ex[n + 1], axh += hx[n + 1];
        if (n > 0) axe -= ex[n - 1], axh -= hx[n - 1];
        se[n] = times_i(kn_(n) * ht[n] * ike - gam * axe);
        sh[n] = times_i(kn_(n) * et[n] * mik0 - gam * axh);
      }
    }
    zc_.noalias() = czzi_ * src_;

    const double be = L.beta;
    for (Eigen::Index j = 0; j < C; ++j) {
      const cplx* ep = &y(0, j);
      const cplx* et = ep + M;
      const cplx* hp = ep + 2 * M;
      const cplx* ht = ep + 3 * M;
      const cplx* ex = &cart_(0, j);
      const cplx* ey = ex + M;
      const cplx* hx = ex + 2 * M;
      const cplx* hy = ex + 3 * M;
      const cplx* ez = &zc_(0, j);
      const cplx* hz = &zc_(0, C + j);
      cplx* dep = &dy(0, j);
      cplx* det = dep + M;
      cplx* dhp = dep + 2 * M;
      cplx* dht = dep + 3 * M;
      for (Eigen::Index n = 0; n < M; ++n) {
        const double k = kn_(n), c = c_(n), s = s_(n);
        cplx nex = 0, ney = 0, nhx = 0, nhy = 0, dez = 0, dhz = 0;
        if (n > 0) {
          nex += ex[n - 1], ney += ey[n - 1], nhx += hx[n - 1], nhy += hy[n - 1];
          dez -= ez[n - 1], dhz -= hz[n - 1];
        }
        if (n + 1 < M) {
          nex += ex[n + 1], ney += ey[n + 1], nhx += hx[n + 1], nhy += hy[n + 1];
          dez += ez[n + 1], dhz += hz[n + 1];
        }
        const cplx idhz = times_i(gam * dhz), idez = times_i(gam * dez);
        dep[n] = k * times_i(ez[n]) - k0 * (ht[n] + be * (c * nhy - s * nhx)) + s * k0 * idhz;
        det[n] = k0 * (hp[n] + be * (s * nhy + c * nhx)) + c * k0 * idhz;
        dhp[n] = k * times_i(hz[n]) + ke * (et[n] + be * (c * ney - s * nex)) - s * ke * idez;
        dht[n] = -ke * (ep[n] + be * (s * ney + c * nex)) - c * ke * idez;
      }
    }
  }

  double max_rate(bool metal) const {
    const Layer& L = metal ? metal_ : vac_;
    double kmax = kappa(metal).maxCoeff();
    double bmin = amp_ > 0 ? 1 - amp_ / L.length : 1;
    return kmax / bmin;
  }

  const OdeTolerance& tolerance() const { return tol_; }

  std::string where() const {
    std::ostringstream os;
    os.precision(10);
    os << "xi=" << xi_ << " eV, kx=" << kx_ << " /nm, ky=" << ky_ << " /nm";
    return os.str();
  }

 private:
  static cplx times_i(cplx z) { return {-z.imag(), z.real()}; }

  struct Layer {
    double k0eps = 0, k02eps = 0, length = 0;
    double beta = 0;     // off-diagonal of Toeplitz(b)
    double half_ak = 0;  // A K / 2
    Eigen::MatrixXd t1, t2;
    Eigen::MatrixXd v;
    Eigen::VectorXd mu;
  };

  void setup_layer(Layer& L, double gprime, double K) {
    // b = 1 + g' A cos(theta), h' = -A K sin(theta)
    L.beta = gprime * amp_ / 2;
    L.half_ak = amp_ * K / 2;
    const int nq = std::max(256, 16 * m_);
    const int span = 2 * (m_ - 1);
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(span + 1), c2 = Eigen::VectorXd::Zero(span + 1);
    for (int j = 0; j < nq; ++j) {
      double th = 2 * units::pi * j / nq;
      double b = 1 + gprime * amp_ * std::cos(th);
      double hp = amp_ * K * std::sin(th);
      for (int k = 0; k <= span; ++k) {
        double ck = std::cos(k * th) / nq;
        c1(k) += ck / b;
        c2(k) += ck * hp * hp / b;
      }
    }
    L.t1.resize(m_, m_);
    L.t2.resize(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < m_; ++j) {
        L.t1(i, j) = c1(std::abs(i - j));
        L.t2(i, j) = c2(std::abs(i - j));
      }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(L.t2, L.t1);
    L.v = es.eigenvectors();
    L.mu = es.eigenvalues();
  }

  double xi_, kx_, ky_;
  int n_, m_;
  double amp_;
  double k0_ = 0;
  Eigen::VectorXd alpha_, kn_, c_, s_;
  Layer vac_, metal_;
  OdeTolerance tol_;
  // scratch, so one OdeSystem must not be shared between threads
  mutable Eigen::MatrixXd scaled_, czzi_;
  mutable double last_u_ = std::numeric_limits<double>::quiet_NaN();
  mutable const void* last_layer_ = nullptr;
  mutable CMatrix src_, zc_, cart_;
};

namespace detail {

// Carries the decaying-into-metal solution subspace from the bottom of the
// transformed region to the top, re-orthonormalizing after each substep.
inline CMatrix transport_subspace(const OdeSystem& sys, OdeStats& st) {
  CMatrix y = sys.modes(true, +1);
  auto f = [&](double u, const CMatrix& Y, CMatrix& dY) { sys.rhs(u, Y, dY); };
  auto ctx = [&] { return sys.where(); };
  double h = 0;
  auto run = [&](double a, double b, double rate) {
    double sub = std::max(8.0 / rate, (b - a) / 200);
    int nsub = std::max(1, static_cast<int>(std::ceil((b - a) / sub)));
    for (int k = 0; k < nsub; ++k) {
      double u0 = a + (b - a) * k / nsub, u1 = a + (b - a) * (k + 1) / nsub;
      if (h == 0) h = 0.2 / rate;
      dormand_prince(f, u0, u1, y, h, sys.tolerance(), st, ctx);
      Eigen::HouseholderQR<CMatrix> qr(y);
      y = qr.householderQ() * CMatrix::Identity(y.rows(), y.cols());
    }
  };
  if (sys.top() > 0) {
    run(sys.bottom(), 0.0, sys.max_rate(true));
    h = 0;
    run(0.0, sys.top(), sys.max_rate(false));
  }
  return y;
}

}  // namespace detail

struct ReflectionDiagnostics {
  OdeStats ode;
  double rcond = 0;
};

// Reflection matrix of the cosine profile A cos(Kx) with `orders + pad`
// internal orders, cropped to `orders`. Referenced to the crest z = A, or with
// at_crest false to the top of the transformed region, which is better
// conditioned for strongly evanescent waves.
inline ReflectionMatrix reflection_matrix_even(const GratingProfile& g, double xi, double kx,
                                               double ky, const NumericsConfig& num,
                                               ReflectionDiagnostics* diag = nullptr,
                                               bool at_crest = true) {
  const int N = num.orders;
  if (N < 1) throw DomainError("truncation order must be >= 1");
  // a flat interface does not couple orders, so no padding is needed
  const int Ni = g.amplitude > 0 ? N + std::max(0, num.order_padding) : N;
  OdeSystem sys(g, xi, kx, ky, Ni, num);
  const int M = sys.modes();
  OdeStats st;
  CMatrix y = detail::transport_subspace(sys, st);

  CMatrix vin = sys.modes(false, +1);
  CMatrix vout = sys.modes(false, -1);
  CMatrix a(4 * M, 4 * M);
  a << y, -vout;
  Eigen::PartialPivLU<CMatrix> lu(a);
  double rc = lu.rcond();
  if (!(rc > 1e-14)) throw SingularError("singular matching system at " + sys.where());
  CMatrix sol = lu.solve(vin);
  CMatrix ru = sol.bottomRows(2 * M);

  const double ref = at_crest ? g.amplitude : sys.top();
  Eigen::VectorXd kap = sys.kappa(false);
  Eigen::VectorXd e(2 * M);
  for (int i = 0; i < M; ++i) e(i) = e(M + i) = std::exp(kap(i) * (sys.top() - ref));

  ReflectionMatrix r;
  r.order = N;
  r.xi = xi;
  r.kx = kx;
  r.ky = ky;
  r.reference = ref;
  const int m = 2 * N + 1;
  r.data.resize(2 * m, 2 * m);
  const int off = Ni - N;
  for (int pj = 0; pj < 2; ++pj)
    for (int j = 0; j < m; ++j)
      for (int pi = 0; pi < 2; ++pi)
        for (int i = 0; i < m; ++i) {
          int I = pi * M + off + i, J = pj * M + off + j;
          r.data(pi * m + i, pj * m + j) = e(I) * ru(I, J) * e(J);
        }
  if (diag) {
    diag->ode = st;
    diag->rcond = rc;
  }
  return r;
}

inline ReflectionMatrix reflection_matrix(const GratingProfile& g, double xi, double kx, double ky,
                                          const NumericsConfig& num,
                                          ReflectionDiagnostics* diag = nullptr) {
  validate(g);
  if (kx < 0 || kx > units::pi / g.period * (1 + 1e-12))
    throw DomainError("kx must lie in [0, pi/period]");
  if (ky < 0) throw DomainError("ky must be nonnegative");
  // A sin(Kx + chi) = A cos(Kx + chi - pi/2)
  return shift_phase(reflection_matrix_even(g, xi, kx, ky, num, diag), g.phase - units::pi / 2);
}

}  // namespace casimir
