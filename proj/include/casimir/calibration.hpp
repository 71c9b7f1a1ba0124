#pragma once

// Analysis chain for lateral-force signals: harmonic decomposition, Casimir
// subtraction, electrostatic calibration fits, asymmetry of force curves.

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unsupported/Eigen/NonLinearOptimization>
#include <vector>

#include "casimir/electrostatics.hpp"
#include "casimir/errors.hpp"
#include "casimir/force_curve.hpp"
#include "casimir/quantities.hpp"

namespace casimir {

struct DeflectionSignal {
  std::vector<double> phi;     // rad
  std::vector<double> signal;  // detector units
  double separation = 0;       // from contact (piezo displacement), nm
  double voltage = 0;          // V
  std::uint64_t seed = 0;
  std::string noise_model;
};

inline void validate(const DeflectionSignal& s) {
  const std::size_t n = s.phi.size();
  if (n != s.signal.size()) throw DomainError("phase and signal lengths differ");
  if (n < 64) throw DomainError("signal needs at least 64 samples");
  auto [lo, hi] = std::minmax_element(s.phi.begin(), s.phi.end());
  // uniform sampling of one period spans 2 pi (n-1)/n
  const double cover = (*hi - *lo) * n / (n - 1.0);
  if (cover < 2 * units::pi * (1 - 1e-9)) throw DomainError("signal must cover at least one period");
  if (n * 2 * units::pi / cover < 64 * (1 - 1e-9)) throw DomainError("signal needs at least 64 samples per period");
}

struct HarmonicFit {
  std::vector<double> amplitudes;  // A_1..A_kmax
  double offset = 0;
  double rms = 0;

  double operator()(double phi) const {
    double s = 0;
    for (std::size_t k = 0; k < amplitudes.size(); ++k) s += amplitudes[k] * std::sin((k + 1) * phi);
    return s;
  }
};

// Least squares on {1, sin(k phi)}, k = 1..kmax.
inline HarmonicFit harmonic_fit(const std::vector<double>& phi, const std::vector<double>& y, int kmax) {
  if (kmax < 1) throw DomainError("k_max must be >= 1");
  const auto n = static_cast<Eigen::Index>(phi.size());
  if (n != static_cast<Eigen::Index>(y.size())) throw DomainError("phase and signal lengths differ");
  if (n <= 2 * kmax + 1) throw DomainError("too few samples for the requested harmonics");
  Eigen::MatrixXd a(n, kmax + 1);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 1;
    for (int k = 1; k <= kmax; ++k) a(i, k) = std::sin(k * phi[i]);
    b(i) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < kmax + 1) throw SingularError("harmonic basis is rank deficient on these phases");
  Eigen::VectorXd c = qr.solve(b);
  HarmonicFit out;
  out.offset = c(0);
  out.amplitudes.assign(c.data() + 1, c.data() + kmax + 1);
  out.rms = std::sqrt((a * c - b).squaredNorm() / n);
  return out;
}

inline HarmonicFit harmonic_fit(const DeflectionSignal& s, int kmax) {
  return harmonic_fit(s.phi, s.signal, kmax);
}

struct CasimirHarmonics {
  double separation;  // nm, same origin as DeflectionSignal::separation
  std::vector<double> amplitudes;
};

// Removes the Casimir waveform, with each A_k interpolated linearly in separation.
inline DeflectionSignal subtract_casimir(const DeflectionSignal& total, const CasimirHarmonics& lo,
                                         const CasimirHarmonics& hi) {
  if (lo.amplitudes.size() != hi.amplitudes.size()) throw DomainError("bracketing harmonic sets differ in length");
  const double z = total.separation;
  const double z1 = std::min(lo.separation, hi.separation), z2 = std::max(lo.separation, hi.separation);
  if (z < z1 || z > z2) throw DomainError("separation outside the bracketing pair; no extrapolation");
  const CasimirHarmonics& a = lo.separation <= hi.separation ? lo : hi;
  const CasimirHarmonics& b = lo.separation <= hi.separation ? hi : lo;
  const double t = z2 > z1 ? (z - z1) / (z2 - z1) : 0.0;
  HarmonicFit h;
  for (std::size_t k = 0; k < a.amplitudes.size(); ++k)
    h.amplitudes.push_back(a.amplitudes[k] + t * (b.amplitudes[k] - a.amplitudes[k]));
  DeflectionSignal out = total;
  for (std::size_t i = 0; i < out.phi.size(); ++i) out.signal[i] -= h(out.phi[i]);
  return out;
}

inline double t_quantile_95(int dof) {
  if (dof < 1) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::students_t(dof), 0.975);
}

struct CalibrationResult {
  double k_ben = 0;  // nN per signal unit
  double z0 = 0;     // nm
  double V0 = 0;     // V
  // half-widths of the 95% confidence intervals
  double k_ben_ci = 0, z0_ci = 0, V0_ci = 0;
  double residual_norm = 0;  // signal units
  double condition = 0;      // of the scaled Jacobian
  int iterations = 0;
  int dof = 0;
};

struct KbenFitOptions {
  double z0_guess = 100;  // nm
  double fd_step = 1e-3;  // nm, for dF/dz
};

// Fits k_ben S = F_lat^el(z0 + d, phi) over all samples. Residuals are taken
// in signal units, S - F / k_ben, since the noise sits on S. `model` supplies
// R, amplitudes, period, V0 and the c-coefficients; separation, phase and
// voltage are set per sample. V0 and its uncertainty are passed through.
inline CalibrationResult fit_kben_z0(const std::vector<DeflectionSignal>& signals,
                                     const ElectrostaticConfig& model, double V0_ci = 0,
                                     const KbenFitOptions& opt = {}) {
  std::set<double> seps, volts;
  std::size_t n = 0;
  for (const auto& s : signals) {
    if (s.phi.size() != s.signal.size()) throw DomainError("phase and signal lengths differ");
    seps.insert(s.separation);
    volts.insert(s.voltage);
    n += s.phi.size();
  }
  if (volts.empty() || n < 3) throw DomainError("no calibration samples");
  if (seps.size() < 2) throw SingularError("k_ben and z0 are not separable with a single separation");

  auto force_nN = [&](double z, double phi, double v) {
    ElectrostaticConfig c = model;
    c.separation = z;
    c.phase = phi;
    c.voltage = v;
    return lateral_electrostatic_force(c) * 1e9;
  };

  struct Functor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    const std::vector<DeflectionSignal>* sig;
    std::function<double(double, double, double)> f;
    double h;
    int m;
    int values() const { return m; }
    int inputs() const { return 2; }
    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
      int i = 0;
      for (const auto& s : *sig)
        for (std::size_t j = 0; j < s.phi.size(); ++j, ++i)
          r(i) = s.signal[j] - f(x(1) + s.separation, s.phi[j], s.voltage) / x(0);
      return 0;
    }
    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
      int i = 0;
      for (const auto& s : *sig)
        for (std::size_t j = 0; j < s.phi.size(); ++j, ++i) {
          const double z = x(1) + s.separation;
          jac(i, 0) = f(z, s.phi[j], s.voltage) / (x(0) * x(0));
          jac(i, 1) = -(f(z + h, s.phi[j], s.voltage) - f(z - h, s.phi[j], s.voltage)) / (2 * h * x(0));
        }
      return 0;
    }
  };
  Functor fn{&signals, force_nN, opt.fd_step, static_cast<int>(n)};

  // starting k from linear least squares at the guessed z0
  double sf = 0, ss = 0;
  for (const auto& s : signals)
    for (std::size_t j = 0; j < s.phi.size(); ++j) {
      double f = force_nN(opt.z0_guess + s.separation, s.phi[j], s.voltage);
      sf += s.signal[j] * f;
      ss += s.signal[j] * s.signal[j];
    }
  if (!(ss > 0)) throw SingularError("calibration signals are identically zero");
  Eigen::VectorXd x(2);
  x << sf / ss, opt.z0_guess;

  Eigen::LevenbergMarquardt<Functor> lm(fn);
  lm.parameters.ftol = 1e-15;
  lm.parameters.xtol = 1e-15;
  lm.parameters.maxfev = 4000;
  auto status = lm.minimize(x);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
      status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation || !x.allFinite())
    throw ConvergenceError("k_ben/z0 fit did not converge (status " + std::to_string(int(status)) + ")");

  Eigen::VectorXd r(n);
  Eigen::MatrixXd jac(n, 2);
  fn(x, r);
  fn.df(x, jac);
  // condition of the column-scaled Jacobian
  Eigen::VectorXd scale = jac.colwise().norm().transpose();
  if (!(scale.minCoeff() > 0)) throw SingularError("calibration Jacobian has a zero column");
  Eigen::MatrixXd js = jac * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(js);
  const auto sv = svd.singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  if (!(cond < 1e8)) throw SingularError("calibration Jacobian is ill-conditioned");

  CalibrationResult out;
  out.k_ben = x(0);
  out.z0 = x(1);
  out.V0 = model.residual_potential;
  out.V0_ci = V0_ci;
  out.residual_norm = r.norm();
  out.condition = cond;
  out.iterations = static_cast<int>(lm.iter);
  out.dof = static_cast<int>(n) - 2;
  const double s2 = r.squaredNorm() / std::max(1, out.dof);
  Eigen::Matrix2d cov = s2 * (jac.transpose() * jac).inverse();
  const double t = t_quantile_95(out.dof);
  out.k_ben_ci = t * std::sqrt(cov(0, 0));
  out.z0_ci = t * std::sqrt(cov(1, 1));
  return out;
}

struct VoltagePoint {
  double voltage;  // V
  double value;
};

struct ResidualPotentialFit {
  double V0 = 0;
  double V0_ci = 0;     // 95% half-width, delta method
  double curvature = 0;  // coefficient of V^2
  double residual_norm = 0;
};

// Parabola value = p0 + p1 V + p2 V^2 with vertex V0 = -p1 / (2 p2). The sign of
// p2 must match expected_curvature (+1 or -1).
inline ResidualPotentialFit fit_residual_potential(const std::vector<VoltagePoint>& pts,
                                                   int expected_curvature = +1) {
  std::set<double> volts;
  for (const auto& p : pts) volts.insert(p.voltage);
  if (volts.size() < 3) throw DomainError("need at least three distinct voltages");
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = pts[i].voltage;
    a.row(i) << 1, v, v * v;
    b(i) = pts[i].value;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::Vector3d p = qr.solve(b);
  if (!(p(2) != 0) || (expected_curvature != 0 && (p(2) > 0) != (expected_curvature > 0)))
    throw DomainError("parabola curvature has the wrong sign for the model");
  ResidualPotentialFit out;
  out.curvature = p(2);
  out.V0 = -p(1) / (2 * p(2));
  Eigen::VectorXd r = a * p - b;
  out.residual_norm = r.norm();
  const int dof = static_cast<int>(n) - 3;
  if (dof < 1) {
    out.V0_ci = std::numeric_limits<double>::infinity();
    return out;
  }
  const double s2 = r.squaredNorm() / dof;
  Eigen::Matrix3d cov = s2 * (a.transpose() * a).inverse();
  Eigen::Vector3d g(0, -1 / (2 * p(2)), p(1) / (2 * p(2) * p(2)));
  out.V0_ci = t_quantile_95(dof) * std::sqrt(std::max(0.0, g.dot(cov * g)));
  return out;
}

// From signals at several voltages via their first-harmonic amplitudes.
inline ResidualPotentialFit fit_residual_potential(const std::vector<DeflectionSignal>& signals,
                                                   int expected_curvature = +1) {
  std::vector<VoltagePoint> pts;
  for (const auto& s : signals) pts.push_back({s.voltage, harmonic_fit(s, 1).amplitudes[0]});
  return fit_residual_potential(pts, expected_curvature);
}

struct AsymmetryShift {
  double shift = 0;   // units of the period
  double spread = 0;  // sample standard deviation over maxima
  int maxima = 0;
};

namespace detail {

// vertex of the parabola through three points
inline double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d0 = (y1 - y0) / (x1 - x0), d1 = (y2 - y1) / (x2 - x1);
  const double c = (d1 - d0) / (x2 - x0);
  if (c == 0) return x1;
  return 0.5 * (x0 + x1) - d0 / (2 * c);
}

}  // namespace detail

// Mean offset of each maximum from the midpoint of its neighbouring minima, / 2 pi.
inline AsymmetryShift asymmetry_shift(const std::vector<double>& phi, const std::vector<double>& f) {
  const std::size_t n = phi.size();
  if (n != f.size() || n < 3) throw DomainError("curve needs matching phase and force samples");
  for (std::size_t i = 1; i < n; ++i)
    if (!(phi[i] > phi[i - 1])) throw DomainError("curve phases must increase");
  const double span = phi.back() - phi.front();
  if ((n - 1) * 2 * units::pi / span < 128 * (1 - 1e-9))
    throw DomainError("curve needs at least 128 samples per period");
  std::vector<double> maxima, minima;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const bool mx = f[i] > f[i - 1] && f[i] >= f[i + 1];
    const bool mn = f[i] < f[i - 1] && f[i] <= f[i + 1];
    if (!mx && !mn) continue;
    double x = detail::parabola_vertex(phi[i - 1], f[i - 1], phi[i], f[i], phi[i + 1], f[i + 1]);
    (mx ? maxima : minima).push_back(x);
  }
  std::vector<double> shifts;
  for (double m : maxima) {
    auto hi = std::upper_bound(minima.begin(), minima.end(), m);
    if (hi == minima.begin() || hi == minima.end()) continue;
    shifts.push_back((m - 0.5 * (*(hi - 1) + *hi)) / (2 * units::pi));
  }
  if (shifts.empty()) throw DomainError("no maximum with minima on both sides");
  AsymmetryShift out;
  out.maxima = static_cast<int>(shifts.size());
  double s = 0;
  for (double v : shifts) s += v;
  out.shift = s / shifts.size();
  if (shifts.size() > 1) {
    double q = 0;
    for (double v : shifts) q += (v - out.shift) * (v - out.shift);
    out.spread = std::sqrt(q / (shifts.size() - 1));
  }
  return out;
}

inline AsymmetryShift asymmetry_shift(const ForceCurve& c) {
  if (c.kind != Abscissa::phase) throw DomainError("asymmetry needs a force-versus-phase curve");
  std::vector<double> x, y;
  for (const auto& s : c.samples) x.push_back(s.abscissa), y.push_back(s.force);
  return asymmetry_shift(x, y);
}

// Random and systematic parts at the same confidence level, in quadrature.
inline double combine_errors(double random, double systematic, double confidence = 0.95) {
  if (!(random >= 0 && systematic >= 0)) throw DomainError("error components must be nonnegative");
  if (!(confidence > 0 && confidence < 1)) throw DomainError("confidence must lie in (0, 1)");
  return std::hypot(random, systematic);
}

constexpr double kPresetDriftNmPerMin = 0.14;

struct NoiseModel {
  double sigma = 0;               // white Gaussian, signal units
  double drift_nm_per_min = 0;    // separation ramp during acquisition
  double minutes_per_sample = 0;
};

struct SignalPlan {
  int samples = 8192;
  double periods = 1;
  double separation = 0;  // nm from contact
  double voltage = 0;     // V
};

// truth(phi, separation) in signal units
inline DeflectionSignal synthesize_signal(const std::function<double(double, double)>& truth,
                                          const SignalPlan& plan, const NoiseModel& noise,
                                          std::uint64_t seed) {
  if (plan.samples < 1 || !(plan.periods > 0)) throw DomainError("invalid signal plan");
  if (!(noise.sigma >= 0)) throw DomainError("noise sigma must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DeflectionSignal s;
  s.separation = plan.separation;
  s.voltage = plan.voltage;
  s.seed = seed;
  std::ostringstream nm;
  nm << "gaussian sigma=" << format_number(noise.sigma) << " drift_nm_per_min="
     << format_number(noise.drift_nm_per_min) << " minutes_per_sample=" << format_number(noise.minutes_per_sample);
  s.noise_model = nm.str();
  s.phi.resize(plan.samples);
  s.signal.resize(plan.samples);
  for (int i = 0; i < plan.samples; ++i) {
    const double phi = 2 * units::pi * plan.periods * i / plan.samples;
    const double z = plan.separation + noise.drift_nm_per_min * noise.minutes_per_sample * i;
    s.phi[i] = phi;
    s.signal[i] = truth(phi, z) + (noise.sigma > 0 ? noise.sigma * gauss(rng) : 0.0);
  }
  return s;
}

inline void write_signal_csv(std::ostream& os, const DeflectionSignal& s) {
  os << "# separation_nm = " << format_number(s.separation) << "\n";
  os << "# voltage_V = " << format_number(s.voltage) << "\n";
  os << "# seed = " << s.seed << "\n";
  os << "# noise = " << s.noise_model << "\n";
  os << "phi_rad,signal\n";
  for (std::size_t i = 0; i < s.phi.size(); ++i)
    os << format_number(s.phi[i]) << "," << format_number(s.signal[i]) << "\n";
}

inline DeflectionSignal read_signal_csv(std::istream& is) {
  DeflectionSignal s;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find(" = ");
      if (eq == std::string::npos || line.size() < 2) continue;
      std::string k = line.substr(2, eq - 2), v = line.substr(eq + 3);
      try {
        if (k == "separation_nm") s.separation = std::stod(v);
        else if (k == "voltage_V") s.voltage = std::stod(v);
        else if (k == "seed") s.seed = std::stoull(v);
        else if (k == "noise") s.noise_model = v;
      } catch (const std::exception&) {
        throw ConfigError("bad value for " + k, lineno);
      }
      continue;
    }
    if (!header) {
      if (line != "phi_rad,signal") throw ConfigError("expected header phi_rad,signal", lineno);
      header = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("malformed signal row", lineno);
    try {
      s.phi.push_back(std::stod(line.substr(0, comma)));
      s.signal.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ConfigError("malformed signal row", lineno);
    }
  }
  return s;
}

}  // namespace casimir
