#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "casimir/errors.hpp"

namespace casimir {

struct OdeStats {
  long nfev = 0;
  long accepted = 0;
  long rejected = 0;
};

struct OdeTolerance {
  double rtol = 1e-9;
  double atol = 1e-12;
  long max_steps = 2000000;
  // measure each entry against the largest entry of its column
  bool column_scale = false;
};

// Adaptive Dormand-Prince 5(4) for dY/dt = f(t, Y) with matrix-valued Y.
// h carries the step size in and out so consecutive calls can resume.
template <class Mat, class Rhs>
void dormand_prince(Rhs&& f, double t0, double t1, Mat& y, double& h, const OdeTolerance& tol,
                    OdeStats& stats, const std::function<std::string()>& context = {}) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = t1 - t0;
  if (span == 0) return;
  const double dir = span > 0 ? 1.0 : -1.0;
  h = std::abs(h);
  if (!(h > 0)) h = std::abs(span) * 1e-3;
  h = std::min(h, std::abs(span));

  Mat k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
  f(t0, y, k1);
  ++stats.nfev;
  double t = t0;
  long steps = 0;
  while (dir * (t1 - t) > 0) {
    if (++steps > tol.max_steps) throw ConvergenceError("ODE step limit exceeded" + (context ? " at " + context() : std::string()));
    double hs = std::min(h, dir * (t1 - t));
    double hh = dir * hs;
    ytmp = y + hh * a21 * k1;
    f(t + c2 * hh, ytmp, k2);
    ytmp = y + hh * (a31 * k1 + a32 * k2);
    f(t + c3 * hh, ytmp, k3);
    ytmp = y + hh * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * hh, ytmp, k4);
    ytmp = y + hh * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * hh, ytmp, k5);
    ytmp = y + hh * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + hh, ytmp, k6);
    ynew = y + hh * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + hh, ynew, k7);
    stats.nfev += 6;

    // err = h * (e1 k1 + ... + e7 k7), scaled per entry
    ytmp = hh * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double acc = 0;
    const auto n = ytmp.size();
    if (tol.column_scale) {
      for (Eigen::Index j = 0; j < ytmp.cols(); ++j) {
        double big = std::max(y.col(j).cwiseAbs().maxCoeff(), ynew.col(j).cwiseAbs().maxCoeff());
        double sc = tol.atol + tol.rtol * big;
        acc += ytmp.col(j).squaredNorm() / (sc * sc);
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        double sc = tol.atol + tol.rtol * std::sqrt(std::max(std::norm(y.data()[i]), std::norm(ynew.data()[i])));
        acc += std::norm(ytmp.data()[i]) / (sc * sc);
      }
    }
    double err = std::sqrt(acc / static_cast<double>(n));
    if (!std::isfinite(err)) err = 1e10;
    if (err <= 1) {
      t += hh;
      y.swap(ynew);
      k1.swap(k7);
      ++stats.accepted;
      double fac = err == 0 ? 5.0 : std::min(5.0, 0.9 * std::pow(err, -0.2));
      h = hs < h ? std::max(h, hs * fac) : hs * fac;
    } else {
      ++stats.rejected;
      h = hs * std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
    if (h < 1e-13 * std::abs(span)) {
      throw ConvergenceError("ODE step size underflow" + (context ? " at " + context() : std::string()));
    }
  }
}

}  // namespace casimir
