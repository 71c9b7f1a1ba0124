#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "casimir/quantities.hpp"

namespace casimir {

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n.
inline const Rule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(units::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1;
      dp = n * (x * p1 - p0) / (x * x - 1);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1);
    double w = 2 / ((1 - x * x) * dp * dp);
    r.x[i] = -x;
    r.w[i] = w;
    r.x[n - 1 - i] = x;
    r.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0;
  return cache.emplace(n, std::move(r)).first->second;
}

// Gauss-Legendre rule mapped to [a, b].
inline Rule gauss_legendre(int n, double a, double b) {
  const Rule& g = gauss_legendre(n);
  Rule r;
  for (std::size_t i = 0; i < g.size(); ++i) {
    r.x.push_back(0.5 * (a + b) + 0.5 * (b - a) * g.x[i]);
    r.w.push_back(0.5 * (b - a) * g.w[i]);
  }
  return r;
}

// Gauss-Legendre in t on [0,1) mapped to [a, inf) by x = a + s t/(1-t).
inline Rule gauss_semi_infinite(int n, double a, double s) {
  const Rule& g = gauss_legendre(n);
  Rule r;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double t = 0.5 * (1 + g.x[i]);
    r.x.push_back(a + s * t / (1 - t));
    r.w.push_back(0.5 * g.w[i] * s / ((1 - t) * (1 - t)));
  }
  return r;
}

// Maximizes f on [a, b] (unimodal there) to |b - a| <= tol.
template <class F>
std::pair<double, double> golden_section_max(F&& f, double a, double b, double tol) {
  const double g = 0.5 * (std::sqrt(5.0) - 1);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc > fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace casimir
