#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "casimir/calibration.hpp"

using namespace casimir;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kKben = 1.27, kZ0 = 117.3, kV0 = -0.0396;

std::vector<double> grid(int n, double periods = 1) {
  std::vector<double> phi(n);
  for (int i = 0; i < n; ++i) phi[i] = 2 * kPi * periods * i / n;
  return phi;
}

ElectrostaticConfig model() {
  ElectrostaticCoefficients c;
  c.c = {0.5, -0.2, 0.1, 0.05, -0.02, 0.01, 0.005};
  return {97000, 0, 0, 85.4, 13.7, 574.7, 0, kV0, c};
}

// signal units: F / k_ben with F in nN
double electro_signal(double z, double phi, double v, double kben = kKben) {
  auto c = model();
  c.separation = z;
  c.phase = phi;
  c.voltage = v;
  return lateral_electrostatic_force(c) * 1e9 / kben;
}

std::vector<DeflectionSignal> calibration_set(double sigma_rel, std::uint64_t seed, int samples = 256) {
  const std::vector<double> seps{10, 30, 50, 70};
  const std::vector<double> volts{0.3, 0.5};
  double peak = 0;
  for (double d : seps)
    for (double v : volts)
      for (double phi : grid(64)) peak = std::max(peak, std::abs(electro_signal(kZ0 + d, phi, v)));
  std::vector<DeflectionSignal> out;
  std::uint64_t k = 0;
  for (double d : seps)
    for (double v : volts) {
      SignalPlan plan;
      plan.samples = samples;
      plan.separation = d;
      plan.voltage = v;
      NoiseModel noise;
      noise.sigma = sigma_rel * peak;
      out.push_back(synthesize_signal([&](double phi, double z) { return electro_signal(kZ0 + z, phi, v); }, plan,
                                      noise, seed * 97 + k++));
    }
  return out;
}

}  // namespace

TEST(HarmonicFit, PureSine) {
  auto phi = grid(256);
  std::vector<double> y;
  for (double p : phi) y.push_back(3.5 * std::sin(p));
  auto f = harmonic_fit(phi, y, 5);
  EXPECT_NEAR(f.amplitudes[0], 3.5, 1e-10);
  for (int k = 1; k < 5; ++k) EXPECT_LE(std::abs(f.amplitudes[k]), 1e-10);
  EXPECT_LE(std::abs(f.offset), 1e-10);
}

TEST(HarmonicFit, TwoHarmonicsAndOffset) {
  auto phi = grid(256);
  std::vector<double> y;
  for (double p : phi) y.push_back(std::sin(p) + 0.2 * std::sin(2 * p) - 0.7);
  auto f = harmonic_fit(phi, y, 5);
  EXPECT_NEAR(f.amplitudes[0], 1.0, 1e-10);
  EXPECT_NEAR(f.amplitudes[1], 0.2, 1e-10);
  EXPECT_NEAR(f.offset, -0.7, 1e-10);
  EXPECT_LE(f.rms, 1e-12);
}

TEST(HarmonicFit, Errors) {
  auto phi = grid(256);
  std::vector<double> y(256, 1.0);
  EXPECT_THROW(harmonic_fit(phi, y, 0), DomainError);
  EXPECT_THROW(harmonic_fit(grid(11), std::vector<double>(11, 0.0), 5), DomainError);
  EXPECT_THROW(harmonic_fit(std::vector<double>(20, 0.0), std::vector<double>(20, 1.0), 2), SingularError);
  DeflectionSignal s{grid(32), std::vector<double>(32, 0.0)};
  EXPECT_THROW(validate(s), DomainError);
  DeflectionSignal half{grid(128, 0.5), std::vector<double>(128, 0.0)};
  EXPECT_THROW(validate(half), DomainError);
  EXPECT_NO_THROW(validate(DeflectionSignal{grid(64), std::vector<double>(64, 0.0)}));
}

TEST(SubtractCasimir, IdenticalBracketsRemoveThatWaveform) {
  DeflectionSignal s;
  s.phi = grid(128);
  s.separation = 40;
  for (double p : s.phi) s.signal.push_back(2 * std::sin(p) - 0.5 * std::sin(2 * p) + 0.1);
  CasimirHarmonics a{30, {2, -0.5}}, b{50, {2, -0.5}};
  auto r = subtract_casimir(s, a, b);
  for (double v : r.signal) EXPECT_NEAR(v, 0.1, 1e-14);
}

TEST(SubtractCasimir, LinearHarmonicsInterpolateExactly) {
  auto amp = [](double z) { return std::vector<double>{3 - 0.01 * z, 0.2 + 0.002 * z, -0.05}; };
  DeflectionSignal s;
  s.phi = grid(128);
  s.separation = 37.5;
  auto at = amp(37.5);
  for (double p : s.phi) s.signal.push_back(at[0] * std::sin(p) + at[1] * std::sin(2 * p) + at[2] * std::sin(3 * p));
  auto r = subtract_casimir(s, {50, amp(50)}, {20, amp(20)});
  for (double v : r.signal) EXPECT_LE(std::abs(v), 1e-12);
  EXPECT_THROW(subtract_casimir(s, {10, amp(10)}, {20, amp(20)}), DomainError);
  EXPECT_THROW(subtract_casimir(s, {10, {1}}, {50, {1, 2}}), DomainError);
}

TEST(SubtractCasimir, LeavesElectrostaticComponent) {
  auto casimir = [](double phi, double z) { return (1 - 0.004 * z) * std::sin(phi) + 0.3 * std::sin(2 * phi); };
  SignalPlan plan;
  plan.samples = 512;
  plan.separation = 45;
  plan.voltage = 0.4;
  NoiseModel noise;
  noise.sigma = 1e-3;
  auto total = synthesize_signal(
      [&](double phi, double z) { return casimir(phi, z) + electro_signal(kZ0 + z, phi, 0.4); }, plan, noise, 7);
  auto r = subtract_casimir(total, {30, {1 - 0.12, 0.3}}, {60, {1 - 0.24, 0.3}});
  double sq = 0;
  for (std::size_t i = 0; i < r.phi.size(); ++i) {
    double d = r.signal[i] - electro_signal(kZ0 + 45, r.phi[i], 0.4);
    sq += d * d;
  }
  EXPECT_NEAR(std::sqrt(sq / r.phi.size()), 1e-3, 1e-4);
}

TEST(FitKbenZ0, NoiselessRoundTrip) {
  auto data = calibration_set(0.0, 1);
  KbenFitOptions opt;
  opt.z0_guess = 100;
  auto r = fit_kben_z0(data, model(), 0.0016, opt);
  EXPECT_NEAR(r.k_ben / kKben, 1.0, 1e-6);
  EXPECT_NEAR(r.z0 / kZ0, 1.0, 1e-6);
  EXPECT_EQ(r.V0, kV0);
  EXPECT_EQ(r.V0_ci, 0.0016);
  EXPECT_GT(r.condition, 1.0);
  EXPECT_GT(r.iterations, 0);
  EXPECT_EQ(r.dof, 8 * 256 - 2);
}

TEST(FitKbenZ0, ConfidenceCoverage) {
  int k_hits = 0, z_hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto r = fit_kben_z0(calibration_set(0.01, seed), model());
    EXPECT_GT(r.k_ben_ci, 0.0);
    EXPECT_GT(r.z0_ci, 0.0);
    k_hits += std::abs(r.k_ben - kKben) <= r.k_ben_ci;
    z_hits += std::abs(r.z0 - kZ0) <= r.z0_ci;
  }
  EXPECT_GE(k_hits, 93);
  EXPECT_GE(z_hits, 93);
}

TEST(FitKbenZ0, SingleSeparationIsSingular) {
  auto data = calibration_set(0.0, 1);
  data.resize(1);
  EXPECT_THROW(fit_kben_z0(data, model()), SingularError);
  EXPECT_THROW(fit_kben_z0({}, model()), DomainError);
}

TEST(ResidualPotential, ExactParabola) {
  std::vector<VoltagePoint> pts;
  for (double v : {-0.5, -0.2, 0.1, 0.3, 0.6}) pts.push_back({v, 2.5 * (v - kV0) * (v - kV0) + 0.3});
  auto r = fit_residual_potential(pts);
  EXPECT_NEAR(r.V0, kV0, 1e-10);
  EXPECT_NEAR(r.curvature, 2.5, 1e-10);
  EXPECT_LE(r.residual_norm, 1e-12);
}

TEST(ResidualPotential, SymmetricSetGivesMidpoint) {
  std::vector<VoltagePoint> pts;
  const double c = 0.17;
  for (double d : {0.1, 0.25, 0.4})
    for (double s : {-1.0, 1.0}) pts.push_back({c + s * d, -3 * d * d + 1});
  auto r = fit_residual_potential(pts, -1);
  EXPECT_NEAR(r.V0, c, 1e-13);
}

TEST(ResidualPotential, WrongCurvatureAndTooFewVoltages) {
  std::vector<VoltagePoint> pts{{-1, 1}, {0, 0}, {1, 1}};
  EXPECT_THROW(fit_residual_potential(pts, -1), DomainError);
  EXPECT_NO_THROW(fit_residual_potential(pts, +1));
  EXPECT_THROW(fit_residual_potential({{-1, 1}, {1, 1}, {1, 1}}), DomainError);
}

TEST(ResidualPotential, NoisyCoverage) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0, 1);
  const std::vector<double> volts{-0.4, -0.2, 0.0, 0.2, 0.4};
  double peak = 0;
  for (double v : volts) peak = std::max(peak, (v - kV0) * (v - kV0));
  int hits = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<VoltagePoint> pts;
    for (double v : volts) pts.push_back({v, (v - kV0) * (v - kV0) + 0.01 * peak * g(rng)});
    auto r = fit_residual_potential(pts);
    EXPECT_GT(r.V0_ci, 0.0);
    hits += std::abs(r.V0 - kV0) <= r.V0_ci;
  }
  EXPECT_GE(hits, 93);
}

TEST(ResidualPotential, FromElectrostaticSignals) {
  std::vector<DeflectionSignal> sigs;
  for (double v : {-0.3, -0.15, 0.0, 0.15, 0.3}) {
    SignalPlan plan;
    plan.samples = 256;
    plan.separation = 20;
    plan.voltage = v;
    sigs.push_back(synthesize_signal([&](double phi, double z) { return electro_signal(kZ0 + z, phi, v); }, plan, {}, 1));
  }
  double a1 = harmonic_fit(sigs[0], 1).amplitudes[0];
  auto r = fit_residual_potential(sigs, a1 > 0 ? +1 : -1);
  EXPECT_NEAR(r.V0 / kV0, 1.0, 1e-6);
}

TEST(Asymmetry, PureSineHasNoShift) {
  auto phi = grid(3 * 256, 3);
  std::vector<double> f;
  for (double p : phi) f.push_back(std::sin(p));
  auto a = asymmetry_shift(phi, f);
  EXPECT_NEAR(a.shift, 0.0, 1e-6);
  EXPECT_EQ(a.maxima, 2);
}

TEST(Asymmetry, MatchesDenseGridExtrema) {
  auto fn = [](double p) { return std::sin(p) + 0.3 * std::sin(2 * p); };
  const int n = 1000000;
  double best = -INFINITY, worst = INFINITY, pmax = 0, pmin = 0;
  for (int i = 0; i < n; ++i) {
    double p = 2 * kPi * i / n, v = fn(p);
    if (v > best) best = v, pmax = p;
    if (v < worst) worst = v, pmin = p;
  }
  // minima bracketing the maximum sit at pmin - 2 pi and pmin
  double oracle = (pmax - (pmin - kPi)) / (2 * kPi);
  auto phi = grid(3 * 256, 3);
  std::vector<double> f;
  for (double p : phi) f.push_back(fn(p));
  auto a = asymmetry_shift(phi, f);
  EXPECT_NEAR(a.shift, oracle, 1e-4);
  EXPECT_LE(a.spread, 1e-12);
  EXPECT_GT(std::abs(a.shift), 0.1);
}

TEST(Asymmetry, Errors) {
  auto phi = grid(100, 2);
  std::vector<double> f(100, 0.0);
  EXPECT_THROW(asymmetry_shift(phi, f), DomainError);
  auto ok = grid(128, 1);
  std::vector<double> s;
  for (double p : ok) s.push_back(std::sin(p));
  EXPECT_THROW(asymmetry_shift(ok, s), DomainError);
}

TEST(CombineErrors, Quadrature) {
  EXPECT_EQ(combine_errors(0, 2.5), 2.5);
  EXPECT_DOUBLE_EQ(combine_errors(3, 4), 5.0);
  EXPECT_THROW(combine_errors(-1, 1), DomainError);
  EXPECT_THROW(combine_errors(1, 1, 1.0), DomainError);
}

TEST(Synthesize, NoiselessDeterministicAndVariance) {
  auto truth = [](double phi, double) { return std::sin(phi); };
  SignalPlan plan;
  auto a = synthesize_signal(truth, plan, {}, 3);
  for (std::size_t i = 0; i < a.phi.size(); ++i) EXPECT_EQ(a.signal[i], std::sin(a.phi[i]));
  NoiseModel n;
  n.sigma = 0.05;
  auto b = synthesize_signal(truth, plan, n, 11), c = synthesize_signal(truth, plan, n, 11);
  EXPECT_EQ(b.signal, c.signal);
  double m = 0, q = 0;
  for (std::size_t i = 0; i < b.phi.size(); ++i) m += b.signal[i] - a.signal[i];
  m /= b.phi.size();
  for (std::size_t i = 0; i < b.phi.size(); ++i) q += std::pow(b.signal[i] - a.signal[i] - m, 2);
  q /= b.phi.size() - 1;
  EXPECT_NEAR(q / (n.sigma * n.sigma), 1.0, 0.1);
}

TEST(Synthesize, DriftMovesSeparation) {
  SignalPlan plan;
  plan.samples = 100;
  plan.separation = 50;
  NoiseModel n;
  n.drift_nm_per_min = kPresetDriftNmPerMin;
  n.minutes_per_sample = 0.5;
  auto s = synthesize_signal([](double, double z) { return z; }, plan, n, 0);
  EXPECT_DOUBLE_EQ(s.signal.back(), 50 + 0.14 * 0.5 * 99);
}

TEST(SignalCsv, RoundTrip) {
  SignalPlan plan;
  plan.samples = 64;
  plan.separation = 12.5;
  plan.voltage = -0.25;
  NoiseModel n;
  n.sigma = 0.1;
  auto s = synthesize_signal([](double phi, double) { return std::sin(phi); }, plan, n, 42);
  std::stringstream io;
  write_signal_csv(io, s);
  auto r = read_signal_csv(io);
  EXPECT_EQ(r.phi, s.phi);
  EXPECT_EQ(r.signal, s.signal);
  EXPECT_EQ(r.separation, 12.5);
  EXPECT_EQ(r.voltage, -0.25);
  EXPECT_EQ(r.seed, 42u);
  EXPECT_EQ(r.noise_model, s.noise_model);
  std::istringstream bad("phi,signal\n");
  EXPECT_THROW(read_signal_csv(bad), ConfigError);
}
