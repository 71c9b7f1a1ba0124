#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "casimir/materials.hpp"

using namespace casimir;

namespace {

MaterialModel one_oscillator() { return generalized_plasma(9.0, {{100.0, 20.0, 1.0}}); }

// imaginary-frequency Fresnel coefficients written out directly
std::pair<double, double> fresnel_oracle(double eps, double xi, double k) {
  const double c = 197.3269804;
  const double q = std::sqrt(k * k + xi * xi / (c * c));
  const double kk = std::sqrt(k * k + eps * xi * xi / (c * c));
  return {(q - kk) / (q + kk), (eps * q - kk) / (eps * q + kk)};
}

}  // namespace

TEST(EpsImag, Plasma) {
  EXPECT_DOUBLE_EQ(eps_imag(plasma(9.0), 9.0), 2.0);
  EXPECT_NEAR(eps_imag(plasma(9.0), 1e4) - 1, 8.1e-7, 1e-15);
}

TEST(EpsImag, GeneralizedPlasma) {
  const double oracle = 1 + 81.0 / 4 + 100.0 / (400 + 4 + 2);
  EXPECT_NEAR(eps_imag(one_oscillator(), 2.0), oracle, 1e-13 * oracle);
}

TEST(EpsImag, Errors) {
  EXPECT_THROW(eps_imag(plasma(9.0), 0.0), DomainError);
  EXPECT_THROW(eps_imag(plasma(9.0), -1.0), DomainError);
  EXPECT_THROW(eps_imag(ideal_metal(), 1.0), DomainError);
  EXPECT_THROW(plasma(0.0), DomainError);
  EXPECT_THROW(generalized_plasma(9.0, {{1.0, 0.0, 1.0}}), DomainError);
  EXPECT_THROW(generalized_plasma(9.0, {{-1.0, 2.0, 1.0}}), DomainError);
}

TEST(EpsImag, RealAboveOneAndDecreasing) {
  auto p = plasma(9.0);
  auto g = one_oscillator();
  double prev = INFINITY;
  for (double xi = 1e-3; xi < 1e3; xi *= 1.3) {
    double e = eps_imag(p, xi);
    EXPECT_GE(e, 1.0);
    EXPECT_LT(e, prev);
    prev = e;
    EXPECT_GE(eps_imag(g, xi), 1.0);
  }
}

TEST(Fresnel, Limits) {
  for (double xi : {0.0, 0.1, 3.0}) {
    auto r = fresnel(ideal_metal(), xi, 0.02);
    EXPECT_EQ(r.r_te, -1.0);
    EXPECT_EQ(r.r_tm, 1.0);
  }
  auto v = fresnel(dielectric(1.0), 1.0, 0.01);
  EXPECT_EQ(v.r_te, 0.0);
  EXPECT_EQ(v.r_tm, 0.0);
  EXPECT_THROW(fresnel(plasma(9.0), 0.0, 0.0), DomainError);
  EXPECT_THROW(fresnel(plasma(9.0), -1.0, 0.1), DomainError);
}

TEST(Fresnel, PlasmaMatchesClosedForm) {
  const double xi = 0.1624, k = 0.05;
  auto r = fresnel(plasma(9.0), xi, k);
  auto [te, tm] = fresnel_oracle(1 + 81.0 / (xi * xi), xi, k);
  EXPECT_NEAR(r.r_te, te, 1e-12);
  EXPECT_NEAR(r.r_tm, tm, 1e-12);
  EXPECT_GT(r.r_te, -1.0);
  EXPECT_LT(r.r_te, 0.0);
  EXPECT_GT(r.r_tm, 0.0);
  EXPECT_LT(r.r_tm, 1.0);
}

TEST(Fresnel, StaticPlasmaTerm) {
  // TM ideal, TE from eps xi^2 -> omega_p^2 and continuous as xi -> 0
  const double k = 0.01;
  auto r0 = fresnel(plasma(9.0), 0.0, k);
  EXPECT_EQ(r0.r_tm, 1.0);
  const double kp = 9.0 / 197.3269804;
  EXPECT_NEAR(r0.r_te, (k - std::sqrt(k * k + kp * kp)) / (k + std::sqrt(k * k + kp * kp)), 1e-14);
  EXPECT_LT(r0.r_te, 0.0);
  auto r1 = fresnel(plasma(9.0), 1e-7, k);
  EXPECT_NEAR(r1.r_te, r0.r_te, 1e-9);
}

TEST(Fresnel, SignsForMetals) {
  for (auto m : {plasma(9.0), one_oscillator()})
    for (double xi : {1e-3, 0.16, 2.0, 30.0})
      for (double k : {1e-4, 0.01, 0.3, 3.0}) {
        auto r = fresnel(m, xi, k);
        EXPECT_GE(r.r_te, -1.0);
        EXPECT_LT(r.r_te, 0.0);
        EXPECT_GT(r.r_tm, 0.0);
        EXPECT_LE(r.r_tm, 1.0);
      }
}

TEST(Fresnel, ApproachesIdealWithPlasmaFrequency) {
  const double xi = 0.3, k = 0.02;
  double te = 0, tm = 0;
  for (double wp : {1.0, 3.0, 9.0, 30.0, 100.0, 1000.0}) {
    auto r = fresnel(plasma(wp), xi, k);
    EXPECT_GT(std::abs(r.r_te), te);
    EXPECT_GT(std::abs(r.r_tm), tm);
    te = std::abs(r.r_te);
    tm = std::abs(r.r_tm);
  }
  EXPECT_GT(te, 0.99);
  EXPECT_GT(tm, 0.99);
}

TEST(MaterialFile, ParsesShippedTable) {
  auto m = load_material(std::string(CASIMIR_SOURCE_DIR) + "/data/au_generalized_plasma.mat");
  ASSERT_TRUE(std::holds_alternative<GeneralizedPlasma>(m.kind));
  const auto& g = std::get<GeneralizedPlasma>(m.kind);
  EXPECT_EQ(g.omega_p, 9.0);
  EXPECT_EQ(g.oscillators.size(), 6u);
  EXPECT_GT(eps_imag(m, 1.0), eps_imag(plasma(9.0), 1.0));
}

TEST(MaterialFile, Errors) {
  auto parse = [](const std::string& s) {
    std::istringstream is(s);
    return parse_material(is);
  };
  EXPECT_NO_THROW(parse("# c\nmodel plasma omega_p=9\n"));
  EXPECT_THROW(parse(""), ConfigError);
  EXPECT_THROW(parse("model drude omega_p=9\n"), ConfigError);
  EXPECT_THROW(parse("model plasma\n"), ConfigError);
  EXPECT_THROW(parse("model plasma omega_p=9\n1 2 3\n"), ConfigError);
  EXPECT_THROW(parse("model generalized_plasma omega_p=9\n1 2\n"), ConfigError);
  EXPECT_THROW(parse("model generalized_plasma omega_p=9\n1 0 3\n"), ConfigError);
  try {
    parse("model generalized_plasma omega_p=9\n1 2 3\n1 2 3 4\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(load_material("/nonexistent/file.mat"), IoError);
}
