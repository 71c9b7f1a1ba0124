#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "casimir/config.hpp"

namespace fs = std::filesystem;
using namespace casimir;

namespace {

const std::string kCli = CASIMIR_CLI;
const std::string kData = std::string(CASIMIR_SOURCE_DIR) + "/data";

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("casimir_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Result {
  int code;
  std::string err;
};

Result run(const fs::path& dir, const std::string& cfg, const std::string& command, const std::string& extra = "") {
  const fs::path err = dir / "stderr.txt";
  std::string cmd = "\"" + kCli + "\" --config \"" + cfg + "\" --command " + command + " --out \"" +
                    (dir / "out").string() + "\" " + extra + " 2> \"" + err.string() + "\"";
  int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

// a quick geometry with coarse numerics
std::string small_config(double a2, const std::string& separations = "100 nm", int orders = 2) {
  std::ostringstream os;
  os << "[geometry]\nradius = 97 um\nperiod = 574.7 nm\namplitude1 = 20 nm\namplitude2 = " << a2
     << " nm\nseparation = " << separations << "\nphase_points = 8\ntemperature = 300 K\n"
     << "[material]\nmodel = plasma\nomega_p = 9.0 eV\n"
     << "[numerics]\norders = " << orders << "\norder_padding = 3\nmatsubara_exact = 3\n"
     << "matsubara_tail_nodes = 4\ncorner_angle_nodes = 2\ncorner_radial_nodes = 3\nkx_nodes = 2\n"
     << "ky_nodes = 5\nz_nodes = 6\nz_rel_tol = 1e-7\n"
     << "[electrostatics]\nvoltage = 0.2, 0.5 V\nresidual_potential = -39.6 mV\ncoefficients = " << kData
     << "/electrostatic_coefficients.txt\n"
     << "[calibration]\ndisplacement = 0, 30 nm\nsamples = 256\n"
     << "[output]\nprefix = t\n";
  return os.str();
}

std::vector<std::vector<double>> rows(const std::string& csv) {
  std::vector<std::vector<double>> out;
  std::istringstream is(csv);
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> r;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) r.push_back(std::stod(cell));
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(Config, ShippedPaperConfig) {
  auto c = load_config(kData + "/paper.cfg");
  EXPECT_DOUBLE_EQ(c.period, 574.7);
  EXPECT_DOUBLE_EQ(c.radius, 97000);
  EXPECT_DOUBLE_EQ(c.amplitude1, 85.4);
  EXPECT_DOUBLE_EQ(c.amplitude2, 13.7);
  EXPECT_DOUBLE_EQ(c.temperature, 300);
  EXPECT_DOUBLE_EQ(c.residual_potential, -0.0396);
  EXPECT_FALSE(c.coefficient_file.empty());
}

TEST(Config, EmptyFileNamesFirstMissingField) {
  auto d = scratch("empty");
  write(d / "empty.cfg", "");
  try {
    load_config((d / "empty.cfg").string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("geometry.radius"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownKeyCitesLine) {
  auto d = scratch("unknown");
  write(d / "bad.cfg", "[geometry]\nradius = 97 um\nfoo=1\n");
  try {
    load_config((d / "bad.cfg").string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
  }
}

TEST(Config, UnitsAndFiles) {
  auto d = scratch("units");
  std::string base = small_config(10);
  write(d / "a.cfg", std::string(base).replace(base.find("97 um"), 5, "97 furlongs"));
  EXPECT_THROW(load_config((d / "a.cfg").string()), ConfigError);
  write(d / "b.cfg", std::string(base).replace(base.find(kData), kData.size(), "/nonexistent"));
  EXPECT_THROW(load_config((d / "b.cfg").string()), ConfigError);
  EXPECT_THROW(load_config((d / "missing.cfg").string()), IoError);
}

TEST(Cli, ExitCodesAndCategories) {
  auto d = scratch("exit");
  auto r = run(d, (d / "missing.cfg").string(), "electro");
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("category=io"), std::string::npos);
  write(d / "bad.cfg", "[geometry]\nfoo = 1\n");
  r = run(d, (d / "bad.cfg").string(), "electro");
  EXPECT_EQ(r.code, 6);
  EXPECT_NE(r.err.find("category=config"), std::string::npos);
  write(d / "ok.cfg", small_config(10));
  EXPECT_NE(run(d, (d / "ok.cfg").string(), "no-such-command").code, 0);
  EXPECT_EQ(run(d, (d / "ok.cfg").string(), "electro").code, 0);
}

TEST(Cli, ElectroIsBitIdenticalAndCarriesConfig) {
  auto d = scratch("electro");
  write(d / "c.cfg", small_config(10, "110, 150 nm"));
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "electro").code, 0);
  std::string first = slurp(d / "out" / "t_electro.csv");
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "electro").code, 0);
  EXPECT_EQ(slurp(d / "out" / "t_electro.csv"), first);
  EXPECT_NE(first.find("# geometry.period_nm = 574.70000000000005"), std::string::npos);
  EXPECT_NE(first.find("# numerics = "), std::string::npos);
  EXPECT_NE(first.find("# coefficients_source = "), std::string::npos);
  EXPECT_EQ(rows(first).size(), 2u * 8 * 2);
}

TEST(Cli, CalibrateDemoDeterministicPerSeed) {
  auto d = scratch("calib");
  write(d / "c.cfg", small_config(10));
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "calibrate-demo", "--seed 5").code, 0);
  std::string a = slurp(d / "out" / "t_calibrate_demo.csv");
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "calibrate-demo", "--seed 5").code, 0);
  EXPECT_EQ(slurp(d / "out" / "t_calibrate_demo.csv"), a);
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "calibrate-demo", "--seed 6").code, 0);
  EXPECT_NE(slurp(d / "out" / "t_calibrate_demo.csv"), a);
  auto r = rows(a);
  ASSERT_EQ(r.size(), 3u);
  for (const auto& q : r) EXPECT_LE(std::abs(q[1] - q[3]), 5 * q[2] + 1e-12);
}

TEST(Cli, ForcePhaseWithFlatPartnerIsZero) {
  auto d = scratch("flat");
  write(d / "c.cfg", small_config(0));
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "force-phase").code, 0);
  auto r = rows(slurp(d / "out" / "t_force_phase_z100.csv"));
  ASSERT_EQ(r.size(), 8u);
  for (const auto& q : r) EXPECT_LE(std::abs(q[1]), 1e-20);
}

TEST(Cli, ForcePhaseIsBitIdenticalWithThreads) {
  auto d = scratch("threads");
  write(d / "c.cfg", small_config(10));
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "force-phase", "--threads 1").code, 0);
  std::string a = slurp(d / "out" / "t_force_phase_z100.csv");
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "force-phase", "--threads 2").code, 0);
  std::string b = slurp(d / "out" / "t_force_phase_z100.csv");
  // the resolved thread count is part of the header; compare the data rows
  EXPECT_EQ(rows(a), rows(b));
  double peak = 0;
  for (const auto& q : rows(a)) peak = std::max(peak, std::abs(q[1]));
  EXPECT_GT(peak, 0.0);
}

TEST(Cli, PartialSweepIsMarkedIncomplete) {
  // the second separation violates the reference gap of the exact engine
  auto d = scratch("partial");
  write(d / "c.cfg", small_config(10, "100, 35 nm"));
  auto r = run(d, (d / "c.cfg").string(), "force-z");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("category=domain"), std::string::npos);
  std::string out = slurp(d / "out" / "t_force_z.csv");
  EXPECT_EQ(rows(out).size(), 1u);
  EXPECT_NE(out.find("#INCOMPLETE"), std::string::npos);
}

TEST(Cli, ConvergenceDeltasShrink) {
  auto d = scratch("convergence");
  write(d / "c.cfg", small_config(10, "100 nm", 1));
  ASSERT_EQ(run(d, (d / "c.cfg").string(), "convergence").code, 0);
  auto r = rows(slurp(d / "out" / "t_convergence.csv"));
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0][0], 1);
  EXPECT_EQ(r[2][0], 5);
  EXPECT_GT(r[1][3], 0.0);
  EXPECT_LT(r[2][3], r[1][3]);
}
