// casimir: lateral Casimir force sweeps, PFA comparison, electrostatics and a
// synthetic calibration run, driven by a config file.

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "casimir/calibration.hpp"
#include "casimir/casimir_forces.hpp"
#include "casimir/config.hpp"
#include "casimir/electrostatics.hpp"
#include "casimir/errors.hpp"
#include "casimir/force_curve.hpp"

using namespace casimir;

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::domain: return 2;
    case ErrorCategory::convergence: return 3;
    case ErrorCategory::singular: return 4;
    case ErrorCategory::io: return 5;
    case ErrorCategory::config: return 6;
  }
  return 1;
}

struct Run {
  RunConfig cfg;
  std::string command;
  std::string out_dir;
  std::uint64_t seed = 0;

  SphereGratingGeometry geometry(double z) const {
    return {cfg.radius, cfg.period, cfg.amplitude1, cfg.amplitude2, z, 0.0, cfg.temperature, cfg.material};
  }

  std::string path(const std::string& tag) const {
    return (std::filesystem::path(out_dir) / (cfg.prefix + "_" + tag + ".csv")).string();
  }

  std::ofstream open(const std::string& tag) const {
    std::ofstream f(path(tag));
    if (!f) throw IoError("cannot write " + path(tag));
    return f;
  }

  void header(std::ostream& os) const {
    os << "# command = " << command << "\n# seed = " << seed << "\n";
    for (const auto& [k, v] : cfg.describe()) os << "# " << k << " = " << v << "\n";
  }

  ElectrostaticConfig electro_model() const {
    if (cfg.coefficient_file.empty())
      throw ConfigError("[electrostatics] coefficients = <file> is required for this command");
    ElectrostaticConfig e{};
    e.radius = cfg.radius;
    e.amplitude1 = cfg.amplitude1;
    e.amplitude2 = cfg.amplitude2;
    e.period = cfg.period;
    e.residual_potential = cfg.residual_potential;
    e.coefficients = load_coefficients(cfg.coefficient_file);
    return e;
  }
};

// Rows are streamed as they are computed; an exception leaves an #INCOMPLETE trailer.
class Table {
 public:
  Table(const Run& run, const std::string& tag, const std::string& columns) : os_(run.open(tag)) {
    run.header(os_);
    os_ << columns << "\n";
  }
  void meta(const std::string& k, const std::string& v) { os_ << "# " << k << " = " << v << "\n"; }
  void row(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os_ << (i ? "," : "") << format_number(v[i]);
    os_ << "\n";
    os_.flush();
  }
  void incomplete() {
    os_ << "#INCOMPLETE\n";
    os_.flush();
  }
  template <class Fn>
  void guard(Fn&& fn) {
    try {
      fn();
    } catch (...) {
      incomplete();
      throw;
    }
  }

 private:
  std::ofstream os_;
};

void force_phase(const Run& run) {
  const auto phis = run.cfg.phase_grid();
  for (double z : run.cfg.separations) {
    ExactEngine e(run.geometry(z), run.cfg.numerics);
    Table t(run, "force_phase_z" + format_number(z), "phase_rad,force_N");
    t.meta("separation_nm", format_number(z));
    t.guard([&] {
      auto f = e.lateral_force(z, phis);
      for (std::size_t i = 0; i < phis.size(); ++i) t.row({phis[i], f[i]});
      t.meta("convergence", e.report().describe());
    });
  }
}

void force_z(const Run& run) {
  Table t(run, "force_z", "separation_nm,phase_rad,max_force_N");
  t.guard([&] {
    std::unique_ptr<ExactEngine> e;
    for (double z : run.cfg.separations) {
      if (!e) e = std::make_unique<ExactEngine>(run.geometry(z), run.cfg.numerics);
      auto [phi, f] = e->max_lateral_force(z);
      t.row({z, phi, f});
    }
    if (e) t.meta("convergence", e->report().describe());
  });
}

void pfa_compare(const Run& run) {
  Table t(run, "pfa_compare", "separation_nm,exact_max_N,pfa_max_N,deviation");
  t.guard([&] {
    const auto& zs = run.cfg.separations;
    const double zlo = *std::min_element(zs.begin(), zs.end()), zhi = *std::max_element(zs.begin(), zs.end());
    PfaEngine pfa(run.geometry(zlo), run.cfg.numerics, zlo, zhi * 1.0001);
    std::unique_ptr<ExactEngine> e;
    for (double z : zs) {
      if (!e) e = std::make_unique<ExactEngine>(run.geometry(z), run.cfg.numerics);
      double fe = e->max_lateral_force(z).second;
      double fp = pfa.max_lateral_force(z).second;
      t.row({z, fe, fp, std::abs(fp) / std::abs(fe) - 1});
    }
    if (e) t.meta("convergence", e->report().describe());
  });
}

void convergence(const Run& run) {
  const double z = run.cfg.separations.front();
  Table t(run, "convergence", "orders,max_force_N,phase_rad,relative_change");
  t.guard([&] {
    double prev = 0;
    for (int dn : {0, 2, 4}) {
      NumericsConfig num = run.cfg.numerics;
      num.orders += dn;
      ExactEngine e(run.geometry(z), num);
      auto [phi, f] = e.max_lateral_force(z);
      t.row({double(num.orders), f, phi, dn == 0 ? 0.0 : std::abs(f / prev - 1)});
      t.meta("convergence", e.report().describe());
      prev = f;
    }
  });
}

void electro(const Run& run) {
  const auto model = run.electro_model();
  Table t(run, "electro", "separation_nm,phase_rad,voltage_V,beta,normal_N,lateral_N");
  t.meta("coefficients_source", model.coefficients.source);
  t.guard([&] {
    for (double z : run.cfg.separations)
      for (double phi : run.cfg.phase_grid())
        for (double v : run.cfg.voltages) {
          ElectrostaticConfig c = model;
          c.separation = z;
          c.phase = phi;
          c.voltage = v;
          t.row({z, phi, v, beta(z, phi, c.amplitude1, c.amplitude2), normal_electrostatic_force(c),
                 lateral_electrostatic_force(c)});
        }
  });
}

void calibrate_demo(const Run& run) {
  const RunConfig& cfg = run.cfg;
  ElectrostaticConfig model = run.electro_model();
  if (cfg.displacements.size() < 2) throw ConfigError("calibrate-demo needs at least two displacements");
  const double V0 = cfg.residual_potential;
  auto truth_at = [&](double v) {
    return [&, v](double phi, double d) {
      ElectrostaticConfig c = model;
      c.separation = cfg.z0 + d;
      c.phase = phi;
      c.voltage = v;
      return lateral_electrostatic_force(c) * 1e9 / cfg.k_ben;
    };
  };
  // noise level: fraction of the largest signal over the run
  std::vector<double> volts = cfg.voltages;
  if (volts.size() < 3) volts = {V0 - 0.3, V0 - 0.15, V0 + 0.15, V0 + 0.3, V0 + 0.45};
  double peak = 0;
  for (double v : volts)
    for (double d : cfg.displacements)
      for (int i = 0; i < 64; ++i) peak = std::max(peak, std::abs(truth_at(v)(2 * units::pi * i / 64, d)));
  const NoiseModel noise{cfg.noise * peak};
  std::uint64_t stream = run.seed * 1000;

  // V0 from the first-harmonic amplitude at the closest separation
  std::vector<DeflectionSignal> vsig;
  for (double v : volts)
    vsig.push_back(synthesize_signal(truth_at(v), {cfg.samples, 1, cfg.displacements.front(), v}, noise, stream++));
  HarmonicFit far = harmonic_fit(synthesize_signal(truth_at(V0 + 1), {256, 1, cfg.displacements.front(), V0 + 1}, {}, 0), 1);
  const int sign = far.amplitudes[0] > 0 ? +1 : -1;
  auto vfit = fit_residual_potential(vsig, sign);

  model.residual_potential = vfit.V0;
  std::vector<DeflectionSignal> ksig;
  std::vector<double> kv(volts.begin(), volts.begin() + std::min<std::size_t>(2, volts.size()));
  for (double d : cfg.displacements)
    for (double v : kv) ksig.push_back(synthesize_signal(truth_at(v), {cfg.samples, 1, d, v}, noise, stream++));
  auto r = fit_kben_z0(ksig, model, vfit.V0_ci);

  {
    auto f = run.open("calibrate_signal");
    run.header(f);
    write_signal_csv(f, ksig.front());
  }
  Table t(run, "calibrate_demo", "quantity,value,ci95,truth");
  t.meta("quantities", "0=k_ben_nN_per_unit 1=z0_nm 2=V0_V");
  t.meta("residual_norm", format_number(r.residual_norm));
  t.meta("condition", format_number(r.condition));
  t.meta("k_ben_total_relative_error", format_number(combine_errors(r.k_ben_ci, 0.0) / r.k_ben));
  t.row({0, r.k_ben, r.k_ben_ci, cfg.k_ben});
  t.row({1, r.z0, r.z0_ci, cfg.z0});
  t.row({2, r.V0, r.V0_ci, V0});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lateral Casimir force between corrugated sphere and grating"};
  std::string config, command, out = ".";
  int threads = 0;
  std::uint64_t seed = 1;
  app.add_option("--config", config, "config file")->required();
  app.add_option("--command", command, "command")
      ->required()
      ->check(CLI::IsMember({"force-phase", "force-z", "pfa-compare", "electro", "calibrate-demo", "convergence"}));
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads (overrides the config)");
  app.add_option("--seed", seed, "random seed");
  CLI11_PARSE(app, argc, argv);

  try {
    Run run;
    run.cfg = load_config(config);
    if (threads > 0) run.cfg.numerics.threads = threads;
    run.command = command;
    run.out_dir = out;
    run.seed = seed;
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (command == "force-phase") force_phase(run);
    else if (command == "force-z") force_z(run);
    else if (command == "pfa-compare") pfa_compare(run);
    else if (command == "electro") electro(run);
    else if (command == "calibrate-demo") calibrate_demo(run);
    else if (command == "convergence") convergence(run);
  } catch (const Error& e) {
    std::cerr << "error category=" << category_name(e.category()) << ": " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error category=internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
