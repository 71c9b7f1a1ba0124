#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "casimir/errors.hpp"

namespace casimir {

struct ConvergenceReport {
  int orders = 0;
  int order_padding = 0;
  int matsubara_terms = 0;  // exact terms including the static one
  int xi_nodes = 0;
  int in_plane_nodes = 0;
  int z_panels = 0;
  int z_nodes = 0;
  double z_tail_estimate = 0;      // |last panel| / |integral|
  double max_logdet_imag = 0;      // largest |Im ln det| seen
  long max_ode_evaluations = 0;
  double phase_series_tail = 0;    // max |b_k| over the upper half of the series / |b_1|

  std::string describe() const {
    std::ostringstream os;
    os.precision(6);
    os << "orders=" << orders << " order_padding=" << order_padding
       << " matsubara_terms=" << matsubara_terms << " xi_nodes=" << xi_nodes
       << " in_plane_nodes=" << in_plane_nodes << " z_panels=" << z_panels
       << " z_nodes=" << z_nodes << " z_tail_estimate=" << z_tail_estimate
       << " max_logdet_imag=" << max_logdet_imag << " max_ode_evaluations=" << max_ode_evaluations
       << " phase_series_tail=" << phase_series_tail;
    return os.str();
  }
};

enum class Abscissa { phase, separation };

struct ForceSample {
  double abscissa;
  double force;  // N
};

struct ForceCurve {
  Abscissa kind = Abscissa::phase;
  std::vector<ForceSample> samples;
  std::vector<std::pair<std::string, std::string>> metadata;
  ConvergenceReport report;
  bool complete = true;

  void add_meta(const std::string& k, const std::string& v) { metadata.emplace_back(k, v); }
};

inline std::string format_number(double v) {
  std::ostringstream os;
  if (v == 0) v = 0;  // no "-0"
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_csv(std::ostream& os, const ForceCurve& c) {
  for (const auto& [k, v] : c.metadata) os << "# " << k << " = " << v << "\n";
  os << "# convergence = " << c.report.describe() << "\n";
  os << "# abscissa = " << (c.kind == Abscissa::phase ? "phase_rad" : "separation_nm") << "\n";
  os << "abscissa,force_N\n";
  for (const auto& s : c.samples) os << format_number(s.abscissa) << "," << format_number(s.force) << "\n";
  if (!c.complete) os << "#INCOMPLETE\n";
}

inline ForceCurve read_force_curve(std::istream& is) {
  ForceCurve c;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#INCOMPLETE", 0) == 0) {
        c.complete = false;
        continue;
      }
      auto eq = line.find(" = ");
      if (eq == std::string::npos) continue;
      std::string k = line.substr(2, eq - 2), v = line.substr(eq + 3);
      if (k == "abscissa") c.kind = v == "separation_nm" ? Abscissa::separation : Abscissa::phase;
      else if (k != "convergence") c.add_meta(k, v);
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("malformed force curve row: " + line);
    c.samples.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  return c;
}

}  // namespace casimir
