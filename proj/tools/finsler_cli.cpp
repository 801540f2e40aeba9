// Batch front door: run worldline integrations from JSON experiment configs,
// run the verification suites over catalog spaces, and render static SVG
// plots from the emitted CSV files.
//
// Exit codes: 0 success, 1 unexpected failure, 2 config/schema/construction
// error, 3 closure singularity, 4 stiffness, 5 verification failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "finsler/checks.hpp"
#include "finsler/errors.hpp"
#include "finsler/integrator.hpp"
#include "finsler/spaces.hpp"

using nlohmann::json;
using namespace finsler;

namespace {

constexpr const char* kVersion = "finsler-dynamics 0.1.0";

// --- formatting -------------------------------------------------------------

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

// --- catalog with optional override directory --------------------------------

FinslerSpace load_space(const std::string& name, const std::map<std::string, double>& params) {
  const char* dir = std::getenv("FINSLER_CATALOG_DIR");
  if (dir) {
    std::filesystem::path p = std::filesystem::path(dir) / (name + ".json");
    if (std::filesystem::exists(p)) {
      std::ifstream in(p);
      json j;
      in >> j;
      std::string base = j.at("base").get<std::string>();
      std::map<std::string, double> merged;
      if (j.contains("params"))
        for (auto& [k, v] : j.at("params").items()) merged[k] = v.get<double>();
      for (auto& [k, v] : params) merged[k] = v;
      return make_catalog_space(base, merged);
    }
  }
  return make_catalog_space(name, params);
}

// --- experiment configuration --------------------------------------------------

struct Experiment {
  json config;  // schema-checked echo
  FinslerSpace space;
  ClosureSpec closure;
  WorldlineState initial;
  IntegratorConfig integrator;
  std::string trajectory_path = "trajectory.csv";
  std::string monitors_path = "monitors.csv";
  std::string manifest_path = "manifest.json";
  uint64_t seed = 0;
};

Vec to_vec(const json& j, int n, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ConfigError(std::string(what) + ": expected an array of length " + std::to_string(n));
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = j[i].get<double>();
  return v;
}

ObserverField parse_observer(const json& j) {
  std::string kind = j.value("kind", "constant");
  if (kind == "constant") {
    Vec comp{1.0, 0.0, 0.0, 0.0};
    if (j.contains("components")) comp = to_vec(j.at("components"), 4, "observer.components");
    ObserverField obs;
    obs.eval = [comp](const Vec&, Vec& t, Mat& dt) {
      t = comp;
      dt = Mat(4);
    };
    return obs;
  }
  if (kind == "scaled_time") {
    // t = (1 + 2 Phi)^(-1/2) d_t on the weak-field charts.
    double mass = 1.0;
    if (j.contains("mass")) mass = j.at("mass").get<double>();
    ObserverField obs;
    obs.eval = [mass](const Vec& x, Vec& t, Mat& dt) {
      double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
      double r = std::sqrt(r2);
      double phi = -mass / r;
      double f = 1.0 / std::sqrt(1.0 + 2.0 * phi);
      t = Vec(4);
      dt = Mat(4);
      t[0] = f;
      for (int k = 1; k < 4; ++k) {
        double dphi = mass * x[k] / (r2 * r);
        dt(0, k) = -f * f * f * dphi;
      }
    };
    return obs;
  }
  throw ConfigError("observer.kind must be 'constant' or 'scaled_time'");
}

Experiment parse_experiment(const json& j) {
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
    throw ConfigError("config: missing or unsupported schema_version (expected 1)");

  Experiment ex;
  ex.config = j;
  ex.seed = j.value("seed", 0);

  const json& js = j.at("space");
  std::map<std::string, double> params;
  if (js.contains("params"))
    for (auto& [k, v] : js.at("params").items()) params[k] = v.get<double>();
  ex.space = load_space(js.at("name").get<std::string>(), params);

  const json& jc = j.at("closure");
  std::string kind = jc.at("kind").get<std::string>();
  if (kind == "geodesic")
    ex.closure.kind = ClosureKind::Geodesic;
  else if (kind == "spinoptics3d")
    ex.closure.kind = ClosureKind::Spinoptics3D;
  else if (kind == "massive4d")
    ex.closure.kind = ClosureKind::Massive4D;
  else if (kind == "massless4d_exact")
    ex.closure.kind = ClosureKind::Massless4DExact;
  else if (kind == "massless4d_observer")
    ex.closure.kind = ClosureKind::Massless4DObserver;
  else
    throw ConfigError("closure.kind '" + kind + "' is not one of geodesic, spinoptics3d, "
                      "massive4d, massless4d_exact, massless4d_observer");
  ex.closure.p = jc.value("p", 0.0);
  ex.closure.m = jc.value("m", 0.0);
  ex.closure.s = jc.value("s", 0.0);
  ex.closure.helicity = jc.value("helicity", 1);
  if (jc.contains("observer") || ex.closure.kind == ClosureKind::Massless4DExact ||
      ex.closure.kind == ClosureKind::Massless4DObserver)
    ex.closure.observer = parse_observer(jc.value("observer", json::object()));

  const json& ji = j.at("initial");
  const int n = ex.space.n;
  Vec x = to_vec(ji.at("x"), n, "initial.x");
  switch (ex.closure.kind) {
    case ClosureKind::Geodesic: {
      Vec dir = to_vec(ji.at("direction"), n, "initial.direction");
      ex.initial.X = x;
      ex.initial.y = dir;
      ex.initial.P = dir;
      ex.initial.S = SpinTensor::zero(n);
      break;
    }
    case ClosureKind::Spinoptics3D:
      ex.initial = init_spinoptics3(ex.space, x, to_vec(ji.at("direction"), 3, "initial.direction"),
                                    ex.closure.p);
      break;
    case ClosureKind::Massive4D: {
      Vec dir = to_vec(ji.at("direction"), 4, "initial.direction");
      Vec spin_dir = to_vec(ji.at("spin_direction"), 3, "initial.spin_direction");
      ex.initial = init_massive4(ex.space, x, dir, ex.closure.m, ex.closure.s,
                                 ex.closure.helicity, spin_dir);
      break;
    }
    case ClosureKind::Massless4DExact:
    case ClosureKind::Massless4DObserver: {
      Vec k = to_vec(ji.at("direction"), 3, "initial.direction");
      ex.initial = init_massless4(ex.space, x, k, ex.closure.s, ex.closure.helicity,
                                  ex.closure.observer);
      break;
    }
  }

  const json& jn = j.value("integrator", json::object());
  std::string method = jn.value("method", "rk45-adaptive");
  if (method == "rk45-adaptive")
    ex.integrator.method = StepMethod::Rk45Adaptive;
  else if (method == "rk4-fixed")
    ex.integrator.method = StepMethod::Rk4Fixed;
  else
    throw ConfigError("integrator.method must be 'rk45-adaptive' or 'rk4-fixed'");
  ex.integrator.rel_tol = jn.value("rel_tol", 1e-9);
  ex.integrator.abs_tol = jn.value("abs_tol", 1e-12);
  ex.integrator.max_step = jn.value("max_step", 1.0);
  ex.integrator.min_step = jn.value("min_step", 1e-12);
  ex.integrator.init_step = jn.value("init_step", 0.0);
  ex.integrator.monitor_stride = jn.value("monitor_stride", 1);
  ex.integrator.tau_end = jn.value("tau_end", 1.0);
  std::string proj = jn.value("projection", "off");
  if (proj == "off")
    ex.integrator.projection = ProjectionMode::Off;
  else if (proj == "renormalize-constraints")
    ex.integrator.projection = ProjectionMode::RenormalizeConstraints;
  else
    throw ConfigError("integrator.projection must be 'off' or 'renormalize-constraints'");

  const json& jo = j.value("output", json::object());
  ex.trajectory_path = jo.value("trajectory", ex.trajectory_path);
  ex.monitors_path = jo.value("monitors", ex.monitors_path);
  ex.manifest_path = jo.value("manifest", ex.manifest_path);
  return ex;
}

// --- output writers --------------------------------------------------------------

void write_trajectory_csv(const std::string& path, const FinslerSpace& space,
                          const TrajectoryRecord& rec) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open trajectory output '" + path + "'");
  const int n = space.n;
  out << "tau";
  for (int i = 0; i < n; ++i) out << ",X" << i;
  for (int i = 0; i < n; ++i) out << ",P" << i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out << ",S" << i << j;
  out << "\n";
  for (const auto& s : rec.samples) {
    out << fmt(s.state.tau);
    for (int i = 0; i < n; ++i) out << "," << fmt(s.state.X[i]);
    for (int i = 0; i < n; ++i) out << "," << fmt(s.state.P[i]);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) out << "," << fmt(s.state.S.S(i, j));
    out << "\n";
  }
}

void write_monitors_csv(const std::string& path, const FinslerSpace& space,
                        const TrajectoryRecord& rec) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open monitors output '" + path + "'");
  out << "tau,p2,s2,L,sp_max,st_max,sxdot_max,p_dot_xdot,sigma_tilde,delta,sigma,rss,kernel_det";
  for (const auto& name : rec.psi_names) out << ",psi:" << name;
  for (const auto& name : rec.psi_names) out << ",killing_resid:" << name;
  out << "\n";
  for (const auto& s : rec.samples) {
    const MonitorRecord& m = s.monitors;
    out << fmt(s.state.tau) << "," << fmt(m.p2) << "," << fmt(m.s2) << "," << fmt(m.L) << ","
        << fmt(m.sp_max) << "," << fmt(m.st_max) << "," << fmt(m.sxdot_max) << ","
        << fmt(m.p_dot_xdot) << "," << fmt(m.diag.sigma_tilde) << "," << fmt(m.diag.delta) << ","
        << fmt(m.diag.sigma) << "," << fmt(m.diag.rss) << "," << fmt(m.diag.kernel_det);
    for (double v : m.psi) out << "," << fmt(v);
    for (double v : m.killing_resid) out << "," << fmt(v);
    out << "\n";
  }
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::ReachedTauEnd: return "reached_tau_end";
    case Termination::ClosureSingularity: return "closure_singularity";
    case Termination::Stiffness: return "stiffness";
    case Termination::EvaluationFailure: return "evaluation_failure";
  }
  return "unknown";
}

void write_manifest(const std::string& path, const Experiment& ex, const TrajectoryRecord& rec) {
  json m;
  m["version"] = kVersion;
  m["config"] = ex.config;
  m["termination"] = termination_name(rec.termination);
  m["termination_detail"] = rec.termination_detail;
  m["termination_tau"] = rec.termination_tau;
  m["steps_accepted"] = rec.steps_accepted;
  m["steps_rejected"] = rec.steps_rejected;
  m["rhs_evaluations"] = rec.rhs_evaluations;
  m["samples"] = rec.samples.size();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open manifest output '" + path + "'");
  out << m.dump(2) << "\n";
}

// --- run --------------------------------------------------------------------------

int run_one(const std::string& config_path, const std::string& output_dir) {
  json j;
  {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config '" + config_path + "'");
    in >> j;
  }
  if (j.contains("config")) j = j.at("config");  // accept a previous run manifest

  Experiment ex = parse_experiment(j);
  if (!output_dir.empty()) {
    std::filesystem::create_directories(output_dir);
    auto base = [&](const std::string& p) {
      return (std::filesystem::path(output_dir) / std::filesystem::path(p).filename()).string();
    };
    ex.trajectory_path = base(ex.trajectory_path);
    ex.monitors_path = base(ex.monitors_path);
    ex.manifest_path = base(ex.manifest_path);
  }

  TrajectoryRecord rec = integrate(ex.space, ex.closure, ex.initial, ex.integrator);
  write_trajectory_csv(ex.trajectory_path, ex.space, rec);
  write_monitors_csv(ex.monitors_path, ex.space, rec);
  write_manifest(ex.manifest_path, ex, rec);

  std::cout << config_path << ": " << termination_name(rec.termination) << " at tau "
            << rec.termination_tau << " (" << rec.samples.size() << " samples)\n";
  switch (rec.termination) {
    case Termination::ReachedTauEnd: return 0;
    case Termination::ClosureSingularity:
      std::cerr << rec.termination_detail << "\n";
      return 3;
    case Termination::Stiffness:
      std::cerr << rec.termination_detail << "\n";
      return 4;
    case Termination::EvaluationFailure:
      std::cerr << rec.termination_detail << "\n";
      return 1;
  }
  return 1;
}

// --- verify -------------------------------------------------------------------------

int verify_space(const std::string& name, uint64_t seed, int points, const std::string& report) {
  std::vector<std::string> names;
  if (name == "all")
    names = catalog_names();
  else
    names.push_back(name);

  std::ostringstream os;
  bool all_pass = true;
  std::string first_failing;
  for (const auto& nm : names) {
    FinslerSpace space = load_space(nm, {});
    std::vector<SuiteReport> reports = run_all_suites(space, seed, points);
    for (const auto& rep : reports) {
      for (const auto& r : rep.results) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-16s %-32s %10.3e  tol %8.1e  points %4d  %s\n",
                      nm.c_str(), r.name.c_str(), r.worst, r.tolerance, r.points,
                      r.pass() ? "pass" : "FAIL");
        os << line;
        if (!r.pass()) {
          all_pass = false;
          if (first_failing.empty()) first_failing = nm + ":" + r.name;
        }
      }
    }
  }
  os << (all_pass ? "all suites passed\n" : "FAILED: " + first_failing + "\n");
  std::cout << os.str();
  if (!report.empty()) {
    std::ofstream out(report);
    out << os.str();
  }
  return all_pass ? 0 : 5;
}

// --- plot ----------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read csv '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty csv '" + path + "'");
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (...) {
        throw ConfigError("malformed csv cell '" + cell + "' in " + path);
      }
    }
    if (row.size() != t.header.size()) throw ConfigError("ragged csv row in " + path);
    t.rows.push_back(row);
  }
  if (t.rows.empty()) throw ConfigError("csv has no data rows: " + path);
  return t;
}

void write_svg_polyline(const std::string& path, const std::vector<double>& xs,
                        const std::vector<double>& ys, const std::string& xlabel,
                        const std::string& ylabel) {
  const double W = 760, H = 520, ml = 70, mr = 20, mt = 20, mb = 50;
  double xmin = xs[0], xmax = xs[0], ymin = ys[0], ymax = ys[0];
  for (double v : xs) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  for (double v : ys) {
    ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (v - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open svg output '" + path + "'");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
      << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
      << "' stroke='black'/>\n";
  char label[96];
  std::snprintf(label, sizeof(label), "%.6g", xmin);
  out << "<text x='" << ml << "' y='" << H - mb + 20 << "' font-size='12'>" << label << "</text>\n";
  std::snprintf(label, sizeof(label), "%.6g", xmax);
  out << "<text x='" << W - mr - 50 << "' y='" << H - mb + 20 << "' font-size='12'>" << label
      << "</text>\n";
  std::snprintf(label, sizeof(label), "%.6g", ymin);
  out << "<text x='5' y='" << H - mb << "' font-size='12'>" << label << "</text>\n";
  std::snprintf(label, sizeof(label), "%.6g", ymax);
  out << "<text x='5' y='" << mt + 12 << "' font-size='12'>" << label << "</text>\n";
  out << "<text x='" << (W / 2) << "' y='" << H - 10 << "' font-size='13'>" << xlabel
      << "</text>\n";
  out << "<text x='10' y='" << (H / 2) << "' font-size='13' transform='rotate(-90 10 " << (H / 2)
      << ")'>" << ylabel << "</text>\n";
  out << "<polyline fill='none' stroke='#1f6fb2' stroke-width='1.5' points='";
  for (size_t i = 0; i < xs.size(); ++i) out << px(xs[i]) << "," << py(ys[i]) << " ";
  out << "'/>\n</svg>\n";
}

int plot_csv(const std::string& csv_path, const std::string& kind, const std::string& out_path,
             const std::string& column) {
  CsvTable t = read_csv(csv_path);
  auto col_index = [&](const std::string& name) {
    for (size_t i = 0; i < t.header.size(); ++i)
      if (t.header[i] == name) return static_cast<int>(i);
    throw ConfigError("csv has no column '" + name + "'");
  };
  std::vector<double> xs, ys;
  std::string xl, yl;
  if (kind == "xy-projection") {
    int cx = col_index("X0"), cy = col_index("X1");
    for (const auto& r : t.rows) {
      xs.push_back(r[cx]);
      ys.push_back(r[cy]);
    }
    xl = "X0";
    yl = "X1";
  } else if (kind == "monitor-vs-tau") {
    int ct = col_index("tau");
    int cv = column.empty() ? 1 : col_index(column);
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& r : t.rows) {
      if (!(r[ct] >= prev)) throw ConfigError("csv tau column is not monotone");
      prev = r[ct];
      xs.push_back(r[ct]);
      ys.push_back(r[cv]);
    }
    xl = "tau";
    yl = column.empty() ? t.header[1] : column;
  } else {
    throw ConfigError("plot kind must be 'xy-projection' or 'monitor-vs-tau'");
  }
  write_svg_polyline(out_path, xs, ys, xl, yl);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) + " - Finsler worldline dynamics"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "integrate experiment configs");
  std::vector<std::string> configs;
  std::string output_dir;
  int jobs = 1;
  run_cmd->add_option("configs", configs, "JSON experiment configs (or run manifests)")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--output-dir", output_dir, "redirect output files into a directory");
  run_cmd->add_option("-j,--jobs", jobs, "run independent configs concurrently");

  auto* verify_cmd = app.add_subcommand("verify", "run the verification suites for a space");
  std::string space_name;
  uint64_t seed = 20240801;
  int points = 100;
  std::string report_path;
  verify_cmd->add_option("space", space_name, "catalog space name, or 'all'")->required();
  verify_cmd->add_option("--seed", seed, "random seed");
  verify_cmd->add_option("--points", points, "sample points per suite");
  verify_cmd->add_option("-o,--report", report_path, "also write the report to a file");

  auto* plot_cmd = app.add_subcommand("plot", "render a CSV as a static SVG");
  std::string csv_path, kind = "xy-projection", svg_path = "plot.svg", column;
  plot_cmd->add_option("csv", csv_path, "trajectory or monitor CSV")->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--kind", kind, "xy-projection | monitor-vs-tau");
  plot_cmd->add_option("-o,--output", svg_path, "output SVG path");
  plot_cmd->add_option("--column", column, "monitor column name (monitor-vs-tau)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      if (configs.size() == 1 || jobs <= 1) {
        int worst = 0;
        for (const auto& c : configs) worst = std::max(worst, run_one(c, output_dir));
        return worst;
      }
      // Parallel sweep: isolated outputs, one worker per config slot.
      std::vector<int> results(configs.size(), 0);
      std::vector<std::thread> pool;
      std::atomic<size_t> next{0};
      int workers = std::min<int>(jobs, static_cast<int>(configs.size()));
      for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
          for (size_t i = next.fetch_add(1); i < configs.size(); i = next.fetch_add(1)) {
            try {
              results[i] = run_one(configs[i], output_dir);
            } catch (const Error& e) {
              std::cerr << configs[i] << ": " << e.what() << "\n";
              results[i] = e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Input ? 2 : 1;
            }
          }
        });
      for (auto& th : pool) th.join();
      int worst = 0;
      for (int r : results) worst = std::max(worst, r);
      return worst;
    }
    if (verify_cmd->parsed()) return verify_space(space_name, seed, points, report_path);
    if (plot_cmd->parsed()) return plot_csv(csv_path, kind, svg_path, column);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::Config:
      case ErrorKind::Input:
        return 2;
      case ErrorKind::ClosureSingularity:
        return 3;
      case ErrorKind::Stiffness:
        return 4;
      default:
        return 1;
    }
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
