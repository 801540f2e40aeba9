// Acceptance suite: exercises every exit criterion at its stated tolerance and
// prints one pass/fail line per criterion.  Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "finsler/checks.hpp"
#include "finsler/dynamics.hpp"
#include "finsler/errors.hpp"
#include "finsler/integrator.hpp"
#include "finsler/jets.hpp"
#include "finsler/spaces.hpp"

using namespace finsler;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %-34s %s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt_worst(double worst, double tol) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "(worst %.3e, tol %.1e)", worst, tol);
  return buf;
}

ObserverField static_observer() {
  ObserverField obs;
  obs.eval = [](const Vec&, Vec& t, Mat& dt) {
    t = Vec(4);
    dt = Mat(4);
    t[0] = 1.0;
  };
  return obs;
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = static_cast<int>(xs.size());
  for (int i = 0; i < m; ++i) {
    double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

WorldlineState geodesic_state(const Vec& x, const Vec& y) {
  WorldlineState st;
  st.X = x;
  st.y = y;
  st.P = y;
  st.S = SpinTensor::zero(x.n);
  return st;
}

// 1. Pointwise geometry identities on 100 random admissible points per
//    catalog space.
void criterion_geometry_identities() {
  struct Item {
    const char* name;
    double tol;
    double worst = 0;
  };
  Item items[] = {{"euler", 1e-10},  {"cartan_orthogonality", 1e-10},
                  {"horizontal_metricity", 1e-7}, {"vertical_metricity", 1e-7},
                  {"bianchi", 1e-6}, {"antisymmetry_defect", 1e-6}};
  bool pass = true;
  std::string worst_space;
  for (const std::string& name : catalog_names()) {
    FinslerSpace s = make_catalog_space(name);
    std::mt19937_64 rng(1001);
    for (int i = 0; i < 100; ++i) {
      Vec x, y;
      s.sample_admissible(rng, x, y);
      GeometryFrame fr = frame_at(s, x, y, kFrameAll);
      double r[6] = {euler_identity_residual(fr),
                     cartan_orthogonality_residual(fr),
                     horizontal_metricity_residual(s, fr),
                     vertical_metricity_residual(s, fr),
                     bianchi_first_residual(fr),
                     antisymmetry_defect_residual(fr)};
      for (int k = 0; k < 6; ++k)
        if (r[k] > items[k].worst) {
          items[k].worst = r[k];
          if (r[k] > items[k].tol) worst_space = name;
        }
    }
  }
  std::string detail;
  for (const auto& it : items) {
    if (it.worst > it.tol) pass = false;
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%s %.1e ", it.name, it.worst);
    detail += buf;
  }
  if (!pass) detail += " worst space: " + worst_space;
  report(1, "geometry identities", pass, detail);
}

// 2. Riemannian reductions: transport rates against the Christoffel-only
//    classical form on three Riemannian spaces, and the 4D closures against
//    their Riemannian specializations.
void criterion_riemannian_oracle() {
  bool pass = true;
  double worst = 0;
  std::string detail;
  for (const char* name : {"sphere2", "riem3_medium", "schw4_iso"}) {
    FinslerSpace s = make_catalog_space(name);
    SuiteReport rep = run_dynamics_suite(s, 2002, 50);
    for (const auto& r : rep.results) {
      if (r.name.find("mpd") == std::string::npos && r.name.find("riemannian_limit") == std::string::npos)
        continue;
      worst = std::max(worst, r.worst);
      if (!r.pass()) {
        pass = false;
        detail += std::string(name) + ":" + r.name + " ";
      }
    }
  }
  report(2, "riemannian oracle equivalence", pass, detail + fmt_worst(worst, 1e-8));
}

// 3. S = 0 momentum-transport trajectories coincide with spray geodesics.
void criterion_geodesic_recovery() {
  bool pass = true;
  double worst = 0;
  for (const char* name : {"sphere2", "randers3_axis"}) {
    FinslerSpace s = make_catalog_space(name);
    std::mt19937_64 rng(3003);
    Vec x, y;
    s.sample_admissible(rng, x, y);
    for (double tau_end : {2.0, 5.0}) {
      IntegratorConfig cfg;
      cfg.tau_end = tau_end;
      cfg.rel_tol = 1e-9;
      cfg.abs_tol = 1e-13;
      ClosureSpec spray;
      spray.kind = ClosureKind::Geodesic;
      ClosureSpec conn = spray;
      conn.geodesic_via_connection = true;
      TrajectoryRecord ra = integrate(s, spray, geodesic_state(x, y), cfg);
      TrajectoryRecord rb = integrate(s, conn, geodesic_state(x, y), cfg);
      if (ra.termination != Termination::ReachedTauEnd ||
          rb.termination != Termination::ReachedTauEnd) {
        pass = false;
        continue;
      }
      double d = std::max(max_abs(ra.back().state.X - rb.back().state.X),
                          max_abs(ra.back().state.P - rb.back().state.P));
      worst = std::max(worst, d);
    }
  }
  if (worst > 1e-8) pass = false;
  report(3, "geodesic recovery at S = 0", pass, fmt_worst(worst, 1e-8));
}

// 4. Conservation along integrated trajectories at rel_tol 1e-9 over at
//    least ten curvature times.
void criterion_conservation() {
  bool pass = true;
  double worst_psi = 0, worst_cas = 0, worst_tz = 0;
  std::string detail;

  auto audit_run = [&](const char* space_name, const ClosureSpec& closure,
                       const WorldlineState& st, double tau_end, double max_step) {
    FinslerSpace s = make_catalog_space(space_name);
    IntegratorConfig cfg;
    cfg.tau_end = tau_end;
    cfg.rel_tol = 1e-9;
    cfg.abs_tol = 1e-12;
    cfg.max_step = max_step;
    cfg.monitor_stride = 5;
    TrajectoryRecord rec = integrate(s, closure, st, cfg);
    if (rec.termination != Termination::ReachedTauEnd) {
      pass = false;
      detail += std::string(space_name) + ":" + rec.termination_detail + " ";
      return;
    }
    std::vector<std::string> names;
    for (const auto& kf : s.killing_fields) names.push_back(kf.name);
    AuditReport audit = conservation_audit(rec, names);
    for (const auto& ch : audit.channels) {
      if (ch.name.rfind("psi:", 0) == 0)
        worst_psi = std::max(worst_psi, ch.max_rel_drift);
      else if (ch.name == "p2" || ch.name == "s2")
        worst_cas = std::max(worst_cas, ch.max_rel_drift);
      else if (ch.name == "tulczyjew")
        worst_tz = std::max(worst_tz, ch.max_abs_drift);
    }
  };

  {
    ClosureSpec cl;
    cl.kind = ClosureKind::Geodesic;
    audit_run("sphere2", cl, geodesic_state(Vec{M_PI / 2, 0.0}, Vec{0.3, 1.0}), 15.0, 0.5);
  }
  {
    FinslerSpace s = make_catalog_space("randers3_axis");
    ClosureSpec cl;
    cl.kind = ClosureKind::Spinoptics3D;
    cl.p = 1.0;
    cl.s = 2e-3;
    audit_run("randers3_axis", cl, init_spinoptics3(s, Vec{1.2, 0.0, -0.3}, Vec{0.1, 1.0, 0.2}, 1.0),
              25.0, 1.0);
  }
  {
    FinslerSpace s = make_catalog_space("schw4_iso");
    ClosureSpec cl;
    cl.kind = ClosureKind::Massive4D;
    cl.m = 1.0;
    cl.s = 0.05;
    audit_run("schw4_iso", cl,
              init_massive4(s, Vec{0.0, 12.0, 0.0, 0.0}, Vec{1.0, 0.0, 0.2887, 0.0}, 1.0, 0.05, 1,
                            Vec{0.0, 0.0, 1.0}),
              420.0, 2.0);
  }
  {
    FinslerSpace s = make_catalog_space("randers4_curved");
    ClosureSpec cl;
    cl.kind = ClosureKind::Massive4D;
    cl.m = 1.0;
    cl.s = 0.05;
    audit_run("randers4_curved", cl,
              init_massive4(s, Vec{0.0, 12.0, 0.0, 0.0}, Vec{1.0, 0.0, 0.2887, 0.0}, 1.0, 0.05, 1,
                            Vec{0.0, 0.0, 1.0}),
              420.0, 2.0);
  }
  {
    FinslerSpace s = make_catalog_space("schw4_iso");
    ClosureSpec cl;
    cl.kind = ClosureKind::Massless4DObserver;
    cl.s = 1e-3;
    cl.observer = static_observer();
    audit_run("schw4_iso", cl,
              init_massless4(s, Vec{0.0, 0.0, 10.0, 0.0}, Vec{0.3, -0.05, 0.0}, 1e-3, 1,
                             cl.observer),
              60.0, 1.0);
  }

  if (worst_psi > 1e-6 || worst_cas > 1e-6 || worst_tz > 1e-8) pass = false;
  char buf[140];
  std::snprintf(buf, sizeof(buf), "(psi %.2e tol 1e-6; p2/s2 %.2e tol 1e-6; suppl %.2e tol 1e-8)",
                worst_psi, worst_cas, worst_tz);
  report(4, "conservation along trajectories", pass, detail + buf);
}

// 5. Ray-system closure consistency: the closed-form outputs satisfy the two
//    implicit pre-closure equations; the determinant and adjugate expressions
//    match generic linear algebra.
void criterion_spinoptics_consistency() {
  bool pass = true;
  double worst_resid = 0, worst_la = 0;
  for (const char* name : {"randers3_axis", "riem3_medium"}) {
    FinslerSpace s = make_catalog_space(name);
    SuiteReport rep = run_dynamics_suite(s, 5005, 50);
    for (const auto& r : rep.results) {
      if (r.name == "spinoptics_momentum_residual" || r.name == "spinoptics_kernel_residual") {
        worst_resid = std::max(worst_resid, r.worst);
        if (!r.pass()) pass = false;
      }
      if (r.name == "spinoptics_det_adjugate") {
        worst_la = std::max(worst_la, r.worst);
        if (!r.pass()) pass = false;
      }
    }
  }
  char buf[100];
  std::snprintf(buf, sizeof(buf), "(residuals %.2e tol 1e-8; det/adj %.2e tol 1e-10)", worst_resid,
                worst_la);
  report(5, "3d ray closure consistency", pass, buf);
}

// 6. Antisymmetric 4x4 algebra on 1000 random pairs with random metrics.
void criterion_pfaffian() {
  SuiteReport rep = run_pfaffian_suite(6006, 1000);
  bool pass = rep.all_pass();
  double worst = 0;
  for (const auto& r : rep.results) worst = std::max(worst, r.worst);
  report(6, "pfaffian and hodge identities", pass, fmt_worst(worst, 1e-10));
}

// 7. The massive closure is an O(s^3) truncation of the transport equations.
void criterion_truncation_order() {
  FinslerSpace s = make_catalog_space("randers4_curved");
  Vec x{0.0, 7.0, 2.0, 1.0}, dir{1.0, 0.15, -0.1, 0.05};
  Vec j{0.3, 1.0, -0.4};
  std::vector<double> svals, resid;
  for (double sv = 0.5; sv >= 0.004; sv *= 0.5) {
    WorldlineState st = init_massive4(s, x, dir, 1.0, sv, 1, j);
    GeometryFrame fr = frame_at(s, st.X, st.y, kFrameAll);
    ClosureRates r = close_massive4(fr, st, 1.0, sv);
    FmpdRates f = fmpd_rates(fr, st, r.Xdot, r.Ydot, FmpdForm::Cartan);
    double num = std::max(max_abs(f.covP - r.covP), max_abs(f.covS - r.covS));
    svals.push_back(sv);
    resid.push_back(std::max(num, 1e-300));
  }
  double slope = loglog_slope(svals, resid);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "(log-log slope %.2f, required >= 2.7)", slope);
  report(7, "massive truncation order", slope >= 2.7, buf);
}

// 8. Massless branch constraints.
void criterion_massless_constraints() {
  bool pass = true;
  std::string detail;

  // Orthogonality and momentum-rate proportionality of the exact branch.
  double worst_orth = 0, worst_par = 0;
  for (const char* name : {"quartic4_curved", "schw4_iso"}) {
    FinslerSpace s = make_catalog_space(name);
    std::mt19937_64 rng(8008);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int done = 0;
    for (int i = 0; i < 200 && done < 30; ++i) {
      Vec x, yy;
      s.sample_admissible(rng, x, yy);
      Vec k{u(rng), u(rng), u(rng)};
      try {
        WorldlineState st = init_massless4(s, x, k, 1e-3, 1, static_observer());
        GeometryFrame fr = frame_at(s, st.X, st.y, kFrameAll & ~kFrameNorm);
        ClosureRates r = close_massless4_exact(fr, st, 1e-3);
        double xp = std::abs(inner(fr.g, r.Xdot, st.P));
        worst_orth = std::max(worst_orth, xp / std::max(1.0, max_abs(r.Xdot) * max_abs(st.P)));
        double c = dot(r.covP, st.P) / dot(st.P, st.P);
        Vec off = r.covP - c * st.P;
        worst_par = std::max(worst_par, max_abs(off) / std::max(1e-30, max_abs(r.covP)));
        ++done;
      } catch (const Error&) {
        continue;
      }
    }
    if (done < 10) {
      pass = false;
      detail += std::string(name) + ": too few valid states ";
    }
  }
  if (worst_orth > 1e-9 || worst_par > 1e-9) pass = false;

  // Trace-polynomial inverse against LU on singular matrices.
  double worst_inv = 0;
  {
    std::mt19937_64 rng(8009);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      Mat M(4);
      for (int r2 = 0; r2 < 3; ++r2) {
        Vec a(4), b(4);
        for (int i = 0; i < 4; ++i) {
          a[i] = 0.4 * u(rng);
          b[i] = 0.4 * u(rng);
        }
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) M(i, j) += a[i] * b[j];
      }
      Mat lhs = inverse_one_minus_singular(M);
      Mat ref = inverse(Mat::identity(4) - M);
      worst_inv = std::max(worst_inv, max_abs(lhs - ref) / std::max(1.0, max_abs(ref)));
    }
    if (worst_inv > 1e-10) pass = false;
  }

  // Flat-space observer branch: exactly straight null rays.
  double worst_flat = 0;
  {
    FinslerSpace s = make_catalog_space("flat4");
    ClosureSpec cl;
    cl.kind = ClosureKind::Massless4DObserver;
    cl.s = 1e-3;
    cl.observer = static_observer();
    WorldlineState st = init_massless4(s, Vec(4), Vec{0.3, 1.0, -0.2}, 1e-3, 1, cl.observer);
    IntegratorConfig cfg;
    cfg.tau_end = 5.0;
    cfg.rel_tol = 1e-10;
    cfg.abs_tol = 1e-14;
    TrajectoryRecord rec = integrate(s, cl, st, cfg);
    if (rec.termination != Termination::ReachedTauEnd) {
      pass = false;
      detail += "flat observer run failed ";
    } else {
      const WorldlineState& fin = rec.back().state;
      Vec expect = st.X + fin.tau * st.P;
      worst_flat = std::max(max_abs(fin.X - expect), max_abs(fin.P - st.P));
      if (worst_flat > 1e-12) pass = false;
    }
  }

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "(orth %.2e par %.2e tol 1e-9; inverse %.2e tol 1e-10; flat ray %.2e)",
                worst_orth, worst_par, worst_inv, worst_flat);
  report(8, "massless branch constraints", pass, detail + buf);
}

// 9. Analytic jets agree with the stencil oracle on every bucket; the
//    homogeneity ladder holds.
void criterion_jets() {
  bool pass = true;
  double worst_stencil = 0, worst_ladder = 0;
  std::string worst_space;
  for (const std::string& name : catalog_names()) {
    FinslerSpace s = make_catalog_space(name);
    SuiteReport rep = run_jet_suite(s, 9009, 100);
    for (const auto& r : rep.results) {
      if (r.name == "jet_stencil_agreement") {
        if (r.worst > worst_stencil) {
          worst_stencil = r.worst;
          worst_space = name;
        }
        if (!r.pass()) pass = false;
      } else {
        worst_ladder = std::max(worst_ladder, r.worst);
        if (!r.pass()) pass = false;
      }
    }
  }
  char buf[140];
  std::snprintf(buf, sizeof(buf), "(stencil %.2e tol 1e-6 [%s]; ladder %.2e tol 1e-9)",
                worst_stencil, worst_space.c_str(), worst_ladder);
  report(9, "jet engine", pass, buf);
}

// 10. Integrator quality: self-convergence order, determinism, and
//     tolerance-coupled conservation.
void criterion_integrator_quality() {
  bool pass = true;
  std::string detail;

  double order = 0;
  {
    FinslerSpace s = make_catalog_space("sphere2");
    ClosureSpec cl;
    cl.kind = ClosureKind::Geodesic;
    IntegratorConfig base;
    base.tau_end = 3.0;
    base.max_step = 0.5;
    ConvergenceReport rep = convergence_study(s, cl, geodesic_state(Vec{M_PI / 2, 0.0}, Vec{0.3, 1.0}),
                                              base, {1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-11});
    order = rep.observed_order;
    if (rep.aborted || order < 4.0) pass = false;
  }

  bool deterministic = true;
  {
    FinslerSpace s = make_catalog_space("randers3_axis");
    ClosureSpec cl;
    cl.kind = ClosureKind::Spinoptics3D;
    cl.p = 1.0;
    cl.s = 1e-3;
    WorldlineState st = init_spinoptics3(s, Vec{1.0, 0.5, 0.0}, Vec{0.4, 1.0, -0.2}, 1.0);
    IntegratorConfig cfg;
    cfg.tau_end = 8.0;
    TrajectoryRecord a = integrate(s, cl, st, cfg);
    TrajectoryRecord b = integrate(s, cl, st, cfg);
    if (a.samples.size() != b.samples.size()) deterministic = false;
    for (size_t i = 0; deterministic && i < a.samples.size(); ++i) {
      const auto& sa = a.samples[i].state;
      const auto& sb = b.samples[i].state;
      for (int k = 0; k < 3; ++k)
        if (sa.X[k] != sb.X[k] || sa.P[k] != sb.P[k]) deterministic = false;
    }
    if (!deterministic) pass = false;
  }

  double worst_ratio = 0;
  {
    FinslerSpace s = make_catalog_space("sphere2");
    ClosureSpec cl;
    cl.kind = ClosureKind::Geodesic;
    WorldlineState st = geodesic_state(Vec{M_PI / 2, 0.0}, Vec{0.3, 1.0});
    double prev = -1;
    for (double tol : {4e-7, 2e-7, 1e-7, 5e-8}) {
      IntegratorConfig cfg;
      cfg.tau_end = 12.0;
      cfg.rel_tol = tol;
      cfg.abs_tol = 1e-15;
      cfg.max_step = 0.5;
      TrajectoryRecord rec = integrate(s, cl, st, cfg);
      AuditReport audit = conservation_audit(rec, {"rot_x", "rot_y", "rot_z"});
      double drift = 0;
      for (const auto& ch : audit.channels)
        if (ch.name.rfind("psi:", 0) == 0) drift = std::max(drift, ch.max_abs_drift);
      if (prev > 0) worst_ratio = std::max(worst_ratio, drift / prev);
      prev = drift;
    }
    if (worst_ratio > 0.5) pass = false;
  }

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "(order %.2f req >= 4; bit-identical %s; halving ratio %.3f req <= 0.5)", order,
                deterministic ? "yes" : "NO", worst_ratio);
  report(10, "integrator quality", pass, detail + buf);
}

}  // namespace

int main() {
  auto t0 = std::chrono::steady_clock::now();
  criterion_geometry_identities();
  criterion_riemannian_oracle();
  criterion_geodesic_recovery();
  criterion_conservation();
  criterion_spinoptics_consistency();
  criterion_pfaffian();
  criterion_truncation_order();
  criterion_massless_constraints();
  criterion_jets();
  criterion_integrator_quality();
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  std::printf("%d of 10 criteria passed in %.1f s\n", 10 - g_failures, secs);
  return g_failures;
}
