#include "finsler/integrator.hpp"

#include <algorithm>
#include <cmath>

#include "finsler/errors.hpp"

namespace finsler {

namespace {

// Packed ODE view of a closure: (X, y) for geodesics, (X, P) for spinoptics,
// (X, P, S-upper-triangle) for the 4D closures.
struct ClosureSystem {
  const FinslerSpace* space;
  const ClosureSpec* closure;
  int n;
  bool carries_spin;

  ClosureSystem(const FinslerSpace& sp, const ClosureSpec& cl)
      : space(&sp), closure(&cl), n(sp.n) {
    carries_spin = cl.kind == ClosureKind::Massive4D ||
                   cl.kind == ClosureKind::Massless4DExact ||
                   cl.kind == ClosureKind::Massless4DObserver;
  }

  int dim() const { return carries_spin ? 2 * n + n * (n - 1) / 2 : 2 * n; }

  void pack(const WorldlineState& st, std::vector<double>& v) const {
    v.resize(dim());
    int k = 0;
    for (int i = 0; i < n; ++i) v[k++] = st.X[i];
    for (int i = 0; i < n; ++i) v[k++] = st.P[i];
    if (carries_spin)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) v[k++] = st.S.S(i, j);
  }

  WorldlineState unpack(double tau, const std::vector<double>& v) const {
    WorldlineState st;
    st.tau = tau;
    st.X = Vec(n);
    st.P = Vec(n);
    int k = 0;
    for (int i = 0; i < n; ++i) st.X[i] = v[k++];
    for (int i = 0; i < n; ++i) st.P[i] = v[k++];
    st.y = st.P;
    st.S = SpinTensor::zero(n);
    if (carries_spin)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          st.S.S(i, j) = v[k];
          st.S.S(j, i) = -v[k];
          ++k;
        }
    return st;
  }

  ClosureRates rates(const WorldlineState& st, GeometryFrame* frame_out = nullptr) const {
    GeometryFrame fr = frame_at(*space, st.X, st.y, closure_frame_needs(*closure));
    ClosureRates r = evaluate_closure(fr, st, *closure);
    if (frame_out) *frame_out = fr;
    return r;
  }

  void rhs(double tau, const std::vector<double>& v, std::vector<double>& dv) const {
    WorldlineState st = unpack(tau, v);
    ClosureRates r = rates(st);
    dv.resize(dim());
    int k = 0;
    for (int i = 0; i < n; ++i) dv[k++] = r.Xdot[i];
    for (int i = 0; i < n; ++i) dv[k++] = r.dP[i];
    if (carries_spin)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) dv[k++] = r.dS(i, j);
  }
};

void check_initial_constraints(const FinslerSpace& space, const ClosureSpec& closure,
                               const WorldlineState& st) {
  const double tol = 1e-10;
  GeometryFrame fr = frame_at(space, st.X, st.y, kFrameMetric);
  double p2 = inner(fr.g, st.P, st.P);
  switch (closure.kind) {
    case ClosureKind::Geodesic:
      break;
    case ClosureKind::Spinoptics3D: {
      if (std::abs(std::sqrt(p2) - closure.p) > tol * std::max(1.0, closure.p))
        throw InputError("integrate: initial momentum norm does not match p");
      break;
    }
    case ClosureKind::Massive4D: {
      if (!(p2 > 0)) throw SignatureError("integrate: initial momentum is not timelike");
      if (std::abs(std::sqrt(p2) - closure.m) > tol * std::max(1.0, closure.m))
        throw InputError("integrate: initial momentum norm does not match m");
      double scale = max_abs(st.S.S) * max_abs(st.P);
      if (st.S.kernel_residual(fr.g, st.P) > tol * std::max(1.0, scale))
        throw InputError("integrate: initial dipole violates the supplementary condition");
      break;
    }
    case ClosureKind::Massless4DExact:
    case ClosureKind::Massless4DObserver: {
      double yscale = std::max(1.0, dot(st.y, st.y));
      if (std::abs(fr.L) > tol * yscale)
        throw InputError("integrate: initial direction is not null");
      double scale = max_abs(st.S.S) * max_abs(st.P);
      if (st.S.kernel_residual(fr.g, st.P) > tol * std::max(1.0, scale))
        throw InputError("integrate: initial dipole violates the supplementary condition");
      break;
    }
  }
}

void project_state(const FinslerSpace& space, const ClosureSpec& closure, WorldlineState& st,
                   double p2_target, double s2_target) {
  if (closure.kind != ClosureKind::Massive4D && closure.kind != ClosureKind::Spinoptics3D) return;
  GeometryFrame fr = frame_at(space, st.X, st.y, kFrameMetric);
  double p2 = inner(fr.g, st.P, st.P);
  if (p2 > 0 && p2_target > 0) {
    double c = std::sqrt(p2_target / p2);
    st.P = c * st.P;
    st.y = st.P;
  }
  if (closure.kind == ClosureKind::Massive4D && s2_target > 0) {
    // Re-orthogonalize S against P, then restore the spin magnitude.
    GeometryFrame fr2 = frame_at(space, st.X, st.y, kFrameMetric);
    Vec u = (1.0 / std::sqrt(inner(fr2.g, st.P, st.P))) * st.P;
    Vec ul = fr2.lower(u);
    Vec su = st.S.contract_low(ul);  // S^{mu a} u_a
    Mat s2m = st.S.S;
    for (int mu = 0; mu < st.S.dim(); ++mu)
      for (int nu = 0; nu < st.S.dim(); ++nu)
        s2m(mu, nu) -= su[mu] * u[nu] - su[nu] * u[mu];
    SpinTensor sp;
    sp.S = s2m;
    double s2 = sp.scalar_spin_sq(fr2.g);
    if (s2 > 0) {
      double c = std::sqrt(s2_target / s2);
      for (int mu = 0; mu < sp.dim(); ++mu)
        for (int nu = 0; nu < sp.dim(); ++nu) sp.S(mu, nu) *= c;
    }
    st.S = sp;
  }
}

struct DormandPrince {
  static constexpr int stages = 7;
  static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
  };
  static constexpr double b5[7] = {35.0 / 384,      0.0,  500.0 / 1113, 125.0 / 192,
                                   -2187.0 / 6784, 11.0 / 84, 0.0};
  static constexpr double b4[7] = {5179.0 / 57600,    0.0,          7571.0 / 16695, 393.0 / 640,
                                   -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
};

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0) || !(abs_tol > 0)) throw InputError("integrator: tolerances must be positive");
  if (!(min_step < max_step)) throw InputError("integrator: min_step must be below max_step");
  if (monitor_stride < 1) throw InputError("integrator: monitor_stride must be >= 1");
  if (!(tau_end > 0)) throw InputError("integrator: tau_end must be positive");
}

TrajectoryRecord integrate(const FinslerSpace& space, const ClosureSpec& closure,
                           const WorldlineState& initial, const IntegratorConfig& config) {
  closure.validate(space);
  config.validate();
  check_initial_constraints(space, closure, initial);

  ClosureSystem sys(space, closure);
  TrajectoryRecord rec;
  for (const auto& kf : space.killing_fields) rec.psi_names.push_back(kf.name);

  const unsigned monitor_needs = closure_frame_needs(closure) | kFrameMetric | kFrameCartan |
                                 kFrameSpray | kFrameConnection;

  std::vector<double> v, dv, vtmp, verr;
  sys.pack(initial, v);
  double tau = 0.0;

  // Conserved targets for the optional projection.
  GeometryFrame fr0 = frame_at(space, initial.X, initial.y, kFrameMetric);
  const double p2_target = inner(fr0.g, initial.P, initial.P);
  const double s2_target = initial.S.scalar_spin_sq(fr0.g);

  auto record_sample = [&](const WorldlineState& st) {
    GeometryFrame fr = frame_at(space, st.X, st.y, monitor_needs);
    ClosureRates r = evaluate_closure(fr, st, closure);
    TrajectorySample sample;
    sample.state = st;
    if (closure.kind == ClosureKind::Spinoptics3D)
      sample.state.S = spin_axial_3d(fr, closure.signed_spin());
    sample.monitors = constraint_monitors(fr, st, closure, &r);
    rec.samples.push_back(std::move(sample));
  };

  try {
    record_sample(sys.unpack(tau, v));
  } catch (const ClosureSingularityError& e) {
    rec.termination = Termination::ClosureSingularity;
    rec.termination_detail = e.what();
    rec.termination_tau = tau;
    return rec;
  } catch (const Error& e) {
    rec.termination = Termination::EvaluationFailure;
    rec.termination_detail = e.what();
    rec.termination_tau = tau;
    return rec;
  }

  const bool adaptive = config.method == StepMethod::Rk45Adaptive;
  double h = config.init_step;
  if (h <= 0) h = std::min(config.max_step, config.tau_end / 100.0);
  if (!adaptive && config.init_step <= 0) h = std::min(config.max_step, config.tau_end / 400.0);

  std::vector<std::vector<double>> k(DormandPrince::stages);
  long since_monitor = 0;

  try {
    while (tau < config.tau_end) {
      bool final_step = false;
      if (tau + h >= config.tau_end) {
        h = config.tau_end - tau;
        final_step = true;
      }

      if (!adaptive) {
        // Classic fixed-step fourth-order step.
        std::vector<double> k1, k2, k3, k4;
        sys.rhs(tau, v, k1);
        vtmp = v;
        for (size_t i = 0; i < v.size(); ++i) vtmp[i] = v[i] + 0.5 * h * k1[i];
        sys.rhs(tau + 0.5 * h, vtmp, k2);
        for (size_t i = 0; i < v.size(); ++i) vtmp[i] = v[i] + 0.5 * h * k2[i];
        sys.rhs(tau + 0.5 * h, vtmp, k3);
        for (size_t i = 0; i < v.size(); ++i) vtmp[i] = v[i] + h * k3[i];
        sys.rhs(tau + h, vtmp, k4);
        for (size_t i = 0; i < v.size(); ++i)
          v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        rec.rhs_evaluations += 4;
        tau = final_step ? config.tau_end : tau + h;
        rec.steps_accepted++;
        rec.accepted_steps.push_back(h);
        rec.error_estimates.push_back(0.0);
      } else {
        for (int s = 0; s < DormandPrince::stages; ++s) {
          vtmp = v;
          for (int j = 0; j < s; ++j) {
            double aij = DormandPrince::a[s][j];
            if (aij == 0.0) continue;
            for (size_t i = 0; i < v.size(); ++i) vtmp[i] += h * aij * k[j][i];
          }
          sys.rhs(tau + DormandPrince::c[s] * h, vtmp, k[s]);
          rec.rhs_evaluations++;
        }
        std::vector<double> v5 = v;
        double err = 0.0;
        verr.assign(v.size(), 0.0);
        for (int s = 0; s < DormandPrince::stages; ++s) {
          double w5 = DormandPrince::b5[s], w4 = DormandPrince::b4[s];
          for (size_t i = 0; i < v.size(); ++i) {
            v5[i] += h * w5 * k[s][i];
            verr[i] += h * (w5 - w4) * k[s][i];
          }
        }
        for (size_t i = 0; i < v.size(); ++i) {
          double sc = config.abs_tol +
                      config.rel_tol * std::max(std::abs(v[i]), std::abs(v5[i]));
          double q = verr[i] / sc;
          err += q * q;
        }
        err = std::sqrt(err / static_cast<double>(v.size()));
        // Error-per-unit-step control keeps the accumulated drift proportional
        // to the tolerance.
        err /= std::max(h, 1e-300);

        if (err <= 1.0) {
          tau = final_step ? config.tau_end : tau + h;
          v = v5;
          rec.steps_accepted++;
          rec.accepted_steps.push_back(h);
          rec.error_estimates.push_back(err);
        } else {
          rec.steps_rejected++;
          final_step = false;
        }
        double factor = 0.9 * std::pow(std::max(err, 1e-10), -0.25);
        factor = std::clamp(factor, 0.2, 5.0);
        h = std::min(h * factor, config.max_step);
        if (h < config.min_step && tau < config.tau_end) {
          rec.termination = Termination::Stiffness;
          rec.termination_detail = "step size underflow";
          rec.termination_tau = tau;
          return rec;
        }
        if (err > 1.0) continue;
      }

      if (config.projection == ProjectionMode::RenormalizeConstraints) {
        WorldlineState st = sys.unpack(tau, v);
        project_state(space, closure, st, p2_target, s2_target);
        sys.pack(st, v);
      }

      since_monitor++;
      if (since_monitor >= config.monitor_stride || final_step || tau >= config.tau_end) {
        record_sample(sys.unpack(tau, v));
        since_monitor = 0;
      }
    }
  } catch (const ClosureSingularityError& e) {
    rec.termination = Termination::ClosureSingularity;
    rec.termination_detail = e.what();
    rec.termination_tau = tau;
    return rec;
  } catch (const Error& e) {
    rec.termination = Termination::EvaluationFailure;
    rec.termination_detail = e.what();
    rec.termination_tau = tau;
    return rec;
  }

  rec.termination = Termination::ReachedTauEnd;
  rec.termination_tau = tau;
  return rec;
}

ConvergenceReport convergence_study(const FinslerSpace& space, const ClosureSpec& closure,
                                    const WorldlineState& initial, const IntegratorConfig& base,
                                    const std::vector<double>& tol_list) {
  if (tol_list.size() < 3)
    throw InputError("convergence_study: need at least 3 tolerances");
  double lo = *std::min_element(tol_list.begin(), tol_list.end());
  double hi = *std::max_element(tol_list.begin(), tol_list.end());
  if (!(hi / lo >= 100.0))
    throw InputError("convergence_study: tolerances must span at least 2 decades");

  ConvergenceReport rep;
  auto run_at = [&](double tol) {
    IntegratorConfig cfg = base;
    if (base.method == StepMethod::Rk45Adaptive) {
      cfg.rel_tol = tol;
      cfg.abs_tol = std::min(base.abs_tol, tol * 1e-3);
    } else {
      cfg.init_step = tol;
      cfg.max_step = std::max(tol, base.max_step);
    }
    return integrate(space, closure, initial, cfg);
  };

  TrajectoryRecord ref = run_at(lo);
  if (ref.termination != Termination::ReachedTauEnd) {
    rep.aborted = true;
    rep.note = "reference run terminated early: " + ref.termination_detail;
    return rep;
  }

  std::vector<double> sorted = tol_list;
  std::sort(sorted.begin(), sorted.end());
  for (double tol : sorted) {
    if (tol == lo) continue;
    TrajectoryRecord run = run_at(tol);
    if (run.termination != Termination::ReachedTauEnd) {
      rep.aborted = true;
      rep.note = "run terminated early: " + run.termination_detail;
      return rep;
    }
    const WorldlineState& a = run.back().state;
    const WorldlineState& b = ref.back().state;
    double err = std::max(max_abs(a.X - b.X), max_abs(a.P - b.P));
    err = std::max(err, max_abs(a.S.S - b.S.S));
    double mean_h = run.accepted_steps.empty()
                        ? base.tau_end
                        : base.tau_end / static_cast<double>(run.accepted_steps.size());
    rep.tols.push_back(tol);
    rep.final_errors.push_back(std::max(err, 1e-300));
    rep.mean_steps.push_back(mean_h);
  }

  // Least-squares slope of log(error) against log(mean step).
  int m = static_cast<int>(rep.tols.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    double lx = std::log(rep.mean_steps[i]);
    double ly = std::log(rep.final_errors[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double denom = m * sxx - sx * sx;
  rep.observed_order = denom != 0 ? (m * sxy - sx * sy) / denom : 0.0;
  for (int i = 1; i < m; ++i)
    if (rep.final_errors[i] < rep.final_errors[i - 1]) rep.monotone = false;
  return rep;
}

AuditReport conservation_audit(const TrajectoryRecord& record,
                               const std::vector<std::string>& killing_names) {
  if (record.samples.empty()) throw InputError("conservation_audit: empty record");
  AuditReport rep;

  auto add_channel = [&](const std::string& name, double floor, auto getter) {
    AuditChannel ch;
    ch.name = name;
    ch.initial = getter(record.samples.front().monitors);
    for (const auto& s : record.samples) {
      double d = std::abs(getter(s.monitors) - ch.initial);
      ch.max_abs_drift = std::max(ch.max_abs_drift, d);
    }
    ch.max_rel_drift = ch.max_abs_drift / std::max(std::abs(ch.initial), floor);
    rep.channels.push_back(ch);
  };

  // Conserved quantities that start at exactly zero stay zero; their drift is
  // measured against the magnitude of the system's other conserved channels.
  double psi_scale = 0.0;
  for (double v : record.samples.front().monitors.psi) psi_scale = std::max(psi_scale, std::abs(v));
  const double psi_floor = std::max(1e-6, 0.05 * psi_scale);

  for (const std::string& name : killing_names) {
    int idx = -1;
    for (size_t i = 0; i < record.psi_names.size(); ++i)
      if (record.psi_names[i] == name) idx = static_cast<int>(i);
    if (idx < 0) throw InputError("conservation_audit: unknown conserved-quantity channel " + name);
    add_channel("psi:" + name, psi_floor, [idx](const MonitorRecord& m) { return m.psi[idx]; });
  }
  // P.P and L are identically zero on the null branch; measure their drift
  // against the momentum scale there.
  double pscale = max_abs(record.samples.front().state.P);
  const double p2_floor = std::max(1e-6, 1e-2 * pscale * pscale);
  add_channel("p2", p2_floor, [](const MonitorRecord& m) { return m.p2; });
  add_channel("s2", 1e-6, [](const MonitorRecord& m) { return m.s2; });
  add_channel("L", p2_floor, [](const MonitorRecord& m) { return m.L; });

  AuditChannel tz;
  tz.name = "tulczyjew";
  for (const auto& s : record.samples)
    tz.max_abs_drift = std::max(tz.max_abs_drift, s.monitors.sp_max);
  tz.max_rel_drift = tz.max_abs_drift;
  rep.channels.push_back(tz);
  return rep;
}

}  // namespace finsler
