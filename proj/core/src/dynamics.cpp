#include "finsler/dynamics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "finsler/errors.hpp"

namespace finsler {

namespace {

Vec contract_spin(const Mat& S_upper, const Vec& w_low) { return matvec(S_upper, w_low); }

// (R_S . v)_beta = R_S(beta, la) v^la
Vec curvature_force(const Mat& R_S, const Vec& v) { return matvec(R_S, v); }

double double_contraction(const Mat& a_low, const Mat& s_upper) {
  double acc = 0;
  for (int i = 0; i < a_low.n; ++i)
    for (int j = 0; j < a_low.n; ++j) acc += a_low(i, j) * s_upper(i, j);
  return acc;
}

// Gamma^mu_{nu si} P^nu as a matrix acting on Xdot^si.
Mat connection_on(const GeometryFrame& fr, const Vec& P) {
  const int n = fr.x.n;
  Mat gp(n);
  for (int mu = 0; mu < n; ++mu)
    for (int si = 0; si < n; ++si) {
      double v = 0;
      for (int nu = 0; nu < n; ++nu) v += fr.Gamma(mu, nu, si) * P[nu];
      gp(mu, si) = v;
    }
  return gp;
}

// C^mu{}_{nu la} with the first index raised.
double cartan_up(const GeometryFrame& fr, int mu, int nu, int la) {
  double v = 0;
  for (int a = 0; a < fr.x.n; ++a) v += fr.g_inv(mu, a) * fr.C(a, nu, la);
  return v;
}

Mat raw_dipole_rate(const GeometryFrame& fr, const Mat& S_upper, const Mat& covS,
                    const Vec& Xdot, const Vec& Ydot) {
  const int n = fr.x.n;
  Mat dS = covS;
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      double acc = 0;
      for (int nu = 0; nu < n; ++nu)
        for (int si = 0; si < n; ++si) {
          acc += fr.Gamma(mu, nu, si) * S_upper(nu, la) * Xdot[si] +
                 fr.Gamma(la, nu, si) * S_upper(mu, nu) * Xdot[si];
          acc += cartan_up(fr, mu, nu, si) * S_upper(nu, la) * Ydot[si] +
                 cartan_up(fr, la, nu, si) * S_upper(mu, nu) * Ydot[si];
        }
      dS(mu, la) -= acc;
    }
  return dS;
}

// Raw rates for closures whose momentum is parallel to y; the vertical
// connection term on P vanishes there (C . y = 0).
void finish_rates(const GeometryFrame& fr, const WorldlineState& state, ClosureRates& r) {
  Mat gp = connection_on(fr, state.P);
  r.dP = r.covP - matvec(gp, r.Xdot);
  r.Ydot = r.dP + matvec(fr.N, r.Xdot);
  r.dS = raw_dipole_rate(fr, state.S.S, r.covS, r.Xdot, r.Ydot);
}

}  // namespace

void ClosureSpec::validate(const FinslerSpace& space) const {
  if (s < 0) throw InputError("closure: scalar spin magnitude must be >= 0");
  switch (kind) {
    case ClosureKind::Geodesic:
      break;
    case ClosureKind::Spinoptics3D:
      if (space.n != 3 || space.signature != Signature::PositiveDefinite)
        throw InputError("spinoptics closure requires a positive-definite space of dimension 3");
      if (!(p > 0)) throw InputError("spinoptics closure requires p > 0");
      break;
    case ClosureKind::Massive4D:
      if (space.n != 4 || space.signature != Signature::Lorentzian)
        throw InputError("massive closure requires a Lorentzian space of dimension 4");
      if (!(m > 0)) throw InputError("massive closure requires m > 0");
      break;
    case ClosureKind::Massless4DExact:
      if (space.n != 4 || space.signature != Signature::Lorentzian)
        throw InputError("massless closure requires a Lorentzian space of dimension 4");
      break;
    case ClosureKind::Massless4DObserver:
      if (space.n != 4 || space.signature != Signature::Lorentzian)
        throw InputError("massless closure requires a Lorentzian space of dimension 4");
      if (!observer.valid()) throw InputError("observer closure requires an observer field");
      break;
  }
}

FmpdRates fmpd_rates(const GeometryFrame& fr, const WorldlineState& state, const Vec& Xdot,
                     const Vec& Ydot, FmpdForm form) {
  const int n = fr.x.n;
  const bool homogeneous = form != FmpdForm::CartanInhomogeneous;
  if (homogeneous && !fr.has_norm)
    throw NullDirectionError("fmpd_rates: homogeneous form requested on a null direction");
  CurvatureContractions cc = curvature_contractions(fr, state.S, false);

  // Written with inhomogeneous objects (C, y, unnormalized Ydot) throughout;
  // the normalizing powers of F cancel between the tensors and the rates.
  FmpdRates out;
  out.covP = Vec(n);
  for (int la = 0; la < n; ++la) {
    double v = 0;
    for (int nu = 0; nu < n; ++nu) {
      double rsup = 0, psup = 0;
      for (int a = 0; a < n; ++a) {
        rsup += fr.g_inv(la, a) * cc.R_S(a, nu);
        psup += fr.g_inv(la, a) * cc.P_S(a, nu);
      }
      v += 0.5 * rsup * Xdot[nu] + 0.5 * psup * Ydot[nu];
    }
    double cterm = 0;
    for (int si = 0; si < n; ++si)
      for (int mu = 0; mu < n; ++mu) cterm += state.P[si] * cartan_up(fr, la, si, mu) * Ydot[mu];
    v -= (form == FmpdForm::Chern ? 2.0 : 1.0) * cterm;
    out.covP[la] = v;
  }

  // P_I(S)_nu{}^mu and Qhat_I(S)_nu{}^mu (second slot raised).
  Mat p_up(n), q_up(n);
  for (int nu = 0; nu < n; ++nu)
    for (int mu = 0; mu < n; ++mu) {
      double pv = 0, qv = 0;
      for (int a = 0; a < n; ++a) {
        pv += cc.P_S(nu, a) * fr.g_inv(a, mu);
        qv += cc.Qhat_S(nu, a) * fr.g_inv(a, mu);
      }
      p_up(nu, mu) = pv;
      q_up(nu, mu) = qv;
    }

  out.covS = Mat(n);
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      double v = state.P[mu] * Xdot[la] - state.P[la] * Xdot[mu];
      for (int nu = 0; nu < n; ++nu)
        for (int si = 0; si < n; ++si)
          v += Xdot[nu] * state.P[si] *
               (cartan_up(fr, la, si, nu) * state.y[mu] - cartan_up(fr, mu, si, nu) * state.y[la]);
      for (int nu = 0; nu < n; ++nu) {
        v += 0.5 * Xdot[nu] * (p_up(nu, mu) * state.y[la] - p_up(nu, la) * state.y[mu]);
        v -= 0.5 * Ydot[nu] * (q_up(nu, mu) * state.y[la] - q_up(nu, la) * state.y[mu]);
        if (form == FmpdForm::Chern) {
          for (int si = 0; si < n; ++si)
            v -= Ydot[nu] * (cartan_up(fr, la, si, nu) * state.S.S(mu, si) -
                             cartan_up(fr, mu, si, nu) * state.S.S(la, si));
        }
      }
      out.covS(mu, la) = v;
    }
  return out;
}

Vec geodesic_rhs(const FinslerSpace& space, const Vec& x, const Vec& xdot) {
  GeometryFrame fr = frame_at(space, x, xdot, kFrameMetric | kFrameSpray);
  return -1.0 * fr.G;
}

// --- antisymmetric algebra ----------------------------------------------------

double pfaffian4(const Mat& omega) {
  if (omega.n != 4) throw InputError("pfaffian4: matrix must be 4x4");
  double scale = std::max(1.0, max_abs(omega));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= i; ++j)
      if (std::abs(omega(i, j) + omega(j, i)) > 1e-12 * scale)
        throw InputError("pfaffian4: matrix is not antisymmetric");
  return omega(0, 1) * omega(2, 3) - omega(0, 2) * omega(1, 3) + omega(0, 3) * omega(1, 2);
}

double pfaffian4_weighted(const Mat& omega_low, const Mat& g) {
  return pfaffian4(omega_low) / std::sqrt(std::abs(det(g)));
}

Mat hodge_dual(const Mat& f_low, const Mat& g) {
  if (f_low.n != 4 || g.n != 4) throw InputError("hodge_dual: dimension must be 4");
  double scale = std::max(1.0, max_abs(f_low));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= i; ++j)
      if (std::abs(f_low(i, j) + f_low(j, i)) > 1e-12 * scale)
        throw InputError("hodge_dual: tensor is not antisymmetric");
  Mat ginv = inverse(g);
  Mat f_up = matmul(ginv, matmul(f_low, ginv));
  double w = std::sqrt(std::abs(det(g)));
  Mat out(4);
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) {
      double v = 0;
      for (int la = 0; la < 4; ++la)
        for (int si = 0; si < 4; ++si) {
          int sign = perm_sign4(mu, nu, la, si);
          if (sign != 0) v += 0.5 * sign * f_up(la, si);
        }
      out(mu, nu) = w * v;
    }
  return out;
}

Mat inverse_one_minus_singular(const Mat& M) {
  if (M.n != 4) throw InputError("inverse_one_minus_singular: matrix must be 4x4");
  Mat M2 = matmul(M, M), M3 = matmul(M2, M);
  double t1 = 0, t2 = 0, t3 = 0;
  for (int i = 0; i < 4; ++i) {
    t1 += M(i, i);
    t2 += M2(i, i);
    t3 += M3(i, i);
  }
  double c2 = 0.5 * (t1 * t1 - t2);
  double c3 = (t1 * t1 * t1 - 3.0 * t1 * t2 + 2.0 * t3) / 6.0;
  double den = 1.0 - t1 + c2 - c3;
  if (den == 0.0)
    throw ClosureSingularityError("trace_polynomial", den,
                                  "inverse_one_minus_singular: vanishing trace polynomial");
  Mat num = (1.0 - t1 + c2) * M + (1.0 - t1) * M2 + M3;
  Mat out = Mat::identity(4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out(i, j) += num(i, j) / den;
  return out;
}

// --- dipole construction --------------------------------------------------------

SpinTensor spin_axial_3d(const GeometryFrame& fr, double s) {
  if (fr.x.n != 3) throw InputError("spin_axial_3d: dimension must be 3");
  if (!fr.has_norm) throw NullDirectionError("spin_axial_3d: requires L > 0");
  Mat low(3);
  for (int mu = 0; mu < 3; ++mu)
    for (int nu = 0; nu < 3; ++nu) {
      double v = 0;
      for (int la = 0; la < 3; ++la) v += fr.epsilon_low(mu, nu, la) * fr.l[la];
      low(mu, nu) = s * v;
    }
  Mat upper = matmul(fr.g_inv, matmul(low, fr.g_inv));
  for (int i = 0; i < 3; ++i) {
    upper(i, i) = 0;
    for (int j = i + 1; j < 3; ++j) upper(j, i) = -upper(i, j);
  }
  SpinTensor t;
  t.S = upper;
  return t;
}

SpinTensor spin_from_kernel_pair(const GeometryFrame& fr, const Vec& P, const Vec& v, double s) {
  if (fr.x.n != 4) throw InputError("spin_from_kernel_pair: dimension must be 4");
  double pv = inner(fr.g, P, v);
  double pp = inner(fr.g, P, P);
  double vv = inner(fr.g, v, v);
  double gram = pv * pv - pp * vv;
  if (!(gram > 0))
    throw InputError("spin_from_kernel_pair: kernel pair does not span a definite plane");
  double c = s / std::sqrt(gram);
  Mat low(4);
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) {
      double acc = 0;
      for (int la = 0; la < 4; ++la)
        for (int si = 0; si < 4; ++si) {
          int sign = perm_sign4(mu, nu, la, si);
          if (sign != 0) acc += sign * v[la] * P[si];
        }
      low(mu, nu) = c * fr.sqrt_abs_det_g * acc;
    }
  Mat upper = matmul(fr.g_inv, matmul(low, fr.g_inv));
  for (int i = 0; i < 4; ++i) {
    upper(i, i) = 0;
    for (int j = i + 1; j < 4; ++j) upper(j, i) = -upper(i, j);
  }
  SpinTensor t;
  t.S = upper;
  return t;
}

// --- closures ----------------------------------------------------------------------

ClosureRates close_spinoptics3(const GeometryFrame& fr, const WorldlineState& state,
                               double p_nominal, double s) {
  (void)p_nominal;  // the actual norm of P is used; drift shows up in monitors
  if (fr.x.n != 3) throw InputError("spinoptics closure: dimension must be 3");
  if (s == 0.0)
    throw DegenerateSpinError("spinoptics closure: s = 0 is degenerate; use the geodesic system");
  if (!fr.has_norm) throw NullDirectionError("spinoptics closure: L <= 0");
  const int n = 3;
  const double p = fr.F;

  SpinTensor S = spin_axial_3d(fr, s);
  CurvatureContractions cc = curvature_contractions(fr, S, /*homogeneous=*/true);

  double tr_p = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int a = 0; a < n; ++a) tr_p += fr.g_inv(mu, a) * cc.P_S(a, mu);
  double quart = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu)
      for (int la = 0; la < n; ++la)
        for (int rho = 0; rho < n; ++rho)
          quart += cc.P_S(mu, nu) * cc.P_S(la, rho) * S.S(mu, la) * S.S(nu, rho);

  SpinopticsDiagnostics diag;
  diag.sigma_tilde = p * p - 0.5 * p * tr_p + quart / (8.0 * s * s);
  double qss = double_contraction(cc.Qhat_S, S.S);
  diag.delta = s * (1.0 + qss / (4.0 * s * s));
  diag.rss = double_contraction(cc.R_S, S.S);

  if (std::abs(diag.sigma_tilde) < 1e-12 * std::max(1.0, p * p))
    throw ClosureSingularityError("Sigma_tilde", diag.sigma_tilde,
                                  "spinoptics closure: Sigma_tilde vanished");
  if (std::abs(diag.delta) < 1e-12 * std::abs(s))
    throw ClosureSingularityError("Delta", diag.delta, "spinoptics closure: Delta vanished");
  double term1 = diag.sigma_tilde / diag.delta;
  double term2 = diag.rss / (4.0 * s);
  diag.sigma = term1 + term2;
  if (std::abs(diag.sigma) < 1e-12 * (std::abs(term1) + std::abs(term2)))
    throw ClosureSingularityError("Sigma", diag.sigma, "spinoptics closure: Sigma vanished");

  ClosureRates out;
  out.diag = diag;

  Vec w = curvature_force(cc.R_S, fr.l);  // (R(S) . l)_nu
  Vec srl = contract_spin(S.S, w);        // (S R(S) l)^mu
  out.Xdot = fr.l + (1.0 / (2.0 * s * diag.sigma)) * srl;

  // covP = -(p / s Delta) S [p I - P(S)^T / 2] Xdot
  Vec xl = fr.lower(out.Xdot);
  Vec pv(n);
  for (int a = 0; a < n; ++a) {
    double v = 0;
    for (int la = 0; la < n; ++la) v += cc.P_S(la, a) * out.Xdot[la];
    pv[a] = v;
  }
  out.covP = Vec(n);
  for (int mu = 0; mu < n; ++mu) {
    double v = 0;
    for (int a = 0; a < n; ++a) v += S.S(mu, a) * (p * xl[a] - 0.5 * pv[a]);
    out.covP[mu] = -(p / (s * diag.delta)) * v;
  }

  out.covS = Mat(n);
  WorldlineState with_spin = state;
  with_spin.S = S;
  finish_rates(fr, with_spin, out);
  out.dS = Mat(n);  // the 3D dipole is derived from P, not integrated
  return out;
}

ClosureRates close_massive4(const GeometryFrame& fr, const WorldlineState& state, double m_nominal,
                            double s) {
  (void)m_nominal;
  (void)s;  // the dipole scale is carried by state.S
  if (fr.x.n != 4) throw InputError("massive closure: dimension must be 4");
  double p2 = inner(fr.g, state.P, state.P);
  if (!(p2 > 0)) throw SignatureError("massive closure: momentum is not timelike");
  if (!fr.has_norm) throw NullDirectionError("massive closure: L <= 0 along y");
  const int n = 4;
  const double m2 = p2;
  const double m = std::sqrt(p2);

  CurvatureContractions cc = curvature_contractions(fr, state.S, /*homogeneous=*/true);
  Vec rp = curvature_force(cc.R_S, state.P);  // (R(S) . P)_beta
  Vec srp = contract_spin(state.S.S, rp);     // (S R(S) P)^mu
  Vec qrp(n);                                 // (Qhat(S) R(S) P)^mu
  for (int mu = 0; mu < n; ++mu) {
    double v = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          v += fr.g_inv(mu, a) * cc.Qhat_S(a, b) * fr.g_inv(b, c) * rp[c];
    qrp[mu] = v;
  }

  ClosureRates out;
  out.Xdot = state.P + (1.0 / (2.0 * m2)) * (srp + 0.5 * qrp);

  out.covP = Vec(n);
  for (int la = 0; la < n; ++la) {
    double v = 0;
    for (int a = 0; a < n; ++a) v += 0.5 * fr.g_inv(la, a) * rp[a];
    double w = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) w += fr.g_inv(la, a) * cc.P_S(a, b) * fr.g_inv(b, c) * rp[c];
    out.covP[la] = v + w / (4.0 * m);
  }

  out.covS = Mat(n);
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la)
      out.covS(mu, la) = (state.P[mu] * srp[la] - state.P[la] * srp[mu]) / (2.0 * m2);

  out.diag.rss = double_contraction(cc.R_S, state.S.S);
  finish_rates(fr, state, out);
  return out;
}

ClosureRates close_massless4_exact(const GeometryFrame& fr, const WorldlineState& state,
                                   double s) {
  (void)s;  // the dipole scale and helicity are carried by state.S
  if (fr.x.n != 4) throw InputError("massless closure: dimension must be 4");
  double yscale = dot(state.y, state.y);
  if (std::abs(fr.L) > 1e-6 * std::max(1.0, yscale))
    throw ConstraintError("massless closure: momentum is not null (L != 0)");
  const int n = 4;

  CurvatureContractions cc = curvature_contractions(fr, state.S, /*homogeneous=*/false);
  double rss = double_contraction(cc.R_S, state.S.S);
  double rss_scale = frobenius(cc.R_S) * frobenius(state.S.S);
  if (std::abs(rss) <= 1e-12 * std::max(rss_scale, 1e-300))
    throw ClosureSingularityError(
        "R(S)(S)", rss, "massless exact closure: R(S)(S) vanished; use the observer-form closure");

  ClosureRates out;
  out.diag.rss = rss;

  Vec rp = curvature_force(cc.R_S, state.P);
  Vec srp = contract_spin(state.S.S, rp);
  out.Xdot = state.P + (2.0 / rss) * srp;

  // Momentum rate (Pf(R(S)) / R(S)(S)) (star S) P; with the kernel-pair
  // dipole this equals s Pf(R(S)) / R(S)(S) P, with s read off the tensor.
  double pf = pfaffian4_weighted(cc.R_S, fr.g);
  Mat s_low = matmul(fr.g, matmul(state.S.S, fr.g));
  Vec starsp = fr.raise(matvec(hodge_dual(s_low, fr.g), state.P));
  out.covP = (pf / rss) * starsp;

  Mat p_up(n);  // P_I(S)_nu{}^mu
  for (int nu = 0; nu < n; ++nu)
    for (int mu = 0; mu < n; ++mu) {
      double v = 0;
      for (int a = 0; a < n; ++a) v += cc.P_S(nu, a) * fr.g_inv(a, mu);
      p_up(nu, mu) = v;
    }
  out.covS = Mat(n);
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      double v = state.P[mu] * out.Xdot[la] - state.P[la] * out.Xdot[mu];
      for (int nu = 0; nu < n; ++nu)
        v += 0.5 * out.Xdot[nu] * (p_up(nu, mu) * state.P[la] - p_up(nu, la) * state.P[mu]);
      out.covS(mu, la) = v;
    }

  finish_rates(fr, state, out);
  return out;
}

ClosureRates close_massless4_observer(const GeometryFrame& fr, const WorldlineState& state,
                                      const ObserverField& t_field, double s) {
  (void)s;  // the dipole scale is carried by state.S
  if (fr.x.n != 4) throw InputError("massless closure: dimension must be 4");
  if (!t_field.valid()) throw InputError("observer closure: missing observer field");
  double yscale = dot(state.y, state.y);
  if (std::abs(fr.L) > 1e-6 * std::max(1.0, yscale))
    throw ConstraintError("massless closure: momentum is not null (L != 0)");
  const int n = 4;

  Vec t;
  Mat dt;
  t_field.eval(fr.x, t, dt);
  if (t.n != n || dt.n != n)
    throw InputError("observer closure: observer field dimension mismatch");
  double pt = inner(fr.g, state.P, t);
  double pt_scale = (max_abs(t) + 1.0) * (max_abs(state.P) + 1e-300);
  if (std::abs(pt) < 1e-12 * pt_scale)
    throw ObserverDegeneracyError("observer closure: P . t = 0");

  CurvatureContractions cc = curvature_contractions(fr, state.S, /*homogeneous=*/false);

  Mat p_up(n);  // P_I(S)_nu{}^mu
  for (int nu = 0; nu < n; ++nu)
    for (int mu = 0; mu < n; ++mu) {
      double v = 0;
      for (int a = 0; a < n; ++a) v += cc.P_S(nu, a) * fr.g_inv(a, mu);
      p_up(nu, mu) = v;
    }

  // Kernel operators: M1 acts on S . (observer transport), M2 on the momentum.
  Mat M1 = Mat::identity(n), M2 = Mat::identity(n);
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      M1(mu, la) -= 0.5 * p_up(la, mu);
      double v = 0;
      for (int a = 0; a < n; ++a) v += fr.g_inv(mu, a) * cc.P_S(a, la);
      M2(mu, la) -= 0.5 * v;
    }
  Lu lu1(M1), lu2(M2);
  double kd = lu1.det();
  if (lu1.singular || lu2.singular || std::abs(kd) < 1e-12)
    throw ClosureSingularityError("kernel_det", kd,
                                  "observer closure: det(I - P_I(S)/2) vanished");
  Mat K1 = lu1.inverse(), K2 = lu2.inverse();

  // covP = B Xdot; Ydot = E Xdot; observer transport = Td Xdot.
  Mat B(n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      double v = 0;
      for (int la = 0; la < n; ++la)
        for (int a = 0; a < n; ++a) v += 0.5 * K2(mu, la) * fr.g_inv(la, a) * cc.R_S(a, nu);
      B(mu, nu) = v;
    }
  Mat gp = connection_on(fr, state.P);
  Mat E = (B - gp) + fr.N;
  Mat D(n), V(n);
  for (int rho = 0; rho < n; ++rho)
    for (int la = 0; la < n; ++la) {
      double dv = dt(rho, la), vv = 0;
      for (int nu = 0; nu < n; ++nu) {
        dv += fr.Gamma(rho, nu, la) * t[nu];
        vv += cartan_up(fr, rho, nu, la) * t[nu];
      }
      D(rho, la) = dv;
      V(rho, la) = vv;
    }
  Mat Td = D + matmul(V, E);
  Mat STd = matmul(state.S.mixed(fr.g), Td);

  Vec pst(n);  // P_I(S)_{nu a} t^a
  for (int nu = 0; nu < n; ++nu) {
    double v = 0;
    for (int a = 0; a < n; ++a) v += cc.P_S(nu, a) * t[a];
    pst[nu] = v;
  }
  Vec r(n);
  for (int la = 0; la < n; ++la) {
    double v = 0;
    for (int nu = 0; nu < n; ++nu) v += pst[nu] * STd(nu, la);
    r[la] = v;
  }

  Mat K1STd = matmul(K1, STd);
  Mat A = Mat::identity(n);
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la)
      A(mu, la) += state.P[mu] * r[la] / (2.0 * pt * pt) - K1STd(mu, la) / pt;
  Lu lua(A);
  if (lua.singular)
    throw ClosureSingularityError("closure_system", 0.0,
                                  "observer closure: velocity system is singular");

  ClosureRates out;
  out.diag.kernel_det = kd;
  out.diag.rss = double_contraction(cc.R_S, state.S.S);
  out.Xdot = lua.solve(state.P);
  out.covP = matvec(B, out.Xdot);

  out.covS = Mat(n);
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      double v = state.P[mu] * out.Xdot[la] - state.P[la] * out.Xdot[mu];
      for (int nu = 0; nu < n; ++nu)
        v += 0.5 * out.Xdot[nu] * (p_up(nu, mu) * state.P[la] - p_up(nu, la) * state.P[mu]);
      out.covS(mu, la) = v;
    }

  finish_rates(fr, state, out);
  return out;
}

// --- conserved quantities & monitors ----------------------------------------------

double conserved_quantity(const GeometryFrame& fr, const WorldlineState& state,
                          const KillingField& Z) {
  const int n = fr.x.n;
  Vec Zv;
  Mat dZ;
  Z.eval(fr.x, Zv, dZ);
  Mat Zh = horizontal_derivative(fr, Zv, dZ);
  Vec Zlow = fr.lower(Zv);
  double psi = dot(state.P, Zlow);
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      double zl = 0;
      for (int ka = 0; ka < n; ++ka) zl += fr.g(la, ka) * Zh(ka, mu);
      psi += 0.5 * state.S.S(mu, la) * zl;
    }
  return psi;
}

MonitorRecord constraint_monitors(const GeometryFrame& fr, const WorldlineState& state,
                                  const ClosureSpec& closure, const ClosureRates* rates) {
  MonitorRecord rec;
  rec.L = fr.L;
  rec.p2 = inner(fr.g, state.P, state.P);

  SpinTensor S = state.S;
  if (closure.kind == ClosureKind::Spinoptics3D && fr.has_norm)
    S = spin_axial_3d(fr, closure.signed_spin());
  rec.s2 = S.scalar_spin_sq(fr.g);
  rec.sp_max = S.kernel_residual(fr.g, state.P);

  if (closure.observer.valid()) {
    Vec t;
    Mat dt;
    closure.observer.eval(fr.x, t, dt);
    rec.st_max = S.kernel_residual(fr.g, t);
  }
  if (rates) {
    rec.sxdot_max = S.kernel_residual(fr.g, rates->Xdot);
    rec.p_dot_xdot = inner(fr.g, state.P, rates->Xdot);
    rec.diag = rates->diag;
  }
  WorldlineState st = state;
  st.S = S;
  for (const auto& Z : fr.space->killing_fields) {
    rec.psi.push_back(conserved_quantity(fr, st, Z));
    rec.killing_resid.push_back(killing_residual(fr, Z));
  }
  return rec;
}

ClosureRates evaluate_closure(const GeometryFrame& fr, const WorldlineState& state,
                              const ClosureSpec& closure) {
  switch (closure.kind) {
    case ClosureKind::Geodesic: {
      const int n = fr.x.n;
      ClosureRates out;
      out.Xdot = state.y;
      if (closure.geodesic_via_connection) {
        Mat gp = connection_on(fr, state.P);
        out.dP = -1.0 * matvec(gp, state.P);
        out.covP = Vec(n);  // parallel transport by construction
      } else {
        out.dP = -1.0 * fr.G;
        out.covP = Vec(n);
      }
      out.Ydot = out.dP + matvec(fr.N, out.Xdot);
      out.covS = Mat(n);
      out.dS = Mat(n);
      return out;
    }
    case ClosureKind::Spinoptics3D:
      return close_spinoptics3(fr, state, closure.p, closure.signed_spin());
    case ClosureKind::Massive4D:
      return close_massive4(fr, state, closure.m, closure.signed_spin());
    case ClosureKind::Massless4DExact:
      return close_massless4_exact(fr, state, closure.signed_spin());
    case ClosureKind::Massless4DObserver:
      return close_massless4_observer(fr, state, closure.observer, closure.signed_spin());
  }
  throw InputError("evaluate_closure: unknown closure kind");
}

unsigned closure_frame_needs(const ClosureSpec& closure) {
  switch (closure.kind) {
    case ClosureKind::Geodesic:
      return closure.geodesic_via_connection ? (kFrameMetric | kFrameSpray | kFrameConnection)
                                             : (kFrameMetric | kFrameSpray);
    case ClosureKind::Spinoptics3D:
    case ClosureKind::Massive4D:
      return kFrameAll;
    case ClosureKind::Massless4DExact:
    case ClosureKind::Massless4DObserver:
      return kFrameAll & ~kFrameNorm;
  }
  return kFrameAll;
}

// --- initial states ------------------------------------------------------------------

WorldlineState init_spinoptics3(const FinslerSpace& space, const Vec& x, const Vec& dir,
                                double p) {
  if (!(p > 0)) throw InputError("init_spinoptics3: p must be positive");
  GeometryFrame fr = frame_at(space, x, dir, kFrameMetric | kFrameNorm);
  WorldlineState st;
  st.X = x;
  st.P = (p / fr.F) * dir;
  st.y = st.P;
  st.S = SpinTensor::zero(3);
  return st;
}

WorldlineState init_massive4(const FinslerSpace& space, const Vec& x, const Vec& dir, double m,
                             double s, int helicity, const Vec& j_spatial) {
  if (!(m > 0)) throw InputError("init_massive4: m must be positive");
  GeometryFrame fr0 = frame_at(space, x, dir, kFrameMetric | kFrameNorm);
  WorldlineState st;
  st.X = x;
  st.P = (m / fr0.F) * dir;
  st.y = st.P;

  GeometryFrame fr = frame_at(space, x, st.y, kFrameMetric | kFrameNorm);
  Vec j(4);
  for (int i = 0; i < 3; ++i) j[i + 1] = j_spatial[i];
  double jp = inner(fr.g, j, st.P);
  double pp = inner(fr.g, st.P, st.P);
  Vec jperp = j - (jp / pp) * st.P;
  double jj = inner(fr.g, jperp, jperp);
  if (!(jj < 0))
    throw InputError("init_massive4: dipole direction does not give a spacelike kernel vector");
  Vec jn = (1.0 / std::sqrt(-jj)) * jperp;
  double signed_s = helicity >= 0 ? s : -s;
  st.S = (s == 0.0) ? SpinTensor::zero(4) : spin_from_kernel_pair(fr, st.P, jn, signed_s);
  return st;
}

WorldlineState init_massless4(const FinslerSpace& space, const Vec& x, const Vec& k_spatial,
                              double s, int helicity, const ObserverField& t_field) {
  double kmag = std::sqrt(dot(k_spatial, k_spatial));
  if (!(kmag > 0)) throw InputError("init_massless4: zero spatial direction");

  auto L_at = [&](double y0) -> double {
    Vec y(4);
    y[0] = y0;
    for (int i = 0; i < 3; ++i) y[i + 1] = k_spatial[i];
    try {
      double v = space.L_value(x, y);
      return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
    } catch (const Error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  // Scan downward from a strongly timelike time component, looking for a sign
  // change of L or a touching minimum (Randers-type null cones keep L >= 0).
  double hi = 8.0 * kmag;
  while (std::isnan(L_at(hi)) && hi < 1e6 * kmag) hi *= 2.0;
  if (std::isnan(L_at(hi))) throw InputError("init_massless4: cannot evaluate L near the cone");
  double y0 = std::numeric_limits<double>::quiet_NaN();
  double prev = hi, prev_val = L_at(hi);
  bool found = false;
  double lo_valid = hi, lo_invalid = 0.0;
  for (double c = hi * 0.98; c > 1e-4 * kmag; c *= 0.98) {
    double v = L_at(c);
    if (std::isnan(v)) {
      lo_invalid = c;
      break;
    }
    lo_valid = c;
    if (v == 0.0) {
      y0 = c;
      found = true;
      break;
    }
    if ((v < 0.0) != (prev_val < 0.0)) {
      double a = c, b = prev;
      bool a_neg = v < 0.0;
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (a + b);
        double vm = L_at(mid);
        if (vm == 0.0) {
          a = b = mid;
          break;
        }
        if ((vm < 0.0) == a_neg)
          a = mid;
        else
          b = mid;
      }
      y0 = 0.5 * (a + b);
      found = true;
      break;
    }
    prev = c;
    prev_val = v;
  }
  if (!found) {
    // L stayed positive down to the evaluation boundary.  Refine the boundary
    // by bisection on validity, then locate the touching minimum of L.
    double a = lo_valid;
    if (lo_invalid > 0.0) {
      double bad = lo_invalid, good = lo_valid;
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (bad + good);
        if (std::isnan(L_at(mid)))
          bad = mid;
        else
          good = mid;
      }
      a = good;
    }
    double b = hi;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = L_at(c1), f2 = L_at(c2);
    auto val = [&](double t) {
      double v = L_at(t);
      return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    for (int it = 0; it < 300; ++it) {
      if (!(f2 < f1)) {
        b = c2;
        c2 = c1;
        f2 = f1;
        c1 = b - gr * (b - a);
        f1 = val(c1);
      } else {
        a = c1;
        c1 = c2;
        f1 = f2;
        c2 = a + gr * (b - a);
        f2 = val(c2);
      }
    }
    y0 = 0.5 * (a + b);
    if (!(std::abs(L_at(y0)) <= 1e-18 * kmag * kmag))
      throw InputError(
          "init_massless4: no null direction with the given spatial components (try flipping them)");
  }

  WorldlineState st;
  st.X = x;
  st.y = Vec(4);
  st.y[0] = y0;
  for (int i = 0; i < 3; ++i) st.y[i + 1] = k_spatial[i];
  st.P = st.y;

  GeometryFrame fr = frame_at(space, x, st.y, kFrameMetric);
  if (!t_field.valid()) throw InputError("init_massless4: missing observer field");
  Vec t;
  Mat dt;
  t_field.eval(x, t, dt);
  double signed_s = helicity >= 0 ? s : -s;
  st.S = spin_from_kernel_pair(fr, st.P, t, signed_s);
  return st;
}

}  // namespace finsler
