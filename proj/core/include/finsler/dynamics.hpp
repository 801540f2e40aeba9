#pragma once

// Worldline dynamics of spinning test bodies: the momentum/dipole transport
// equations, their closed forms in 3D (spinoptics) and 4D (massive and
// massless), conserved quantities, and constraint monitors.
//
// Throughout, the state identifies the Finsler direction with the momentum
// (y = P), and "Ydot" denotes the unnormalized vertical velocity
// dy/dtau + N . Xdot, which equals the Cartan-covariant rate of y itself.

#include <functional>

#include "finsler/geometry.hpp"

namespace finsler {

struct WorldlineState {
  double tau = 0.0;
  Vec X;
  Vec y;
  Vec P;
  SpinTensor S;
};

enum class ClosureKind { Geodesic, Spinoptics3D, Massive4D, Massless4DExact, Massless4DObserver };

// Observer velocity field t(x) with its Jacobian dt(i, j) = dt^i/dx^j.
struct ObserverField {
  std::function<void(const Vec& x, Vec& t, Mat& dt)> eval;
  bool valid() const { return static_cast<bool>(eval); }
};

struct ClosureSpec {
  ClosureKind kind = ClosureKind::Geodesic;
  double p = 0.0;      // momentum scale (spinoptics)
  double m = 0.0;      // mass (massive)
  double s = 0.0;      // scalar spin magnitude, >= 0
  int helicity = 1;    // sign carried by the dipole tensor
  ObserverField observer;
  // Integrate the geodesic closure by parallel transport of P instead of the
  // spray equation; the two must produce the same worldline.
  bool geodesic_via_connection = false;

  double signed_spin() const { return helicity >= 0 ? s : -s; }
  void validate(const FinslerSpace& space) const;
};

// --- momentum / dipole transport ---------------------------------------------

enum class FmpdForm { Chern, Cartan, CartanInhomogeneous };

struct FmpdRates {
  Vec covP;  // covariant momentum rate in the chosen connection
  Mat covS;  // covariant dipole rate, antisymmetric contravariant
};

// Right-hand sides of the momentum/dipole transport equations for the given
// worldline rates.  The homogeneous forms (Chern, Cartan) require L > 0.
FmpdRates fmpd_rates(const GeometryFrame& frame, const WorldlineState& state,
                     const Vec& Xdot, const Vec& Ydot, FmpdForm form);

// --- geodesics ----------------------------------------------------------------

// Spray acceleration: d(xdot)/dtau = -G(x, xdot).
Vec geodesic_rhs(const FinslerSpace& space, const Vec& x, const Vec& xdot);

// --- closed systems -------------------------------------------------------------

struct SpinopticsDiagnostics {
  double sigma_tilde = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double rss = 0.0;         // R(S)(S)
  double kernel_det = 1.0;  // det(I - P_I(S)/2), observer branch
};

struct ClosureRates {
  Vec Xdot;
  Vec covP;  // Cartan-covariant momentum rate
  Mat covS;  // Cartan-covariant dipole rate
  Vec dP;    // raw momentum rate
  Mat dS;    // raw dipole rate
  Vec Ydot;  // dy/dtau + N . Xdot
  SpinopticsDiagnostics diag;
};

// 3D ray system: P = p l, S = s eps l; returns the velocity and momentum
// rates plus the closure denominators as diagnostics.
ClosureRates close_spinoptics3(const GeometryFrame& frame, const WorldlineState& state,
                               double p, double s);

// 4D massive closure, truncated at third order in the spin.
ClosureRates close_massive4(const GeometryFrame& frame, const WorldlineState& state,
                            double m, double s);

// 4D massless closure in the observer-free (exact) form; requires
// R(S)(S) != 0.
ClosureRates close_massless4_exact(const GeometryFrame& frame, const WorldlineState& state,
                                   double s);

// 4D massless closure with an explicit observer field; solves the implicit
// linear system coupling the velocity to the observer transport.
ClosureRates close_massless4_observer(const GeometryFrame& frame, const WorldlineState& state,
                                      const ObserverField& t_field, double s);

// --- antisymmetric 4x4 algebra --------------------------------------------------

// Pfaffian of a plain antisymmetric 4x4 matrix: m01 m23 - m02 m13 + m03 m12;
// satisfies Pf^2 = det.
double pfaffian4(const Mat& omega);
// Metric-weighted Pfaffian of a lowered antisymmetric tensor:
// pfaffian4(omega) / sqrt|det g|.
double pfaffian4_weighted(const Mat& omega_low, const Mat& g);
// Hodge dual of a lowered antisymmetric tensor (lowered output), orientation
// eps_{0123} = +sqrt|det g|.
Mat hodge_dual(const Mat& f_low, const Mat& g);
// (I - M)^{-1} for a singular (det M = 0) 4x4 matrix via its trace polynomial.
Mat inverse_one_minus_singular(const Mat& M);

// --- dipole construction ---------------------------------------------------------

// 3D axial dipole S_{mu nu} = s eps_{mu nu la} l^la (returned contravariant).
SpinTensor spin_axial_3d(const GeometryFrame& frame, double s);
// 4D dipole with kernel span{P, v}:
// S_{mu nu} = s / sqrt((P.v)^2 - P^2 v^2) * eps_{mu nu la si} v^la P^si.
SpinTensor spin_from_kernel_pair(const GeometryFrame& frame, const Vec& P, const Vec& v,
                                 double s);

// --- conserved quantities & monitors ----------------------------------------------

// Psi(Z) = P^la Z_la + 1/2 S^{mu la} Z_{la | mu}
double conserved_quantity(const GeometryFrame& frame, const WorldlineState& state,
                          const KillingField& Z);

struct MonitorRecord {
  double p2 = 0.0;
  double s2 = 0.0;
  double sp_max = 0.0;     // max |S . P|
  double st_max = 0.0;     // max |S . t| (observer closure)
  double sxdot_max = 0.0;  // max |S . Xdot|
  double L = 0.0;
  double p_dot_xdot = 0.0;
  SpinopticsDiagnostics diag;
  std::vector<double> psi;
  std::vector<double> killing_resid;
};

// All monitor scalars for one state; `rates` supplies the velocity-dependent
// channels when available.
MonitorRecord constraint_monitors(const GeometryFrame& frame, const WorldlineState& state,
                                  const ClosureSpec& closure, const ClosureRates* rates);

// Closure dispatch for the integrator.
ClosureRates evaluate_closure(const GeometryFrame& frame, const WorldlineState& state,
                              const ClosureSpec& closure);
unsigned closure_frame_needs(const ClosureSpec& closure);

// --- initial-state construction -----------------------------------------------------

// Spinoptics: P = p l(x, dir); the dipole is derived from P at evaluation time.
WorldlineState init_spinoptics3(const FinslerSpace& space, const Vec& x, const Vec& dir,
                                double p);
// Massive: P = m l(x, dir) for a timelike dir; the dipole kernel vector is the
// g-orthogonalized spatial direction j (slots 1..3), normalized spacelike.
WorldlineState init_massive4(const FinslerSpace& space, const Vec& x, const Vec& dir,
                             double m, double s, int helicity, const Vec& j_spatial);
// Massless: solves L(x, (y0, k)) = 0 for the time component, sets P = y, and
// builds the dipole from the observer velocity at x.
WorldlineState init_massless4(const FinslerSpace& space, const Vec& x, const Vec& k_spatial,
                              double s, int helicity, const ObserverField& t_field);

}  // namespace finsler
