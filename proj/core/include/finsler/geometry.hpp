#pragma once

// Pointwise geometry of a Finsler space at (x, y): fundamental metric,
// Cartan tensor, spray and nonlinear connection, Chern connection, its h-h
// and h-v curvatures, and the horizontal derivative of the Cartan tensor.
//
// Index conventions (all stored in the slot order below):
//   g(mu, nu)                  fundamental metric, lowered
//   C(mu, nu, la)              inhomogeneous Cartan tensor, totally symmetric,
//                              C = (1/2) dg/dy; the homogeneous tensor is
//                              A = F * C
//   G(nu)                      spray coefficients
//   N(nu, mu)                  nonlinear connection N^nu_mu
//   Gamma(mu, nu, la)          Chern coefficients Gamma^mu_{nu la}
//   R(nu, mu, la, si)          h-h curvature R_nu{}^mu{}_{la si}
//   P_inhom(nu, mu, la, si)    -dGamma^mu_{nu la}/dy^si; the homogeneous h-v
//                              curvature is F * P_inhom
//   C_hder(mu, nu, la, si)     C_{mu nu la | si}; A_{mu nu la | si} = F * it

#include "finsler/jets.hpp"
#include "finsler/linalg.hpp"
#include "finsler/space.hpp"

namespace finsler {

enum FrameNeeds : unsigned {
  kFrameMetric = 1u << 0,      // L, g, g_inv
  kFrameNorm = 1u << 1,        // F, l (requires L > 0)
  kFrameCartan = 1u << 2,      // C
  kFrameSpray = 1u << 3,       // G, N
  kFrameConnection = 1u << 4,  // Gamma
  kFrameCurvR = 1u << 5,       // R
  kFrameCurvP = 1u << 6,       // P_inhom
  kFrameCartanDer = 1u << 7,   // C_hder
  kFrameAll = (1u << 8) - 1,
};

struct GeometryFrame {
  const FinslerSpace* space = nullptr;
  Vec x, y;
  unsigned valid = 0;

  double L = 0.0;
  Mat g, g_inv;
  double det_g = 0.0, sqrt_abs_det_g = 0.0;

  bool has_norm = false;  // F-normalized quantities available (L > 0)
  double F = 0.0;
  Vec l, l_low;

  Ten3 C;
  Vec G;
  Mat N;
  Ten3 Gamma;
  Ten4 R;
  Ten4 P_inhom;
  Ten4 C_hder;

  bool has(unsigned bits) const { return (valid & bits) == bits; }

  Vec lower(const Vec& v) const { return matvec(g, v); }
  Vec raise(const Vec& v) const { return matvec(g_inv, v); }

  // Metric-weighted Levi-Civita density eps_{0..n-1} = +sqrt|det g|.
  double epsilon_low(int i, int j, int k) const { return sqrt_abs_det_g * perm_sign3(i, j, k); }
  double epsilon_low(int i, int j, int k, int m) const { return sqrt_abs_det_g * perm_sign4(i, j, k, m); }
};

// Builds the requested fields (plus their prerequisites).  Throws
// GeometryDegeneracyError when g is numerically degenerate and
// NullDirectionError when a normalized field is requested at L <= 0.
GeometryFrame frame_at(const FinslerSpace& space, const Vec& x, const Vec& y, unsigned needs);

// Antisymmetric contravariant dipole tensor S^{mu nu}.
struct SpinTensor {
  Mat S;

  static SpinTensor zero(int n) {
    SpinTensor t;
    t.S = Mat(n);
    return t;
  }
  // Validates antisymmetry exactly as stored.
  static SpinTensor from_matrix(const Mat& m);

  int dim() const { return S.n; }
  // S^mu{}_nu = S^{mu a} g_{a nu}
  Mat mixed(const Mat& g) const {
    return matmul(S, g);
  }
  // s^2 = 1/2 S^{mu nu} S_{mu nu}
  double scalar_spin_sq(const Mat& g) const {
    Mat sm = mixed(g);
    double tr = 0;
    for (int i = 0; i < S.n; ++i)
      for (int j = 0; j < S.n; ++j) tr += sm(i, j) * sm(j, i);
    return -0.5 * tr;
  }
  // S^{mu nu} w_nu for a lowered w.
  Vec contract_low(const Vec& w_low) const { return matvec(S, w_low); }
  // max_mu |S^mu{}_nu v^nu| for a contravariant v.
  double kernel_residual(const Mat& g, const Vec& v) const {
    return max_abs(matvec(mixed(g), v));
  }
};

// Curvature 2-forms contracted with a dipole tensor over their first index
// pair.  R_S(mu, nu) = R_{la si mu nu} S^{la si}; P_S and Qhat_S are by
// default the inhomogeneous forms built from C and y (valid on null
// directions); with homogeneous = true they are rescaled by F and F^2 to the
// normalized forms built from A and l.
struct CurvatureContractions {
  Mat R_S;
  Mat P_S;
  Mat Qhat_S;
  bool homogeneous = false;
};
CurvatureContractions curvature_contractions(const GeometryFrame& frame, const SpinTensor& S,
                                             bool homogeneous);

// The Cartan connection differs from the Chern connection by a vertical
// term: its horizontal coefficients are the Chern Gamma, the vertical
// coefficient contracting with dy/F is A^mu{}_{nu la} (equivalently
// C^mu{}_{nu la} contracting with the unnormalized vertical rate).
struct CartanConnection {
  Ten3 horizontal;  // Gamma^mu_{nu la}
  Ten3 vertical;    // C^mu{}_{nu la} (first index raised)
};
CartanConnection cartan_connection_at(const GeometryFrame& frame);

enum class Connection { Chern, Cartan };

// Covariant rate along a curve of data carried on the worldline (not a
// field): raw_rate plus connection terms.  Xdot is the horizontal velocity;
// Ydot is the unnormalized vertical velocity dy/dtau + N.Xdot.  Vectors are
// contravariant; 2-tensors are contravariant antisymmetric.
Vec covariant_rate_along(const GeometryFrame& frame, const Vec& tensor, const Vec& raw_rate,
                         const Vec& Xdot, const Vec& Ydot, Connection conn);
Mat covariant_rate_along(const GeometryFrame& frame, const Mat& tensor, const Mat& raw_rate,
                         const Vec& Xdot, const Vec& Ydot, Connection conn);

// Max absolute component of the Lie derivative of g along the natural lift
// of Z; zero exactly when Z is a Killing field of L.
double killing_residual(const FinslerSpace& space, const KillingField& Z,
                        const Vec& x, const Vec& y);

// Same residual from an already-built frame (needs metric, Cartan, spray,
// connection).
double killing_residual(const GeometryFrame& frame, const KillingField& Z);

// Z^kappa_{|nu} for an x-dependent vector field: dZ/dx + Gamma Z.
Mat horizontal_derivative(const GeometryFrame& frame, const Vec& Z, const Mat& dZ);

}  // namespace finsler
