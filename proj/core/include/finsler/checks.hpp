#pragma once

// Verification suites: tensor identities evaluated at sampled points, stencil
// cross-checks of the connection machinery, and Christoffel-only oracles for
// the Riemannian reductions.  The oracles never touch the jet/frame path;
// they are built from the catalog's plain metric functions only.

#include <cstdint>
#include <string>
#include <vector>

#include "finsler/geometry.hpp"
#include "finsler/space.hpp"

namespace finsler {

struct CheckResult {
  std::string name;
  double worst = 0.0;
  double tolerance = 0.0;
  int points = 0;
  bool pass() const { return worst <= tolerance; }
};

struct SuiteReport {
  std::string space;
  std::vector<CheckResult> results;
  bool all_pass() const {
    for (const auto& r : results)
      if (!r.pass()) return false;
    return true;
  }
  const CheckResult* failing() const {
    for (const auto& r : results)
      if (!r.pass()) return &r;
    return nullptr;
  }
};

// --- pointwise identity residuals -----------------------------------------

// |g_ij y^i y^j - L| / max(1, |L|)
double euler_identity_residual(const GeometryFrame& fr);
// max |C_{mu nu la} y^mu|  (equals |A . l| where F exists)
double cartan_orthogonality_residual(const GeometryFrame& fr);
// max |g_{mu nu | la}| via a horizontally lifted stencil of g
double horizontal_metricity_residual(const FinslerSpace& space, const GeometryFrame& fr);
// max |g_{mu nu ; la} - 2 A_{mu nu la}| via a vertical stencil of g
double vertical_metricity_residual(const FinslerSpace& space, const GeometryFrame& fr);
// max over the cyclic sum R_nu{}^mu{}_{la si} + R_la{}^mu{}_{si nu} + R_si{}^mu{}_{nu la}
double bianchi_first_residual(const GeometryFrame& fr);
// max |R_{mu nu la si} + R_{nu mu la si} + 2 C_{mu nu ka} R_rho{}^ka{}_{la si} y^rho|
double antisymmetry_defect_residual(const GeometryFrame& fr);
// max |F dl^mu/dy^la - (delta^mu_la - l^mu l_la)| assembled from the jet
double l_vertical_derivative_residual(const FinslerSpace& space, const GeometryFrame& fr);
// max |l^mu_{| la}| assembled from the jet and the connection
double l_horizontal_derivative_residual(const FinslerSpace& space, const GeometryFrame& fr);
// interchange of horizontal derivatives applied to T = l (x) l-dual
double interchange_hh_residual(const GeometryFrame& fr);
// max |N^nu_mu - (1/2) dG^nu/dy^mu| via a stencil of the spray
double spray_connection_consistency(const FinslerSpace& space, const GeometryFrame& fr);
// degree-0 frame fields invariant under y -> 2y (relative)
double homogeneity_residual(const FinslerSpace& space, const Vec& x, const Vec& y);

// --- suites ----------------------------------------------------------------

// Geometry identity suite: Euler, Cartan orthogonality, metricity split,
// Bianchi, antisymmetry defect, l-derivatives, interchange, spray/connection
// consistency, homogeneity — each over `points` sampled admissible points.
SuiteReport run_geometry_identity_suite(const FinslerSpace& space, uint64_t seed, int points);

// Jet engine suite: analytic-vs-stencil buckets and the homogeneity ladder.
SuiteReport run_jet_suite(const FinslerSpace& space, uint64_t seed, int points);

// Pfaffian / Hodge identity suite on random antisymmetric pairs and random
// nondegenerate metrics (dimension 4).
SuiteReport run_pfaffian_suite(uint64_t seed, int pairs);

// Dynamics suites (Riemannian-only spaces get the Christoffel-only MPD
// comparison; Finsler spaces get the closure-consistency residuals).
SuiteReport run_dynamics_suite(const FinslerSpace& space, uint64_t seed, int points);

// Everything applicable to one space, in order.
std::vector<SuiteReport> run_all_suites(const FinslerSpace& space, uint64_t seed, int points);

// --- Christoffel-only Riemannian oracle ------------------------------------

// Built exclusively from the space's plain metric function g(x) and its
// derivatives; the curvature uses Richardson-extrapolated stencils of the
// exact Christoffel symbols.
struct RiemannOracle {
  const FinslerSpace* space;

  explicit RiemannOracle(const FinslerSpace& s);

  Mat metric(const Vec& x) const;
  // Gamma^mu_{nu la} from the closed-form metric derivatives.
  Ten3 christoffel(const Vec& x) const;
  // R^mu{}_{nu la si} (standard slot order) via stencils of christoffel().
  Ten4 riemann(const Vec& x) const;
  // R(S)_{mu nu} = R_{la si mu nu} S^{la si} in the engine's convention.
  Mat curvature_contraction(const Vec& x, const Mat& S_upper) const;
};

}  // namespace finsler
