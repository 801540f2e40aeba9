#pragma once

// Jets of the Finsler function: mixed partial derivatives of L at a point
// (x, y), up to order 2 in x and 4 in y with combined order <= 5.  The
// analytic path evaluates L once in truncated Taylor arithmetic; jet_check
// cross-validates it against composed central finite differences of plain
// L values.

#include <span>
#include <vector>

#include "finsler/space.hpp"

namespace finsler {

inline constexpr int kMaxOrderX = 2;
inline constexpr int kMaxOrderY = 4;
inline constexpr int kMaxOrderTotal = 5;

struct Jet {
  Vec x, y;
  int order_x = 0, order_y = 0;
  const TaylorShape* shape = nullptr;
  std::vector<double> coeff;  // Taylor coefficients, indexed by shape monomial

  double value() const { return coeff[0]; }

  // Derivative d^{|a|+|b|} L / dx^{a} dy^{b} given the two exponent tuples.
  double partial_exp(const std::array<uint8_t, kMaxDim>& ax,
                     const std::array<uint8_t, kMaxDim>& by) const;

  // Same, with the derivative slots given as axis lists (any order; the
  // stored table is canonical, so mixed-partial symmetry is automatic).
  double partial(std::span<const int> x_slots, std::span<const int> y_slots) const;

  bool has_order(int ax_total, int by_total) const {
    return ax_total <= order_x && by_total <= order_y && ax_total + by_total <= kMaxOrderTotal;
  }
};

// Evaluates L and all mixed partials up to (order_x, order_y), combined
// order capped at 5.  Throws InputError on a zero direction or out-of-range
// orders, EvaluationError when any entry is non-finite.
Jet jet_evaluate(const FinslerSpace& space, const Vec& x, const Vec& y,
                 int order_x, int order_y);

struct JetCheckBucket {
  int ax = 0, by = 0;           // |a|, |b|
  double max_rel = 0.0;         // worst discrepancy / max(1, bucket magnitude)
  double bucket_scale = 0.0;    // max |analytic entry| over the bucket
  std::array<uint8_t, kMaxDim> worst_ex{}, worst_ey{};
  double worst_analytic = 0.0, worst_stencil = 0.0;
};

struct JetCheckReport {
  std::vector<JetCheckBucket> buckets;
  double overall = 0.0;
  const JetCheckBucket* worst() const;
};

// Compares the analytic jet against composed 5-point central differences at
// two step sizes with Richardson extrapolation.  `threshold` optionally turns
// a large discrepancy into an EvaluationError naming the worst entry.
JetCheckReport jet_check(const FinslerSpace& space, const Vec& x, const Vec& y,
                         uint64_t seed, double threshold = 0.0);

}  // namespace finsler
