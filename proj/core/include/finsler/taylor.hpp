#pragma once

// Truncated multivariate Taylor arithmetic in the 2n displacement variables
// (dx_0..dx_{n-1}, dy_0..dy_{n-1}).  A TaylorXY value carries the Taylor
// coefficients of a scalar function up to degree order_x in the x-block,
// order_y in the y-block, and `cap` combined.  Evaluating a Finsler function
// once in this arithmetic yields every mixed partial derivative the geometry
// stack needs.

#include <array>
#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "finsler/linalg.hpp"

namespace finsler {

struct TaylorShape {
  int n = 0;
  int order_x = 0;
  int order_y = 0;
  int cap = 0;
  int count = 0;
  int max_total = 0;  // min(cap, order_x + order_y)

  struct Mono {
    std::array<uint8_t, kMaxDim> ex{};
    std::array<uint8_t, kMaxDim> ey{};
    uint8_t degx = 0, degy = 0;
  };
  std::vector<Mono> monos;
  std::vector<double> dfact;     // prod_i ex[i]! * prod_i ey[i]!
  std::vector<int32_t> triples;  // (i, j, k) flattened: mono_i * mono_j -> mono_k

  // -1 when the monomial is outside the truncation.
  int index_of(const std::array<uint8_t, kMaxDim>& ex,
               const std::array<uint8_t, kMaxDim>& ey) const;

  int x_seed_index(int axis) const { return x_seed_[axis]; }
  int y_seed_index(int axis) const { return y_seed_[axis]; }

  // Shared, process-lifetime shape instances.
  static const TaylorShape* get(int n, int order_x, int order_y, int cap);

  std::array<int, kMaxDim> x_seed_{};
  std::array<int, kMaxDim> y_seed_{};
  std::vector<std::pair<uint64_t, int32_t>> lookup_;  // sorted packed-key -> index
};

class TaylorXY {
 public:
  // Largest shape in use: n = 4, orders (2, 4), cap 5 -> 700 monomials.
  static constexpr int kMaxCoeffs = 704;

  TaylorXY() = default;
  explicit TaylorXY(const TaylorShape* shape, double value = 0.0) : shape_(shape) {
    c_.fill(0.0);
    c_[0] = value;
  }

  const TaylorShape* shape() const { return shape_; }
  double value() const { return c_[0]; }
  double coeff(int i) const { return c_[i]; }
  void set_coeff(int i, double v) { c_[i] = v; }

  static TaylorXY x_variable(const TaylorShape* s, int axis, double value) {
    TaylorXY t(s, value);
    if (s->order_x > 0) t.c_[s->x_seed_index(axis)] = 1.0;
    return t;
  }
  static TaylorXY y_variable(const TaylorShape* s, int axis, double value) {
    TaylorXY t(s, value);
    if (s->order_y > 0) t.c_[s->y_seed_index(axis)] = 1.0;
    return t;
  }

  TaylorXY operator-() const {
    TaylorXY r(*this);
    for (int i = 0; i < shape_->count; ++i) r.c_[i] = -r.c_[i];
    return r;
  }

  TaylorXY& operator+=(const TaylorXY& o) {
    assert(shape_ == o.shape_);
    for (int i = 0; i < shape_->count; ++i) c_[i] += o.c_[i];
    return *this;
  }
  TaylorXY& operator-=(const TaylorXY& o) {
    assert(shape_ == o.shape_);
    for (int i = 0; i < shape_->count; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  TaylorXY& operator+=(double v) { c_[0] += v; return *this; }
  TaylorXY& operator-=(double v) { c_[0] -= v; return *this; }
  TaylorXY& operator*=(double v) {
    for (int i = 0; i < shape_->count; ++i) c_[i] *= v;
    return *this;
  }

  friend TaylorXY operator+(TaylorXY a, const TaylorXY& b) { a += b; return a; }
  friend TaylorXY operator-(TaylorXY a, const TaylorXY& b) { a -= b; return a; }
  friend TaylorXY operator+(TaylorXY a, double b) { a += b; return a; }
  friend TaylorXY operator+(double b, TaylorXY a) { a += b; return a; }
  friend TaylorXY operator-(TaylorXY a, double b) { a -= b; return a; }
  friend TaylorXY operator-(double b, const TaylorXY& a) { return (-a) += b; }
  friend TaylorXY operator*(TaylorXY a, double b) { a *= b; return a; }
  friend TaylorXY operator*(double b, TaylorXY a) { a *= b; return a; }

  friend TaylorXY operator*(const TaylorXY& a, const TaylorXY& b) {
    assert(a.shape_ == b.shape_);
    TaylorXY r(a.shape_);
    const auto& t = a.shape_->triples;
    const size_t m = t.size();
    for (size_t idx = 0; idx < m; idx += 3)
      r.c_[t[idx + 2]] += a.c_[t[idx]] * b.c_[t[idx + 1]];
    return r;
  }

  friend TaylorXY operator/(const TaylorXY& a, const TaylorXY& b);
  friend TaylorXY operator/(TaylorXY a, double b) { a *= 1.0 / b; return a; }
  friend TaylorXY operator/(double a, const TaylorXY& b);

 private:
  const TaylorShape* shape_ = nullptr;
  std::array<double, kMaxCoeffs> c_{};
};

// Composition with an analytic g given its derivatives at the series value:
// derivs[k] = g^(k)(f.value()), k = 0 .. f.shape()->max_total.
TaylorXY compose(const TaylorXY& f, std::span<const double> derivs);

// For generic code evaluated in both arithmetics: a constant of the same
// scalar kind as `like`.
inline double constant_like(double, double v) { return v; }
inline long double constant_like(long double, double v) { return v; }
inline TaylorXY constant_like(const TaylorXY& like, double v) { return TaylorXY(like.shape(), v); }

TaylorXY sqrt(const TaylorXY& f);
TaylorXY exp(const TaylorXY& f);
TaylorXY log(const TaylorXY& f);
TaylorXY sin(const TaylorXY& f);
TaylorXY cos(const TaylorXY& f);
TaylorXY pow(const TaylorXY& f, double p);
TaylorXY reciprocal(const TaylorXY& f);

inline TaylorXY operator/(const TaylorXY& a, const TaylorXY& b) { return a * reciprocal(b); }
inline TaylorXY operator/(double a, const TaylorXY& b) { return reciprocal(b) * a; }

}  // namespace finsler
