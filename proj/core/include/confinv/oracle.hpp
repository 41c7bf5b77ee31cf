#pragma once

// Numeric certification layer: truncated multivariate Taylor jets of metrics
// and auxiliary fields, exact covariant-derivative towers over them, and
// pointwise evaluation of contraction lincombs in a g-orthonormal frame at
// the base point (so every pairing contracts with a plain delta).
//
// The jet algebra is exact up to its order: products truncate, derivatives
// lower the order by one, and differentiating an order-0 jet is an error
// (InsufficientOrder), never silently zero.

#include <cstdint>
#include <memory>
#include <vector>

#include "confinv/expr.hpp"

namespace confinv::num {

// Monomial bookkeeping for one (dimension, order) pair: graded-lex monomial
// list (so lower orders are prefixes of higher ones), product and derivative
// index tables. Instances are cached process-wide; see jet_space().
class JetSpace {
 public:
  JetSpace(int dim, int order);

  int dim() const { return dim_; }
  int order() const { return order_; }
  int size() const { return int(expo_.size()); }
  const std::vector<int>& exponent(int i) const { return expo_[std::size_t(i)]; }
  int degree(int i) const { return deg_[std::size_t(i)]; }
  // index of the product monomial, -1 when it exceeds the order
  int prod_index(int i, int j) const { return prod_[std::size_t(i) * expo_.size() + std::size_t(j)]; }
  // index of exponent(i) - e_d, -1 when exponent(i)_d = 0; mult_ is the
  // power of x_d (the chain factor of one formal derivative)
  int diff_index(int i, int d) const { return diff_[std::size_t(i) * std::size_t(dim_) + std::size_t(d)]; }
  int diff_mult(int i, int d) const { return expo_[std::size_t(i)][std::size_t(d)]; }

 private:
  int dim_, order_;
  std::vector<std::vector<int>> expo_;
  std::vector<int> deg_;
  std::vector<int> prod_;
  std::vector<int> diff_;
};

const JetSpace& jet_space(int dim, int order);  // cached, thread-safe

// Truncated Taylor expansion at the base point, coefficients in the
// monomial order of jet_space(dim, order). c[k] stores the coefficient of
// the monomial (not the derivative: derivative = coefficient * factorials).
struct Jet {
  int dim = 0;
  int order = -1;
  std::vector<double> c;

  double value() const { return c.empty() ? 0.0 : c[0]; }
};

Jet jet_const(int dim, int order, double v);
Jet jet_coord(int dim, int order, int i);
Jet truncate(const Jet& a, int order);
Jet diff(const Jet& a, int d);  // partial derivative; order drops by one
Jet jet_exp(const Jet& a);
Jet jet_inv(const Jet& a);  // reciprocal; a.value() must be nonzero

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(const Jet& a, const Jet& b);
Jet operator*(double s, const Jet& a);
Jet operator-(const Jet& a);

// Row-major dim x dim symmetric matrix of jets, positive definite at the
// base point.
struct MetricJet {
  int dim = 0;
  int order = -1;
  std::vector<Jet> g;
};

// delta_ij plus a random perturbation with coefficient scale 0.1^degree
// (uniform in [-1,1] times the scale, zero constant term; normal_gauge
// additionally drops the linear terms).
MetricJet random_metric(int dim, int order, std::uint64_t seed,
                        bool normal_gauge = false);

// e^{2 omega} g, entrywise in the jet algebra.
MetricJet conformal_rescale(const MetricJet& g, const Jet& omega);

// Derivative towers over one metric jet plus seeded auxiliary fields:
// scalar functions psi_0..psi_9, a constant gradient covector, connection
// towers (scaled by lambda), and user-prescribed free tensors. Accessors
// return frame components at the base point, flattened row-major with the
// leftmost slot as the most significant index; they build and cache towers
// on demand and throw InsufficientOrder when the metric jet is too shallow.
class Tables {
 public:
  Tables(const MetricJet& g, std::uint64_t seed, double lambda = 1.0);
  ~Tables();
  Tables(Tables&&) noexcept;
  Tables& operator=(Tables&&) noexcept;

  int dim() const;
  int order() const;

  double scalar_curvature();
  const std::vector<double>& riemann(int deriv);       // rank deriv + 4
  const std::vector<double>& ricci(int deriv);         // rank deriv + 2
  const std::vector<double>& psi(int label, int deriv);  // rank deriv
  const std::vector<double>& xi();                     // rank 1
  const std::vector<double>& sxi(int m);               // rank m + 1
  const std::vector<double>& sgamma(int p);            // rank p + 3

  // Replaces the seeded random jet behind one psi label. Must run before
  // that label's tower is first built.
  void prescribe_psi(int label, const Jet& j);

  // Replaces the jet-derived connection tower of order p by the given frame
  // components (rank p + 3, symmetrized over the first p + 2 slots on the
  // way in; the lambda factor does not apply). Must run before that order
  // is first built. Supports identity checks that pin the metric to delta
  // at the base point and choose the tower values directly.
  void prescribe_sgamma(int p, std::vector<double> vals);

  // Free symmetric tensors must be prescribed (frame components, symmetric
  // over the first `rank` slots; SpecialXi carries one extra slot). Reading
  // an unprescribed one is Error MissingTable.
  void prescribe_omega(int label, int rank, std::vector<double> vals);
  void prescribe_special_xi(int label, int rank, std::vector<double> vals);
  const std::vector<double>& omega(int label, int rank);
  const std::vector<double>& special_xi(int label, int rank);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Pointwise value of one term; nsub replaces the formal dimension variable
// in the coefficient. Complete contractions only (error UncoveredSlot).
double eval_term(const Term& t, Tables& tb, int nsub);

// Sum over the lincomb. A pinned dimension must match the tables
// (DimensionMismatch); the formal dimension evaluates at the tables' one.
double eval(const LinComb& l, Tables& tb);

// Smallest metric jet order that supports every tower in l.
int required_order(const LinComb& l);

// Max over `jets` random metric jets of |sum| / max(1, largest |term|).
// order = 0 means required_order(l). Free tensors are auto-prescribed with
// seeded random values. Runs jets in parallel (CONFINV_THREADS).
double check_vanishes(const LinComb& l, int dim, int jets, std::uint64_t seed,
                      int order = 0, double lambda = 1.0);

// Random rank-4 array with the algebraic curvature symmetries (antisym in
// the first and second slot pair, pair exchange, first cyclic identity),
// built by alternating projections to 1e-12 (ProjectionDidNotConverge).
std::vector<double> linearized_random(int dim, std::uint64_t seed);

struct TrigMode {
  double amp = 0;
  std::vector<int> freq;
  double phase = 0;
};

// Real trigonometric polynomial sum_m amp * cos(freq . x + phase) on the
// 2pi-periodic torus; taylor() is its exact jet at a point.
struct TrigPoly {
  int dim = 0;
  std::vector<TrigMode> modes;

  double value(const std::vector<double>& x) const;
  Jet taylor(const std::vector<double>& x, int order) const;
};

TrigPoly random_trig(int dim, int max_freq, int mode_count, double amp,
                     std::uint64_t seed);

// Integral of the lincomb over the flat torus carrying g = e^{2 phi} delta
// with phi (and the psi fields) seeded random trig polynomials: uniform
// grid^dim Riemann sum weighted by the volume density e^{dim phi}, which is
// spectrally accurate here. grid must be at least 8 (GridTooCoarse).
// Deterministic blocked parallel reduction (CONFINV_THREADS). scale_out,
// when given, receives the sum of |term contribution|, the natural yardstick
// for a relative tolerance.
double torus_integral(const LinComb& l, int dim, int grid, std::uint64_t seed,
                      double* scale_out = nullptr);

}  // namespace confinv::num
