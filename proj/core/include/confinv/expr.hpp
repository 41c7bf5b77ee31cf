#pragma once

// Data model for complete and partial contractions of curvature factors,
// scalar-function derivative towers, conformal-gradient factors and
// connection-coefficient blocks, with exact coefficients that may depend
// rationally on the formal dimension variable N.

#include <compare>
#include <cstdint>
#include <utility>
#include <vector>

#include "confinv/rational.hpp"

namespace confinv {

// Factor kinds. All tensor slots are stored lowered; raised positions are
// expressed through pairings (every pairing carries one inverse metric).
//   Riemann   m derivative slots + 4 core slots, cores antisym in (1,2),(3,4)
//             and symmetric under pair exchange
//   Ricci     p derivative slots + 2 symmetric core slots
//   ScalarR   scalar curvature, no slots
//   Psi       derivative tower of a scalar function; label 1..9 selects the
//             function, label 0 is the conformal factor before polarization;
//             the innermost two derivative slots commute
//   Xi        the conformal gradient one-form, 1 slot
//   SXi       symmetrized m-th derivative of Xi, m >= 1; all m+1 slots are
//             jointly symmetric
//   SGamma    symmetrized p-th derivative of the connection coefficients,
//             stored lowered: p+2 jointly symmetric lower slots, then one
//             distinguished (lowered upper) slot
//   Omega     free symmetric tensor of the given rank, used to decouple
//             identities from the SXi origin of a slot block
//   SpecialXi rank symmetric lower slots + one distinguished slot
//   Metric    an explicit lowered metric factor; transient inside expansion
//             engines, also accepted in input for cross-checks
enum class FactorKind : std::uint8_t {
  Riemann, Ricci, ScalarR, Psi, Xi, SXi, SGamma, Omega, SpecialXi, Metric
};

struct Factor {
  FactorKind kind = FactorKind::ScalarR;
  int deriv = 0;  // derivative slot count (Riemann/Ricci/Psi/SXi/SGamma)
  int label = 0;  // Psi function tag; distinguishing tag for Omega/SpecialXi
  int rank = 0;   // Omega/SpecialXi lower block size

  int arity() const;
  // index of the first core slot (= deriv for kinds that have cores)
  int core_begin() const;
  auto operator<=>(const Factor&) const = default;
};

struct Slot {
  int factor = 0;
  int slot = 0;
  auto operator<=>(const Slot&) const = default;
};

// A (partial) contraction: factor list, a perfect pairing on the non-free
// slots, and an ordered list of free slots. Complete contraction <=> free
// slots empty. Pairs are stored normalized: first < second, list sorted.
struct Contraction {
  std::vector<Factor> factors;
  std::vector<std::pair<Slot, Slot>> pairs;
  std::vector<Slot> free;
};

// Validates slot coverage and normalizes pair order. Errors:
//   SelfPair          a slot paired with itself
//   OverlappingPairs  a slot used twice across pairs/free list
//   UncoveredSlot     a slot in no pair and not free, or out of range
Contraction make_contraction(std::vector<Factor> factors,
                             std::vector<std::pair<Slot, Slot>> pairs,
                             std::vector<Slot> free = {});

// Homogeneity degree under g -> t^2 g. Defined for partial contractions.
int weight(const Contraction& c);

struct Term {
  Rational scalar{1};
  RationalFnN qofn{Rational(1)};
  Contraction c;
};

// Dimension tag: formal_dim keeps coefficients as functions of N, a positive
// integer pins the dimension (coefficients are then evaluated at that value
// by the numeric layer; the stored RationalFnN is untouched).
inline constexpr int formal_dim = 0;

struct LinComb {
  std::vector<Term> terms;
  int dim = formal_dim;
  bool allow_mixed_weight = false;
};

// Validates weight homogeneity (error WeightMismatch unless allow_mixed).
LinComb make_lincomb(std::vector<Term> terms, int dim,
                     bool allow_mixed_weight = false);

// Common weight of the terms; throws WeightMismatch on a mixed list unless
// the flag is set, in which case the first term's weight is returned.
int weight(const LinComb& l);

// Re-tags the dimension. Involutive together with a second rewrite.
LinComb rewrite_dimension(const LinComb& l, int dim);

// Evaluates every coefficient function at the pinned dimension, folding the
// value into the plain rational scalar and dropping terms that vanish.
// Errors: DimensionMismatch (dimension not pinned), PoleAtN.
LinComb pin_coefficients(const LinComb& l);

// Normalizes trace shapes: a Riemann factor with two core slots contracted
// against each other becomes a Ricci factor (or drops the term when the
// traced pair is antisymmetric), and a Ricci factor with its two core slots
// contracted becomes the scalar-curvature gradient form
//   grad^p R = 2 grad^{p-1} div Ric   (p >= 1; p = 0 gives the ScalarR kind).
LinComb eliminate_traced_ric(const LinComb& l);

// Scales every term by rational * qofn.
LinComb scaled(LinComb l, const Rational& r,
               const RationalFnN& q = RationalFnN(Rational(1)));

// Concatenation without collection.
LinComb plus(LinComb a, const LinComb& b);

}  // namespace confinv
