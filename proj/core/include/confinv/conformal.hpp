#pragma once

// Conformal rescaling g -> e^{2 omega} g of intrinsic contractions, its
// polarization in the scalar arguments, and the descent to gradient-field
// terms used by the divergence constructions.
//
// For a weight -n contraction C, the variation operator is
//   e^{n omega} C(e^{2 omega} g) - C(g),
// expanded exactly: the per-factor conformal laws carry exponentials whose
// total cancels against e^{n omega} term by term, so the result is again a
// contraction lincomb. Coefficients are computed as rational functions of
// the formal dimension N; a pinned dimension is substituted at the end.

#include "confinv/expr.hpp"

namespace confinv {

// General: omega stays an arbitrary scalar; its derivative towers appear as
//          Psi factors with label 0.
// Linear:  omega has constant gradient; towers become Xi / SXi factors
//          plus curvature corrections.
enum class XiMode { General, Linear };

// Input factors must be intrinsic (Riemann, Ricci, ScalarR, Psi with label
// >= 1, Metric) and of one common weight. Error: UnsupportedFactor.
LinComb conformal_variation(const LinComb& l, XiMode mode);

// Multilinear part in z distinct scalar arguments: keeps the terms with
// exactly z label-0 towers and sums over all ways to assign them the labels
// 1..z (no 1/z! normalization). Other terms are dropped.
LinComb polarize(const LinComb& l, int z);

struct XiCounts {
  int plain = 0;   // bare gradient factors (Xi)
  int towers = 0;  // symmetrized tower factors (SXi)
  int qdeg = 0;    // degree in N of the term's coefficient
  int xixi = 0;    // pairs contracting two bare gradient factors
};
XiCounts xi_counts(const Term& t);

// Classification of a descendant by coefficient growth: the coefficient
// degree never exceeds plain + towers; terms below that bound are Easy and
// drop out in the large-N limit. At the bound, a term whose bare gradient
// factors all contract each other is Stigmatized (type 1 without towers,
// type 2 with); otherwise: no towers -> Good, both kinds -> Undecided, no
// bare factors -> Hard.
// Errors: NoXiFactor (neither factor kind present), InconsistentCounts
// (degree above the bound).
enum class XiClass {
  Good,
  Easy,
  Undecided,
  Hard,
  Stigmatized1,
  Stigmatized2,
};
XiClass classify(const Term& t);

// Factor count weighted the way the descent preserves it: curvature factors
// and scalar towers count 1 each, symmetrized towers and prescribed
// symmetric tensors count 1, each bare-gradient pair counts 1; unpaired
// bare gradient factors count 0.
int xi_length(const Term& t);

// Linear-mode variation with formal-N coefficients. A pinned input has its
// coefficients evaluated at that dimension first (an invariant's
// coefficients are numbers; the output's functions of N express the
// trans-dimensional family afresh). Every term satisfies
// plain + towers >= max(qdeg, 1).
LinComb descend(const LinComb& l);

// The descendants whose coefficient degree attains plain + towers; the
// others vanish in the N -> infinity limit after the parts-integration
// bookkeeping divides by N - n.
LinComb acceptable_descendants(const LinComb& l);

}  // namespace confinv
