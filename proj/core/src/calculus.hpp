#pragma once

// Shared expansion engine for covariant derivatives on the workbench form.
//
// Derivatives are formal covariant derivatives: on every factor the recursion
// acts on all stored (lowered) slots. For tensor factors this is the genuine
// covariant derivative; for connection towers it fixes the semantics of the
// SGamma kind as sym grad^p of the lowered connection array, and the gradient
// of a complete contraction is the per-factor Leibniz sum exactly.
//
// All functions return exact expansions: the sum of the returned terms equals
// the mathematical image of the input.

#include <vector>

#include "view.hpp"

namespace confinv::detail {

// Gradient of one factor with the new outermost derivative slot carrying the
// link id dlab. Symmetrized kinds (SXi, SGamma) return the re-symmetrized
// tower plus curvature corrections; Metric returns no terms. Omega and
// SpecialXi are prescribed tensors with no derivative rule and throw.
std::vector<TView> grad_factor(const TView& t, int fpos, int dlab);

// Leibniz sum of grad_factor over all factors.
std::vector<TView> grad_term(const TView& t, int dlab);

// Swap the adjacent derivative slots (s-1, s) of a Riemann, Ricci or Psi
// factor. The first returned term is the swap; the rest are curvature
// corrections, so that input = sum(output) exactly.
std::vector<TView> commute_adjacent(const TView& t, int fpos, int s);

// Rewrites every unsymmetrized tower of the conformal-factor scalar (Psi
// label 0) into gradient-of-potential factors: one derivative becomes Xi,
// higher towers become SXi plus curvature corrections. Valid when the
// potential's gradient is the constant-form field (the Xi kind).
std::vector<TView> psi0_to_xi(const TView& t);

// Expands a symmetrized potential tower SXi(m) at factor position fpos into
// connection-tower chains contracting one bare Xi factor: the constant-form
// identity grad xi = -Gamma.xi iterated m times and re-symmetrized.
std::vector<TView> xi_gamma_expand(const TView& t, int fpos);

// Removes metric factors with at least one paired slot: a self-paired metric
// contributes a factor N to the polynomial coefficient, otherwise the pairing
// is rewired through the metric. Metrics with two free slots are kept.
void eliminate_metric(TView& t);

}  // namespace confinv::detail
