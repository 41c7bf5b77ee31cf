#pragma once

// Integration-by-parts engines over gradient-field contractions and the
// divergence formulas they emit.
//
// The route drivers share one sieved recursion. Input terms carry exact
// RationalFnN coefficients; parts integration multiplies by -1/(N-n) with
// n = -weight, and the N -> infinity leading coefficient is taken only when
// a term leaves the recursion (emitted gradient-free, emitted as a vector
// field, or parked). Terms whose coefficient degree sits below the
// gradient-factor count vanish in that limit and are dropped on sight.
//
// Sign convention, fixed by the n = 2 end-to-end case and recorded in every
// trace: the input equals the sum of divergences of the emitted fields, so
// expand_divergence(formula) minus the input is formally zero.

#include <string>
#include <utility>
#include <vector>

#include "confinv/expr.hpp"

namespace confinv {

// One node of the replayable derivation record. `term` is the text form of
// the term entering the node, `cls` its classification tag (empty when the
// term has no gradient factors), `action` what was done:
//   ibp | gamma-expand | peel | park | emit-vector | emit-scalar |
//   drop-easy | drop-vanishing | discard | discard-final | requeue |
//   residual
// factor is the factor index the action operated on, -1 if none.
struct IbpNode {
  std::string term;
  std::string cls;
  std::string action;
  int factor = -1;
  std::vector<IbpNode> children;
};

struct IbpTrace {
  std::string convention;  // the sign statement above; part of the format
  std::vector<IbpNode> roots;
};

// Deterministic rendering (fixed key order, two-space indent): byte
// identical output for identical traces.
std::string trace_to_json(const IbpTrace& t);

// A divergence identity: input = sum over `fields` of div applied to the
// one free slot of each term.
struct DivergenceFormula {
  LinComb fields;
  IbpTrace trace;
};

// Leibniz expansion of the divergence: contracts a fresh derivative against
// each field's free slot and distributes it over the factors. Collected.
LinComb expand_divergence(const DivergenceFormula& f);

// Strips derivative slots off the label-1 scalar towers, highest count
// first: each peel moves one term into the field list and replaces it by
// the sign-flipped derivative hits on its other factors, collecting between
// rounds. The input must integrate to zero over closed manifolds; the
// fully peeled remainder then has to be formally zero, else Error
// ResidualNonzero. Mixed-weight inputs are allowed.
DivergenceFormula silly_divergence(const LinComb& l);

// One parts-integration step on the plain gradient factor at xi_factor:
// the factor is consumed, its partner slot receives a derivative hit on
// every remaining factor in turn, and the coefficient gains -1/(N-n).
// Errors: PositionOutOfRange, NoXiFactor.
LinComb ibp_step(const Term& t, int xi_factor, int n);

// Iterated parts integration of one descendant down to gradient-free
// complete contractions with limit coefficients. outgrowth discards hard
// branches; pure_outgrowth also discards stigmatized ones (in particular
// it is empty on a stigmatized input) and only ever consumes a gradient
// factor not contracting another one.
LinComb outgrowth(const Term& x);
LinComb pure_outgrowth(const Term& x);

// The sieved recursion over all descendants of the variation: easy, hard
// and stigmatized branches are dropped, every surviving branch ends in a
// term with a single plain gradient factor, which is erased to free its
// partner slot. The result states input = sum of div(fields).
DivergenceFormula super_divergence(const LinComb& iz);

// Same recursion, but hard and stigmatized terms are parked with their
// limit coefficients instead of dropped, and the single-gradient endpoints
// are discarded. The parked combination vanishes upon substituting an
// actual gradient for the formal one, separately within each grade of
// mutually contracted plain-gradient pairs.
LinComb shadow(const LinComb& iz, IbpTrace* trace = nullptr);

// Splits by the number of mutually contracted plain-gradient pairs,
// ascending; grades with no terms are omitted.
std::vector<std::pair<int, LinComb>> grade_by_xixi(const LinComb& l);

// Per-contraction bookkeeping over descend(C): tail adds to C the pure
// outgrowths of its good and undecided descendants; tail_shadow collects
// the terms the shadow sieve parks when seeded from C alone.
LinComb tail(const Term& c);
LinComb tail_shadow(const Term& c);

// The crude route: every branch is integrated down to gradient-free form,
// hard terms first rewritten through connection-tower chains, stigmatized
// ones consumed directly. The gradient-free total is split by connection
// content; returns (residual, gauge part) where residual = input + the
// connection-free terms. Both vanish upon substitution, separately.
std::pair<LinComb, LinComb> simple_divergence(const LinComb& iz,
                                              IbpTrace* trace = nullptr);

// Diagnostic on tower-only terms: replaces each symmetrized tower of order
// m by minus the order-m connection tower with its distinguished slot
// contracted against its own first derivative slot. This is the unique
// gradient-free image with that many self-traced connection factors.
// Error NoXiFactor unless the input has towers and no plain gradients.
Term df_term(const Term& hard);

}  // namespace confinv
