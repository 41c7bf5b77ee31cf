#pragma once

// Canonical forms and formal identities.
//
// Single-term symmetries (slot-block permutations, the Riemann core group,
// pairing relabeling, factor reordering) are normalized by
// monoterm_canonical. Multi-term identities (the two curvature cycle
// identities and derivative commutation, whose corrections lengthen the
// term) enter through commute_derivatives / bianchi_reduce and drive the
// semi-decision procedure is_formally_zero, which works grade by grade in
// the term length.

#include <cstdint>
#include <map>
#include <optional>

#include "confinv/expr.hpp"

namespace confinv {

// sign 0 means the term vanishes by its own symmetries (e.g. a symmetric
// block contracted against an antisymmetric pair).
struct CanonResult {
  int sign = 1;
  Term term;
};

CanonResult monoterm_canonical(const Term& t);

// Canonicalizes, merges equal contractions, drops zero coefficients,
// orders terms deterministically.
LinComb collect(const LinComb& l);

// Swaps the adjacent derivative slots (s-1, s) (0-based, within the factor's
// derivative block) of the factor at factor_pos, producing the swapped term
// plus curvature correction terms of greater length. Exact identity:
// result - input = 0 formally. Error: PositionOutOfRange.
LinComb commute_derivatives(const Term& t, int factor_pos, int s);

enum class BianchiKind { First, Second };

// Rewrites Riemann factors with the chosen cycle identity so that the first
// core slot (for First) or the innermost derivative slot (for Second)
// carries the lexicographically smallest admissible link; among candidate
// rewrites the one producing fewest terms wins.
LinComb bianchi_reduce(const LinComb& l, BianchiKind which);

// Averages the factor's slots over all permutations of the given slot
// positions (plain averaging, no corrections).
LinComb symmetrize(const Term& t, int factor_pos, const std::vector<int>& slots);

inline constexpr std::int64_t default_node_budget = 1'000'000;

// Semi-decision: true  -> l is formally zero (or reducible to terms of
//                          length >= modulo_length when that is set),
//                false -> a grade could not be cancelled.
// Error BudgetExceeded signals "unknown", never a wrong answer.
bool is_formally_zero(const LinComb& l,
                      std::optional<int> modulo_length = std::nullopt,
                      std::int64_t node_budget = default_node_budget);

// Partition by presence of connection-coefficient (SGamma) factors:
// first = terms free of them, second = the rest.
std::pair<LinComb, LinComb> split_intrinsic(const LinComb& l);

// Terms keyed by their factor count.
std::map<int, LinComb> grade_by_length(const LinComb& l);

}  // namespace confinv
