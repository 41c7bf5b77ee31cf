#pragma once

// Text form for linear combinations of contractions.
//
//   lincomb  := [sign] term (("+" | "-") term)*
//   term     := [coeff "*"] "contr(" factor ("*" factor)* ")"
//   coeff    := rational | "[" polyfrac "]" | rational "*" "[" polyfrac "]"
//   rational := integer [ "/" integer ]
//   polyfrac := poly [ "/" poly ]        (polynomials in N, e.g.  N^2-3*N+2)
//
//   factor   := ("D[" index "]")* base
//   base     := "Rm[" idx* [";" idx idx idx idx] "]"
//             | "Ric[" idx* [";" idx idx] "]"
//             | "Sc"
//             | "Psi" digit [ "[" idx* "]" ]
//             | "Xi[" idx "]"
//             | "SXi[" idx+ ";" idx "]"
//             | "SGamma[" [idx* ";"] idx idx ";" idx "]"
//             | "Omega" digit "[" idx* "]"
//             | "SpXi" digit "[" idx* ";" idx "]"
//             | "g[" idx idx "]"
//
// Without a semicolon, Rm/Ric brackets list core slots only. A D[i] prefix
// prepends one derivative slot (outermost first). An index name appearing
// twice is a contracted pair, once is a free slot (ordered by first
// appearance). Errors: SyntaxError (with byte position), IndexArityError,
// RepeatedLabelError.

#include <string>

#include "confinv/expr.hpp"

namespace confinv {

LinComb parse(const std::string& text);

std::string serialize_text(const Term& t);
std::string serialize_text(const LinComb& l);

}  // namespace confinv
