#pragma once

// JSON mirror of the data model. Layout per term:
//   {"scalar": [p, q], "num": [c0, c1, ...], "den": [d0, ...],
//    "factors": [{"kind": "Rm", "deriv": 2, "label": 0, "rank": 0}, ...],
//    "pairs": [[[f, s], [f, s]], ...], "free": [[f, s], ...]}
// Polynomial coefficient arrays are constant-term first with integer
// entries; the rational content lives in "scalar".

#include <nlohmann/json_fwd.hpp>

#include "confinv/expr.hpp"

namespace confinv {

nlohmann::json to_json(const Term& t);
nlohmann::json to_json(const LinComb& l);

Term term_from_json(const nlohmann::json& j);
LinComb lincomb_from_json(const nlohmann::json& j);

}  // namespace confinv
