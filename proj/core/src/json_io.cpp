#include "confinv/json_io.hpp"

#include <numeric>

#include <nlohmann/json.hpp>

namespace confinv {

namespace {

using nlohmann::json;

const char* kind_name(FactorKind k) {
  switch (k) {
    case FactorKind::Riemann: return "Rm";
    case FactorKind::Ricci: return "Ric";
    case FactorKind::ScalarR: return "Sc";
    case FactorKind::Psi: return "Psi";
    case FactorKind::Xi: return "Xi";
    case FactorKind::SXi: return "SXi";
    case FactorKind::SGamma: return "SGamma";
    case FactorKind::Omega: return "Omega";
    case FactorKind::SpecialXi: return "SpXi";
    case FactorKind::Metric: return "g";
  }
  return "?";
}

FactorKind kind_of(const std::string& s) {
  if (s == "Rm") return FactorKind::Riemann;
  if (s == "Ric") return FactorKind::Ricci;
  if (s == "Sc") return FactorKind::ScalarR;
  if (s == "Psi") return FactorKind::Psi;
  if (s == "Xi") return FactorKind::Xi;
  if (s == "SXi") return FactorKind::SXi;
  if (s == "SGamma") return FactorKind::SGamma;
  if (s == "Omega") return FactorKind::Omega;
  if (s == "SpXi") return FactorKind::SpecialXi;
  if (s == "g") return FactorKind::Metric;
  throw Error("IndexArityError", "unknown factor kind '" + s + "'");
}

// splits scalar * num/den so that num and den have integer entries with the
// rational content folded into the scalar
void integerize(const Term& t, Rational& scalar, std::vector<std::int64_t>& num,
                std::vector<std::int64_t>& den) {
  scalar = t.scalar;
  std::int64_t lcm = 1;
  for (const auto& c : t.qofn.num().coeffs()) lcm = std::lcm(lcm, c.den());
  std::int64_t g = 0;
  for (const auto& c : t.qofn.num().coeffs()) {
    std::int64_t v = c.num() * (lcm / c.den());
    g = std::gcd(g, v < 0 ? -v : v);
  }
  if (g == 0) g = 1;
  // den is already primitive integer with positive leading coefficient
  scalar *= Rational(g, lcm);
  for (const auto& c : t.qofn.num().coeffs())
    num.push_back(c.num() * (lcm / c.den()) / g);
  for (const auto& c : t.qofn.den().coeffs()) den.push_back(c.num());
  if (num.empty()) num.push_back(0);
  if (den.empty()) den.push_back(1);
}

}  // namespace

json to_json(const Term& t) {
  Rational scalar;
  std::vector<std::int64_t> num, den;
  integerize(t, scalar, num, den);

  json jt;
  jt["scalar"] = {scalar.num(), scalar.den()};
  jt["num"] = num;
  jt["den"] = den;
  json jf = json::array();
  for (const auto& f : t.c.factors) {
    json e;
    e["kind"] = kind_name(f.kind);
    if (f.deriv) e["deriv"] = f.deriv;
    if (f.label) e["label"] = f.label;
    if (f.rank) e["rank"] = f.rank;
    jf.push_back(e);
  }
  jt["factors"] = jf;
  json jp = json::array();
  for (const auto& p : t.c.pairs)
    jp.push_back({{p.first.factor, p.first.slot}, {p.second.factor, p.second.slot}});
  jt["pairs"] = jp;
  if (!t.c.free.empty()) {
    json jr = json::array();
    for (const auto& s : t.c.free) jr.push_back({s.factor, s.slot});
    jt["free"] = jr;
  }
  return jt;
}

json to_json(const LinComb& l) {
  json j;
  j["dim"] = l.dim == formal_dim ? json("N") : json(l.dim);
  if (l.allow_mixed_weight) j["mixed"] = true;
  json jt = json::array();
  for (const auto& t : l.terms) jt.push_back(to_json(t));
  j["terms"] = jt;
  return j;
}

Term term_from_json(const json& j) {
  Term t;
  auto sc = j.at("scalar");
  t.scalar = Rational(sc.at(0).get<std::int64_t>(), sc.at(1).get<std::int64_t>());
  std::vector<Rational> num, den;
  for (const auto& c : j.at("num")) num.emplace_back(c.get<std::int64_t>());
  for (const auto& c : j.at("den")) den.emplace_back(c.get<std::int64_t>());
  t.qofn = RationalFnN(PolyN(std::move(num)), PolyN(std::move(den)));

  std::vector<Factor> factors;
  for (const auto& e : j.at("factors")) {
    Factor f;
    f.kind = kind_of(e.at("kind").get<std::string>());
    f.deriv = e.value("deriv", 0);
    f.label = e.value("label", 0);
    f.rank = e.value("rank", 0);
    factors.push_back(f);
  }
  std::vector<std::pair<Slot, Slot>> pairs;
  for (const auto& p : j.at("pairs"))
    pairs.push_back({{p.at(0).at(0).get<int>(), p.at(0).at(1).get<int>()},
                     {p.at(1).at(0).get<int>(), p.at(1).at(1).get<int>()}});
  std::vector<Slot> free;
  if (j.contains("free"))
    for (const auto& s : j.at("free"))
      free.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
  t.c = make_contraction(std::move(factors), std::move(pairs), std::move(free));
  return t;
}

LinComb lincomb_from_json(const json& j) {
  LinComb l;
  if (j.contains("dim") && j.at("dim").is_number())
    l.dim = j.at("dim").get<int>();
  l.allow_mixed_weight = j.value("mixed", false);
  for (const auto& e : j.at("terms")) l.terms.push_back(term_from_json(e));
  return l;
}

}  // namespace confinv
