#include "confinv/ibp.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "confinv/canon.hpp"
#include "confinv/conformal.hpp"
#include "confinv/parse.hpp"
#include "calculus.hpp"
#include "view.hpp"

namespace confinv {

namespace {

using detail::FView;
using detail::TView;
using detail::from_view;
using detail::tidy;
using detail::to_view;

constexpr const char* kConvention =
    "input = sum of div(field) over the emitted fields; one parts-integration "
    "step carries sign -1 and divisor (N-n); leading coefficients are taken "
    "at emission only";

// ---------------------------------------------------------------------------
// trace rendering

void json_escape(std::string& o, const std::string& s) {
  for (char ch : s) {
    switch (ch) {
      case '"': o += "\\\""; break;
      case '\\': o += "\\\\"; break;
      case '\n': o += "\\n"; break;
      case '\t': o += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          static const char* hex = "0123456789abcdef";
          o += "\\u00";
          o += hex[(ch >> 4) & 0xf];
          o += hex[ch & 0xf];
        } else {
          o += ch;
        }
    }
  }
}

void node_json(std::string& o, const IbpNode& nd, int depth) {
  std::string pad(static_cast<std::size_t>(2 * depth), ' ');
  o += pad;
  o += "{\n";
  o += pad;
  o += "  \"term\": \"";
  json_escape(o, nd.term);
  o += "\",\n";
  o += pad;
  o += "  \"cls\": \"";
  json_escape(o, nd.cls);
  o += "\",\n";
  o += pad;
  o += "  \"action\": \"";
  json_escape(o, nd.action);
  o += "\",\n";
  o += pad;
  o += "  \"factor\": " + std::to_string(nd.factor) + ",\n";
  o += pad;
  o += "  \"children\": [";
  if (nd.children.empty()) {
    o += "]\n";
  } else {
    o += "\n";
    for (std::size_t i = 0; i < nd.children.size(); ++i) {
      node_json(o, nd.children[i], depth + 2);
      o += i + 1 < nd.children.size() ? ",\n" : "\n";
    }
    o += pad;
    o += "  ]\n";
  }
  o += pad;
  o += "}";
}

const char* class_name(XiClass c) {
  switch (c) {
    case XiClass::Good: return "good";
    case XiClass::Easy: return "easy";
    case XiClass::Undecided: return "undecided";
    case XiClass::Hard: return "hard";
    case XiClass::Stigmatized1: return "stigmatized1";
    case XiClass::Stigmatized2: return "stigmatized2";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// shared helpers

// Takes the N -> infinity limit of the coefficient. The expected degree is
// structural (0 for gradient-free terms, 1 at vector emission, plain+towers
// for parked terms); a larger one would mean the recursion lost count.
bool fold_leading(Term& t, int expect) {
  if (t.scalar.is_zero() || t.qofn.is_zero()) return false;
  int d = t.qofn.degree();
  if (d > expect)
    throw Error("InternalError", "coefficient degree exceeds the factor bound");
  if (d < expect) return false;
  t.scalar *= t.qofn.leading();
  t.qofn = RationalFnN(Rational(1));
  return !t.scalar.is_zero();
}

// Lowest plain gradient factor whose partner slot is not on another plain
// gradient; with allow_fallback, the lowest plain gradient otherwise (only
// stigmatized terms need the fallback).
int choose_xi(const TView& tv, bool allow_fallback) {
  int fallback = -1;
  for (int i = 0; i < static_cast<int>(tv.fs.size()); ++i) {
    if (tv.fs[static_cast<std::size_t>(i)].f.kind != FactorKind::Xi) continue;
    if (fallback < 0) fallback = i;
    int lab = tv.fs[static_cast<std::size_t>(i)].lab[0];
    bool partner_on_xi = false;
    for (int j = 0; j < static_cast<int>(tv.fs.size()); ++j) {
      const FView& f = tv.fs[static_cast<std::size_t>(j)];
      for (int s = 0; s < static_cast<int>(f.lab.size()); ++s) {
        if (j == i && s == 0) continue;
        if (f.lab[static_cast<std::size_t>(s)] == lab) {
          partner_on_xi = f.f.kind == FactorKind::Xi;
        }
      }
    }
    if (!partner_on_xi) return i;
  }
  if (fallback >= 0 && allow_fallback) return fallback;
  throw Error(fallback < 0 ? "NoXiFactor" : "InternalError",
              "no admissible gradient factor to integrate by parts");
}

// Replaces the unique occurrence of the link `lab` by the free marker.
void free_link(TView& tv, int lab) {
  int hits = 0;
  for (FView& f : tv.fs)
    for (int& l : f.lab)
      if (l == lab) {
        l = -1;
        ++hits;
      }
  if (hits != 1)
    throw Error("InternalError", "freed link did not occur exactly once");
}

enum class HardRule { Discard, Park, GammaExpand };
enum class StigRule { Discard, Park, IbpFallback };

struct Policy {
  HardRule hard = HardRule::Discard;
  StigRule stig = StigRule::Discard;
  bool stop_at_one_xi = false;  // act on good single-gradient terms...
  bool emit_vector = false;     // ...by emitting a field (else discarding)
};

struct Outputs {
  std::vector<Term> fields;   // one free slot each
  std::vector<Term> scalars;  // gradient-free
  std::vector<Term> parked;   // hard / stigmatized, limit coefficients
};

void park_term(const Term& t, int bound, Outputs& out, IbpNode& node) {
  Term p = t;
  if (fold_leading(p, bound)) {
    node.action = "park";
    out.parked.push_back(std::move(p));
  } else {
    node.action = "drop-vanishing";
  }
}

void emit_vector(const Term& t, Outputs& out, IbpNode& node) {
  TView tv = to_view(t);
  int xi = -1;
  for (int i = 0; i < static_cast<int>(tv.fs.size()); ++i)
    if (tv.fs[static_cast<std::size_t>(i)].f.kind == FactorKind::Xi) xi = i;
  if (xi < 0) throw Error("InternalError", "vector emission without a gradient");
  int lab = tv.fs[static_cast<std::size_t>(xi)].lab[0];
  tv.fs.erase(tv.fs.begin() + xi);
  free_link(tv, lab);
  tidy(tv);
  Term v = from_view(tv);
  if (fold_leading(v, 1)) {
    node.action = "emit-vector";
    node.factor = xi;
    out.fields.push_back(std::move(v));
  } else {
    node.action = "drop-vanishing";
  }
}

void sieve(const Term& t, int n, const Policy& pol, Outputs& out,
           IbpNode& node) {
  node.term = serialize_text(t);
  XiCounts c = xi_counts(t);
  if (c.plain + c.towers == 0) {
    Term e = t;
    if (fold_leading(e, 0)) {
      node.action = "emit-scalar";
      out.scalars.push_back(std::move(e));
    } else {
      node.action = "drop-vanishing";
    }
    return;
  }
  XiClass cls = classify(t);
  node.cls = class_name(cls);
  bool fallback = false;
  switch (cls) {
    case XiClass::Easy:
      node.action = "drop-easy";
      return;
    case XiClass::Hard: {
      if (pol.hard == HardRule::Discard) {
        node.action = "discard";
        return;
      }
      if (pol.hard == HardRule::Park) {
        park_term(t, c.plain + c.towers, out, node);
        return;
      }
      TView tv = to_view(t);
      int sx = -1;
      for (int i = static_cast<int>(tv.fs.size()); i-- > 0;)
        if (tv.fs[static_cast<std::size_t>(i)].f.kind == FactorKind::SXi) sx = i;
      node.action = "gamma-expand";
      node.factor = sx;
      for (TView& piece : detail::xi_gamma_expand(tv, sx)) {
        tidy(piece);
        node.children.emplace_back();
        sieve(from_view(piece), n, pol, out, node.children.back());
      }
      return;
    }
    case XiClass::Stigmatized1:
    case XiClass::Stigmatized2:
      if (pol.stig == StigRule::Discard) {
        node.action = "discard";
        return;
      }
      if (pol.stig == StigRule::Park) {
        park_term(t, c.plain + c.towers, out, node);
        return;
      }
      fallback = true;
      break;
    case XiClass::Good:
      if (c.plain == 1 && pol.stop_at_one_xi) {
        if (pol.emit_vector) {
          emit_vector(t, out, node);
        } else {
          node.action = "discard-final";
        }
        return;
      }
      break;
    case XiClass::Undecided:
      break;
  }
  int xi = choose_xi(to_view(t), fallback);
  node.action = "ibp";
  node.factor = xi;
  LinComb kids = ibp_step(t, xi, n);
  node.children.reserve(kids.terms.size());
  for (const Term& k : kids.terms) {
    node.children.emplace_back();
    sieve(k, n, pol, out, node.children.back());
  }
}

// Runs the sieve over every collected descendant of iz; returns outputs and
// appends one root per descendant to `roots`.
Outputs run_sieve(const LinComb& iz, const Policy& pol,
                  std::vector<IbpNode>& roots) {
  Outputs out;
  if (iz.terms.empty()) return out;
  int n = -weight(iz);
  LinComb d = collect(descend(iz));
  roots.reserve(roots.size() + d.terms.size());
  for (const Term& t : d.terms) {
    roots.emplace_back();
    sieve(t, n, pol, out, roots.back());
  }
  return out;
}

// Entry normalization: evaluate pinned coefficients, contract away metric
// factors, rewrite traced curvature shapes.
LinComb tidy_input(const LinComb& l) {
  LinComb in = l.dim > 0 ? pin_coefficients(l) : l;
  LinComb r;
  r.dim = in.dim;
  r.allow_mixed_weight = in.allow_mixed_weight;
  r.terms.reserve(in.terms.size());
  for (const Term& t : in.terms) {
    TView tv = to_view(t);
    detail::eliminate_metric(tv);
    tidy(tv);
    r.terms.push_back(from_view(tv));
  }
  return eliminate_traced_ric(r);
}

// Parts-integration hits reopen traced curvature shapes; route outputs get
// the same normalization as inputs.
LinComb finish(LinComb l) {
  return collect(eliminate_traced_ric(collect(std::move(l))));
}

}  // namespace

std::string trace_to_json(const IbpTrace& t) {
  std::string o = "{\n  \"convention\": \"";
  json_escape(o, t.convention);
  o += "\",\n  \"roots\": [";
  if (t.roots.empty()) {
    o += "]\n}\n";
    return o;
  }
  o += "\n";
  for (std::size_t i = 0; i < t.roots.size(); ++i) {
    node_json(o, t.roots[i], 2);
    o += i + 1 < t.roots.size() ? ",\n" : "\n";
  }
  o += "  ]\n}\n";
  return o;
}

LinComb expand_divergence(const DivergenceFormula& f) {
  LinComb out;
  out.dim = f.fields.dim;
  out.allow_mixed_weight = f.fields.allow_mixed_weight;
  for (const Term& t : f.fields.terms) {
    TView tv = to_view(t);
    int lab = tv.fresh();
    int frees = 0;
    for (FView& fv : tv.fs)
      for (int& l : fv.lab)
        if (l == -1) {
          l = lab;
          ++frees;
        }
    if (frees != 1)
      throw Error("InternalError", "a field needs exactly one free slot");
    for (TView& piece : detail::grad_term(tv, lab)) {
      tidy(piece);
      out.terms.push_back(from_view(piece));
    }
  }
  return collect(out);
}

LinComb ibp_step(const Term& t, int xi_factor, int n) {
  if (xi_factor < 0 ||
      xi_factor >= static_cast<int>(t.c.factors.size()))
    throw Error("PositionOutOfRange", "no factor at the chosen position");
  if (t.c.factors[static_cast<std::size_t>(xi_factor)].kind != FactorKind::Xi)
    throw Error("NoXiFactor", "the chosen factor is not a plain gradient");
  TView tv = to_view(t);
  int lab = tv.fs[static_cast<std::size_t>(xi_factor)].lab[0];
  if (lab < 0)
    throw Error("NoXiFactor", "the chosen gradient factor is uncontracted");
  tv.fs.erase(tv.fs.begin() + xi_factor);
  tv.scalar = -tv.scalar;
  tv.qofn = tv.qofn /
            RationalFnN(PolyN::linear(Rational(-n), Rational(1)));
  LinComb out;
  out.dim = formal_dim;
  for (int fp = 0; fp < static_cast<int>(tv.fs.size()); ++fp) {
    for (TView& piece : detail::grad_factor(tv, fp, lab)) {
      tidy(piece);
      out.terms.push_back(from_view(piece));
    }
  }
  return out;
}

DivergenceFormula silly_divergence(const LinComb& l) {
  DivergenceFormula f;
  f.trace.convention = kConvention;
  f.fields.dim = l.dim;
  f.fields.allow_mixed_weight = true;
  LinComb work = collect(tidy_input(l));
  work.allow_mixed_weight = true;
  auto nu1 = [](const Term& t) {
    int best = 0;
    for (const Factor& fc : t.c.factors)
      if (fc.kind == FactorKind::Psi && fc.label == 1)
        best = std::max(best, fc.deriv);
    return best;
  };
  for (;;) {
    int best = 0;
    for (const Term& t : work.terms) best = std::max(best, nu1(t));
    if (best == 0) break;
    LinComb next;
    next.dim = work.dim;
    next.allow_mixed_weight = true;
    for (const Term& t : work.terms) {
      if (nu1(t) < best) {
        next.terms.push_back(t);
        continue;
      }
      int p = -1;
      for (int i = 0; i < static_cast<int>(t.c.factors.size()); ++i) {
        const Factor& fc = t.c.factors[static_cast<std::size_t>(i)];
        if (fc.kind == FactorKind::Psi && fc.label == 1 && fc.deriv == best) {
          p = i;
          break;
        }
      }
      TView tv = to_view(t);
      FView& pf = tv.fs[static_cast<std::size_t>(p)];
      int lab = pf.lab[0];
      if (lab < 0)
        throw Error("InternalError", "peeling expects complete contractions");
      pf.f.deriv -= 1;
      pf.lab.erase(pf.lab.begin());
      f.trace.roots.emplace_back();
      IbpNode& node = f.trace.roots.back();
      node.term = serialize_text(t);
      node.action = "peel";
      node.factor = p;
      TView vt = tv;
      free_link(vt, lab);
      tidy(vt);
      Term v = from_view(vt);
      node.children.emplace_back();
      node.children.back().term = serialize_text(v);
      node.children.back().action = "emit-vector";
      f.fields.terms.push_back(std::move(v));
      for (int fp = 0; fp < static_cast<int>(tv.fs.size()); ++fp) {
        if (fp == p) continue;
        for (TView& piece : detail::grad_factor(tv, fp, lab)) {
          piece.scalar = -piece.scalar;
          tidy(piece);
          Term hit = from_view(piece);
          node.children.emplace_back();
          node.children.back().term = serialize_text(hit);
          node.children.back().action = "requeue";
          next.terms.push_back(std::move(hit));
        }
      }
    }
    work = collect(next);
  }
  f.trace.roots.emplace_back();
  f.trace.roots.back().term = serialize_text(work);
  f.trace.roots.back().action = "residual";
  if (!work.terms.empty() && !is_formally_zero(work))
    throw Error("ResidualNonzero",
                "the peeled remainder is not formally zero: " +
                    serialize_text(work));
  f.fields = finish(std::move(f.fields));
  return f;
}

LinComb outgrowth(const Term& x) {
  Policy pol;
  pol.hard = HardRule::Discard;
  pol.stig = StigRule::IbpFallback;
  Outputs out;
  IbpNode scratch;
  sieve(x, -weight(x.c), pol, out, scratch);
  return finish(LinComb{std::move(out.scalars), formal_dim, false});
}

LinComb pure_outgrowth(const Term& x) {
  Policy pol;
  pol.hard = HardRule::Discard;
  pol.stig = StigRule::Discard;
  Outputs out;
  IbpNode scratch;
  sieve(x, -weight(x.c), pol, out, scratch);
  return finish(LinComb{std::move(out.scalars), formal_dim, false});
}

DivergenceFormula super_divergence(const LinComb& iz) {
  DivergenceFormula f;
  f.trace.convention = kConvention;
  Policy pol;
  pol.stop_at_one_xi = true;
  pol.emit_vector = true;
  Outputs out = run_sieve(iz, pol, f.trace.roots);
  f.fields = finish(LinComb{std::move(out.fields), iz.dim, false});
  return f;
}

LinComb shadow(const LinComb& iz, IbpTrace* trace) {
  IbpTrace tr;
  tr.convention = kConvention;
  Policy pol;
  pol.hard = HardRule::Park;
  pol.stig = StigRule::Park;
  pol.stop_at_one_xi = true;
  Outputs out = run_sieve(iz, pol, tr.roots);
  if (trace) *trace = std::move(tr);
  return finish(LinComb{std::move(out.parked), iz.dim, false});
}

std::vector<std::pair<int, LinComb>> grade_by_xixi(const LinComb& l) {
  std::map<int, std::vector<Term>> grades;
  for (const Term& t : l.terms) grades[xi_counts(t).xixi].push_back(t);
  std::vector<std::pair<int, LinComb>> out;
  out.reserve(grades.size());
  for (auto& [g, ts] : grades)
    out.emplace_back(g, LinComb{std::move(ts), l.dim, l.allow_mixed_weight});
  return out;
}

LinComb tail(const Term& c) {
  LinComb out{{c}, formal_dim, false};
  LinComb seed{{c}, formal_dim, false};
  for (const Term& t : collect(descend(seed)).terms) {
    XiClass cls = classify(t);
    if (cls == XiClass::Good || cls == XiClass::Undecided)
      out = plus(std::move(out), pure_outgrowth(t));
  }
  return collect(out);
}

LinComb tail_shadow(const Term& c) {
  LinComb seed{{c}, formal_dim, false};
  Policy pol;
  pol.hard = HardRule::Park;
  pol.stig = StigRule::Park;
  pol.stop_at_one_xi = true;
  std::vector<IbpNode> roots;
  Outputs out = run_sieve(seed, pol, roots);
  return finish(LinComb{std::move(out.parked), formal_dim, false});
}

std::pair<LinComb, LinComb> simple_divergence(const LinComb& iz,
                                              IbpTrace* trace) {
  IbpTrace tr;
  tr.convention = kConvention;
  Policy pol;
  pol.hard = HardRule::GammaExpand;
  pol.stig = StigRule::IbpFallback;
  Outputs out = run_sieve(iz, pol, tr.roots);
  auto [intr, unintr] =
      split_intrinsic(finish(LinComb{std::move(out.scalars), iz.dim, false}));
  LinComb base = iz.dim > 0 ? pin_coefficients(iz) : iz;
  LinComb residual = collect(plus(std::move(base), intr));
  if (trace) *trace = std::move(tr);
  return {std::move(residual), std::move(unintr)};
}

Term df_term(const Term& hard) {
  XiCounts c = xi_counts(hard);
  if (c.plain != 0 || c.towers == 0)
    throw Error("NoXiFactor",
                "defined for terms whose gradients sit in symmetrized towers");
  TView tv = to_view(hard);
  for (FView& fv : tv.fs) {
    if (fv.f.kind != FactorKind::SXi) continue;
    int m = fv.f.deriv;
    int lab = tv.fresh();
    std::vector<int> nl;
    nl.reserve(static_cast<std::size_t>(m) + 3);
    nl.push_back(lab);
    for (int s = 0; s + 1 < static_cast<int>(fv.lab.size()); ++s)
      nl.push_back(fv.lab[static_cast<std::size_t>(s)]);
    nl.push_back(fv.lab.back());
    nl.push_back(lab);
    fv.f = Factor{FactorKind::SGamma, m, 0, 0};
    fv.lab = std::move(nl);
    tv.scalar = -tv.scalar;
  }
  tidy(tv);
  return from_view(tv);
}

}  // namespace confinv
