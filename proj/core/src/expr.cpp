#include "confinv/expr.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "view.hpp"

namespace confinv {

int Factor::arity() const {
  switch (kind) {
    case FactorKind::Riemann: return deriv + 4;
    case FactorKind::Ricci: return deriv + 2;
    case FactorKind::ScalarR: return 0;
    case FactorKind::Psi: return deriv;
    case FactorKind::Xi: return 1;
    case FactorKind::SXi: return deriv + 1;
    case FactorKind::SGamma: return deriv + 3;
    case FactorKind::Omega: return rank;
    case FactorKind::SpecialXi: return rank + 1;
    case FactorKind::Metric: return 2;
  }
  return 0;
}

int Factor::core_begin() const { return deriv; }

namespace {

// homogeneity of the bare factor under g -> t^2 g (slots stored lowered)
int sigma(const Factor& f) {
  switch (f.kind) {
    case FactorKind::Riemann: return 2;
    case FactorKind::Ricci: return 0;
    case FactorKind::ScalarR: return -2;
    case FactorKind::Psi: return 0;
    case FactorKind::Xi: return 0;
    case FactorKind::SXi: return 0;
    case FactorKind::SGamma: return 2;   // lowered distinguished slot
    case FactorKind::Omega: return 0;
    case FactorKind::SpecialXi: return 2;
    case FactorKind::Metric: return 2;
  }
  return 0;
}

}  // namespace

Contraction make_contraction(std::vector<Factor> factors,
                             std::vector<std::pair<Slot, Slot>> pairs,
                             std::vector<Slot> free) {
  Contraction c;
  c.factors = std::move(factors);
  for (auto& p : pairs) {
    if (p.first == p.second)
      throw Error("SelfPair", "slot paired with itself");
    if (p.second < p.first) std::swap(p.first, p.second);
  }
  std::sort(pairs.begin(), pairs.end());
  c.pairs = std::move(pairs);
  c.free = std::move(free);

  std::set<Slot> seen;
  auto touch = [&](const Slot& s) {
    if (s.factor < 0 || s.factor >= int(c.factors.size()) || s.slot < 0 ||
        s.slot >= c.factors[s.factor].arity())
      throw Error("UncoveredSlot", "slot reference out of range");
    if (!seen.insert(s).second)
      throw Error("OverlappingPairs", "slot used more than once");
  };
  for (const auto& p : c.pairs) { touch(p.first); touch(p.second); }
  for (const auto& s : c.free) touch(s);

  std::size_t total = 0;
  for (const auto& f : c.factors) total += std::size_t(f.arity());
  if (seen.size() != total)
    throw Error("UncoveredSlot", "a slot is neither paired nor free");
  return c;
}

int weight(const Contraction& c) {
  int w = 0;
  for (const auto& f : c.factors) w += sigma(f);
  return w - 2 * int(c.pairs.size());
}

LinComb make_lincomb(std::vector<Term> terms, int dim, bool allow_mixed_weight) {
  LinComb l;
  l.terms = std::move(terms);
  l.dim = dim;
  l.allow_mixed_weight = allow_mixed_weight;
  if (!allow_mixed_weight && !l.terms.empty()) {
    int w = weight(l.terms.front().c);
    for (const auto& t : l.terms)
      if (weight(t.c) != w)
        throw Error("WeightMismatch", "terms of different weight in one list");
  }
  return l;
}

int weight(const LinComb& l) {
  if (l.terms.empty()) return 0;
  int w = weight(l.terms.front().c);
  if (!l.allow_mixed_weight)
    for (const auto& t : l.terms)
      if (weight(t.c) != w)
        throw Error("WeightMismatch", "terms of different weight in one list");
  return w;
}

LinComb rewrite_dimension(const LinComb& l, int dim) {
  LinComb r = l;
  r.dim = dim;
  return r;
}

LinComb pin_coefficients(const LinComb& l) {
  if (l.dim <= 0)
    throw Error("DimensionMismatch", "pinning needs a positive dimension");
  LinComb r;
  r.dim = l.dim;
  r.allow_mixed_weight = l.allow_mixed_weight;
  r.terms.reserve(l.terms.size());
  for (Term t : l.terms) {
    t.scalar *= t.qofn.eval(Rational(l.dim));
    t.qofn = RationalFnN(Rational(1));
    if (!t.scalar.is_zero()) r.terms.push_back(std::move(t));
  }
  return r;
}

LinComb scaled(LinComb l, const Rational& r, const RationalFnN& q) {
  for (auto& t : l.terms) {
    t.scalar *= r;
    t.qofn = t.qofn * q;
  }
  return l;
}

LinComb plus(LinComb a, const LinComb& b) {
  a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
  return a;
}

namespace detail {

TView to_view(const Term& t) {
  TView v;
  v.scalar = t.scalar;
  v.qofn = t.qofn;
  v.fs.reserve(t.c.factors.size());
  for (const auto& f : t.c.factors)
    v.fs.push_back({f, std::vector<int>(std::size_t(f.arity()), INT32_MIN)});
  int id = 0;
  for (const auto& p : t.c.pairs) {
    v.fs[p.first.factor].lab[p.first.slot] = id;
    v.fs[p.second.factor].lab[p.second.slot] = id;
    ++id;
  }
  for (std::size_t k = 0; k < t.c.free.size(); ++k)
    v.fs[t.c.free[k].factor].lab[t.c.free[k].slot] = -1 - int(k);
  v.next = id;
  return v;
}

Term from_view(const TView& v) {
  Term t;
  t.scalar = v.scalar;
  t.qofn = v.qofn;
  std::map<int, std::vector<Slot>> where;
  for (int fi = 0; fi < int(v.fs.size()); ++fi) {
    t.c.factors.push_back(v.fs[fi].f);
    for (int si = 0; si < int(v.fs[fi].lab.size()); ++si)
      where[v.fs[fi].lab[si]].push_back({fi, si});
  }
  std::vector<Slot> free;
  for (auto& [id, slots] : where) {
    if (id < 0) {
      if (slots.size() != 1)
        throw Error("OverlappingPairs", "free link id used twice");
      int k = -1 - id;
      if (int(free.size()) <= k) free.resize(std::size_t(k) + 1, Slot{-1, -1});
      free[std::size_t(k)] = slots.front();
    } else {
      if (slots.size() != 2)
        throw Error("UncoveredSlot", "link id not used exactly twice");
      t.c.pairs.emplace_back(slots[0], slots[1]);
    }
  }
  for (const auto& s : free)
    if (s.factor < 0) throw Error("UncoveredSlot", "gap in free slot numbering");
  t.c = make_contraction(std::move(t.c.factors), std::move(t.c.pairs), std::move(free));
  return t;
}

void tidy(TView& v) {
  std::map<int, int> ren;
  int id = 0;
  for (auto& f : v.fs)
    for (auto& l : f.lab) {
      if (l < 0) continue;
      auto it = ren.find(l);
      if (it == ren.end()) it = ren.emplace(l, id++).first;
      l = it->second;
    }
  v.next = id;
}

int free_count(const TView& v) {
  int c = 0;
  for (const auto& f : v.fs)
    for (int l : f.lab)
      if (l < 0) ++c;
  return c;
}

}  // namespace detail

namespace {

using detail::TView;
using detail::to_view;
using detail::from_view;

// traced Riemann core -> Ricci; traced pair positions are core-relative.
// Returns multiplier 0 for the antisymmetric traces.
int riemann_trace_sign(int a, int b) {
  if (a > b) std::swap(a, b);
  if ((a == 0 && b == 1) || (a == 2 && b == 3)) return 0;
  if ((a == 1 && b == 3) || (a == 0 && b == 2)) return 1;
  return -1;  // (0,3) or (1,2)
}

// One normalization pass over one term; returns true if anything changed.
bool eliminate_pass(Term& t, bool& dropped) {
  TView v = to_view(t);
  for (int fi = 0; fi < int(v.fs.size()); ++fi) {
    auto& f = v.fs[fi];
    if (f.f.kind == FactorKind::Riemann) {
      int cb = f.f.core_begin();
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
          if (f.lab[cb + a] < 0 || f.lab[cb + a] != f.lab[cb + b]) continue;
          int sgn = riemann_trace_sign(a, b);
          if (sgn == 0) { dropped = true; return true; }
          // surviving cores keep their order: trace (0,2)->cores(1,3),
          // (1,3)->cores(0,2), (0,3)->-(1,2), (1,2)->-(0,3)
          std::vector<int> lab(f.lab.begin(), f.lab.begin() + cb);
          for (int q = 0; q < 4; ++q)
            if (q != a && q != b) lab.push_back(f.lab[cb + q]);
          f.f.kind = FactorKind::Ricci;
          f.lab = std::move(lab);
          v.scalar *= Rational(sgn);
          t = from_view(v);
          return true;
        }
    } else if (f.f.kind == FactorKind::Ricci) {
      int cb = f.f.core_begin();
      if (f.lab[cb] >= 0 && f.lab[cb] == f.lab[cb + 1]) {
        if (f.f.deriv == 0) {
          f.f = Factor{FactorKind::ScalarR, 0, 0, 0};
          f.lab.clear();
        } else {
          // grad^p applied to the curvature scalar: innermost derivative
          // moves to a core position, a fresh divergence pair closes it
          int fr = v.fresh();
          int inner = f.lab[f.f.deriv - 1];
          std::vector<int> lab(f.lab.begin(), f.lab.begin() + (f.f.deriv - 1));
          lab.push_back(fr);        // new innermost derivative slot
          lab.push_back(inner);     // core 1: the former innermost derivative
          lab.push_back(fr);        // core 2: contracted against it
          f.lab = std::move(lab);
          v.scalar *= Rational(2);
        }
        t = from_view(v);
        return true;
      }
    }
  }
  return false;
}

}  // namespace

LinComb eliminate_traced_ric(const LinComb& l) {
  LinComb out;
  out.dim = l.dim;
  out.allow_mixed_weight = l.allow_mixed_weight;
  for (Term t : l.terms) {
    bool dropped = false;
    while (eliminate_pass(t, dropped) && !dropped) {}
    if (!dropped) out.terms.push_back(std::move(t));
  }
  return out;
}

}  // namespace confinv
