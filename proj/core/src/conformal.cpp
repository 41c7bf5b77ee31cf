#include "confinv/conformal.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "confinv/canon.hpp"
#include "calculus.hpp"
#include "view.hpp"

namespace confinv {
namespace {

using detail::FView;
using detail::TView;

// One summand of the conformal law of a (derived) factor. The factor's
// e^{q omega} prefactor is implied by its kind and not stored; slots of the
// original factor appear through their unique placeholder ids.
struct Fragment {
  Rational sc{1};
  RationalFnN q{Rational(1)};
  std::vector<FView> fs;
};

int conf_exponent(FactorKind k) {
  switch (k) {
    case FactorKind::Riemann:
    case FactorKind::Metric:
      return 2;
    case FactorKind::ScalarR:
      return -2;
    default:
      return 0;
  }
}

FView mk(FactorKind k, int deriv, int label, std::vector<int> lab) {
  FView f;
  f.f.kind = k;
  f.f.deriv = deriv;
  f.f.label = label;
  f.f.rank = 0;
  f.lab = std::move(lab);
  return f;
}

FView omega_tower(int m, std::vector<int> lab) {
  return mk(FactorKind::Psi, m, 0, std::move(lab));
}

FView metric2(int a, int b) { return mk(FactorKind::Metric, 0, 0, {a, b}); }

void relabel_one(std::vector<FView>& fs, int from, int to) {
  for (auto& f : fs)
    for (auto& l : f.lab)
      if (l == from) {
        l = to;
        return;
      }
  throw Error("InternalError", "lost track of a factor slot");
}

// Laws for the underived factors, slots carrying the ids u:
//   hat g = e^{2w} g                   hat R = e^{-2w} (R + 2(1-N) Lap w
//                                              - (N-1)(N-2) |grad w|^2)
//   hat Ric = Ric + (2-N) Hess w - Lap w g + (N-2)(dw dw - |grad w|^2 g)
//   hat Rm_{ijkl} = e^{2w} (Rm + w_i w_k g_jl - w_i w_l g_jk + w_j w_l g_ik
//                   - w_j w_k g_il - H_ik g_jl - H_jl g_ik + H_jk g_il
//                   + H_il g_jk + |grad w|^2 (g_il g_jk - g_ik g_jl))
std::vector<Fragment> base_fragments(const Factor& f, const std::vector<int>& u,
                                     int& next) {
  std::vector<Fragment> out;
  auto add = [&out](Rational sc, RationalFnN q, std::vector<FView> fs) {
    out.push_back(Fragment{sc, std::move(q), std::move(fs)});
  };
  const RationalFnN one{Rational(1)};
  switch (f.kind) {
    case FactorKind::Psi:
      add(1, one, {mk(FactorKind::Psi, 0, f.label, {})});
      break;
    case FactorKind::Metric:
      add(1, one, {metric2(u[0], u[1])});
      break;
    case FactorKind::ScalarR: {
      add(1, one, {mk(FactorKind::ScalarR, 0, 0, {})});
      int e = next++;
      add(1, RationalFnN(PolyN::linear(Rational(2), Rational(-2))),
          {omega_tower(2, {e, e})});
      int e2 = next++;
      add(1,
          RationalFnN(PolyN(
              std::vector<Rational>{Rational(-2), Rational(3), Rational(-1)})),
          {omega_tower(1, {e2}), omega_tower(1, {e2})});
      break;
    }
    case FactorKind::Ricci: {
      int a = u[0], b = u[1];
      add(1, one, {mk(FactorKind::Ricci, 0, 0, {a, b})});
      add(1, RationalFnN(PolyN::linear(Rational(2), Rational(-1))),
          {omega_tower(2, {a, b})});
      int e = next++;
      add(-1, one, {omega_tower(2, {e, e}), metric2(a, b)});
      add(1, RationalFnN(PolyN::linear(Rational(-2), Rational(1))),
          {omega_tower(1, {a}), omega_tower(1, {b})});
      int e2 = next++;
      add(-1, RationalFnN(PolyN::linear(Rational(-2), Rational(1))),
          {omega_tower(1, {e2}), omega_tower(1, {e2}), metric2(a, b)});
      break;
    }
    case FactorKind::Riemann: {
      int i = u[0], j = u[1], k = u[2], l = u[3];
      add(1, one, {mk(FactorKind::Riemann, 0, 0, {i, j, k, l})});
      auto pp = [&](int x, int y, int ma, int mb, Rational s) {
        add(s, RationalFnN(Rational(1)),
            {omega_tower(1, {x}), omega_tower(1, {y}), metric2(ma, mb)});
      };
      pp(i, k, j, l, 1);
      pp(i, l, j, k, -1);
      pp(j, l, i, k, 1);
      pp(j, k, i, l, -1);
      auto hh = [&](int x, int y, int ma, int mb, Rational s) {
        add(s, RationalFnN(Rational(1)),
            {omega_tower(2, {x, y}), metric2(ma, mb)});
      };
      hh(i, k, j, l, -1);
      hh(j, l, i, k, -1);
      hh(j, k, i, l, 1);
      hh(i, l, j, k, 1);
      int e = next++;
      add(1, one,
          {omega_tower(1, {e}), omega_tower(1, {e}), metric2(i, l),
           metric2(j, k)});
      int e2 = next++;
      add(-1, one,
          {omega_tower(1, {e2}), omega_tower(1, {e2}), metric2(i, k),
           metric2(j, l)});
      break;
    }
    default:
      throw Error("UnsupportedFactor",
                  "conformal variation is defined for intrinsic factors only");
  }
  return out;
}

// One derivative layer. With gslots the slot ids of the underlying object G
// and q its exponential prefactor,
//   hatgrad_a (e^{qw} G) = e^{qw} [ q w_a G + grad_a G
//       + sum_{c in slots} ( -w_a G - w_c G(c->a) + g_{ac} w^s G(c->s) ) ].
std::vector<Fragment> wrap_derivative(const std::vector<Fragment>& in, int ud,
                                      const std::vector<int>& gslots, int qexp,
                                      int& next) {
  std::vector<Fragment> out;
  for (const auto& fr : in) {
    Rational c(qexp - int(gslots.size()));
    if (!c.is_zero()) {
      Fragment nf = fr;
      nf.sc *= c;
      nf.fs.push_back(omega_tower(1, {ud}));
      out.push_back(std::move(nf));
    }
    for (std::size_t fi = 0; fi < fr.fs.size(); ++fi) {
      switch (fr.fs[fi].f.kind) {
        case FactorKind::Metric:
          break;
        case FactorKind::ScalarR: {
          Fragment nf = fr;
          nf.sc *= Rational(2);
          int e = next++;
          nf.fs[fi] = mk(FactorKind::Ricci, 1, 0, {e, ud, e});
          out.push_back(std::move(nf));
          break;
        }
        default: {
          Fragment nf = fr;
          nf.fs[fi].f.deriv += 1;
          nf.fs[fi].lab.insert(nf.fs[fi].lab.begin(), ud);
          out.push_back(std::move(nf));
          break;
        }
      }
    }
    for (int lc : gslots) {
      {
        Fragment nf = fr;
        nf.sc *= Rational(-1);
        relabel_one(nf.fs, lc, ud);
        nf.fs.push_back(omega_tower(1, {lc}));
        out.push_back(std::move(nf));
      }
      {
        Fragment nf = fr;
        int s = next++;
        relabel_one(nf.fs, lc, s);
        nf.fs.push_back(omega_tower(1, {s}));
        nf.fs.push_back(metric2(ud, lc));
        out.push_back(std::move(nf));
      }
    }
  }
  return out;
}

std::vector<Fragment> vary_factor(const Factor& f, const std::vector<int>& u,
                                  int& next) {
  if (f.kind == FactorKind::Psi && f.label == 0)
    throw Error("UnsupportedFactor", "label-0 scalar towers cannot be varied");
  std::vector<int> gslots(u.begin() + f.deriv, u.end());
  Factor base = f;
  base.deriv = 0;
  std::vector<Fragment> frs = base_fragments(base, gslots, next);
  for (int q = f.deriv - 1; q >= 0; --q) {
    frs = wrap_derivative(frs, u[q], gslots, conf_exponent(f.kind), next);
    gslots.insert(gslots.begin(), u[q]);
  }
  return frs;
}

// Expands e^{-w(C) omega} C(e^{2 omega} g) for one term, including the
// unvaried summand (the caller subtracts the original).
void assemble(const Term& t, XiMode mode, std::vector<Term>& out) {
  TView v = detail::to_view(t);
  const int u0 = v.next;
  int next = u0;
  std::vector<int> orig;
  std::vector<std::vector<int>> u(v.fs.size());
  for (std::size_t i = 0; i < v.fs.size(); ++i)
    for (int l : v.fs[i].lab) {
      u[i].push_back(next++);
      orig.push_back(l);
    }
  std::vector<std::vector<Fragment>> parts;
  parts.reserve(v.fs.size());
  for (std::size_t i = 0; i < v.fs.size(); ++i)
    parts.push_back(vary_factor(v.fs[i].f, u[i], next));

  std::vector<std::size_t> pick(parts.size(), 0);
  for (;;) {
    TView nt;
    nt.scalar = t.scalar;
    nt.qofn = t.qofn;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Fragment& fr = parts[i][pick[i]];
      nt.scalar *= fr.sc;
      nt.qofn = nt.qofn * fr.q;
      nt.fs.insert(nt.fs.end(), fr.fs.begin(), fr.fs.end());
    }
    for (auto& fv : nt.fs)
      for (auto& l : fv.lab)
        if (l >= u0 && l < u0 + int(orig.size())) l = orig[l - u0];
    nt.next = next;
    detail::eliminate_metric(nt);
    if (mode == XiMode::Linear) {
      for (auto& r : detail::psi0_to_xi(nt)) {
        detail::tidy(r);
        out.push_back(detail::from_view(r));
      }
    } else {
      detail::tidy(nt);
      out.push_back(detail::from_view(nt));
    }
    std::size_t ax = 0;
    while (ax < pick.size()) {
      if (++pick[ax] < parts[ax].size()) break;
      pick[ax] = 0;
      ++ax;
    }
    if (ax == pick.size()) break;
  }
}

}  // namespace

LinComb conformal_variation(const LinComb& l, XiMode mode) {
  LinComb in = eliminate_traced_ric(l);
  if (!in.terms.empty()) {
    int w = weight(in.terms.front().c);
    for (const auto& t : in.terms)
      if (weight(t.c) != w)
        throw Error("WeightMismatch",
                    "conformal variation needs one common weight");
  }
  std::vector<Term> acc;
  for (const auto& t : in.terms) {
    assemble(t, mode, acc);
    Term neg = t;
    neg.scalar = -neg.scalar;
    acc.push_back(std::move(neg));
  }
  LinComb res;
  res.dim = in.dim;
  res.allow_mixed_weight = in.allow_mixed_weight;
  res.terms = std::move(acc);
  if (in.dim != formal_dim) {
    for (auto& t : res.terms) {
      t.scalar *= t.qofn.eval(Rational(in.dim));
      t.qofn = RationalFnN(Rational(1));
    }
  }
  // the variation rules reopen traced shapes; normalize like the input
  return collect(eliminate_traced_ric(collect(res)));
}

LinComb polarize(const LinComb& l, int z) {
  if (z < 1 || z > 9)
    throw Error("PositionOutOfRange", "polarization order must be in 1..9");
  LinComb out;
  out.dim = l.dim;
  out.allow_mixed_weight = l.allow_mixed_weight;
  for (const auto& t : l.terms) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < t.c.factors.size(); ++i) {
      const Factor& f = t.c.factors[i];
      if (f.kind == FactorKind::Psi && f.label == 0) pos.push_back(i);
    }
    if (int(pos.size()) != z) continue;
    std::vector<int> labs(static_cast<std::size_t>(z));
    std::iota(labs.begin(), labs.end(), 1);
    do {
      Term nt = t;
      for (int i = 0; i < z; ++i) nt.c.factors[pos[std::size_t(i)]].label = labs[std::size_t(i)];
      out.terms.push_back(std::move(nt));
    } while (std::next_permutation(labs.begin(), labs.end()));
  }
  return collect(out);
}

XiCounts xi_counts(const Term& t) {
  XiCounts c;
  for (const auto& f : t.c.factors) {
    if (f.kind == FactorKind::Xi) ++c.plain;
    if (f.kind == FactorKind::SXi) ++c.towers;
  }
  c.qdeg = std::max(t.qofn.degree(), 0);
  for (const auto& p : t.c.pairs)
    if (t.c.factors[std::size_t(p.first.factor)].kind == FactorKind::Xi &&
        t.c.factors[std::size_t(p.second.factor)].kind == FactorKind::Xi)
      ++c.xixi;
  return c;
}

XiClass classify(const Term& t) {
  XiCounts c = xi_counts(t);
  int kl = c.plain + c.towers;
  if (kl == 0)
    throw Error("NoXiFactor", "classification needs a gradient-field factor");
  if (c.qdeg > kl)
    throw Error("InconsistentCounts",
                "coefficient degree exceeds the factor bound");
  if (c.qdeg < kl) return XiClass::Easy;
  if (c.xixi > 0 && c.plain == 2 * c.xixi)
    return c.towers == 0 ? XiClass::Stigmatized1 : XiClass::Stigmatized2;
  if (c.towers == 0) return XiClass::Good;
  if (c.plain > 0) return XiClass::Undecided;
  return XiClass::Hard;
}

int xi_length(const Term& t) {
  int n = 0;
  for (const auto& f : t.c.factors) {
    switch (f.kind) {
      case FactorKind::Riemann:
      case FactorKind::Ricci:
      case FactorKind::ScalarR:
      case FactorKind::Psi:
      case FactorKind::SXi:
      case FactorKind::SGamma:
      case FactorKind::Omega:
      case FactorKind::SpecialXi:
        ++n;
        break;
      default:
        break;
    }
  }
  return n + xi_counts(t).xixi;
}

LinComb descend(const LinComb& l) {
  // A pinned input is an invariant of that dimension: its coefficients are
  // numbers there, and the functions of N in the output express the
  // trans-dimensional family afresh.
  LinComb in = l.dim > 0 ? pin_coefficients(l) : l;
  LinComb v =
      conformal_variation(rewrite_dimension(in, formal_dim), XiMode::Linear);
  for (const auto& t : v.terms) {
    XiCounts c = xi_counts(t);
    if (c.plain + c.towers < 1 || c.qdeg > c.plain + c.towers)
      throw Error("InternalError", "descendant outside the classification range");
  }
  return v;
}

LinComb acceptable_descendants(const LinComb& l) {
  LinComb d = descend(l);
  LinComb out;
  out.dim = d.dim;
  out.allow_mixed_weight = d.allow_mixed_weight;
  for (const auto& t : d.terms) {
    XiCounts c = xi_counts(t);
    if (c.qdeg == c.plain + c.towers) out.terms.push_back(t);
  }
  return out;
}

}  // namespace confinv
