#include "calculus.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <utility>

namespace confinv::detail {

namespace {

Rational inv_factorial(int k) {
  std::int64_t f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return Rational(1, f);
}

// bubble path of adjacent transpositions sorting perm; each entry is a
// position t meaning "swap entries (t, t+1)"
std::vector<int> bubble_path(std::vector<int> perm) {
  std::vector<int> steps;
  for (std::size_t i = 0; i + 1 < perm.size(); ++i)
    for (std::size_t j = 0; j + 1 < perm.size() - i; ++j)
      if (perm[j] > perm[j + 1]) {
        std::swap(perm[j], perm[j + 1]);
        steps.push_back(int(j));
      }
  return steps;
}

// ---- connection words ----------------------------------------------------
// A raw (unsymmetrized) formal derivative word of the lowered connection:
// grad_{d1..dL} G_{i j u} with every slot treated covariantly. Such words
// exist only inside the reduction below; public terms carry the
// block-symmetrized SGamma kind.
struct GW {
  std::vector<int> d;
  int i = 0, j = 0, u = 0;
};

using Sink = std::function<void(TView)>;

void reduce_word(const TView& base, const GW& w, const Rational& coef,
                 const Sink& sink);

TView emit_sym(const TView& base, const GW& w, const Rational& coef) {
  TView t = base;
  t.scalar *= coef;
  FView f;
  f.f = Factor{FactorKind::SGamma, int(w.d.size()), 0, 0};
  f.lab = w.d;
  f.lab.push_back(w.i);
  f.lab.push_back(w.j);
  f.lab.push_back(w.u);
  t.fs.push_back(std::move(f));
  return t;
}

// Correction pieces for one adjacent transposition at position t of the
// block sequence (d1..dL, i, j); the word is mutated to the swapped
// arrangement and the pieces are fed back through reduce_word.
void swap_step(const TView& base, GW& w, int t, const Rational& coef,
               const Sink& sink) {
  int L = int(w.d.size());
  if (t == L) {  // symmetric core pair, no correction
    std::swap(w.i, w.j);
    return;
  }
  if (t == L - 1) {
    // curl of the lowered connection, under the outer derivative prefix:
    // grad_x G_{yju} - grad_y G_{xju}
    //   = Rm_{yxju} + G_{yjf} G_{xfu} - G_{xjf} G_{yfu}
    int x = w.d[std::size_t(t)], y = w.i;
    std::vector<int> prefix(w.d.begin(), w.d.begin() + t);
    {
      TView nt = base;
      nt.scalar *= coef;
      FView rf;
      rf.f = Factor{FactorKind::Riemann, t, 0, 0};
      rf.lab = prefix;
      rf.lab.insert(rf.lab.end(), {y, x, w.j, w.u});
      nt.fs.push_back(std::move(rf));
      sink(std::move(nt));
    }
    for (int which = 0; which < 2; ++which) {
      int a = which == 0 ? y : x;
      int b = which == 0 ? x : y;
      Rational sgn = which == 0 ? coef : -coef;
      for (int mask = 0; mask < (1 << prefix.size()); ++mask) {
        TView nt = base;
        int f = nt.fresh();
        GW w1, w2;
        for (std::size_t q = 0; q < prefix.size(); ++q)
          ((mask >> q & 1) ? w1.d : w2.d).push_back(prefix[q]);
        w1.i = a;
        w1.j = w.j;
        w1.u = f;
        w2.i = b;
        w2.j = f;
        w2.u = w.u;
        reduce_word(nt, w1, sgn,
                    [&](TView t1) { reduce_word(t1, w2, Rational(1), sink); });
      }
    }
    w.d[std::size_t(t)] = y;
    w.i = x;
    return;
  }
  // commutator of adjacent derivative slots: corrections on every inner
  // slot, the lowered distinguished one included
  int x = w.d[std::size_t(t)], y = w.d[std::size_t(t) + 1];
  std::vector<int> prefix(w.d.begin(), w.d.begin() + t);
  std::vector<int> rest(w.d.begin() + t + 2, w.d.end());
  int inner_count = int(rest.size()) + 3;
  for (int c = 0; c < inner_count; ++c) {
    for (int mask = 0; mask < (1 << prefix.size()); ++mask) {
      TView nt = base;
      int fresh = nt.fresh();
      std::vector<int> rl;
      GW gw;
      for (std::size_t q = 0; q < prefix.size(); ++q)
        ((mask >> q & 1) ? rl : gw.d).push_back(prefix[q]);
      std::size_t off = gw.d.size();
      gw.d.insert(gw.d.end(), rest.begin(), rest.end());
      gw.i = w.i;
      gw.j = w.j;
      gw.u = w.u;
      int clab;
      if (c < int(rest.size())) {
        clab = gw.d[off + std::size_t(c)];
        gw.d[off + std::size_t(c)] = fresh;
      } else if (c == int(rest.size())) {
        clab = gw.i;
        gw.i = fresh;
      } else if (c == int(rest.size()) + 1) {
        clab = gw.j;
        gw.j = fresh;
      } else {
        clab = gw.u;
        gw.u = fresh;
      }
      FView rf;
      rf.f = Factor{FactorKind::Riemann, int(rl.size()), 0, 0};
      rf.lab = rl;
      rf.lab.insert(rf.lab.end(), {x, y, clab, fresh});
      nt.fs.push_back(std::move(rf));
      reduce_word(nt, gw, coef, sink);
    }
  }
  std::swap(w.d[std::size_t(t)], w.d[std::size_t(t) + 1]);
}

// T_w = S(grad^L G) + (1/k!) sum_sigma [T_w - T_{sigma w}] with the
// differences expanded into corrections along bubble paths. Every emitted
// piece carries a strictly shorter derivative word, so the recursion
// terminates.
void reduce_word(const TView& base, const GW& w, const Rational& coef,
                 const Sink& sink) {
  sink(emit_sym(base, w, coef));
  int L = int(w.d.size());
  if (L == 0) return;  // G_{ij} itself is symmetric
  int k = L + 2;
  Rational piece = coef * inv_factorial(k);
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    auto steps = bubble_path(perm);
    if (steps.empty()) continue;
    GW cur = w;
    for (int t : steps) swap_step(base, cur, t, piece, sink);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

}  // namespace

std::vector<TView> commute_adjacent(const TView& t, int fpos, int s) {
  const FView& f = t.fs[std::size_t(fpos)];
  const Factor& fc = f.f;
  if (fc.kind != FactorKind::Riemann && fc.kind != FactorKind::Ricci &&
      fc.kind != FactorKind::Psi)
    throw Error("PositionOutOfRange", "factor kind has no free derivative pair");
  if (s < 1 || s >= fc.deriv)
    throw Error("PositionOutOfRange", "derivative position out of range");

  TView swapped = t;
  std::swap(swapped.fs[std::size_t(fpos)].lab[std::size_t(s) - 1],
            swapped.fs[std::size_t(fpos)].lab[std::size_t(s)]);
  std::vector<TView> out{std::move(swapped)};

  int x = f.lab[std::size_t(s) - 1], y = f.lab[std::size_t(s)];
  int arity = fc.arity();
  int outer = s - 1;
  for (int c = s + 1; c < arity; ++c) {
    for (int mask = 0; mask < (1 << outer); ++mask) {
      TView nt = t;
      int fresh = nt.fresh();
      std::vector<int> rl, gl;
      for (int q = 0; q < outer; ++q)
        ((mask >> q & 1) ? rl : gl).push_back(f.lab[std::size_t(q)]);
      FView rf;
      rf.f = Factor{FactorKind::Riemann, int(rl.size()), 0, 0};
      rf.lab = rl;
      rf.lab.insert(rf.lab.end(), {x, y, f.lab[std::size_t(c)], fresh});

      FView& gf = nt.fs[std::size_t(fpos)];
      std::vector<int> lab = gl;
      for (int q = s + 1; q < arity; ++q)
        lab.push_back(q == c ? fresh : f.lab[std::size_t(q)]);
      gf.f.deriv = fc.deriv - 2 - int(rl.size());
      gf.lab = std::move(lab);
      nt.fs.push_back(std::move(rf));
      out.push_back(std::move(nt));
    }
  }
  return out;
}

std::vector<TView> psi0_to_xi(const TView& t0) {
  std::vector<TView> out;
  std::vector<TView> work{t0};
  while (!work.empty()) {
    TView t = std::move(work.back());
    work.pop_back();
    int fi = -1;
    for (int q = 0; q < int(t.fs.size()); ++q)
      if (t.fs[std::size_t(q)].f.kind == FactorKind::Psi &&
          t.fs[std::size_t(q)].f.label == 0) {
        fi = q;
        break;
      }
    if (fi < 0) {
      out.push_back(std::move(t));
      continue;
    }

    FView& f = t.fs[std::size_t(fi)];
    int m = f.f.deriv;
    if (m <= 0)
      throw Error("UncoveredSlot", "bare conformal-scalar factor in expansion");
    if (m == 1) {
      f.f = Factor{FactorKind::Xi, 0, 0, 0};
      work.push_back(std::move(t));
      continue;
    }
    // symmetric part: the tower becomes a symmetrized gradient factor
    {
      TView s = t;
      s.fs[std::size_t(fi)].f = Factor{FactorKind::SXi, m - 1, 0, 0};
      work.push_back(std::move(s));
    }
    // corrections: (1/m!) sum over arrangements of the path commutators
    Rational piece = inv_factorial(m);
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    do {
      auto steps = bubble_path(perm);
      if (steps.empty()) continue;
      TView cur = t;
      cur.scalar *= piece;
      for (int st : steps) {
        auto ex = commute_adjacent(cur, fi, st + 1);
        // ex[0] is the swap; the rest are shorter-tower corrections
        for (std::size_t q = 1; q < ex.size(); ++q)
          work.push_back(std::move(ex[q]));
        cur = std::move(ex[0]);
      }
      // cur is a permuted arrangement, already counted by the symmetric part
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return out;
}

std::vector<TView> grad_factor(const TView& t, int fpos, int dlab) {
  const FView& f = t.fs[std::size_t(fpos)];
  switch (f.f.kind) {
    case FactorKind::Riemann:
    case FactorKind::Ricci:
    case FactorKind::Psi: {
      TView nt = t;
      nt.fs[std::size_t(fpos)].f.deriv += 1;
      nt.fs[std::size_t(fpos)].lab.insert(nt.fs[std::size_t(fpos)].lab.begin(),
                                          dlab);
      return {std::move(nt)};
    }
    case FactorKind::ScalarR: {
      // grad_a R = 2 div Ric_a
      TView nt = t;
      int fresh = nt.fresh();
      nt.scalar *= Rational(2);
      nt.fs[std::size_t(fpos)].f = Factor{FactorKind::Ricci, 1, 0, 0};
      nt.fs[std::size_t(fpos)].lab = {fresh, dlab, fresh};
      return {std::move(nt)};
    }
    case FactorKind::Xi: {
      TView nt = t;
      nt.fs[std::size_t(fpos)].f = Factor{FactorKind::SXi, 1, 0, 0};
      nt.fs[std::size_t(fpos)].lab.insert(nt.fs[std::size_t(fpos)].lab.begin(),
                                          dlab);
      return {std::move(nt)};
    }
    case FactorKind::SXi: {
      // lift the symmetrized tower to potential towers, push the new slot
      // in, and convert back; corrections appear via the tower engine
      int m = f.f.deriv;
      std::vector<TView> out;
      Rational piece = inv_factorial(m + 1);
      std::vector<int> perm(std::size_t(m) + 1);
      std::iota(perm.begin(), perm.end(), 0);
      do {
        TView nt = t;
        nt.scalar *= piece;
        FView& g = nt.fs[std::size_t(fpos)];
        std::vector<int> lab{dlab};
        for (int q : perm) lab.push_back(f.lab[std::size_t(q)]);
        g.f = Factor{FactorKind::Psi, m + 2, 0, 0};
        g.lab = std::move(lab);
        for (auto& r : psi0_to_xi(nt)) out.push_back(std::move(r));
      } while (std::next_permutation(perm.begin(), perm.end()));
      return out;
    }
    case FactorKind::SGamma: {
      // grad of the symmetrized connection word: average the arrangements
      // with the new slot outermost and reduce each raw word again
      int p = f.f.deriv;
      std::vector<TView> out;
      TView base = t;
      base.fs.erase(base.fs.begin() + fpos);
      Rational piece = inv_factorial(p + 2);
      std::vector<int> perm(std::size_t(p) + 2);
      std::iota(perm.begin(), perm.end(), 0);
      do {
        GW w;
        w.d.push_back(dlab);
        for (int q = 0; q < p; ++q)
          w.d.push_back(f.lab[std::size_t(perm[std::size_t(q)])]);
        w.i = f.lab[std::size_t(perm[std::size_t(p)])];
        w.j = f.lab[std::size_t(perm[std::size_t(p) + 1])];
        w.u = f.lab[std::size_t(p) + 2];
        reduce_word(base, w, piece,
                    [&](TView r) { out.push_back(std::move(r)); });
      } while (std::next_permutation(perm.begin(), perm.end()));
      return out;
    }
    case FactorKind::Metric:
      return {};
    case FactorKind::Omega:
    case FactorKind::SpecialXi:
      throw Error("PositionOutOfRange",
                  "derivative of a prescribed tensor factor");
  }
  return {};
}

std::vector<TView> grad_term(const TView& t, int dlab) {
  std::vector<TView> out;
  for (int fi = 0; fi < int(t.fs.size()); ++fi)
    for (auto& r : grad_factor(t, fi, dlab)) out.push_back(std::move(r));
  return out;
}

std::vector<TView> xi_gamma_expand(const TView& t, int fpos) {
  const FView f = t.fs[std::size_t(fpos)];
  if (f.f.kind != FactorKind::SXi)
    throw Error("PositionOutOfRange", "connection expansion needs an SXi factor");
  int m = f.f.deriv;
  TView base0 = t;
  base0.fs.erase(base0.fs.begin() + fpos);

  // One chain per Leibniz history: a product of raw connection words and a
  // single bare field factor, built by iterating grad_a xi_c = -G_{acf} xi^f
  struct Chain {
    std::vector<GW> words;
    int xilab = 0;
    int sign = 1;
  };

  std::vector<TView> out;
  Rational piece = inv_factorial(m + 1);
  std::vector<int> perm(std::size_t(m) + 1);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    std::vector<int> d(static_cast<std::size_t>(m));
    for (int q = 0; q < m; ++q)
      d[std::size_t(q)] = f.lab[std::size_t(perm[std::size_t(q)])];
    int j = f.lab[std::size_t(perm[std::size_t(m)])];

    int next = base0.next;
    std::vector<Chain> chains{Chain{{}, j, 1}};
    for (int q = m - 1; q >= 0; --q) {  // innermost derivative first
      int lab = d[std::size_t(q)];
      std::vector<Chain> nc;
      for (const Chain& ch : chains) {
        for (std::size_t wq = 0; wq < ch.words.size(); ++wq) {
          Chain c2 = ch;
          c2.words[wq].d.insert(c2.words[wq].d.begin(), lab);
          nc.push_back(std::move(c2));
        }
        Chain c2 = ch;
        GW nw;
        nw.i = lab;
        nw.j = ch.xilab;
        nw.u = next++;
        c2.xilab = nw.u;
        c2.sign = -ch.sign;
        c2.words.push_back(std::move(nw));
        nc.push_back(std::move(c2));
      }
      chains = std::move(nc);
    }

    for (const Chain& ch : chains) {
      TView nt = base0;
      nt.next = next;
      nt.scalar *= piece;
      if (ch.sign < 0) nt.scalar = -nt.scalar;
      FView xf;
      xf.f = Factor{FactorKind::Xi, 0, 0, 0};
      xf.lab = {ch.xilab};
      nt.fs.push_back(std::move(xf));

      std::function<void(TView, std::size_t)> go = [&](TView cur,
                                                       std::size_t wq) {
        if (wq == ch.words.size()) {
          out.push_back(std::move(cur));
          return;
        }
        reduce_word(cur, ch.words[wq], Rational(1),
                    [&](TView nxt) { go(std::move(nxt), wq + 1); });
      };
      go(std::move(nt), 0);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

void eliminate_metric(TView& t) {
  for (;;) {
    int mi = -1;
    for (int q = 0; q < int(t.fs.size()); ++q) {
      if (t.fs[std::size_t(q)].f.kind != FactorKind::Metric) continue;
      int x = t.fs[std::size_t(q)].lab[0], y = t.fs[std::size_t(q)].lab[1];
      if (x == y) {
        mi = q;
        break;
      }
      // eliminable if either slot is paired (its link appears elsewhere)
      bool paired = false;
      for (int r = 0; r < int(t.fs.size()) && !paired; ++r)
        for (int s = 0; s < int(t.fs[std::size_t(r)].lab.size()) && !paired;
             ++s) {
          if (r == q && (s == 0 || s == 1)) continue;
          if (t.fs[std::size_t(r)].lab[std::size_t(s)] == x ||
              t.fs[std::size_t(r)].lab[std::size_t(s)] == y)
            paired = true;
        }
      if (paired) {
        mi = q;
        break;
      }
    }
    if (mi < 0) return;

    int x = t.fs[std::size_t(mi)].lab[0], y = t.fs[std::size_t(mi)].lab[1];
    t.fs.erase(t.fs.begin() + mi);
    if (x == y) {
      t.qofn = t.qofn * RationalFnN(PolyN::variable());
      continue;
    }
    // rewire the partner occurrence of x to y; the pair that carried x keeps
    // its single inverse metric, now closing through the former y-slot
    bool done = false;
    for (auto& fv : t.fs) {
      for (auto& l : fv.lab)
        if (l == x) {
          l = y;
          done = true;
          break;
        }
      if (done) break;
    }
    if (!done) throw Error("UncoveredSlot", "metric factor with a dangling link");
  }
}

}  // namespace confinv::detail
